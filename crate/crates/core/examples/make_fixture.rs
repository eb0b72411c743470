//! Regenerates the bundled fixture corpus under `tests/fixtures/`.
//!
//! Synthetic persons, some recorded twice with typos and dropped fields, are run
//! through blocking and scoring; 250 matching and 750 non-matching patterns are
//! kept and written as two block files in the published layout.
//!
//! cargo run --example make_fixture -- crates/core/tests/fixtures

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use flate2::write::GzEncoder;
use flate2::Compression;
use pairlink::ingest::ComparisonVector;
use pairlink::pairgen::{comparison_patterns, write_raw_records, PairgenOptions, RawRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIRST_F: &[&str] = &[
    "Anna", "Anne", "Maria", "Marie", "Katrin", "Katharina", "Sabine", "Susanne", "Petra", "Monika", "Ursula",
    "Renate", "Helga", "Gisela", "Claudia", "Andrea", "Birgit", "Brigitte", "Karin", "Kerstin",
];
const FIRST_M: &[&str] = &[
    "Peter", "Paul", "Hans", "Heinz", "Klaus", "Claus", "Jürgen", "Jörg", "Michael", "Manfred", "Thomas",
    "Stefan", "Stephan", "Andreas", "Wolfgang", "Werner", "Dieter", "Dirk", "Frank", "Franz",
];
const FAMILY: &[&str] = &[
    "Müller", "Mueller", "Meyer", "Maier", "Meier", "Schmidt", "Schmitt", "Schneider", "Fischer", "Weber",
    "Wagner", "Becker", "Schulz", "Schulze", "Hoffmann", "Koch", "Richter", "Klein", "Wolf", "Schröder",
    "Neumann", "Schwarz", "Braun", "Krüger", "Hofmann", "Hartmann", "Lange", "Werner", "Krause", "Lehmann",
];

fn typo(rng: &mut ChaCha8Rng, s: &str) -> String {
    let mut c: Vec<char> = s.chars().collect();
    if c.len() < 3 {
        return s.to_string();
    }
    let i = rng.gen_range(1..c.len() - 1);
    match rng.gen_range(0..3) {
        0 => c.swap(i, i + 1),
        1 => c[i] = ['e', 'a', 'i', 'r', 'n', 't'][rng.gen_range(0..6)],
        _ => {
            c.remove(i);
        }
    }
    c.into_iter().collect()
}

fn person(rng: &mut ChaCha8Rng, id: u64) -> RawRecord {
    let female = rng.gen_bool(0.5);
    let pool = if female { FIRST_F } else { FIRST_M };
    let pick = |rng: &mut ChaCha8Rng, p: &[&str]| p[rng.gen_range(0..p.len())].to_string();
    RawRecord {
        id,
        first_names: [Some(pick(rng, pool)), rng.gen_bool(0.05).then(|| pick(rng, pool))],
        family_names: [Some(pick(rng, FAMILY)), rng.gen_bool(0.02).then(|| pick(rng, FAMILY))],
        gender: Some(if female { "F" } else { "M" }.into()),
        birth_day: Some(rng.gen_range(1..=28)),
        birth_month: Some(rng.gen_range(1..=12)),
        birth_year: Some(rng.gen_range(1935..=1995)),
        postal_code: rng.gen_bool(0.9).then(|| format!("{}", rng.gen_range(10000..99999))),
    }
}

fn duplicate(rng: &mut ChaCha8Rng, r: &RawRecord, id: u64) -> RawRecord {
    let mut d = r.clone();
    d.id = id;
    if rng.gen_bool(0.4) {
        d.first_names[0] = d.first_names[0].as_deref().map(|s| typo(rng, s));
    }
    if rng.gen_bool(0.3) {
        d.family_names[0] = d.family_names[0].as_deref().map(|s| typo(rng, s));
    }
    if rng.gen_bool(0.1) {
        d.birth_day = None;
    }
    if rng.gen_bool(0.1) {
        d.postal_code = Some(format!("{}", rng.gen_range(10000..99999)));
    }
    d
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "?".into(), |x| x.to_string())
}

fn line(cv: &ComparisonVector) -> String {
    let mut parts = vec![cv.id_1.to_string(), cv.id_2.to_string()];
    parts.extend(cv.scores.iter().map(|s| cell(*s)));
    parts.push(if cv.is_match == Some(true) { "TRUE" } else { "FALSE" }.into());
    parts.join(",")
}

const HEADER: &str = "\"id_1\",\"id_2\",\"cmp_fname_c1\",\"cmp_fname_c2\",\"cmp_lname_c1\",\"cmp_lname_c2\",\"cmp_sex\",\"cmp_bd\",\"cmp_bm\",\"cmp_by\",\"cmp_plz\",\"is_match\"";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "tests/fixtures".into()));
    std::fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_160_527);

    let mut records = Vec::new();
    let mut owner = HashMap::new();
    let mut next = 1u64;
    for p in 0..700u64 {
        let r = person(&mut rng, next);
        owner.insert(next, p);
        next += 1;
        if rng.gen_bool(0.45) {
            let d = duplicate(&mut rng, &r, next);
            owner.insert(next, p);
            next += 1;
            records.push(d);
        }
        records.push(r);
    }
    records.shuffle(&mut rng);

    let mut patterns = comparison_patterns(&records, PairgenOptions::default())?;
    for cv in &mut patterns {
        cv.is_match = Some(owner[&cv.id_1] == owner[&cv.id_2]);
    }
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = patterns.into_iter().partition(|cv| cv.is_match == Some(true));
    eprintln!("{} records, {} matching and {} non-matching candidates", records.len(), pos.len(), neg.len());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    assert!(pos.len() >= 250 && neg.len() >= 750, "not enough candidates");
    let mut rows: Vec<ComparisonVector> = pos.into_iter().take(250).chain(neg.into_iter().take(750)).collect();
    rows.shuffle(&mut rng);

    let mut plain = File::create(out.join("block_1.csv"))?;
    writeln!(plain, "{HEADER}")?;
    for cv in &rows[..500] {
        writeln!(plain, "{}", line(cv))?;
    }
    let mut gz = GzEncoder::new(File::create(out.join("block_2.csv.gz"))?, Compression::default());
    writeln!(gz, "{HEADER}")?;
    for cv in &rows[500..] {
        writeln!(gz, "{}", line(cv))?;
    }
    gz.finish()?;

    records.sort_by_key(|r| r.id);
    write_raw_records(File::create(out.join("raw_persons.csv"))?, &records)?;
    Ok(())
}
