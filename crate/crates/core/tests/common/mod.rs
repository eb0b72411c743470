#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use pairlink::pairgen::{PhoneticAlgorithm, RawRecord};
use rand::Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

const FIRST: &[&str] = &["Anna", "Anne", "Hans", "Hanz", "Jörg", "Jurgen", "Maria", "Mary", "Peter", "Piotr"];
const FAMILY: &[&str] = &["Meyer", "Maier", "Schmidt", "Schmitt", "Koch", "Kock", "Wolf", "Wulff", "Braun", "Brown"];

fn maybe<T>(rng: &mut impl Rng, p_missing: f64, v: T) -> Option<T> {
    (!rng.gen_bool(p_missing)).then_some(v)
}

/// Small random record set with many collisions in every blocking field.
pub fn random_records(rng: &mut impl Rng, n: usize) -> Vec<RawRecord> {
    (0..n)
        .map(|i| {
            let first = FIRST[rng.gen_range(0..FIRST.len())].to_string();
            let family = FAMILY[rng.gen_range(0..FAMILY.len())].to_string();
            let gender = if rng.gen_bool(0.5) { "M" } else { "F" }.to_string();
            let (d, m, y) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1970..=1972));
            RawRecord {
                id: 1000 + 7 * i as u64,
                first_names: [maybe(rng, 0.1, first), None],
                family_names: [maybe(rng, 0.1, family), None],
                gender: maybe(rng, 0.05, gender),
                birth_day: maybe(rng, 0.1, d),
                birth_month: maybe(rng, 0.1, m),
                birth_year: maybe(rng, 0.1, y),
                postal_code: None,
            }
        })
        .collect()
}

/// All-pairs evaluation of the six blocking conditions.
pub fn brute_force_pairs(records: &[RawRecord], alg: PhoneticAlgorithm) -> BTreeSet<(u64, u64)> {
    let code = |s: &Option<String>| s.as_deref().and_then(|s| alg.encode(s));
    let eq = |a: Option<String>, b: Option<String>| a.is_some() && a == b;
    let same = |a: Option<u16>, b: Option<u16>| a.is_some() && a == b;
    let mut out = BTreeSet::new();
    for (i, a) in records.iter().enumerate() {
        for b in &records[i + 1..] {
            let first = eq(code(&a.first_names[0]), code(&b.first_names[0]));
            let family = eq(code(&a.family_names[0]), code(&b.family_names[0]));
            let day = same(a.birth_day.map(u16::from), b.birth_day.map(u16::from));
            let month = same(a.birth_month.map(u16::from), b.birth_month.map(u16::from));
            let year = same(a.birth_year, b.birth_year);
            let dob = day && month && year;
            let gender = eq(
                a.gender.as_ref().map(|g| g.trim().to_uppercase()),
                b.gender.as_ref().map(|g| g.trim().to_uppercase()),
            );
            let hit = (first && family && dob)
                || (first && day)
                || (first && month)
                || (first && year)
                || dob
                || (family && gender);
            if hit {
                out.insert((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    out
}
