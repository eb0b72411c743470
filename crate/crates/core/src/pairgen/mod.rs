//! Comparison-pattern construction from raw person records.
//!
//! Candidate pairs come from six blocking criteria, each a conjunction of
//! equalities over phonetic name codes and birth-date/gender fields. Records are
//! hashed into blocks keyed by a criterion's fields and paired within blocks;
//! the union over all criteria is deduplicated with `id_1 < id_2`.
//!
//! "First name" and "family name" in the criteria mean the first component of
//! each name.

mod phonetic;
mod similarity;

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::path::Path;

use rayon::prelude::*;

pub use phonetic::{normalize_name, phonetic_code, PhoneticAlgorithm};
pub use similarity::{jaro, jaro_winkler, NameSimilarity};

use crate::error::{Error, Result};
use crate::ingest::{ComparisonVector, Feature};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawRecord {
    pub id: u64,
    pub first_names: [Option<String>; 2],
    pub family_names: [Option<String>; 2],
    pub gender: Option<String>,
    pub birth_day: Option<u8>,
    pub birth_month: Option<u8>,
    pub birth_year: Option<u16>,
    pub postal_code: Option<String>,
}

impl RawRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(d) = self.birth_day {
            if !(1..=31).contains(&d) {
                return Err(format!("record {}: birth day {d} outside 1-31", self.id));
            }
        }
        if let Some(m) = self.birth_month {
            if !(1..=12).contains(&m) {
                return Err(format!("record {}: birth month {m} outside 1-12", self.id));
            }
        }
        if let Some(y) = self.birth_year {
            if !(1000..=9999).contains(&y) {
                return Err(format!("record {}: birth year {y} is not four digits", self.id));
            }
        }
        Ok(())
    }

    pub fn birth_date(&self) -> Option<(u8, u8, u16)> {
        Some((self.birth_day?, self.birth_month?, self.birth_year?))
    }
}

/// Gender and postal codes compare after trimming and uppercasing.
fn normalize_exact(s: &str) -> Option<String> {
    let t = s.trim().to_uppercase();
    (!t.is_empty()).then_some(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockingCriterion {
    /// First and family name phonetically equal, full birth date equal.
    NamesAndBirthDate = 1,
    /// First name phonetically equal, birth day equal.
    FirstNameAndDay = 2,
    /// First name phonetically equal, birth month equal.
    FirstNameAndMonth = 3,
    /// First name phonetically equal, birth year equal.
    FirstNameAndYear = 4,
    /// Full birth date equal.
    BirthDate = 5,
    /// Family name phonetically equal, gender equal.
    FamilyNameAndGender = 6,
}

impl BlockingCriterion {
    pub const ALL: [BlockingCriterion; 6] = [
        BlockingCriterion::NamesAndBirthDate,
        BlockingCriterion::FirstNameAndDay,
        BlockingCriterion::FirstNameAndMonth,
        BlockingCriterion::FirstNameAndYear,
        BlockingCriterion::BirthDate,
        BlockingCriterion::FamilyNameAndGender,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Block key of a record, or `None` when a required field is missing.
    pub fn key(self, r: &BlockingFields) -> Option<String> {
        use BlockingCriterion::*;
        let dob = |(d, m, y): (u8, u8, u16)| format!("{d}-{m}-{y}");
        match self {
            NamesAndBirthDate => Some(format!(
                "{}|{}|{}",
                r.first_code.as_ref()?,
                r.family_code.as_ref()?,
                dob(r.birth_date?)
            )),
            FirstNameAndDay => Some(format!("{}|{}", r.first_code.as_ref()?, r.day?)),
            FirstNameAndMonth => Some(format!("{}|{}", r.first_code.as_ref()?, r.month?)),
            FirstNameAndYear => Some(format!("{}|{}", r.first_code.as_ref()?, r.year?)),
            BirthDate => Some(dob(r.birth_date?)),
            FamilyNameAndGender => Some(format!("{}|{}", r.family_code.as_ref()?, r.gender.as_ref()?)),
        }
    }

    pub fn matches(self, a: &BlockingFields, b: &BlockingFields) -> bool {
        match (self.key(a), self.key(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }
}

impl fmt::Display for BlockingCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// The fields the criteria look at, precomputed once per record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingFields {
    pub id: u64,
    pub first_code: Option<String>,
    pub family_code: Option<String>,
    pub gender: Option<String>,
    pub day: Option<u8>,
    pub month: Option<u8>,
    pub year: Option<u16>,
    pub birth_date: Option<(u8, u8, u16)>,
}

impl BlockingFields {
    pub fn of(r: &RawRecord, phonetic: PhoneticAlgorithm) -> Self {
        let code = |n: &Option<String>| n.as_deref().and_then(|s| phonetic.encode(s));
        Self {
            id: r.id,
            first_code: code(&r.first_names[0]),
            family_code: code(&r.family_names[0]),
            gender: r.gender.as_deref().and_then(normalize_exact),
            day: r.birth_day,
            month: r.birth_month,
            year: r.birth_year,
            birth_date: r.birth_date(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairgenOptions {
    pub phonetic: PhoneticAlgorithm,
    pub name_similarity: NameSimilarity,
}

fn check_unique(records: &[RawRecord]) -> Result<()> {
    let mut ids: Vec<u64> = records.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(format!("duplicate record id {}", w[0])));
    }
    Ok(())
}

/// Union of the pairs produced by every criterion, sorted, with `id_1 < id_2`.
pub fn generate_candidate_pairs(records: &[RawRecord], phonetic: PhoneticAlgorithm) -> Result<Vec<(u64, u64)>> {
    check_unique(records)?;
    let fields: Vec<BlockingFields> = records
        .par_iter()
        .map(|r| BlockingFields::of(r, phonetic))
        .collect();
    let per_criterion: Vec<Vec<(u64, u64)>> = BlockingCriterion::ALL
        .par_iter()
        .map(|&c| {
            let mut blocks: HashMap<String, Vec<u64>> = HashMap::new();
            for f in &fields {
                if let Some(k) = c.key(f) {
                    blocks.entry(k).or_default().push(f.id);
                }
            }
            let mut pairs = Vec::new();
            for ids in blocks.values_mut() {
                ids.sort_unstable();
                for i in 0..ids.len() {
                    for j in i + 1..ids.len() {
                        pairs.push((ids[i], ids[j]));
                    }
                }
            }
            pairs
        })
        .collect();
    let mut all: Vec<(u64, u64)> = per_criterion.into_iter().flatten().collect();
    all.par_sort_unstable();
    all.dedup();
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Name,
    Exact,
}

/// Agreement of two optional values; absent when either side is absent.
pub fn agreement_score(a: Option<&str>, b: Option<&str>, kind: ScoreKind, sim: NameSimilarity) -> Option<f64> {
    let (a, b) = (a?, b?);
    match kind {
        ScoreKind::Name => {
            let (a, b) = (normalize_name(a), normalize_name(b));
            if a.is_empty() || b.is_empty() {
                return None;
            }
            Some(sim.score(&a, &b))
        }
        ScoreKind::Exact => {
            let (a, b) = (normalize_exact(a)?, normalize_exact(b)?);
            Some(if a == b { 1.0 } else { 0.0 })
        }
    }
}

/// Scores one pair. The record with the smaller id becomes `id_1`; the label is
/// left unset.
pub fn build_comparison_vector(r1: &RawRecord, r2: &RawRecord, sim: NameSimilarity) -> Result<ComparisonVector> {
    if r1.id == r2.id {
        return Err(Error::InvalidInput(format!("cannot compare record {} with itself", r1.id)));
    }
    let (a, b) = if r1.id < r2.id { (r1, r2) } else { (r2, r1) };
    let name = |x: &Option<String>, y: &Option<String>| agreement_score(x.as_deref(), y.as_deref(), ScoreKind::Name, sim);
    let exact = |x: Option<String>, y: Option<String>| agreement_score(x.as_deref(), y.as_deref(), ScoreKind::Exact, sim);
    let mut scores = [None; 9];
    scores[Feature::Fn1.index()] = name(&a.first_names[0], &b.first_names[0]);
    scores[Feature::Fn2.index()] = name(&a.first_names[1], &b.first_names[1]);
    scores[Feature::Ln1.index()] = name(&a.family_names[0], &b.family_names[0]);
    scores[Feature::Ln2.index()] = name(&a.family_names[1], &b.family_names[1]);
    scores[Feature::Gender.index()] = exact(a.gender.clone(), b.gender.clone());
    scores[Feature::Bd.index()] = exact(a.birth_day.map(|v| v.to_string()), b.birth_day.map(|v| v.to_string()));
    scores[Feature::Bm.index()] = exact(a.birth_month.map(|v| v.to_string()), b.birth_month.map(|v| v.to_string()));
    scores[Feature::By.index()] = exact(a.birth_year.map(|v| v.to_string()), b.birth_year.map(|v| v.to_string()));
    scores[Feature::Plz.index()] = exact(a.postal_code.clone(), b.postal_code.clone());
    Ok(ComparisonVector {
        id_1: a.id,
        id_2: b.id,
        scores,
        is_match: None,
    })
}

/// Blocks, pairs and scores `records`.
pub fn comparison_patterns(records: &[RawRecord], opts: PairgenOptions) -> Result<Vec<ComparisonVector>> {
    let pairs = generate_candidate_pairs(records, opts.phonetic)?;
    let by_id: HashMap<u64, &RawRecord> = records.iter().map(|r| (r.id, r)).collect();
    pairs
        .par_iter()
        .map(|(x, y)| build_comparison_vector(by_id[x], by_id[y], opts.name_similarity))
        .collect()
}

pub const RAW_HEADER: [&str; 10] = [
    "id",
    "fname1",
    "fname2",
    "lname1",
    "lname2",
    "gender",
    "birth_day",
    "birth_month",
    "birth_year",
    "postal_code",
];

fn raw_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads raw person records from CSV with header [`RAW_HEADER`]. Empty fields
/// and `?` are absent values.
pub fn read_raw_records(path: &Path) -> Result<Vec<RawRecord>> {
    let text = crate::ingest::read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| raw_err(path, 1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", path.display())))
    };
    let idx: Vec<usize> = RAW_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| raw_err(path, line, e.to_string()))?;
        let get = |i: usize| {
            rec.get(idx[i])
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != "?")
                .map(str::to_string)
        };
        fn num<T: std::str::FromStr>(v: Option<String>, path: &Path, line: usize, what: &str) -> Result<Option<T>> {
            v.map(|s| s.parse::<T>().map_err(|_| raw_err(path, line, format!("bad {what} `{s}`"))))
                .transpose()
        }
        let id = num::<u64>(get(0), path, line, "id")?.ok_or_else(|| raw_err(path, line, "missing id"))?;
        let r = RawRecord {
            id,
            first_names: [get(1), get(2)],
            family_names: [get(3), get(4)],
            gender: get(5),
            birth_day: num(get(6), path, line, "birth day")?,
            birth_month: num(get(7), path, line, "birth month")?,
            birth_year: num(get(8), path, line, "birth year")?,
            postal_code: get(9),
        };
        r.validate().map_err(|m| Error::Validation {
            file: path.to_path_buf(),
            line,
            msg: m,
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_raw_records<W: io::Write>(w: W, records: &[RawRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let werr = |e: csv::Error| Error::InvalidInput(format!("writing raw records: {e}"));
    wtr.write_record(RAW_HEADER).map_err(werr)?;
    for r in records {
        let o = |v: &Option<String>| v.clone().unwrap_or_default();
        let n = |v: Option<String>| v.unwrap_or_default();
        wtr.write_record([
            r.id.to_string(),
            o(&r.first_names[0]),
            o(&r.first_names[1]),
            o(&r.family_names[0]),
            o(&r.family_names[1]),
            o(&r.gender),
            n(r.birth_day.map(|v| v.to_string())),
            n(r.birth_month.map(|v| v.to_string())),
            n(r.birth_year.map(|v| v.to_string())),
            o(&r.postal_code),
        ])
        .map_err(werr)?;
    }
    wtr.flush().map_err(|e| Error::InvalidInput(format!("writing raw records: {e}")))
}

/// Comparison patterns as CSV without a label column.
pub fn patterns_to_csv(patterns: &[ComparisonVector], missing_token: &str) -> String {
    let mut out = crate::ingest::canonical_header(false, false);
    out.push('\n');
    for p in patterns {
        out.push_str(&crate::ingest::format_row(None, p, missing_token, false));
        out.push('\n');
    }
    out
}
