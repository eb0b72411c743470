//! String similarity scores in `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_hit = vec![false; a.len()];
    let mut b_hit = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_hit[j] && b[j] == *ca {
                a_hit[i] = true;
                b_hit[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_matched = a.iter().zip(&a_hit).filter(|(_, &h)| h).map(|(c, _)| c);
    let b_matched = b.iter().zip(&b_hit).filter(|(_, &h)| h).map(|(c, _)| c);
    let half_transpositions = a_matched.zip(b_matched).filter(|(x, y)| x != y).count();
    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro score boosted by the length of the common prefix (at most 4 chars,
/// scale 0.1).
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let j = jaro(a, b);
    let prefix = a
        .chars()
        .zip(b.chars())
        .take(4)
        .take_while(|(x, y)| x == y)
        .count();
    j + prefix as f64 * 0.1 * (1.0 - j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NameSimilarity {
    #[default]
    JaroWinkler,
    Jaro,
}

impl NameSimilarity {
    pub fn score(self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        let s = match self {
            NameSimilarity::JaroWinkler => jaro_winkler(a, b),
            NameSimilarity::Jaro => jaro(a, b),
        };
        // only exact equality may score 1
        s.min(1.0 - f64::EPSILON)
    }
}

impl FromStr for NameSimilarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jaro-winkler" | "jaro_winkler" | "jw" => Ok(NameSimilarity::JaroWinkler),
            "jaro" => Ok(NameSimilarity::Jaro),
            other => Err(Error::Config(format!(
                "unknown name similarity `{other}` (expected jaro-winkler|jaro)"
            ))),
        }
    }
}

impl fmt::Display for NameSimilarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NameSimilarity::JaroWinkler => "jaro-winkler",
            NameSimilarity::Jaro => "jaro",
        })
    }
}
