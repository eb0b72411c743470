//! Name normalization and phonetic codes.

use std::fmt;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Uppercases, folds diacritics to ASCII and drops everything that is not a
/// letter. `"Müller-Lüdenscheidt"` becomes `"MULLERLUDENSCHEIDT"`.
pub fn normalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.nfd() {
        match c {
            'ß' => out.push_str("SS"),
            'æ' | 'Æ' => out.push_str("AE"),
            'œ' | 'Œ' => out.push_str("OE"),
            'ø' | 'Ø' => out.push('O'),
            'ł' | 'Ł' => out.push('L'),
            'đ' | 'Đ' => out.push('D'),
            'þ' | 'Þ' => out.push_str("TH"),
            c if c.is_ascii_alphabetic() => out.push(c.to_ascii_uppercase()),
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhoneticAlgorithm {
    #[default]
    Soundex,
    /// Kölner Phonetik, tuned for German names.
    Cologne,
}

impl PhoneticAlgorithm {
    /// `None` when nothing is left after normalization.
    pub fn encode(self, name: &str) -> Option<String> {
        let norm = normalize_name(name);
        if norm.is_empty() {
            return None;
        }
        let code = match self {
            PhoneticAlgorithm::Soundex => soundex(&norm),
            PhoneticAlgorithm::Cologne => cologne(&norm),
        };
        Some(code)
    }
}

impl FromStr for PhoneticAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "soundex" => Ok(PhoneticAlgorithm::Soundex),
            "cologne" | "koelner" | "kolner" => Ok(PhoneticAlgorithm::Cologne),
            other => Err(Error::Config(format!(
                "unknown phonetic algorithm `{other}` (expected soundex|cologne)"
            ))),
        }
    }
}

impl fmt::Display for PhoneticAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhoneticAlgorithm::Soundex => "soundex",
            PhoneticAlgorithm::Cologne => "cologne",
        })
    }
}

/// Phonetic code under the default algorithm.
pub fn phonetic_code(name: &str) -> Option<String> {
    PhoneticAlgorithm::Soundex.encode(name)
}

fn soundex_digit(c: u8) -> u8 {
    match c {
        b'B' | b'F' | b'P' | b'V' => b'1',
        b'C' | b'G' | b'J' | b'K' | b'Q' | b'S' | b'X' | b'Z' => b'2',
        b'D' | b'T' => b'3',
        b'L' => b'4',
        b'M' | b'N' => b'5',
        b'R' => b'6',
        _ => b'0',
    }
}

/// American Soundex over an already normalized (A-Z only, non-empty) name.
/// H and W do not separate letters with equal codes; vowels do.
fn soundex(norm: &str) -> String {
    let bytes = norm.as_bytes();
    let mut code = vec![bytes[0]];
    let mut last = soundex_digit(bytes[0]);
    for &c in &bytes[1..] {
        if code.len() == 4 {
            break;
        }
        if c == b'H' || c == b'W' {
            continue;
        }
        let d = soundex_digit(c);
        if d != b'0' && d != last {
            code.push(d);
        }
        last = d;
    }
    code.resize(4, b'0');
    String::from_utf8(code).expect("ascii")
}

/// Kölner Phonetik over an already normalized name.
fn cologne(norm: &str) -> String {
    let s = norm.as_bytes();
    let mut raw: Vec<u8> = Vec::with_capacity(s.len() * 2);
    for i in 0..s.len() {
        let c = s[i];
        let prev = if i > 0 { Some(s[i - 1]) } else { None };
        let next = s.get(i + 1).copied();
        let code: &[u8] = match c {
            b'A' | b'E' | b'I' | b'J' | b'O' | b'U' | b'Y' => b"0",
            b'H' => b"",
            b'B' => b"1",
            b'P' => {
                if next == Some(b'H') {
                    b"3"
                } else {
                    b"1"
                }
            }
            b'D' | b'T' => {
                if matches!(next, Some(b'C' | b'S' | b'Z')) {
                    b"8"
                } else {
                    b"2"
                }
            }
            b'F' | b'V' | b'W' => b"3",
            b'G' | b'K' | b'Q' => b"4",
            b'C' => {
                let hard = match prev {
                    None => matches!(
                        next,
                        Some(b'A' | b'H' | b'K' | b'L' | b'O' | b'Q' | b'R' | b'U' | b'X')
                    ),
                    Some(p) => {
                        !matches!(p, b'S' | b'Z')
                            && matches!(next, Some(b'A' | b'H' | b'K' | b'O' | b'Q' | b'U' | b'X'))
                    }
                };
                if hard {
                    b"4"
                } else {
                    b"8"
                }
            }
            b'X' => {
                if matches!(prev, Some(b'C' | b'K' | b'Q')) {
                    b"8"
                } else {
                    b"48"
                }
            }
            b'L' => b"5",
            b'M' | b'N' => b"6",
            b'R' => b"7",
            b'S' | b'Z' => b"8",
            _ => b"",
        };
        raw.extend_from_slice(code);
    }
    raw.dedup();
    let mut out: Vec<u8> = Vec::with_capacity(raw.len());
    for (i, &d) in raw.iter().enumerate() {
        if d != b'0' || i == 0 {
            out.push(d);
        }
    }
    String::from_utf8(out).expect("ascii")
}
