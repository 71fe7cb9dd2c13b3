//! Text similarity over concept and element names.
//!
//! Annotation IRIs are first *unfolded* to their local class name, then
//! compared with either Jaro (character level, suited to short names) or
//! Monge-Elkan (token level, suited to CamelCase / snake_case identifiers).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Default match threshold for Monge-Elkan: only a perfect token cover counts.
pub const MONGE_ELKAN_THRESHOLD: f64 = 1.0;
/// Default match threshold for Jaro.
pub const JARO_THRESHOLD: f64 = 0.7;

/// Returns the local name of an IRI: the text after the last `#`, or after
/// the last `/` when there is no fragment. Strings without either are
/// returned unchanged.
pub fn unfold(iri: &str) -> &str {
    if let Some(pos) = iri.rfind('#') {
        &iri[pos + 1..]
    } else if let Some(pos) = iri.rfind('/') {
        &iri[pos + 1..]
    } else {
        iri
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Lower,
    Upper,
    Digit,
    Other,
}

fn classify(c: char) -> CharClass {
    if c.is_lowercase() {
        CharClass::Lower
    } else if c.is_uppercase() {
        CharClass::Upper
    } else if c.is_numeric() {
        CharClass::Digit
    } else if c.is_alphabetic() {
        // caseless scripts behave like lower-case runs
        CharClass::Lower
    } else {
        CharClass::Other
    }
}

/// Splits an identifier into lower-case word tokens.
///
/// Boundaries are any non-alphanumeric character, letter/digit transitions,
/// lower-to-upper transitions, and the last capital of an upper-case run
/// that is followed by a lower-case letter (`HTTPServer` -> `http`, `server`).
pub fn tokenize(identifier: &str) -> Vec<String> {
    let chars: Vec<char> = identifier.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        if !current.is_empty() {
            tokens.push(current.to_lowercase());
            current.clear();
        }
    };

    for (i, &c) in chars.iter().enumerate() {
        let class = classify(c);
        if class == CharClass::Other {
            flush(&mut current, &mut tokens);
            continue;
        }
        if let Some(&prev) = i.checked_sub(1).and_then(|p| chars.get(p)) {
            let prev_class = classify(prev);
            let boundary = match (prev_class, class) {
                (CharClass::Other, _) => false,
                (CharClass::Digit, CharClass::Digit) => false,
                (CharClass::Digit, _) | (_, CharClass::Digit) => true,
                (CharClass::Lower, CharClass::Upper) => true,
                (CharClass::Upper, CharClass::Upper) => {
                    chars.get(i + 1).is_some_and(|&next| classify(next) == CharClass::Lower)
                }
                _ => false,
            };
            if boundary {
                flush(&mut current, &mut tokens);
            }
        }
        current.push(c);
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Jaro similarity, case-insensitive.
pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.to_lowercase().chars().collect();
    let b: Vec<char> = b.to_lowercase().chars().collect();
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }

    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;

    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }

    let a_seq = a.iter().zip(&a_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();

    let m = matches as f64;
    let t = half_transpositions as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Monge-Elkan similarity with exact token equality as the inner measure:
/// the mean, over tokens of `a`, of whether that token occurs in `b`.
///
/// Not symmetric.
pub fn monge_elkan(a: &str, b: &str) -> f64 {
    let left = tokenize(a);
    let right = tokenize(b);
    if left.is_empty() || right.is_empty() {
        return 0.0;
    }
    let hits = left.iter().filter(|t| right.contains(t)).count();
    hits as f64 / left.len() as f64
}

/// Which similarity measure to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimKind {
    MongeElkan,
    Jaro,
}

impl SimKind {
    pub fn default_threshold(self) -> f64 {
        match self {
            SimKind::MongeElkan => MONGE_ELKAN_THRESHOLD,
            SimKind::Jaro => JARO_THRESHOLD,
        }
    }

    pub fn score(self, a: &str, b: &str) -> f64 {
        match self {
            SimKind::MongeElkan => monge_elkan(a, b),
            SimKind::Jaro => jaro(a, b),
        }
    }
}

impl fmt::Display for SimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimKind::MongeElkan => "monge-elkan",
            SimKind::Jaro => "jaro",
        })
    }
}

impl FromStr for SimKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "monge-elkan" | "mongeelkan" | "me" => Ok(SimKind::MongeElkan),
            "jaro" => Ok(SimKind::Jaro),
            other => Err(format!("unknown similarity algorithm `{other}`")),
        }
    }
}

/// A similarity measure paired with the score at which two names count as
/// the same concept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimAlgorithm {
    pub kind: SimKind,
    pub match_threshold: f64,
}

impl SimAlgorithm {
    pub fn new(kind: SimKind) -> Self {
        SimAlgorithm {
            kind,
            match_threshold: kind.default_threshold(),
        }
    }

    pub fn with_threshold(kind: SimKind, match_threshold: f64) -> Option<Self> {
        (0.0..=1.0)
            .contains(&match_threshold)
            .then_some(SimAlgorithm { kind, match_threshold })
    }

    pub fn score(&self, a: &str, b: &str) -> f64 {
        self.kind.score(a, b)
    }

    /// Returns whether the names match together with the raw score.
    pub fn is_match(&self, a: &str, b: &str) -> (bool, f64) {
        let score = self.score(a, b);
        (score >= self.match_threshold, score)
    }
}

impl Default for SimAlgorithm {
    fn default() -> Self {
        SimAlgorithm::new(SimKind::MongeElkan)
    }
}
