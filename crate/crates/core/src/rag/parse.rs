//! Extraction of structured answers from free generator text.
//!
//! Numbers glued to letters or hyphens (`T-72`, `2S1`) are part of names and
//! never count as numeric tokens. A unit word right after a number is
//! normalized to metric tons or meters.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{StructuredAnswer, Task};
use crate::model::{Attribute, SpecTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnswerParseError {
    #[error("no numeric value in answer")]
    NoNumber,
    #[error("value {0} is not positive")]
    NonPositive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnitKind {
    Mass,
    Length,
}

#[derive(Debug, Clone)]
struct NumToken {
    value: f64,
    unit: Option<UnitKind>,
    start: usize,
    /// Lower-cased word following the number and its unit, if any.
    next_word: Option<String>,
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+(?:\.\d+)?").expect("valid regex"));
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*([A-Za-z]+)").expect("valid regex"));

fn unit(word: &str) -> Option<(UnitKind, f64)> {
    Some(match word {
        "t" | "ton" | "tons" | "tonne" | "tonnes" => (UnitKind::Mass, 1.0),
        "kg" | "kilogram" | "kilograms" => (UnitKind::Mass, 1e-3),
        "m" | "meter" | "meters" | "metre" | "metres" => (UnitKind::Length, 1.0),
        "cm" | "centimeter" | "centimeters" => (UnitKind::Length, 1e-2),
        "mm" | "millimeter" | "millimeters" => (UnitKind::Length, 1e-3),
        _ => return None,
    })
}

fn next_word(text: &str, at: usize) -> Option<(String, usize)> {
    WORD.captures(&text[at..]).map(|c| {
        let m = c.get(1).expect("group 1");
        (m.as_str().to_ascii_lowercase(), at + m.end())
    })
}

fn tokens(text: &str) -> Vec<NumToken> {
    let mut out = Vec::new();
    for m in NUMBER.find_iter(text) {
        let before = text[..m.start()].chars().next_back();
        if before.is_some_and(|c| c.is_alphanumeric() || c == '.' || c == '-' || c == '_') {
            continue;
        }
        let Ok(mut value) = m.as_str().parse::<f64>() else {
            continue;
        };
        let after = text[m.end()..].chars().next();
        let glued = after.is_some_and(|c| c.is_alphabetic());
        let mut unit_kind = None;
        let mut end = m.end();
        if let Some((word, word_end)) = next_word(text, m.end()) {
            let (word, word_end) = if word == "metric" {
                next_word(text, word_end).unwrap_or((word, word_end))
            } else {
                (word, word_end)
            };
            match unit(&word) {
                Some((kind, scale)) => {
                    value *= scale;
                    unit_kind = Some(kind);
                    end = word_end;
                }
                // `6.95x3.4x2.1` separators are fine; other glued letters
                // mean the digits belong to a name.
                None if glued && word != "x" => continue,
                None => {}
            }
        }
        let following = next_word(text, end).map(|(w, _)| w);
        out.push(NumToken {
            value,
            unit: unit_kind,
            start: m.start(),
            next_word: following,
        });
    }
    out
}

fn kind_of(attribute: Attribute) -> UnitKind {
    match attribute {
        Attribute::WeightTons => UnitKind::Mass,
        _ => UnitKind::Length,
    }
}

fn positive(value: f64) -> Result<f64, AnswerParseError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(AnswerParseError::NonPositive(value))
    }
}

/// The first numeric token compatible with `attribute`, unit-normalized.
/// Tokens carrying a unit of the other kind (meters when asking for a
/// weight) are skipped.
pub fn parse_numeric_answer(text: &str, attribute: Attribute) -> Result<f64, AnswerParseError> {
    let want = kind_of(attribute);
    tokens(text)
        .into_iter()
        .find(|t| t.unit.is_none_or(|u| u == want))
        .ok_or(AnswerParseError::NoNumber)
        .and_then(|t| positive(t.value))
}

fn contains_phrase(haystack: &str, phrase: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(phrase) {
        let start = from + pos;
        let end = start + phrase.len();
        let ok_before = haystack[..start].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let ok_after = haystack[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if ok_before && ok_after {
            return Some(start);
        }
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

fn parse_type(text: &str, specs: &SpecTable) -> Option<String> {
    let lower = text.to_lowercase();
    specs
        .keys()
        .filter_map(|t| contains_phrase(&lower, &t.to_lowercase()).map(|pos| (pos, t)))
        .min_by(|(pa, ta), (pb, tb)| pa.cmp(pb).then(tb.len().cmp(&ta.len())).then(ta.cmp(tb)))
        .map(|(_, t)| t.clone())
}

fn parse_qualities(text: &str, specs: &SpecTable) -> Option<BTreeSet<String>> {
    let lower = text.to_lowercase();
    let found: BTreeSet<String> = specs
        .values()
        .flat_map(|s| s.qualities.iter())
        .filter(|q| contains_phrase(&lower, &q.to_lowercase()).is_some())
        .cloned()
        .collect();
    (!found.is_empty()).then_some(found)
}

fn parse_bool(text: &str) -> Option<bool> {
    const YES: [&str; 3] = ["yes", "true", "armed"];
    const NO: [&str; 5] = ["no", "false", "unarmed", "none", "not"];
    let lower = text.to_lowercase();
    let first = |words: &[&str]| words.iter().filter_map(|w| contains_phrase(&lower, w)).min();
    match (first(&YES), first(&NO)) {
        (Some(y), Some(n)) => Some(y < n),
        (Some(_), None) => Some(true),
        (None, Some(_)) => Some(false),
        (None, None) => None,
    }
}

fn parse_dimensions(text: &str) -> Option<(f64, f64, f64)> {
    let toks: Vec<NumToken> = tokens(text)
        .into_iter()
        .filter(|t| t.unit.is_none_or(|u| u == UnitKind::Length) && t.value > 0.0)
        .collect();
    let lower = text.to_lowercase();
    let labels: [(&str, &[&str]); 3] = [
        ("length", &["long"]),
        ("width", &["wide"]),
        ("height", &["high", "tall"]),
    ];
    let mut dims = [None; 3];
    for (slot, (label, suffixes)) in labels.iter().enumerate() {
        dims[slot] = toks
            .iter()
            .find(|t| t.next_word.as_deref().is_some_and(|w| suffixes.contains(&w)))
            .map(|t| t.value)
            .or_else(|| {
                let at = contains_phrase(&lower, label)?;
                toks.iter().find(|t| t.start > at).map(|t| t.value)
            });
    }
    if let [Some(l), Some(w), Some(h)] = dims {
        return Some((l, w, h));
    }
    match toks.as_slice() {
        [a, b, c, ..] => Some((a.value, b.value, c.value)),
        _ => None,
    }
}

/// Parses generator text for `task`; fields that cannot be found leave the
/// answer flagged unparseable.
pub fn parse_answer(task: Task, text: &str, specs: &SpecTable) -> StructuredAnswer {
    let mut a = StructuredAnswer {
        raw_text: text.to_string(),
        ..StructuredAnswer::default()
    };
    match task {
        Task::Type => a.target_type = parse_type(text, specs),
        Task::Qualities => a.qualities = parse_qualities(text, specs),
        Task::MountedWeapon => a.mounted_weapon = parse_bool(text),
        Task::Weight => a.weight_tons = parse_numeric_answer(text, Attribute::WeightTons).ok(),
        Task::Dimensions => {
            if let Some((l, w, h)) = parse_dimensions(text) {
                a.length_m = Some(l);
                a.width_m = Some(w);
                a.height_m = Some(h);
            }
        }
    }
    if task != Task::Type {
        a.target_type = a.target_type.or_else(|| parse_type(text, specs));
    }
    a.unparseable = !a.answers(task);
    a
}
