//! Rule-based document filtering and quality-score gating.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Document;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterRules {
    pub min_chars: usize,
    pub max_digit_ratio: f64,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules { min_chars: 100, max_digit_ratio: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("max_digit_ratio must lie in [0, 1], got {0}")]
    DigitRatio(f64),
    #[error("score threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
}

impl FilterRules {
    pub fn validate(&self) -> Result<(), FilterError> {
        if (0.0..=1.0).contains(&self.max_digit_ratio) {
            Ok(())
        } else {
            Err(FilterError::DigitRatio(self.max_digit_ratio))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    TooShort,
    TooManyDigits,
    Unscored,
    LowScore,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::TooShort => "TooShort",
            RejectReason::TooManyDigits => "TooManyDigits",
            RejectReason::Unscored => "Unscored",
            RejectReason::LowScore => "LowScore",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject(RejectReason),
}

/// Character statistics after NFC normalization and trimming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextStats {
    /// Unicode scalar values.
    pub chars: usize,
    /// Scalars in general category Nd (decimal digits, any script).
    pub digits: usize,
}

pub fn text_stats(text: &str) -> TextStats {
    let normalized: String = text.nfc().collect();
    let trimmed = normalized.trim();
    let mut stats = TextStats { chars: 0, digits: 0 };
    for c in trimmed.chars() {
        stats.chars += 1;
        if get_general_category(c) == GeneralCategory::DecimalNumber {
            stats.digits += 1;
        }
    }
    stats
}

fn check_rules(text: &str, rules: &FilterRules) -> (Verdict, TextStats) {
    let stats = text_stats(text);
    if stats.chars == 0 || stats.chars < rules.min_chars {
        return (Verdict::Reject(RejectReason::TooShort), stats);
    }
    // digits / chars > ratio, compared without division
    if stats.digits as f64 > rules.max_digit_ratio * stats.chars as f64 {
        return (Verdict::Reject(RejectReason::TooManyDigits), stats);
    }
    (Verdict::Keep, stats)
}

/// Applies the length rule, then the digit-ratio rule; the first failure is
/// the reported reason.
pub fn normalize_filter(doc: &Document, rules: &FilterRules) -> Verdict {
    check_rules(&doc.text, rules).0
}

/// One rejected document, as written to the rejection log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    /// In input order.
    pub kept: Vec<Document>,
    /// Sorted by id.
    pub rejected: Vec<Rejection>,
}

impl FilterOutcome {
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::from([("kept".to_owned(), self.kept.len())]);
        for r in &self.rejected {
            *counts.entry(r.reason.to_string()).or_default() += 1;
        }
        counts
    }

    fn merge(mut self, other: FilterOutcome) -> Self {
        self.kept = other.kept;
        self.rejected.extend(other.rejected);
        self.rejected.sort_by(|a, b| a.id.cmp(&b.id));
        self
    }
}

/// Rule filter over a whole corpus. Per-document and parallel; the result
/// does not depend on thread count.
pub fn filter_documents(docs: Vec<Document>, rules: &FilterRules) -> Result<FilterOutcome, FilterError> {
    rules.validate()?;
    let verdicts: Vec<(Verdict, TextStats)> =
        docs.par_iter().map(|d| check_rules(&d.text, rules)).collect();
    let mut out = FilterOutcome::default();
    for (doc, (verdict, stats)) in docs.into_iter().zip(verdicts) {
        match verdict {
            Verdict::Keep => out.kept.push(doc),
            Verdict::Reject(reason) => {
                let detail = match reason {
                    RejectReason::TooShort => {
                        format!("{} chars < min_chars {}", stats.chars, rules.min_chars)
                    }
                    _ => format!(
                        "{} of {} chars are digits > max_digit_ratio {}",
                        stats.digits, stats.chars, rules.max_digit_ratio
                    ),
                };
                out.rejected.push(Rejection { id: doc.id, reason, detail });
            }
        }
    }
    out.rejected.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Keeps documents whose score is at least `threshold`. A score in the
/// sidecar overrides one carried on the document; documents with neither
/// are rejected as unscored.
pub fn score_gate(
    docs: Vec<Document>,
    threshold: f64,
    sidecar: Option<&BTreeMap<String, f64>>,
) -> Result<FilterOutcome, FilterError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FilterError::Threshold(threshold));
    }
    let mut out = FilterOutcome::default();
    for doc in docs {
        let score = sidecar.and_then(|s| s.get(&doc.id).copied()).or(doc.score);
        match score {
            Some(s) if s >= threshold => out.kept.push(doc),
            Some(s) => out.rejected.push(Rejection {
                id: doc.id,
                reason: RejectReason::LowScore,
                detail: format!("score {s} < threshold {threshold}"),
            }),
            None => out.rejected.push(Rejection {
                id: doc.id,
                reason: RejectReason::Unscored,
                detail: "no score on the document or in the sidecar".into(),
            }),
        }
    }
    out.rejected.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Score gate settings for [`clean_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct Gate<'a> {
    pub threshold: f64,
    pub sidecar: Option<&'a BTreeMap<String, f64>>,
}

/// Rule filter followed by the optional score gate.
pub fn clean_corpus(
    docs: Vec<Document>,
    rules: &FilterRules,
    gate: Option<Gate<'_>>,
) -> Result<FilterOutcome, FilterError> {
    let ruled = filter_documents(docs, rules)?;
    match gate {
        None => Ok(ruled),
        Some(g) => {
            let gated = score_gate(ruled.kept.clone(), g.threshold, g.sidecar)?;
            Ok(ruled.merge(gated))
        }
    }
}
