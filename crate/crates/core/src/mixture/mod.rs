//! Language-balanced token allocation.
//!
//! Stage 1 spreads a budget over languages as evenly as availability
//! permits (max-min-fair water-filling). Stage 2 re-weights the stage-1
//! shares toward low-resource languages and textbooks. Both stages work in
//! exact rationals and round once, through [`round_plan`].

mod allocate;
mod budget;
mod manifest;
pub mod registry;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;

pub use allocate::{round_plan, stage1_allocation, stage1_shares, stage2_allocation, stage2_shares, water_fill, Shares};
pub use budget::parse_budget;
pub use manifest::{sample_manifest, DocIndex, IndexedDoc, Manifest, ManifestCell};

/// Source category of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Web,
    News,
    Wiki,
    Textbook,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Web,
        Category::News,
        Category::Wiki,
        Category::Textbook,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Web => "web",
            Category::News => "news",
            Category::Wiki => "wiki",
            Category::Textbook => "textbook",
            Category::Other => "other",
        }
    }

    /// Maps a free-form source tag onto a category; unknown tags are `Other`.
    pub fn from_source(source: &str) -> Category {
        match source.trim().to_ascii_lowercase().as_str() {
            "web" | "cc" | "commoncrawl" | "common_crawl" => Category::Web,
            "news" => Category::News,
            "wiki" | "wikipedia" => Category::Wiki,
            "textbook" | "textbooks" | "book" | "books" | "tutorial" => Category::Textbook,
            _ => Category::Other,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a token count measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenUnit {
    /// Whitespace-separated words.
    #[default]
    Words,
    /// Unicode scalar values.
    Chars,
}

impl TokenUnit {
    pub fn count(self, text: &str) -> u64 {
        match self {
            TokenUnit::Words => text.split_whitespace().count() as u64,
            TokenUnit::Chars => text.chars().count() as u64,
        }
    }
}

impl FromStr for TokenUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "words" => Ok(TokenUnit::Words),
            "chars" => Ok(TokenUnit::Chars),
            other => Err(format!("unknown token unit {other:?}, expected words or chars")),
        }
    }
}

/// Nested map language → category → tokens.
pub type CellMap = BTreeMap<String, BTreeMap<Category, u64>>;

/// Available tokens per (language, category).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    #[serde(default)]
    pub unit: TokenUnit,
    pub tokens: CellMap,
}

impl CorpusStats {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>, unit: TokenUnit) -> Self {
        let mut tokens = CellMap::new();
        for d in docs {
            *tokens
                .entry(d.lang.clone())
                .or_default()
                .entry(Category::from_source(&d.source))
                .or_default() += unit.count(&d.text);
        }
        CorpusStats { unit, tokens }
    }

    pub fn language_total(&self, lang: &str) -> u64 {
        self.tokens.get(lang).map_or(0, |c| c.values().sum())
    }

    pub fn total(&self) -> u64 {
        self.tokens.values().flat_map(|c| c.values()).sum()
    }

    pub fn get(&self, lang: &str, cat: Category) -> u64 {
        self.tokens.get(lang).and_then(|c| c.get(&cat)).copied().unwrap_or(0)
    }

    /// Canonicalizes language codes, merging aliases.
    pub fn canonicalized(&self) -> Result<CorpusStats, MixtureError> {
        let mut tokens = CellMap::new();
        for (lang, cells) in &self.tokens {
            let code = registry::canonical_code(lang)
                .ok_or_else(|| MixtureError::UnknownLanguage(lang.clone()))?;
            let merged = tokens.entry(code.to_owned()).or_default();
            for (cat, n) in cells {
                *merged.entry(*cat).or_default() += n;
            }
        }
        Ok(CorpusStats { unit: self.unit, tokens })
    }
}

/// Integer token allocations for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePlan {
    pub stage: u8,
    pub unit: TokenUnit,
    pub budget: u64,
    /// Σ allocations; equals min(budget, supply).
    pub total: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_boost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub textbook_boost: Option<f64>,
    pub language_totals: BTreeMap<String, u64>,
    pub allocations: CellMap,
}

impl MixturePlan {
    pub fn get(&self, lang: &str, cat: Category) -> u64 {
        self.allocations.get(lang).and_then(|c| c.get(&cat)).copied().unwrap_or(0)
    }

    pub fn language_total(&self, lang: &str) -> u64 {
        self.language_totals.get(lang).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MixtureError {
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("all availabilities are zero")]
    NoSupply,
    #[error("{name} must be finite and >= 1, got {value}")]
    InvalidBoost { name: &'static str, value: f64 },
    #[error("unknown language {0:?}")]
    UnknownLanguage(String),
    #[error("invalid budget {0:?}: expected a whole token count with optional K/M/B/T suffix")]
    InvalidBudget(String),
    #[error("index has no documents for {lang}/{category} but the plan allocates {allocation} tokens")]
    MissingCell { lang: String, category: Category, allocation: u64 },
    #[error("index holds {available} tokens for {lang}/{category}, plan allocates {allocation}")]
    InsufficientIndex { lang: String, category: Category, available: u64, allocation: u64 },
    #[error("plan counts {plan:?} but the index counts {index:?}")]
    UnitMismatch { plan: TokenUnit, index: TokenUnit },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_mapping() {
        assert_eq!(Category::from_source("Wikipedia"), Category::Wiki);
        assert_eq!(Category::from_source("textbook"), Category::Textbook);
        assert_eq!(Category::from_source("forum"), Category::Other);
    }

    #[test]
    fn stats_json_shape() {
        let stats: CorpusStats =
            serde_json::from_str(r#"{"unit":"words","tokens":{"en":{"web":10,"textbook":2},"cmn":{"wiki":5}}}"#).unwrap();
        assert_eq!(stats.language_total("en"), 12);
        let canon = stats.canonicalized().unwrap();
        assert_eq!(canon.get("zh", Category::Wiki), 5);
        let bad: CorpusStats = serde_json::from_str(r#"{"tokens":{"xx":{"web":1}}}"#).unwrap();
        assert_eq!(bad.canonicalized(), Err(MixtureError::UnknownLanguage("xx".into())));
    }

    #[test]
    fn stats_from_documents() {
        let mut a = Document::new("a", "en", "one two three");
        a.source = "news".into();
        let b = Document::new("b", "en", "four five");
        let stats = CorpusStats::from_documents([&a, &b], TokenUnit::Words);
        assert_eq!(stats.get("en", Category::News), 3);
        assert_eq!(stats.get("en", Category::Web), 2);
        assert_eq!(CorpusStats::from_documents([&b], TokenUnit::Chars).total(), 9);
    }
}
