//! The 25 supported languages with speaker counts, corpus-availability
//! ratios and resource classes.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    High,
    Low,
}

impl ResourceClass {
    /// Fallback rule for languages outside the fixed listing.
    pub fn from_cc_ratio(cc_ratio: f64) -> Self {
        if cc_ratio >= 1.0 {
            ResourceClass::High
        } else {
            ResourceClass::Low
        }
    }
}

impl fmt::Display for ResourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResourceClass::High => "high",
            ResourceClass::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageInfo {
    /// Canonical code used throughout the toolkit (ISO 639-1 where one exists).
    pub code: &'static str,
    /// Accepted ISO 639-3 codes, individual language first.
    pub iso639_3: &'static [&'static str],
    pub name: &'static str,
    pub speakers: u64,
    pub speakers_label: &'static str,
    pub cc_ratio: f64,
    pub cc_ratio_label: &'static str,
    pub resource_class: ResourceClass,
}

impl LanguageInfo {
    /// True when the fixed class disagrees with the cc-ratio rule.
    pub fn conflicts_with_cc_rule(&self) -> bool {
        ResourceClass::from_cc_ratio(self.cc_ratio) != self.resource_class
    }
}

macro_rules! lang {
    ($code:literal, [$($iso:literal),+], $name:literal, $speakers:literal, $sl:literal, $cc:literal, $class:ident) => {
        LanguageInfo {
            code: $code,
            iso639_3: &[$($iso),+],
            name: $name,
            speakers: $speakers,
            speakers_label: $sl,
            cc_ratio: $cc,
            cc_ratio_label: stringify!($cc),
            resource_class: ResourceClass::$class,
        }
    };
}

/// Sorted by number of speakers.
pub static LANGUAGES: [LanguageInfo; 25] = [
    lang!("en", ["eng"], "English", 1_500_000_000, "1.5B", 43.4, High),
    lang!("zh", ["cmn", "zho"], "Chinese (Mandarin)", 1_400_000_000, "1.4B", 5.1, High),
    lang!("hi", ["hin"], "Hindi", 700_000_000, "700M", 0.2, Low),
    lang!("es", ["spa"], "Spanish", 595_000_000, "595M", 4.6, High),
    lang!("ar", ["arb", "ara"], "Standard Arabic", 400_000_000, "400M", 0.68, Low),
    lang!("fr", ["fra"], "French", 300_000_000, "300M", 4.4, High),
    lang!("bn", ["ben"], "Bengali", 300_000_000, "300M", 0.1, Low),
    lang!("pt", ["por"], "Portuguese", 270_000_000, "270M", 2.3, High),
    lang!("ru", ["rus"], "Russian", 260_000_000, "260M", 6.2, High),
    lang!("ur", ["urd"], "Urdu", 230_000_000, "230M", 0.02, Low),
    lang!("id", ["ind"], "Indonesian", 200_000_000, "200M", 1.1, High),
    lang!("de", ["deu"], "Standard German", 135_000_000, "135M", 5.4, High),
    lang!("ja", ["jpn"], "Japanese", 130_000_000, "130M", 5.3, High),
    lang!("sw", ["swh", "swa"], "Swahili", 100_000_000, "100M", 0.008, Low),
    lang!("tl", ["fil", "tgl"], "Filipino (Tagalog)", 100_000_000, "100M", 0.008, Low),
    lang!("ta", ["tam"], "Tamil", 90_000_000, "90M", 0.04, Low),
    lang!("vi", ["vie"], "Vietnamese", 86_000_000, "86M", 1.0, High),
    // listed low-resource even though its ratio is above 1
    lang!("tr", ["tur"], "Turkish", 85_000_000, "85M", 1.3, Low),
    lang!("it", ["ita"], "Italian", 85_000_000, "85M", 2.4, High),
    lang!("jv", ["jav"], "Javanese", 83_000_000, "83M", 0.002, Low),
    lang!("ko", ["kor"], "Korean", 80_000_000, "80M", 0.76, Low),
    lang!("ha", ["hau"], "Hausa", 80_000_000, "80M", 0.003, Low),
    lang!("fa", ["pes", "fas"], "Iranian Persian", 80_000_000, "80M", 0.74, Low),
    lang!("th", ["tha"], "Thai", 80_000_000, "80M", 0.42, Low),
    lang!("my", ["mya"], "Burmese", 50_000_000, "50M", 0.01, Low),
];

/// Code for documents whose language is undetermined.
pub const UNDETERMINED: &str = "und";

pub fn lookup(code: &str) -> Option<&'static LanguageInfo> {
    LANGUAGES
        .iter()
        .find(|l| l.code == code || l.iso639_3.contains(&code))
}

/// Maps any accepted code to its canonical form; `und` passes through.
pub fn canonical_code(code: &str) -> Option<&'static str> {
    if code == UNDETERMINED {
        return Some(UNDETERMINED);
    }
    lookup(code).map(|l| l.code)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language {0:?}")]
pub struct UnknownLanguage(pub String);

/// Resource class from the fixed listing.
pub fn classify_resource(code: &str) -> Result<ResourceClass, UnknownLanguage> {
    lookup(code)
        .map(|l| l.resource_class)
        .ok_or_else(|| UnknownLanguage(code.to_owned()))
}

/// Listing first; the cc-ratio rule only for languages the listing lacks.
pub fn classify_resource_or(code: &str, cc_ratio: f64) -> ResourceClass {
    classify_resource(code).unwrap_or_else(|_| ResourceClass::from_cc_ratio(cc_ratio))
}

#[derive(Debug, Serialize)]
struct ExportEntry {
    #[serde(flatten)]
    info: &'static LanguageInfo,
    cc_rule_class: ResourceClass,
    conflicts_with_cc_rule: bool,
}

/// JSON export of the registry, with each language's cc-rule class and a
/// flag wherever the fixed listing disagrees with it.
pub fn export_json() -> serde_json::Value {
    let entries: Vec<ExportEntry> = LANGUAGES
        .iter()
        .map(|info| ExportEntry {
            info,
            cc_rule_class: ResourceClass::from_cc_ratio(info.cc_ratio),
            conflicts_with_cc_rule: info.conflicts_with_cc_rule(),
        })
        .collect();
    serde_json::json!({
        "cc_rule": "high if cc_ratio >= 1.0, applied only to languages outside the listing",
        "languages": entries,
    })
}
