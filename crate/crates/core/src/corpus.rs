//! Corpus records and their JSONL encoding.

use std::collections::{BTreeMap, HashSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::mixture::registry;

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub lang: String,
    /// Origin tag such as `web`, `news`, `wiki` or `textbook`.
    #[serde(default)]
    pub source: String,
    /// Quality score in `[0, 1]` from an external classifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Document {
    pub fn new(id: impl Into<String>, lang: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            lang: lang.into(),
            source: "web".into(),
            score: None,
        }
    }

    /// Checks field-level invariants and canonicalizes the language code.
    pub fn normalize(mut self) -> Result<Self, String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        self.lang = registry::canonical_code(&self.lang)
            .ok_or_else(|| format!("language {:?} is not in the registry", self.lang))?
            .to_owned();
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("score {s} outside [0, 1]"));
            }
        }
        Ok(self)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
}

impl CorpusError {
    pub fn is_io(&self) -> bool {
        matches!(self, CorpusError::Io(_))
    }
}

/// A line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

/// Records parsed from a JSONL stream plus any lines that were skipped.
#[derive(Debug, Default)]
pub struct ParsedLines<T> {
    pub records: Vec<T>,
    pub skipped: Vec<SkippedLine>,
}

/// Reads JSONL, one record per line, 1-based line numbers. Blank lines are
/// ignored. In strict mode the first bad line aborts; otherwise it is
/// recorded in `skipped` and reading continues.
pub fn read_jsonl<T, R, F>(reader: R, strict: bool, mut check: F) -> Result<ParsedLines<T>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
    F: FnMut(T) -> Result<T, String>,
{
    let mut out = ParsedLines { records: Vec::new(), skipped: Vec::new() };
    for (i, raw) in reader.split(b'\n').enumerate() {
        let line = i + 1;
        let raw = raw?;
        let parsed = std::str::from_utf8(&raw)
            .map_err(|e| format!("invalid UTF-8: {e}"))
            .and_then(|text| {
                let text = text.trim_end_matches('\r');
                if text.trim().is_empty() {
                    return Ok(None);
                }
                let value: T = serde_json::from_str(text).map_err(|e| e.to_string())?;
                check(value).map(Some)
            });
        match parsed {
            Ok(Some(v)) => out.records.push(v),
            Ok(None) => {}
            Err(reason) if strict => return Err(CorpusError::Malformed { line, reason }),
            Err(reason) => out.skipped.push(SkippedLine { line, reason }),
        }
    }
    Ok(out)
}

/// Reads a document corpus. Repeated ids count as malformed lines; the first
/// occurrence wins.
pub fn read_documents<R: BufRead>(reader: R, strict: bool) -> Result<ParsedLines<Document>, CorpusError> {
    let mut seen = HashSet::new();
    read_jsonl(reader, strict, |doc: Document| {
        let doc = doc.normalize()?;
        if seen.insert(doc.id.clone()) {
            Ok(doc)
        } else {
            Err(format!("duplicate id {:?}", doc.id))
        }
    })
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, records: &[T]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, Deserialize)]
struct ScoreLine {
    id: String,
    score: f64,
}

/// Reads an `{"id", "score"}` JSONL sidecar. Any malformed line, score
/// outside `[0, 1]`, or repeated id is an error.
pub fn read_scores<R: BufRead>(reader: R) -> Result<BTreeMap<String, f64>, CorpusError> {
    let parsed = read_jsonl(reader, true, |s: ScoreLine| {
        if (0.0..=1.0).contains(&s.score) {
            Ok(s)
        } else {
            Err(format!("score {} outside [0, 1]", s.score))
        }
    })?;
    let mut out = BTreeMap::new();
    for s in parsed.records {
        if out.insert(s.id.clone(), s.score).is_some() {
            return Err(CorpusError::DuplicateId(s.id));
        }
    }
    Ok(out)
}

/// Errors if any id appears twice.
pub fn ensure_unique_ids(docs: &[Document]) -> Result<(), CorpusError> {
    let mut seen = HashSet::with_capacity(docs.len());
    for d in docs {
        if !seen.insert(d.id.as_str()) {
            return Err(CorpusError::DuplicateId(d.id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenient_read_skips_and_logs() {
        let input = b"{\"id\":\"a\",\"text\":\"x\",\"lang\":\"en\"}\n\
            not json\n\
            \n\
            {\"id\":\"a\",\"text\":\"y\",\"lang\":\"en\"}\n\
            {\"id\":\"b\",\"text\":\"y\",\"lang\":\"xx\"}\n\
            {\"id\":\"c\",\"text\":\"\xff\",\"lang\":\"en\"}\n\
            {\"id\":\"d\",\"text\":\"z\",\"lang\":\"cmn\",\"source\":\"wiki\"}\n";
        let parsed = read_documents(&input[..], false).unwrap();
        let ids: Vec<&str> = parsed.records.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["a", "d"]);
        assert_eq!(parsed.records[1].lang, "zh");
        let lines: Vec<usize> = parsed.skipped.iter().map(|s| s.line).collect();
        assert_eq!(lines, [2, 4, 5, 6]);
        assert!(parsed.skipped[3].reason.contains("UTF-8"));
    }

    #[test]
    fn strict_read_reports_line() {
        let input = b"{\"id\":\"a\",\"text\":\"x\",\"lang\":\"en\"}\n{oops\n";
        match read_documents(&input[..], true) {
            Err(CorpusError::Malformed { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn score_sidecar_errors() {
        assert!(read_scores(&b"{\"id\":\"a\",\"score\":0.5}\n{\"id\":\"a\",\"score\":0.1}\n"[..]).is_err());
        assert!(read_scores(&b"{\"id\":\"a\",\"score\":1.5}\n"[..]).is_err());
        assert!(read_scores(&b"{\"id\":\"a\"}\n"[..]).is_err());
        let ok = read_scores(&b"{\"id\":\"a\",\"score\":0.5}\n"[..]).unwrap();
        assert_eq!(ok["a"], 0.5);
    }

    #[test]
    fn roundtrip_line() {
        let doc = Document::new("x", "sw", "habari");
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&doc)).unwrap();
        assert_eq!(read_documents(&buf[..], true).unwrap().records, [doc]);
    }
}
