use std::collections::HashMap;

use unicode_normalization::UnicodeNormalization;
use xxhash_rust::xxh3::xxh3_128;

use crate::corpus::Document;

/// Digest of NFC-normalized text with whitespace runs collapsed to one
/// space and the ends trimmed.
pub fn content_digest(text: &str) -> u128 {
    let normalized: String = text.nfc().collect();
    let mut canonical = String::with_capacity(normalized.len());
    for word in normalized.split_whitespace() {
        if !canonical.is_empty() {
            canonical.push(' ');
        }
        canonical.push_str(word);
    }
    xxh3_128(canonical.as_bytes())
}

/// Result of exact deduplication over a slice of documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactOutcome {
    /// Indices of surviving documents, in input order.
    pub survivors: Vec<usize>,
    /// Groups of two or more indices sharing a digest, members in input
    /// order, groups ordered by their first member.
    pub groups: Vec<Vec<usize>>,
}

/// Groups documents by content digest; the first of each group survives.
pub fn exact_dedup(docs: &[Document]) -> ExactOutcome {
    let digests: Vec<u128> = {
        use rayon::prelude::*;
        docs.par_iter().map(|d| content_digest(&d.text)).collect()
    };
    let mut first: HashMap<u128, usize> = HashMap::with_capacity(docs.len());
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut survivors = Vec::new();
    for (i, digest) in digests.into_iter().enumerate() {
        match first.get(&digest) {
            Some(&g) => members[g].push(i),
            None => {
                first.insert(digest, members.len());
                members.push(vec![i]);
                survivors.push(i);
            }
        }
    }
    let groups = members.into_iter().filter(|g| g.len() > 1).collect();
    ExactOutcome { survivors, groups }
}
