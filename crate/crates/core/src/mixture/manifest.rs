use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::{Category, MixtureError, MixturePlan, TokenUnit};
use crate::corpus::Document;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub id: String,
    pub tokens: u64,
}

/// Documents grouped by (language, category) with their token counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocIndex {
    pub unit: TokenUnit,
    pub cells: BTreeMap<(String, Category), Vec<IndexedDoc>>,
}

impl DocIndex {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>, unit: TokenUnit) -> Self {
        let mut cells: BTreeMap<(String, Category), Vec<IndexedDoc>> = BTreeMap::new();
        for d in docs {
            cells
                .entry((d.lang.clone(), Category::from_source(&d.source)))
                .or_default()
                .push(IndexedDoc { id: d.id.clone(), tokens: unit.count(&d.text) });
        }
        DocIndex { unit, cells }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub allocation: u64,
    /// Tokens actually selected; at least `allocation`, overshooting by less
    /// than the last selected document.
    pub tokens: u64,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: u8,
    pub seed: u64,
    pub unit: TokenUnit,
    pub cells: BTreeMap<String, BTreeMap<Category, ManifestCell>>,
}

fn priority(seed: u64, lang: &str, cat: Category, id: &str) -> u64 {
    let mut key = Vec::with_capacity(lang.len() + id.len() + 16);
    key.extend_from_slice(lang.as_bytes());
    key.push(0x1f);
    key.extend_from_slice(cat.as_str().as_bytes());
    key.push(0x1f);
    key.extend_from_slice(id.as_bytes());
    xxh3_64_with_seed(&key, seed)
}

fn fill_cell(
    seed: u64,
    lang: &str,
    cat: Category,
    allocation: u64,
    docs: Option<&Vec<IndexedDoc>>,
) -> Result<ManifestCell, MixtureError> {
    let mut cell = ManifestCell { allocation, tokens: 0, ids: Vec::new() };
    if allocation == 0 {
        return Ok(cell);
    }
    let docs = docs.ok_or_else(|| MixtureError::MissingCell {
        lang: lang.to_owned(),
        category: cat,
        allocation,
    })?;
    let available: u64 = docs.iter().map(|d| d.tokens).sum();
    if available < allocation {
        return Err(MixtureError::InsufficientIndex {
            lang: lang.to_owned(),
            category: cat,
            available,
            allocation,
        });
    }
    let mut ranked: Vec<(u64, &IndexedDoc)> = docs
        .iter()
        .filter(|d| d.tokens > 0)
        .map(|d| (priority(seed, lang, cat, &d.id), d))
        .collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    for (_, d) in ranked {
        if cell.tokens >= allocation {
            break;
        }
        cell.tokens += d.tokens;
        cell.ids.push(d.id.clone());
    }
    Ok(cell)
}

/// Picks documents for every plan cell in seeded-hash order until the
/// cell's allocation is met. Each cell depends only on its own key, the seed
/// and the index, so the result is independent of scheduling.
pub fn sample_manifest(plan: &MixturePlan, index: &DocIndex, seed: u64) -> Result<Manifest, MixtureError> {
    if plan.unit != index.unit {
        return Err(MixtureError::UnitMismatch { plan: plan.unit, index: index.unit });
    }
    let jobs: Vec<(&String, Category, u64)> = plan
        .allocations
        .iter()
        .flat_map(|(lang, cells)| cells.iter().map(move |(cat, n)| (lang, *cat, *n)))
        .collect();
    let filled: Vec<ManifestCell> = jobs
        .par_iter()
        .map(|(lang, cat, n)| fill_cell(seed, lang, *cat, *n, index.cells.get(&((*lang).clone(), *cat))))
        .collect::<Result<_, _>>()?;
    let mut cells: BTreeMap<String, BTreeMap<Category, ManifestCell>> = BTreeMap::new();
    for ((lang, cat, _), cell) in jobs.into_iter().zip(filled) {
        cells.entry(lang.clone()).or_default().insert(cat, cell);
    }
    Ok(Manifest { stage: plan.stage, seed, unit: plan.unit, cells })
}
