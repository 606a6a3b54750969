//! Exact and near-duplicate removal.
//!
//! The pipeline hashes normalized text to drop exact copies, computes
//! MinHash signatures over word shingles, pairs documents through banded
//! LSH, joins pairs into connected components and keeps one document per
//! component. Near-duplicate detection runs separately per language.

mod exact;
mod graph;
mod lsh;
mod minhash;

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ensure_unique_ids, CorpusError, Document};

pub use exact::{content_digest, exact_dedup, ExactOutcome};
pub use graph::{build_clusters, UnionFind};
pub use lsh::lsh_pairs;
pub use minhash::{estimate_jaccard, shingle_hashes, MinHasher, MERSENNE_61};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinHashParams {
    /// Words per shingle.
    pub shingle_k: usize,
    pub num_perm: usize,
    pub bands: usize,
    pub rows: usize,
    pub jaccard_threshold: f64,
    pub seed: u64,
}

impl Default for MinHashParams {
    fn default() -> Self {
        MinHashParams { shingle_k: 5, num_perm: 256, bands: 32, rows: 8, jaccard_threshold: 0.8, seed: 0 }
    }
}

impl MinHashParams {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.shingle_k == 0 || self.num_perm == 0 || self.bands == 0 || self.rows == 0 {
            return Err(DedupError::Params("shingle_k, num_perm, bands and rows must be positive".into()));
        }
        if self.bands * self.rows != self.num_perm {
            return Err(DedupError::Params(format!(
                "bands x rows must equal num_perm: {} x {} != {}",
                self.bands, self.rows, self.num_perm
            )));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(DedupError::Params(format!(
                "jaccard_threshold must lie in (0, 1], got {}",
                self.jaccard_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DedupError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("signature has {got} values, expected {expected}")]
    SignatureLength { expected: usize, got: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    /// Lexicographically smaller id.
    pub a: String,
    pub b: String,
    pub estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalStage {
    Exact,
    Near,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub id: String,
    /// The kept document this one duplicates.
    pub representative: String,
    pub stage: RemovalStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub params: MinHashParams,
    pub input_count: usize,
    /// Ids sharing a content digest, in input order; the first survives.
    pub exact_groups: Vec<Vec<String>>,
    /// Sorted by (a, b).
    pub candidate_pairs: Vec<CandidatePair>,
    /// Connected components of the candidate graph, members sorted.
    pub clusters: Vec<Vec<String>>,
    /// Documents too short to shingle; kept without near-duplicate checks.
    pub bypassed: Vec<String>,
    /// Sorted.
    pub kept: Vec<String>,
    /// Sorted by id.
    pub removed: Vec<Removal>,
}

/// Full pipeline. Returns the kept documents in input order.
pub fn dedup(docs: Vec<Document>, params: &MinHashParams) -> Result<(Vec<Document>, DedupReport), DedupError> {
    params.validate()?;
    ensure_unique_ids(&docs)?;
    let exact = exact_dedup(&docs);

    let mut representative: HashMap<usize, (usize, RemovalStage)> = HashMap::new();
    for group in &exact.groups {
        for &i in &group[1..] {
            representative.insert(i, (group[0], RemovalStage::Exact));
        }
    }

    let mut shards: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in &exact.survivors {
        shards.entry(docs[i].lang.as_str()).or_default().push(i);
    }
    let hasher = MinHasher::new(params.num_perm, params.seed);
    let mut pairs: Vec<CandidatePair> = Vec::new();
    let mut bypassed = Vec::new();
    for members in shards.values() {
        let sigs: Vec<Option<Vec<u64>>> = members
            .par_iter()
            .map(|&i| hasher.signature(&shingle_hashes(&docs[i].text, params.shingle_k)))
            .collect();
        let mut indexed = Vec::new();
        let mut signed = Vec::new();
        for (&i, sig) in members.iter().zip(sigs) {
            match sig {
                Some(s) => {
                    indexed.push(i);
                    signed.push(s);
                }
                None => bypassed.push(docs[i].id.clone()),
            }
        }
        for (x, y, estimate) in lsh_pairs(&signed, params)? {
            let (a, b) = (&docs[indexed[x]].id, &docs[indexed[y]].id);
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            pairs.push(CandidatePair { a: a.clone(), b: b.clone(), estimate });
        }
    }
    pairs.sort_by(|p, q| (&p.a, &p.b).cmp(&(&q.a, &q.b)));
    bypassed.sort();

    let clusters = build_clusters(pairs.iter().map(|p| (p.a.as_str(), p.b.as_str())));
    let position: HashMap<&str, usize> = docs.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    for cluster in &clusters {
        let keep = position[cluster[0].as_str()];
        for id in &cluster[1..] {
            representative.insert(position[id.as_str()], (keep, RemovalStage::Near));
        }
    }

    let resolve = |mut i: usize| {
        while let Some(&(r, _)) = representative.get(&i) {
            i = r;
        }
        i
    };
    let mut removed: Vec<Removal> = representative
        .iter()
        .map(|(&i, &(_, stage))| Removal {
            id: docs[i].id.clone(),
            representative: docs[resolve(i)].id.clone(),
            stage,
        })
        .collect();
    removed.sort_by(|a, b| a.id.cmp(&b.id));

    let report_groups = exact
        .groups
        .iter()
        .map(|g| g.iter().map(|&i| docs[i].id.clone()).collect())
        .collect();
    let input_count = docs.len();
    let kept_docs: Vec<Document> = docs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !representative.contains_key(i))
        .map(|(_, d)| d)
        .collect();
    let mut kept: Vec<String> = kept_docs.iter().map(|d| d.id.clone()).collect();
    kept.sort();

    let report = DedupReport {
        params: *params,
        input_count,
        exact_groups: report_groups,
        candidate_pairs: pairs,
        clusters,
        bypassed,
        kept,
        removed,
    };
    Ok((kept_docs, report))
}

/// Writes candidate pairs as tab-separated `id_a id_b estimate` lines
/// under a header row.
pub fn write_pairs_tsv<W: Write>(mut w: W, pairs: &[CandidatePair]) -> io::Result<()> {
    writeln!(w, "id_a\tid_b\testimate")?;
    for p in pairs {
        writeln!(w, "{}\t{}\t{}", p.a, p.b, p.estimate)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
        use rand::Rng;
        (0..n).map(|_| format!("w{}", rng.random_range(0..5_000))).collect()
    }

    fn doc(id: &str, lang: &str, text: &str) -> Document {
        Document::new(id, lang, text)
    }

    #[test]
    fn exact_only_corpus() {
        let text = "alpha beta gamma delta epsilon zeta eta theta";
        let docs = vec![doc("b", "en", text), doc("a", "en", text), doc("c", "en", "one two three four five six")];
        let (kept, report) = dedup(docs, &MinHashParams::default()).unwrap();
        assert!(report.candidate_pairs.is_empty());
        assert_eq!(report.exact_groups, [vec!["b", "a"]]);
        assert_eq!(kept.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["b", "c"]);
        assert_eq!(report.removed, [Removal { id: "a".into(), representative: "b".into(), stage: RemovalStage::Exact }]);
    }

    #[test]
    fn near_duplicates_keep_smallest_id_and_resolve_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = words(&mut rng, 200);
        let mut edited = base.clone();
        edited[100] = "CHANGED".into();
        let docs = vec![
            doc("z", "en", &base.join(" ")),
            doc("y", "en", &base.join(" ")),
            doc("m", "en", &edited.join(" ")),
            doc("q", "sw", &base.join("  ")),
        ];
        let (kept, report) = dedup(docs, &MinHashParams::default()).unwrap();
        assert_eq!(report.exact_groups, [vec!["z", "y", "q"]]);
        assert_eq!(report.clusters, [vec!["m", "z"]]);
        assert_eq!(kept.len(), 1);
        assert_eq!(report.kept, ["m"]);
        for r in &report.removed {
            assert_eq!(r.representative, "m");
        }
        assert_eq!(report.kept.len() + report.removed.len(), report.input_count);
    }

    #[test]
    fn languages_are_separate_shards() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = words(&mut rng, 100);
        let mut edited = base.clone();
        edited[50] = "X".into();
        let docs = vec![doc("a", "en", &base.join(" ")), doc("b", "fr", &edited.join(" "))];
        let (_, report) = dedup(docs, &MinHashParams::default()).unwrap();
        assert!(report.candidate_pairs.is_empty());
    }

    #[test]
    fn short_docs_bypass() {
        let docs = vec![doc("a", "en", "one two"), doc("b", "en", "one two three")];
        let (kept, report) = dedup(docs, &MinHashParams::default()).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(report.bypassed, ["a", "b"]);
    }

    #[test]
    fn report_independent_of_input_order_and_threads() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut docs = Vec::new();
        for i in 0..30 {
            let base = words(&mut rng, 80);
            docs.push(doc(&format!("d{i:02}a"), "en", &base.join(" ")));
            let mut near = base.clone();
            near[40] = "edit".into();
            docs.push(doc(&format!("d{i:02}b"), "en", &near.join(" ")));
        }
        let params = MinHashParams { seed: 9, ..MinHashParams::default() };
        let (_, one) = dedup(docs.clone(), &params).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let (_, three) = pool.install(|| dedup(docs.clone(), &params).unwrap());
        assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&three).unwrap());

        docs.shuffle(&mut rng);
        let (_, shuffled) = dedup(docs, &params).unwrap();
        assert_eq!(shuffled.clusters, one.clusters);
        assert_eq!(shuffled.kept, one.kept);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = MinHashParams { bands: 3, ..MinHashParams::default() };
        assert!(matches!(dedup(vec![], &bad), Err(DedupError::Params(_))));
        let docs = vec![doc("a", "en", "x"), doc("a", "en", "y")];
        assert!(matches!(dedup(docs, &MinHashParams::default()), Err(DedupError::Corpus(_))));
    }

    #[test]
    fn tsv_layout() {
        let mut buf = Vec::new();
        write_pairs_tsv(&mut buf, &[CandidatePair { a: "a".into(), b: "b".into(), estimate: 0.875 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id_a\tid_b\testimate\na\tb\t0.875\n");
    }
}
