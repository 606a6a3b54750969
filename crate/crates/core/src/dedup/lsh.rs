use std::collections::HashMap;

use rayon::prelude::*;

use super::minhash::estimate_jaccard;
use super::{DedupError, MinHashParams};

/// Candidate pairs `(i, j, estimate)` with `i < j`, sorted. A pair is a
/// candidate when any band of `rows` consecutive signature values is equal
/// in both signatures; it is kept when the estimate reaches the threshold.
pub fn lsh_pairs(signatures: &[Vec<u64>], params: &MinHashParams) -> Result<Vec<(usize, usize, f64)>, DedupError> {
    params.validate()?;
    for sig in signatures {
        if sig.len() != params.num_perm {
            return Err(DedupError::SignatureLength { expected: params.num_perm, got: sig.len() });
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..params.bands)
        .into_par_iter()
        .flat_map_iter(|band| {
            let span = band * params.rows..(band + 1) * params.rows;
            let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
            for (i, sig) in signatures.iter().enumerate() {
                buckets.entry(&sig[span.clone()]).or_default().push(i);
            }
            let mut out = Vec::new();
            for members in buckets.values().filter(|m| m.len() > 1) {
                for (x, &i) in members.iter().enumerate() {
                    for &j in &members[x + 1..] {
                        out.push((i, j));
                    }
                }
            }
            out
        })
        .collect();
    pairs.par_sort_unstable();
    pairs.dedup();
    Ok(pairs
        .into_par_iter()
        .filter_map(|(i, j)| {
            let est = estimate_jaccard(&signatures[i], &signatures[j]);
            (est >= params.jaccard_threshold).then_some((i, j, est))
        })
        .collect())
}
