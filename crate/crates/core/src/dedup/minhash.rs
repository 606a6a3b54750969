use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use unicode_normalization::UnicodeNormalization;
use xxhash_rust::xxh3::xxh3_64;

/// The Mersenne prime 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

fn mod_mersenne(v: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let v = (v & p) + (v >> 61);
    let v = (v & p) + (v >> 61);
    let v = v as u64;
    if v >= MERSENNE_61 {
        v - MERSENNE_61
    } else {
        v
    }
}

/// Hashes of the distinct word k-shingles of `text` (after NFC), sorted.
/// Empty when the text has fewer than `k` words.
pub fn shingle_hashes(text: &str, k: usize) -> Vec<u64> {
    let normalized: String = text.nfc().collect();
    let words: Vec<&str> = normalized.split_whitespace().collect();
    if k == 0 || words.len() < k {
        return Vec::new();
    }
    let mut out: Vec<u64> = words
        .windows(k)
        .map(|w| mod_mersenne(xxh3_64(w.join(" ").as_bytes()) as u128))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// A family of `num_perm` universal hash functions
/// `h(x) = (a x + b) mod (2^61 - 1)` drawn from a seeded stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let coeffs = (0..num_perm)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        MinHasher { coeffs }
    }

    pub fn num_perm(&self) -> usize {
        self.coeffs.len()
    }

    /// Per-function minimum over the shingle hashes; `None` without shingles.
    pub fn signature(&self, shingles: &[u64]) -> Option<Vec<u64>> {
        if shingles.is_empty() {
            return None;
        }
        let mut sig = vec![u64::MAX; self.coeffs.len()];
        for &x in shingles {
            for (slot, &(a, b)) in sig.iter_mut().zip(&self.coeffs) {
                let h = mod_mersenne(a as u128 * x as u128 + b as u128);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Some(sig)
    }
}

/// Fraction of positions where two signatures agree.
pub fn estimate_jaccard(a: &[u64], b: &[u64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let matches = a.iter().zip(b).filter(|(x, y)| x == y).count();
    matches as f64 / a.len() as f64
}
