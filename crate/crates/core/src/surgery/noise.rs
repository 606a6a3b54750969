use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

/// Independent stream per `(seed, layer, tensor name)`: the key is hashed
/// with SHA-256 into a ChaCha20 seed.
fn stream(seed: u64, layer: usize, name: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((layer as u64).to_le_bytes());
    h.update(name.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Adds N(mean, mean²) noise to every element, in f32.
pub(super) fn add_gaussian(values: &mut [f32], mean: f32, seed: u64, layer: usize, name: &str) {
    let normal = Normal::new(mean, mean).expect("mean validated > 0");
    let mut rng = stream(seed, layer, name);
    for v in values.iter_mut() {
        *v += normal.sample(&mut rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_keyed() {
        let draw = |seed, layer, name| {
            let mut v = vec![0.0f32; 8];
            add_gaussian(&mut v, 0.01, seed, layer, name);
            v
        };
        assert_eq!(draw(1, 2, "a"), draw(1, 2, "a"));
        assert_ne!(draw(1, 2, "a"), draw(2, 2, "a"));
        assert_ne!(draw(1, 2, "a"), draw(1, 3, "a"));
        assert_ne!(draw(1, 2, "a"), draw(1, 2, "b"));
    }

    #[test]
    fn moments() {
        let mut v = vec![0.0f32; 20_000];
        add_gaussian(&mut v, 0.01, 7, 0, "t");
        let n = v.len() as f64;
        let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 0.01).abs() < 0.0005, "{mean}");
        assert!((var.sqrt() - 0.01).abs() < 0.0005, "{}", var.sqrt());
    }
}
