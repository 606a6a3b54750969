use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelError, TokenSequence};
use crate::checkpoint::{Checkpoint, CheckpointError, DType, Tensor};
use crate::config::{self, ModelConfig};

/// Builds an f32 checkpoint with deterministic pseudo-random weights.
pub fn make_toy_checkpoint(config: &ModelConfig, seed: u64) -> Result<Checkpoint, CheckpointError> {
    make_toy_checkpoint_as(config, seed, DType::F32)
}

/// Like [`make_toy_checkpoint`], storing every tensor as `dtype`.
///
/// Projection and embedding weights are uniform in `±1/sqrt(hidden)`;
/// norm weights are `1 ± 0.1`. Tensors are filled in name order from one
/// ChaCha8 stream, so the output depends only on `(config, seed, dtype)`.
pub fn make_toy_checkpoint_as(
    config: &ModelConfig,
    seed: u64,
    dtype: DType,
) -> Result<Checkpoint, CheckpointError> {
    config
        .validate()
        .map_err(|e| CheckpointError::Invalid(vec![e.into()]))?;
    let names = config::GLOBAL_TENSORS
        .iter()
        .map(|s| s.to_string())
        .chain((0..config.num_layers).flat_map(|i| {
            config::LAYER_TENSORS.iter().map(move |s| config::layer_tensor_name(i, s))
        }));
    let mut names: Vec<String> = names.collect();
    names.sort();

    let scale = 1.0 / (config.hidden_size as f32).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for name in names {
        let shape = config.expected_shape(&name).expect("declared tensor");
        let n: usize = shape.iter().product();
        let values: Vec<f32> = if name.ends_with("norm.weight") {
            (0..n).map(|_| 1.0 + rng.random_range(-0.1f32..0.1)).collect()
        } else {
            (0..n).map(|_| rng.random_range(-scale..scale)).collect()
        };
        tensors.insert(name, Tensor::from_f32(dtype, shape, &values));
    }
    Ok(Checkpoint { config: config.clone(), tensors, metadata: BTreeMap::new() })
}

/// `count` prompts of `len` uniformly drawn token ids.
pub fn random_prompts(
    vocab_size: usize,
    count: usize,
    len: usize,
    seed: u64,
) -> Result<Vec<TokenSequence>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| TokenSequence::new((0..len).map(|_| rng.random_range(0..vocab_size as u32)).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::toy_config;

    #[test]
    fn same_seed_same_bytes() {
        let c = toy_config(2, 16);
        assert_eq!(make_toy_checkpoint(&c, 9).unwrap(), make_toy_checkpoint(&c, 9).unwrap());
    }

    #[test]
    fn different_seed_different_bytes() {
        let c = toy_config(2, 16);
        let a = make_toy_checkpoint(&c, 1).unwrap();
        let b = make_toy_checkpoint(&c, 2).unwrap();
        assert!(a.tensors.iter().all(|(name, t)| b.tensors[name].data != t.data));
    }

    #[test]
    fn toy_is_valid_in_every_dtype() {
        for dtype in DType::ALL {
            let ckpt = make_toy_checkpoint_as(&toy_config(2, 8), 4, dtype).unwrap();
            ckpt.validate().unwrap();
            assert!(ckpt.tensors.values().all(|t| t.dtype == dtype));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = toy_config(2, 16);
        c.num_layers = 0;
        assert!(make_toy_checkpoint(&c, 0).is_err());
    }
}
