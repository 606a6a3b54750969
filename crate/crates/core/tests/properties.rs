//! Randomized properties over the public API.

use std::collections::{BTreeMap, BTreeSet};

use babelkit_core::checkpoint::{load_checkpoint, save_checkpoint, DType};
use babelkit_core::dedup::{build_clusters, estimate_jaccard, shingle_hashes, MinHasher};
use babelkit_core::model::{forward, make_toy_checkpoint_as, random_prompts};
use babelkit_core::surgery::{apply_extension, ExtensionPlan, InitMethod, Placement};
use babelkit_core::ModelConfig;
use proptest::prelude::*;

fn config(layers: usize, heads: usize, kv_div: usize) -> ModelConfig {
    ModelConfig {
        num_layers: layers,
        hidden_size: heads * 4,
        num_attention_heads: heads,
        num_kv_heads: heads / kv_div,
        intermediate_size: 12,
        vocab_size: 17,
        rms_norm_eps: 1e-5,
        rope_theta: 500.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn surgery_roundtrips_through_disk(
        layers in 1usize..5,
        heads in prop::sample::select(vec![2usize, 4]),
        kv_div in prop::sample::select(vec![1usize, 2]),
        dtype in prop::sample::select(DType::ALL.to_vec()),
        pick in prop::collection::vec(any::<bool>(), 5),
        seed in any::<u64>(),
    ) {
        let ckpt = make_toy_checkpoint_as(&config(layers, heads, kv_div), seed, dtype).unwrap();
        let mut positions: Vec<usize> = (0..layers).filter(|&i| pick[i]).collect();
        if positions.is_empty() {
            positions.push(layers - 1);
        }
        let plan = ExtensionPlan {
            placement: Placement::AmongLayers { positions: positions.clone() },
            init: InitMethod::DuplicateNoise { mean: 1e-3 },
            seed,
        };
        let (ext, record) = apply_extension(&ckpt, &plan).unwrap();
        prop_assert_eq!(record.new_num_layers, layers + positions.len());
        prop_assert_eq!(ext.config.num_layers, record.new_num_layers);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.safetensors");
        save_checkpoint(&ext, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        prop_assert_eq!(&back, &ext);
        let (again, _) = apply_extension(&ckpt, &plan).unwrap();
        prop_assert_eq!(again, ext);
    }

    #[test]
    fn zeros_extension_is_identity_for_any_placement(
        layers in 1usize..5,
        count in 1usize..3,
        after in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let ckpt = make_toy_checkpoint_as(&config(layers, 2, 1), seed, DType::F32).unwrap();
        let placement = if after {
            Placement::AfterModel { count }
        } else {
            Placement::AmongLayers { positions: (0..layers.min(count)).collect() }
        };
        let (ext, _) = apply_extension(&ckpt, &ExtensionPlan { placement, init: InitMethod::Zeros, seed }).unwrap();
        for p in random_prompts(17, 3, 6, seed).unwrap() {
            let a = forward(&ckpt, &p).unwrap();
            let b = forward(&ext, &p).unwrap();
            prop_assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn clusters_match_naive_merge(pairs in prop::collection::vec((0u8..30, 0u8..30), 0..40)) {
        let named: Vec<(String, String)> = pairs.iter().map(|(a, b)| (format!("n{a:02}"), format!("n{b:02}"))).collect();
        let clusters = build_clusters(named.iter().map(|(a, b)| (a.as_str(), b.as_str())));

        // repeated set merging until nothing changes
        let mut sets: Vec<BTreeSet<String>> = named.iter().map(|(a, b)| BTreeSet::from([a.clone(), b.clone()])).collect();
        loop {
            let mut merged = false;
            'outer: for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    if !sets[i].is_disjoint(&sets[j]) {
                        let s = sets.remove(j);
                        sets[i].extend(s);
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
        let mut expected: Vec<Vec<String>> = sets.into_iter().filter(|s| s.len() > 1).map(|s| s.into_iter().collect()).collect();
        expected.sort();
        prop_assert_eq!(clusters, expected);
    }
}

#[test]
fn estimator_is_unbiased_over_constructions() {
    // pairs sharing `m` leading words out of 40 unique words each
    let mut by_target: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for c in 0..60u64 {
        for shared in [10usize, 20, 30] {
            let common: Vec<String> = (0..shared).map(|i| format!("c{c}s{shared}w{i}")).collect();
            let tail = |side: &str| (0..40 - shared).map(|i| format!("{side}{c}s{shared}w{i}")).collect::<Vec<_>>();
            let a = [common.clone(), tail("a")].concat().join(" ");
            let b = [common, tail("b")].concat().join(" ");
            let sa = shingle_hashes(&a, 5);
            let sb = shingle_hashes(&b, 5);
            let h = MinHasher::new(256, c);
            let est = estimate_jaccard(&h.signature(&sa).unwrap(), &h.signature(&sb).unwrap());
            by_target.entry(shared as u32).or_default().push(est);
        }
    }
    for (shared, ests) in by_target {
        let s = shared as f64 - 4.0;
        let truth = s / (2.0 * 36.0 - s);
        let mean = ests.iter().sum::<f64>() / ests.len() as f64;
        assert!((mean - truth).abs() < 0.02, "shared {shared}: mean {mean} vs {truth}");
    }
}
