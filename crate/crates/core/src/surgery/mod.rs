//! Depth extension of checkpoints by inserting new decoder layers.
//!
//! Two placements are supported. `AmongLayers` puts a new layer directly
//! after each listed original layer; `AfterModel` appends copies of the final
//! layer. Inserted layers start as exact copies of their source, optionally
//! perturbed with seeded Gaussian noise, or as all-zero blocks which leave the
//! forward pass unchanged through the residual path.

mod ablation;
mod noise;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointError, Tensor};
use crate::config::{self, ConfigError, ModelConfig};
use crate::model::ModelError;

pub use ablation::{ablation_grid, AblationCell, AblationReport, SeedDeviation};

/// Default noise mean for newly inserted layers.
pub const DEFAULT_NOISE_MEAN: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum SurgeryError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid plan: {0}")]
    Plan(String),
}

impl SurgeryError {
    pub fn is_io(&self) -> bool {
        matches!(self, SurgeryError::Checkpoint(e) if e.is_io())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Placement {
    /// Original layer indices (pre-surgery numbering), strictly increasing.
    AmongLayers { positions: Vec<usize> },
    AfterModel { count: usize },
}

impl Placement {
    pub fn name(&self) -> &'static str {
        match self {
            Placement::AmongLayers { .. } => "among_layers",
            Placement::AfterModel { .. } => "after_model",
        }
    }

    pub fn inserted_count(&self) -> usize {
        match self {
            Placement::AmongLayers { positions } => positions.len(),
            Placement::AfterModel { count } => *count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum InitMethod {
    Duplicate,
    /// Duplicate, then add elementwise noise drawn from N(mean, mean²).
    DuplicateNoise { mean: f64 },
    Zeros,
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMethod::Duplicate => f.write_str("duplicate"),
            InitMethod::DuplicateNoise { mean } => {
                write!(f, "duplicate + gaussian(mean={mean}, std={mean})")
            }
            InitMethod::Zeros => f.write_str("zeros"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionPlan {
    #[serde(flatten)]
    pub placement: Placement,
    pub init: InitMethod,
    #[serde(default)]
    pub seed: u64,
}

impl ExtensionPlan {
    pub fn validate(&self, config: &ModelConfig) -> Result<(), SurgeryError> {
        match &self.placement {
            Placement::AmongLayers { positions } => {
                if positions.is_empty() {
                    return Err(SurgeryError::Plan("no insertion positions given".into()));
                }
                if let Some(&p) = positions.iter().find(|&&p| p >= config.num_layers) {
                    return Err(SurgeryError::Plan(format!(
                        "position out of range: {p} (model has {} layers)",
                        config.num_layers
                    )));
                }
                if positions.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SurgeryError::Plan(format!(
                        "positions must be strictly increasing, got {positions:?}"
                    )));
                }
            }
            Placement::AfterModel { count } => {
                if *count == 0 {
                    return Err(SurgeryError::Plan("after_model count must be positive".into()));
                }
            }
        }
        if let InitMethod::DuplicateNoise { mean } = self.init {
            if !(mean.is_finite() && mean > 0.0) {
                return Err(SurgeryError::Plan(format!("noise mean must be > 0, got {mean}")));
            }
        }
        Ok(())
    }
}

/// Where one inserted layer came from and where it landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertedLayer {
    pub source_layer: usize,
    pub new_layer: usize,
}

/// Audit trail of one surgery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryRecord {
    pub old_num_layers: usize,
    pub new_num_layers: usize,
    pub strategy: String,
    pub inserted: Vec<InsertedLayer>,
    pub init: String,
    pub seed: u64,
    pub plan: ExtensionPlan,
}

/// Positions for `k` new layers in the second half of the model, one after
/// every other original layer: `num_layers/2 + 2j` for `j < k`.
///
/// The plan uses duplicate-plus-noise initialization at
/// [`DEFAULT_NOISE_MEAN`] with seed 0; callers may override either.
pub fn plan_extension(config: &ModelConfig, k: usize) -> Result<ExtensionPlan, SurgeryError> {
    config.validate()?;
    let n = config.num_layers;
    if !n.is_multiple_of(2) {
        return Err(SurgeryError::Plan(format!(
            "automatic placement needs an even layer count, got {n}"
        )));
    }
    if k == 0 {
        return Err(SurgeryError::Plan("k must be positive".into()));
    }
    if k * 4 > n {
        return Err(SurgeryError::Plan(format!(
            "k={k} is too large for stride-2 placement in the second half of {n} layers (max {})",
            n / 4
        )));
    }
    Ok(ExtensionPlan {
        placement: Placement::AmongLayers { positions: (0..k).map(|j| n / 2 + 2 * j).collect() },
        init: InitMethod::DuplicateNoise { mean: DEFAULT_NOISE_MEAN },
        seed: 0,
    })
}

enum LayerSource {
    Original(usize),
    Inserted(usize),
}

fn layout(num_layers: usize, placement: &Placement) -> Vec<LayerSource> {
    let mut out = Vec::with_capacity(num_layers + placement.inserted_count());
    match placement {
        Placement::AmongLayers { positions } => {
            let mut pending = positions.iter().peekable();
            for i in 0..num_layers {
                out.push(LayerSource::Original(i));
                if pending.next_if_eq(&&i).is_some() {
                    out.push(LayerSource::Inserted(i));
                }
            }
        }
        Placement::AfterModel { count } => {
            out.extend((0..num_layers).map(LayerSource::Original));
            out.extend((0..*count).map(|_| LayerSource::Inserted(num_layers - 1)));
        }
    }
    out
}

/// Builds the extended checkpoint. Global tensors (embeddings, final norm,
/// `lm_head`) are carried over untouched; every layer tensor, including ones
/// outside the declared naming scheme, is renumbered or initialized.
pub fn apply_extension(
    ckpt: &Checkpoint,
    plan: &ExtensionPlan,
) -> Result<(Checkpoint, SurgeryRecord), SurgeryError> {
    ckpt.validate()?;
    plan.validate(&ckpt.config)?;

    let old = ckpt.config.num_layers;
    let sources = layout(old, &plan.placement);
    let mut tensors: BTreeMap<String, Tensor> = ckpt
        .tensors
        .iter()
        .filter(|(name, _)| config::split_layer_name(name).is_none())
        .map(|(name, t)| (name.clone(), t.clone()))
        .collect();

    let mut inserted = Vec::new();
    for (new_layer, source) in sources.iter().enumerate() {
        match *source {
            LayerSource::Original(i) => {
                for (suffix, t) in ckpt.layer_tensors(i) {
                    tensors.insert(config::layer_tensor_name(new_layer, suffix), t.clone());
                }
            }
            LayerSource::Inserted(i) => {
                inserted.push(InsertedLayer { source_layer: i, new_layer });
            }
        }
    }

    // Each inserted tensor depends only on (seed, new_layer, name), so the
    // parallel map is order-independent.
    let jobs: Vec<(String, &Tensor)> = inserted
        .iter()
        .flat_map(|ins| {
            ckpt.layer_tensors(ins.source_layer)
                .into_iter()
                .map(move |(suffix, t)| (config::layer_tensor_name(ins.new_layer, suffix), t))
        })
        .collect();
    let new_tensors: Vec<(String, Tensor)> = jobs
        .into_par_iter()
        .map(|(name, src)| {
            let new_layer = config::split_layer_name(&name).map(|(i, _)| i).unwrap();
            let t = init_tensor(src, plan.init, plan.seed, new_layer, &name);
            (name, t)
        })
        .collect();
    tensors.extend(new_tensors);

    let mut config = ckpt.config.clone();
    config.num_layers = sources.len();
    let out = Checkpoint { config, tensors, metadata: ckpt.metadata.clone() };
    out.validate()?;

    let record = SurgeryRecord {
        old_num_layers: old,
        new_num_layers: sources.len(),
        strategy: plan.placement.name().to_owned(),
        inserted,
        init: plan.init.to_string(),
        seed: plan.seed,
        plan: plan.clone(),
    };
    Ok((out, record))
}

fn init_tensor(src: &Tensor, init: InitMethod, seed: u64, layer: usize, name: &str) -> Tensor {
    match init {
        InitMethod::Duplicate => src.clone(),
        InitMethod::Zeros => Tensor::zeros(src.dtype, src.shape.clone()),
        InitMethod::DuplicateNoise { mean } => {
            let mut values = src.to_f32();
            noise::add_gaussian(&mut values, mean as f32, seed, layer, name);
            Tensor::from_f32(src.dtype, src.shape.clone(), &values)
        }
    }
}

/// Parameters in one decoder layer.
pub fn per_layer_parameters(config: &ModelConfig) -> Result<u64, ConfigError> {
    config.validate()?;
    let h = config.hidden_size as u64;
    let kv = config.kv_dim() as u64;
    let inter = config.intermediate_size as u64;
    Ok(2 * h * h + 2 * h * kv + 3 * h * inter + 2 * h)
}

/// Closed-form parameter count: embeddings, `lm_head`, final norm, and
/// `num_layers` decoder layers. Embeddings and `lm_head` are counted
/// separately (untied).
pub fn count_parameters(config: &ModelConfig) -> Result<u64, ConfigError> {
    let per_layer = per_layer_parameters(config)?;
    let h = config.hidden_size as u64;
    let vocab = config.vocab_size as u64;
    Ok(2 * vocab * h + h + config.num_layers as u64 * per_layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::toy_config;
    use crate::model::{compare_outputs, make_toy_checkpoint, random_prompts};

    fn cfg(num_layers: usize) -> ModelConfig {
        toy_config(num_layers, 16)
    }

    fn positions(plan: &ExtensionPlan) -> &[usize] {
        match &plan.placement {
            Placement::AmongLayers { positions } => positions,
            _ => panic!("expected among_layers"),
        }
    }

    #[test]
    fn auto_positions_follow_second_half_stride_two() {
        assert_eq!(positions(&plan_extension(&cfg(28), 6).unwrap()), [14, 16, 18, 20, 22, 24]);
        assert_eq!(
            positions(&plan_extension(&cfg(80), 12).unwrap()),
            [40, 42, 44, 46, 48, 50, 52, 54, 56, 58, 60, 62]
        );
        assert_eq!(positions(&plan_extension(&cfg(8), 2).unwrap()), [4, 6]);
    }

    #[test]
    fn auto_plan_rejections() {
        assert!(plan_extension(&cfg(8), 3).is_err());
        assert!(plan_extension(&cfg(8), 0).is_err());
        let err = plan_extension(&cfg(9), 1).unwrap_err().to_string();
        assert!(err.contains("even"), "{err}");
    }

    #[test]
    fn duplicate_copies_bytes_and_renumbers() {
        let ckpt = make_toy_checkpoint(&cfg(8), 7).unwrap();
        let plan = ExtensionPlan {
            placement: Placement::AmongLayers { positions: vec![4, 6] },
            init: InitMethod::Duplicate,
            seed: 0,
        };
        let (ext, rec) = apply_extension(&ckpt, &plan).unwrap();
        assert_eq!(ext.config.num_layers, 10);
        assert_eq!(
            rec.inserted,
            [
                InsertedLayer { source_layer: 4, new_layer: 5 },
                InsertedLayer { source_layer: 6, new_layer: 8 }
            ]
        );
        // new index -> original source
        let map = [0, 1, 2, 3, 4, 4, 5, 6, 6, 7];
        for (new, &old) in map.iter().enumerate() {
            assert_eq!(ext.layer_tensors(new), ckpt.layer_tensors(old), "layer {new}");
        }
        for g in config::GLOBAL_TENSORS {
            assert_eq!(ext.tensors[g], ckpt.tensors[g]);
        }
    }

    #[test]
    fn after_model_appends_last_layer_copies() {
        let ckpt = make_toy_checkpoint(&cfg(4), 7).unwrap();
        let plan = ExtensionPlan {
            placement: Placement::AfterModel { count: 2 },
            init: InitMethod::Duplicate,
            seed: 0,
        };
        let (ext, rec) = apply_extension(&ckpt, &plan).unwrap();
        assert_eq!(rec.new_num_layers, 6);
        assert_eq!(ext.layer_tensors(4), ckpt.layer_tensors(3));
        assert_eq!(ext.layer_tensors(5), ckpt.layer_tensors(3));
    }

    #[test]
    fn zeros_preserve_logits_bitwise() {
        let ckpt = make_toy_checkpoint(&cfg(8), 3).unwrap();
        let plan = ExtensionPlan {
            placement: Placement::AmongLayers { positions: vec![0, 4, 7] },
            init: InitMethod::Zeros,
            seed: 0,
        };
        let (ext, _) = apply_extension(&ckpt, &plan).unwrap();
        let prompts = random_prompts(37, 5, 7, 1).unwrap();
        assert!(compare_outputs(&ckpt, &ext, &prompts).unwrap().is_zero());
    }

    #[test]
    fn noise_is_seeded() {
        let ckpt = make_toy_checkpoint(&cfg(8), 3).unwrap();
        let mut plan = plan_extension(&ckpt.config, 2).unwrap();
        plan.seed = 42;
        let (a, _) = apply_extension(&ckpt, &plan).unwrap();
        let (b, _) = apply_extension(&ckpt, &plan).unwrap();
        assert_eq!(a, b);
        plan.seed = 43;
        let (c, _) = apply_extension(&ckpt, &plan).unwrap();
        assert_ne!(a.layer_tensors(5), c.layer_tensors(5));
        // non-inserted layers are untouched by the seed
        assert_eq!(a.layer_tensors(4), c.layer_tensors(4));
    }

    #[test]
    fn noise_perturbs_inserted_layers_only_slightly() {
        let ckpt = make_toy_checkpoint(&cfg(8), 3).unwrap();
        let plan = plan_extension(&ckpt.config, 2).unwrap();
        let (ext, _) = apply_extension(&ckpt, &plan).unwrap();
        let src = ckpt.layer_tensors(4)["mlp.up_proj.weight"].to_f32();
        let dst = ext.layer_tensors(5)["mlp.up_proj.weight"].to_f32();
        let diffs: Vec<f32> = dst.iter().zip(&src).map(|(d, s)| d - s).collect();
        let mean = diffs.iter().sum::<f32>() / diffs.len() as f32;
        assert!(diffs.iter().any(|&d| d != 0.0));
        assert!((mean - 1e-4).abs() < 5e-5, "empirical noise mean {mean}");
    }

    #[test]
    fn plan_validation_errors() {
        let c = cfg(8);
        let bad = |placement, init| ExtensionPlan { placement, init, seed: 0 }.validate(&c);
        let err = bad(Placement::AmongLayers { positions: vec![99] }, InitMethod::Duplicate)
            .unwrap_err()
            .to_string();
        assert!(err.contains("position out of range"), "{err}");
        assert!(bad(Placement::AmongLayers { positions: vec![3, 3] }, InitMethod::Duplicate).is_err());
        assert!(bad(Placement::AmongLayers { positions: vec![] }, InitMethod::Duplicate).is_err());
        assert!(bad(Placement::AfterModel { count: 0 }, InitMethod::Zeros).is_err());
        assert!(bad(
            Placement::AfterModel { count: 1 },
            InitMethod::DuplicateNoise { mean: 0.0 }
        )
        .is_err());
    }

    #[test]
    fn plan_json_shape() {
        let plan = plan_extension(&cfg(8), 2).unwrap();
        let json = serde_json::to_value(&plan).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "strategy": "among_layers",
                "positions": [4, 6],
                "init": {"method": "duplicate_noise", "mean": 0.0001},
                "seed": 0
            })
        );
        let back: ExtensionPlan = serde_json::from_value(json).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn parameter_count_matches_materialized_tensors() {
        let c = ModelConfig {
            num_layers: 2,
            hidden_size: 8,
            num_attention_heads: 2,
            num_kv_heads: 2,
            intermediate_size: 16,
            vocab_size: 11,
            rms_norm_eps: 1e-6,
            rope_theta: 10000.0,
        };
        let ckpt = make_toy_checkpoint(&c, 0).unwrap();
        let enumerated: u64 = ckpt.tensors.values().map(|t| t.numel() as u64).sum();
        assert_eq!(count_parameters(&c).unwrap(), enumerated);
        assert_eq!(enumerated, 2 * 11 * 8 + 8 + 2 * (2 * 64 + 2 * 64 + 3 * 8 * 16 + 16));
    }

    #[test]
    fn parameter_delta_is_k_layers() {
        let base = cfg(28);
        let mut ext = base.clone();
        ext.num_layers = 34;
        let per_layer = per_layer_parameters(&base).unwrap();
        let delta = count_parameters(&ext).unwrap() - count_parameters(&base).unwrap();
        assert_eq!(delta, 6 * per_layer);
        let globals = (2 * base.vocab_size * base.hidden_size + base.hidden_size) as u64;
        let block_28 = count_parameters(&base).unwrap() - globals;
        let block_34 = count_parameters(&ext).unwrap() - globals;
        assert_eq!(block_34 * 28, block_28 * 34);
    }

    #[test]
    fn zero_layer_config_rejected() {
        let mut c = cfg(2);
        c.num_layers = 0;
        assert!(count_parameters(&c).is_err());
    }
}
