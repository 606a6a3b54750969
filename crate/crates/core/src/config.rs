use std::fmt;

use serde::{Deserialize, Serialize};

/// Architecture hyper-parameters of a decoder-only transformer checkpoint.
///
/// Serialized as a flat JSON object with snake_case keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_attention_heads: usize,
    pub num_kv_heads: usize,
    pub intermediate_size: usize,
    pub vocab_size: usize,
    pub rms_norm_eps: f64,
    pub rope_theta: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid model config: {}", .0.join("; "))]
pub struct ConfigError(pub Vec<String>);

impl ModelConfig {
    /// Checks every invariant and reports all failures together.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        for (name, value) in [
            ("num_layers", self.num_layers),
            ("hidden_size", self.hidden_size),
            ("num_attention_heads", self.num_attention_heads),
            ("num_kv_heads", self.num_kv_heads),
            ("intermediate_size", self.intermediate_size),
            ("vocab_size", self.vocab_size),
        ] {
            if value == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if self.num_attention_heads > 0 && !self.hidden_size.is_multiple_of(self.num_attention_heads) {
            problems.push(format!(
                "hidden_size {} is not divisible by num_attention_heads {}",
                self.hidden_size, self.num_attention_heads
            ));
        }
        if self.num_kv_heads > 0 && !self.num_attention_heads.is_multiple_of(self.num_kv_heads) {
            problems.push(format!(
                "num_attention_heads {} is not divisible by num_kv_heads {}",
                self.num_attention_heads, self.num_kv_heads
            ));
        }
        if !(self.rms_norm_eps.is_finite() && self.rms_norm_eps > 0.0) {
            problems.push(format!("rms_norm_eps must be > 0, got {}", self.rms_norm_eps));
        }
        if !(self.rope_theta.is_finite() && self.rope_theta > 0.0) {
            problems.push(format!("rope_theta must be > 0, got {}", self.rope_theta));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(problems))
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_attention_heads
    }

    /// Output width of the key and value projections.
    pub fn kv_dim(&self) -> usize {
        self.hidden_size * self.num_kv_heads / self.num_attention_heads
    }

    /// Expected shape of a tensor, or `None` if the name is not part of the
    /// declared naming scheme.
    pub fn expected_shape(&self, name: &str) -> Option<Vec<usize>> {
        let (h, kv, inter, vocab) = (
            self.hidden_size,
            self.kv_dim(),
            self.intermediate_size,
            self.vocab_size,
        );
        match name {
            EMBED_TOKENS | LM_HEAD => return Some(vec![vocab, h]),
            FINAL_NORM => return Some(vec![h]),
            _ => {}
        }
        let (_, suffix) = split_layer_name(name)?;
        let shape = match suffix {
            "self_attn.q_proj.weight" | "self_attn.o_proj.weight" => vec![h, h],
            "self_attn.k_proj.weight" | "self_attn.v_proj.weight" => vec![kv, h],
            "mlp.gate_proj.weight" | "mlp.up_proj.weight" => vec![inter, h],
            "mlp.down_proj.weight" => vec![h, inter],
            "input_layernorm.weight" | "post_attention_layernorm.weight" => vec![h],
            _ => return None,
        };
        Some(shape)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} layers, hidden {}, {} heads ({} kv), intermediate {}, vocab {}",
            self.num_layers,
            self.hidden_size,
            self.num_attention_heads,
            self.num_kv_heads,
            self.intermediate_size,
            self.vocab_size
        )
    }
}

pub const EMBED_TOKENS: &str = "model.embed_tokens.weight";
pub const FINAL_NORM: &str = "model.norm.weight";
pub const LM_HEAD: &str = "lm_head.weight";
pub const GLOBAL_TENSORS: [&str; 3] = [EMBED_TOKENS, FINAL_NORM, LM_HEAD];

/// Per-layer tensor suffixes, relative to `model.layers.{i}.`.
pub const LAYER_TENSORS: [&str; 9] = [
    "self_attn.q_proj.weight",
    "self_attn.k_proj.weight",
    "self_attn.v_proj.weight",
    "self_attn.o_proj.weight",
    "mlp.gate_proj.weight",
    "mlp.up_proj.weight",
    "mlp.down_proj.weight",
    "input_layernorm.weight",
    "post_attention_layernorm.weight",
];

const LAYER_PREFIX: &str = "model.layers.";

pub fn layer_tensor_name(layer: usize, suffix: &str) -> String {
    format!("{LAYER_PREFIX}{layer}.{suffix}")
}

/// Splits `model.layers.{i}.{suffix}` into `(i, suffix)`.
pub fn split_layer_name(name: &str) -> Option<(usize, &str)> {
    let rest = name.strip_prefix(LAYER_PREFIX)?;
    let (index, suffix) = rest.split_once('.')?;
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // "01" would alias layer 1 under renumbering
    if index.len() > 1 && index.starts_with('0') {
        return None;
    }
    Some((index.parse().ok()?, suffix))
}

#[cfg(test)]
pub(crate) fn toy_config(num_layers: usize, hidden: usize) -> ModelConfig {
    ModelConfig {
        num_layers,
        hidden_size: hidden,
        num_attention_heads: 4,
        num_kv_heads: 2,
        intermediate_size: hidden * 2,
        vocab_size: 37,
        rms_norm_eps: 1e-6,
        rope_theta: 10000.0,
    }
}
