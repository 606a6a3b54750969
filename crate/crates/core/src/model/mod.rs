//! Minimal decoder-only transformer used to check surgery invariants.
//!
//! Block structure per layer:
//! `x += o_proj(attn(rope(q), rope(k), v))` over `rms_norm(x)`, then
//! `x += down(silu(gate(h)) * up(h))` over `h = rms_norm(x)`.
//! Final `rms_norm` then `lm_head`. Everything is f32 and evaluated in a
//! fixed order (row-major, left to right accumulation), so repeated runs on
//! the same platform are bitwise identical.

pub(crate) mod compare;
mod toy;

use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{self, ModelConfig};

pub use compare::{compare_outputs, DeviationStats, PromptDeviation};
pub use toy::{make_toy_checkpoint, make_toy_checkpoint_as, random_prompts};

/// Longest sequence the reference model accepts.
pub const MAX_CONTEXT: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("token id {id} at position {position} is outside the vocabulary (size {vocab_size})")]
    TokenOutOfRange { id: u32, position: usize, vocab_size: usize },
    #[error("tensor {0} contains non-finite values")]
    NonFinite(String),
    #[error("token sequence is empty")]
    EmptySequence,
    #[error("token sequence of length {0} exceeds the context bound {MAX_CONTEXT}")]
    TooLong(usize),
    #[error("vocabulary sizes differ: {0} vs {1}")]
    VocabMismatch(usize, usize),
}

/// A non-empty list of token ids within the context bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct TokenSequence(Vec<u32>);

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Result<Self, ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        if ids.len() > MAX_CONTEXT {
            return Err(ModelError::TooLong(ids.len()));
        }
        Ok(TokenSequence(ids))
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<u32>> for TokenSequence {
    type Error = ModelError;

    fn try_from(ids: Vec<u32>) -> Result<Self, Self::Error> {
        TokenSequence::new(ids)
    }
}

impl From<TokenSequence> for Vec<u32> {
    fn from(t: TokenSequence) -> Self {
        t.0
    }
}

/// Row-major `[seq_len, vocab_size]` logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

impl LogitMatrix {
    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

struct LayerWeights {
    ln1: Vec<f32>,
    q: Vec<f32>,
    k: Vec<f32>,
    v: Vec<f32>,
    o: Vec<f32>,
    ln2: Vec<f32>,
    gate: Vec<f32>,
    up: Vec<f32>,
    down: Vec<f32>,
}

/// Decoded f32 weights, ready for repeated forward passes.
pub struct Model {
    config: ModelConfig,
    embed: Vec<f32>,
    norm: Vec<f32>,
    lm_head: Vec<f32>,
    layers: Vec<LayerWeights>,
}

impl Model {
    pub fn new(ckpt: &Checkpoint) -> Result<Self, ModelError> {
        ckpt.validate()?;
        let get = |name: &str| -> Result<Vec<f32>, ModelError> {
            let values = ckpt.tensors[name].to_f32();
            if values.iter().all(|v| v.is_finite()) {
                Ok(values)
            } else {
                Err(ModelError::NonFinite(name.to_owned()))
            }
        };
        let layer = |i: usize, suffix: &str| get(&config::layer_tensor_name(i, suffix));
        let layers = (0..ckpt.config.num_layers)
            .map(|i| {
                Ok(LayerWeights {
                    ln1: layer(i, "input_layernorm.weight")?,
                    q: layer(i, "self_attn.q_proj.weight")?,
                    k: layer(i, "self_attn.k_proj.weight")?,
                    v: layer(i, "self_attn.v_proj.weight")?,
                    o: layer(i, "self_attn.o_proj.weight")?,
                    ln2: layer(i, "post_attention_layernorm.weight")?,
                    gate: layer(i, "mlp.gate_proj.weight")?,
                    up: layer(i, "mlp.up_proj.weight")?,
                    down: layer(i, "mlp.down_proj.weight")?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Model {
            config: ckpt.config.clone(),
            embed: get(config::EMBED_TOKENS)?,
            norm: get(config::FINAL_NORM)?,
            lm_head: get(config::LM_HEAD)?,
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn forward(&self, tokens: &TokenSequence) -> Result<LogitMatrix, ModelError> {
        let cfg = &self.config;
        let (h, vocab) = (cfg.hidden_size, cfg.vocab_size);
        for (position, &id) in tokens.ids().iter().enumerate() {
            if id as usize >= vocab {
                return Err(ModelError::TokenOutOfRange { id, position, vocab_size: vocab });
            }
        }
        let n = tokens.len();
        let eps = cfg.rms_norm_eps as f32;
        let mut xs: Vec<Vec<f32>> = tokens
            .ids()
            .iter()
            .map(|&id| self.embed[id as usize * h..(id as usize + 1) * h].to_vec())
            .collect();
        let rope = RopeTable::new(n, cfg.head_dim(), cfg.rope_theta);

        for layer in &self.layers {
            let normed: Vec<Vec<f32>> = xs.iter().map(|x| rms_norm(x, &layer.ln1, eps)).collect();
            let attn = self.attention(layer, &normed, &rope);
            for (x, a) in xs.iter_mut().zip(&attn) {
                let delta = matvec(&layer.o, h, h, a);
                add_in_place(x, &delta);
            }
            for x in xs.iter_mut() {
                let hn = rms_norm(x, &layer.ln2, eps);
                let inter = cfg.intermediate_size;
                let gate = matvec(&layer.gate, inter, h, &hn);
                let up = matvec(&layer.up, inter, h, &hn);
                let act: Vec<f32> = gate.iter().zip(&up).map(|(&g, &u)| silu(g) * u).collect();
                let delta = matvec(&layer.down, h, inter, &act);
                add_in_place(x, &delta);
            }
        }

        let mut values = Vec::with_capacity(n * vocab);
        for x in &xs {
            let hn = rms_norm(x, &self.norm, eps);
            values.extend(matvec(&self.lm_head, vocab, h, &hn));
        }
        Ok(LogitMatrix { rows: n, cols: vocab, values })
    }

    /// Causal multi-head attention with grouped key/value heads. Returns the
    /// concatenated head outputs before `o_proj`.
    fn attention(&self, layer: &LayerWeights, normed: &[Vec<f32>], rope: &RopeTable) -> Vec<Vec<f32>> {
        let cfg = &self.config;
        let (h, kv_dim, hd) = (cfg.hidden_size, cfg.kv_dim(), cfg.head_dim());
        let group = cfg.num_attention_heads / cfg.num_kv_heads;
        let scale = 1.0 / (hd as f32).sqrt();

        let mut qs = Vec::with_capacity(normed.len());
        let mut ks = Vec::with_capacity(normed.len());
        let mut vs = Vec::with_capacity(normed.len());
        for (pos, x) in normed.iter().enumerate() {
            let mut q = matvec(&layer.q, h, h, x);
            let mut k = matvec(&layer.k, kv_dim, h, x);
            for head in q.chunks_exact_mut(hd) {
                rope.apply(head, pos);
            }
            for head in k.chunks_exact_mut(hd) {
                rope.apply(head, pos);
            }
            qs.push(q);
            ks.push(k);
            vs.push(matvec(&layer.v, kv_dim, h, x));
        }

        let mut out = vec![vec![0.0f32; h]; normed.len()];
        let mut scores = Vec::with_capacity(normed.len());
        for (t, row) in out.iter_mut().enumerate() {
            for head in 0..cfg.num_attention_heads {
                let kv_head = head / group;
                let q = &qs[t][head * hd..(head + 1) * hd];
                scores.clear();
                for k in &ks[..=t] {
                    scores.push(dot(q, &k[kv_head * hd..(kv_head + 1) * hd]) * scale);
                }
                softmax_in_place(&mut scores);
                let dst = &mut row[head * hd..(head + 1) * hd];
                for (p, v) in scores.iter().zip(&vs[..=t]) {
                    let v = &v[kv_head * hd..(kv_head + 1) * hd];
                    for (d, &vv) in dst.iter_mut().zip(v) {
                        *d += p * vv;
                    }
                }
            }
        }
        out
    }
}

/// Runs one sequence through a checkpoint. Decodes weights on every call;
/// build a [`Model`] once when scoring several prompts.
pub fn forward(ckpt: &Checkpoint, tokens: &TokenSequence) -> Result<LogitMatrix, ModelError> {
    Model::new(ckpt)?.forward(tokens)
}

/// Rotary position tables using the half-split pairing `(i, i + d/2)`.
struct RopeTable {
    half: usize,
    cos: Vec<f32>,
    sin: Vec<f32>,
}

impl RopeTable {
    fn new(positions: usize, head_dim: usize, theta: f64) -> Self {
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(positions * half);
        let mut sin = Vec::with_capacity(positions * half);
        for pos in 0..positions {
            for j in 0..half {
                let inv_freq = theta.powf(-(2.0 * j as f64) / head_dim as f64);
                let angle = pos as f64 * inv_freq;
                cos.push(angle.cos() as f32);
                sin.push(angle.sin() as f32);
            }
        }
        RopeTable { half, cos, sin }
    }

    fn apply(&self, x: &mut [f32], pos: usize) {
        let base = pos * self.half;
        for j in 0..self.half {
            let (c, s) = (self.cos[base + j], self.sin[base + j]);
            let (a, b) = (x[j], x[j + self.half]);
            x[j] = a * c - b * s;
            x[j + self.half] = b * c + a * s;
        }
    }
}

fn rms_norm(x: &[f32], weight: &[f32], eps: f32) -> Vec<f32> {
    let mean_sq = x.iter().map(|v| v * v).sum::<f32>() / x.len() as f32;
    let inv = 1.0 / (mean_sq + eps).sqrt();
    x.iter().zip(weight).map(|(&v, &w)| v * inv * w).collect()
}

/// `w` is row-major `[rows, cols]`.
fn matvec(w: &[f32], rows: usize, cols: usize, x: &[f32]) -> Vec<f32> {
    debug_assert_eq!(w.len(), rows * cols);
    w.chunks_exact(cols).map(|row| dot(row, x)).collect()
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).fold(0.0f32, |acc, (&x, &y)| acc + x * y)
}

fn add_in_place(x: &mut [f32], delta: &[f32]) {
    for (a, &d) in x.iter_mut().zip(delta) {
        *a += d;
    }
}

fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

fn softmax_in_place(xs: &mut [f32]) {
    let max = xs.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::checkpoint::{DType, Tensor};
    use crate::config::toy_config;

    /// 1 layer, hidden 2, vocab 3. Expected logits come from a separate
    /// float64 scalar transcription of the same block.
    fn hand_checkpoint() -> Checkpoint {
        let config = ModelConfig {
            num_layers: 1,
            hidden_size: 2,
            num_attention_heads: 1,
            num_kv_heads: 1,
            intermediate_size: 2,
            vocab_size: 3,
            rms_norm_eps: 1e-6,
            rope_theta: 10000.0,
        };
        let t = |shape: Vec<usize>, v: &[f32]| Tensor::from_f32(DType::F32, shape, v);
        let l = |s: &str| config::layer_tensor_name(0, s);
        let tensors = BTreeMap::from([
            (config::EMBED_TOKENS.to_owned(), t(vec![3, 2], &[1.0, 0.5, -0.5, 1.0, 0.25, -0.75])),
            (l("input_layernorm.weight"), t(vec![2], &[1.0, 1.0])),
            (l("self_attn.q_proj.weight"), t(vec![2, 2], &[0.5, -0.25, 0.125, 0.75])),
            (l("self_attn.k_proj.weight"), t(vec![2, 2], &[0.25, 0.5, -0.5, 0.25])),
            (l("self_attn.v_proj.weight"), t(vec![2, 2], &[1.0, 0.0, 0.5, -1.0])),
            (l("self_attn.o_proj.weight"), t(vec![2, 2], &[0.5, 0.5, -0.25, 1.0])),
            (l("post_attention_layernorm.weight"), t(vec![2], &[0.5, 1.5])),
            (l("mlp.gate_proj.weight"), t(vec![2, 2], &[1.0, -1.0, 0.5, 0.5])),
            (l("mlp.up_proj.weight"), t(vec![2, 2], &[0.25, 0.75, -1.0, 0.5])),
            (l("mlp.down_proj.weight"), t(vec![2, 2], &[1.0, 0.25, -0.5, 0.75])),
            (config::FINAL_NORM.to_owned(), t(vec![2], &[1.0, 0.5])),
            (config::LM_HEAD.to_owned(), t(vec![3, 2], &[1.0, 0.0, 0.0, 1.0, 0.5, -0.5])),
        ]);
        Checkpoint { config, tensors, metadata: BTreeMap::new() }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn matches_scalar_transcript() {
        let expected = [
            [1.414202486f32, 0.002735384, 0.705733551],
            [1.373774155, -0.167881526, 0.77082784],
            [-0.284187563, 0.69268252, -0.488435042],
        ];
        let logits = forward(&hand_checkpoint(), &TokenSequence::new(vec![0, 2, 1]).unwrap()).unwrap();
        assert_eq!((logits.rows, logits.cols), (3, 3));
        for (r, row) in expected.iter().enumerate() {
            for (c, &want) in row.iter().enumerate() {
                let got = logits.row(r)[c];
                assert!((got - want).abs() < 1e-5, "logit[{r}][{c}] = {got}, want {want}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let ckpt = make_toy_checkpoint(&toy_config(3, 16), 11).unwrap();
        let toks = TokenSequence::new(vec![1, 5, 9, 2]).unwrap();
        let a = forward(&ckpt, &toks).unwrap();
        let b = forward(&ckpt, &toks).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn all_zero_layers_are_depth_independent() {
        let mut ckpt = make_toy_checkpoint(&toy_config(4, 16), 5).unwrap();
        for (name, t) in ckpt.tensors.iter_mut() {
            if config::split_layer_name(name).is_some() {
                *t = Tensor::zeros(t.dtype, t.shape.clone());
            }
        }
        let toks = TokenSequence::new(vec![3, 1, 4, 1, 5]).unwrap();
        let logits = forward(&ckpt, &toks).unwrap();

        // lm_head(final_norm(embed(tokens))) computed directly
        let model = Model::new(&ckpt).unwrap();
        let h = ckpt.config.hidden_size;
        for (r, &id) in toks.ids().iter().enumerate() {
            let x = &model.embed[id as usize * h..(id as usize + 1) * h];
            let direct = matvec(&model.lm_head, 37, h, &rms_norm(x, &model.norm, 1e-6));
            let got = logits.row(r);
            assert!(direct.iter().zip(got).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn causal_order_matters() {
        let ckpt = make_toy_checkpoint(&toy_config(2, 16), 2).unwrap();
        let a = forward(&ckpt, &TokenSequence::new(vec![4, 7, 9]).unwrap()).unwrap();
        let b = forward(&ckpt, &TokenSequence::new(vec![7, 4, 9]).unwrap()).unwrap();
        assert_ne!(a.row(2), b.row(2));
        // position 0 sees only itself, so swapping later tokens leaves it alone
        let c = forward(&ckpt, &TokenSequence::new(vec![4, 9, 7]).unwrap()).unwrap();
        assert_eq!(a.row(0), c.row(0));
    }

    #[test]
    fn rejects_out_of_range_token() {
        let ckpt = make_toy_checkpoint(&toy_config(1, 8), 2).unwrap();
        let err = forward(&ckpt, &TokenSequence::new(vec![0, 37]).unwrap()).unwrap_err();
        assert!(matches!(err, ModelError::TokenOutOfRange { id: 37, position: 1, .. }));
    }

    #[test]
    fn rejects_non_finite_weights() {
        let mut ckpt = make_toy_checkpoint(&toy_config(1, 8), 2).unwrap();
        let t = ckpt.tensors.get_mut("model.layers.0.mlp.up_proj.weight").unwrap();
        t.data[..4].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = Model::new(&ckpt).err().unwrap();
        assert!(err.to_string().contains("model.layers.0.mlp.up_proj.weight"));
    }

    #[test]
    fn empty_and_long_sequences_rejected() {
        assert!(matches!(TokenSequence::new(vec![]), Err(ModelError::EmptySequence)));
        assert!(matches!(
            TokenSequence::new(vec![0; MAX_CONTEXT + 1]),
            Err(ModelError::TooLong(_))
        ));
        assert!(serde_json::from_str::<TokenSequence>("[]").is_err());
        assert_eq!(serde_json::from_str::<TokenSequence>("[1,2]").unwrap().ids(), [1, 2]);
    }
}
