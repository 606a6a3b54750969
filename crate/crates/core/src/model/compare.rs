use serde::Serialize;

use super::{Model, ModelError, TokenSequence};
use crate::checkpoint::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptDeviation {
    pub mean_abs: f64,
    pub max_abs: f64,
}

/// Absolute logit differences between two checkpoints on the same prompts.
/// Exact zeros stay exact: there is no epsilon floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationStats {
    /// Mean over every compared logit of every prompt.
    pub mean_abs: f64,
    pub max_abs: f64,
    pub per_prompt: Vec<PromptDeviation>,
}

impl DeviationStats {
    pub fn is_zero(&self) -> bool {
        self.max_abs == 0.0
    }
}

pub fn compare_outputs(
    a: &Checkpoint,
    b: &Checkpoint,
    prompts: &[TokenSequence],
) -> Result<DeviationStats, ModelError> {
    if a.config.vocab_size != b.config.vocab_size {
        return Err(ModelError::VocabMismatch(a.config.vocab_size, b.config.vocab_size));
    }
    compare_models(&Model::new(a)?, &Model::new(b)?, prompts)
}

pub(crate) fn compare_models(
    a: &Model,
    b: &Model,
    prompts: &[TokenSequence],
) -> Result<DeviationStats, ModelError> {
    if a.config.vocab_size != b.config.vocab_size {
        return Err(ModelError::VocabMismatch(a.config.vocab_size, b.config.vocab_size));
    }
    let mut per_prompt = Vec::with_capacity(prompts.len());
    let (mut total, mut count, mut max_abs) = (0.0f64, 0usize, 0.0f64);
    for prompt in prompts {
        let la = a.forward(prompt)?;
        let lb = b.forward(prompt)?;
        let (mut sum, mut max) = (0.0f64, 0.0f64);
        for (x, y) in la.values.iter().zip(&lb.values) {
            let d = (f64::from(*x) - f64::from(*y)).abs();
            sum += d;
            max = max.max(d);
        }
        let n = la.values.len();
        per_prompt.push(PromptDeviation { mean_abs: sum / n as f64, max_abs: max });
        total += sum;
        count += n;
        max_abs = max_abs.max(max);
    }
    let mean_abs = if count == 0 { 0.0 } else { total / count as f64 };
    Ok(DeviationStats { mean_abs, max_abs, per_prompt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::toy_config;
    use crate::model::{make_toy_checkpoint, random_prompts};

    #[test]
    fn self_comparison_is_zero() {
        let ckpt = make_toy_checkpoint(&toy_config(2, 16), 1).unwrap();
        let prompts = random_prompts(37, 4, 6, 0).unwrap();
        let stats = compare_outputs(&ckpt, &ckpt, &prompts).unwrap();
        assert!(stats.is_zero());
        assert_eq!(stats.mean_abs, 0.0);
        assert_eq!(stats.per_prompt.len(), 4);
    }

    #[test]
    fn different_models_deviate() {
        let a = make_toy_checkpoint(&toy_config(2, 16), 1).unwrap();
        let b = make_toy_checkpoint(&toy_config(2, 16), 2).unwrap();
        let prompts = random_prompts(37, 2, 5, 0).unwrap();
        assert!(compare_outputs(&a, &b, &prompts).unwrap().max_abs > 0.0);
    }

    #[test]
    fn vocab_mismatch() {
        let a = make_toy_checkpoint(&toy_config(2, 16), 1).unwrap();
        let mut cfg = toy_config(2, 16);
        cfg.vocab_size = 40;
        let b = make_toy_checkpoint(&cfg, 1).unwrap();
        assert!(matches!(
            compare_outputs(&a, &b, &[]),
            Err(ModelError::VocabMismatch(37, 40))
        ));
    }
}
