use rayon::prelude::*;
use serde::Serialize;

use super::{apply_extension, plan_extension, ExtensionPlan, InitMethod, Placement, SurgeryError};
use crate::checkpoint::Checkpoint;
use crate::model::{compare::compare_models, Model, TokenSequence};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedDeviation {
    pub seed: u64,
    pub mean_abs: f64,
    pub max_abs: f64,
}

/// One (placement, initialization) combination measured against the
/// unextended model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub strategy: String,
    pub init: InitMethod,
    /// Mean over seeds of each seed's mean absolute logit deviation.
    pub mean_abs: f64,
    /// Largest absolute logit deviation over every seed and prompt.
    pub max_abs: f64,
    /// Per prompt, the largest deviation seen under any seed.
    pub per_prompt_max_abs: Vec<f64>,
    pub per_seed: Vec<SeedDeviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub base_num_layers: usize,
    pub k: usize,
    pub among_layers_positions: Vec<usize>,
    pub noise_means: Vec<f64>,
    pub seeds: Vec<u64>,
    pub num_prompts: usize,
    pub cells: Vec<AblationCell>,
}

impl AblationReport {
    pub fn cell(&self, strategy: &str, init: InitMethod) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.strategy == strategy && c.init == init)
    }
}

/// Runs the placement x initialization grid: `{among_layers, after_model}` x
/// `{duplicate, duplicate + noise(m) for m in means}`, plus one zeros cell
/// (among layers). Among-layers positions come from [`plan_extension`];
/// after-model appends `k` layers.
pub fn ablation_grid(
    ckpt: &Checkpoint,
    k: usize,
    means: &[f64],
    seeds: &[u64],
    prompts: &[TokenSequence],
) -> Result<AblationReport, SurgeryError> {
    if seeds.is_empty() {
        return Err(SurgeryError::Plan("ablation needs at least one seed".into()));
    }
    let among = plan_extension(&ckpt.config, k)?.placement;
    let after = Placement::AfterModel { count: k };
    let inits: Vec<InitMethod> = std::iter::once(InitMethod::Duplicate)
        .chain(means.iter().map(|&mean| InitMethod::DuplicateNoise { mean }))
        .collect();
    let mut grid: Vec<(Placement, InitMethod)> = [&among, &after]
        .into_iter()
        .flat_map(|p| inits.iter().map(move |&i| (p.clone(), i)))
        .collect();
    grid.push((among.clone(), InitMethod::Zeros));
    for (placement, init) in &grid {
        ExtensionPlan { placement: placement.clone(), init: *init, seed: 0 }.validate(&ckpt.config)?;
    }

    let base = Model::new(ckpt)?;
    let cells = grid
        .par_iter()
        .map(|(placement, init)| {
            let runs = seeds
                .par_iter()
                .map(|&seed| {
                    let plan = ExtensionPlan { placement: placement.clone(), init: *init, seed };
                    let (extended, _) = apply_extension(ckpt, &plan)?;
                    let stats = compare_models(&base, &Model::new(&extended)?, prompts)?;
                    Ok((seed, stats))
                })
                .collect::<Result<Vec<_>, SurgeryError>>()?;

            let mut per_prompt_max_abs = vec![0.0f64; prompts.len()];
            let mut per_seed = Vec::with_capacity(runs.len());
            for (seed, stats) in &runs {
                for (slot, p) in per_prompt_max_abs.iter_mut().zip(&stats.per_prompt) {
                    *slot = slot.max(p.max_abs);
                }
                per_seed.push(SeedDeviation {
                    seed: *seed,
                    mean_abs: stats.mean_abs,
                    max_abs: stats.max_abs,
                });
            }
            Ok(AblationCell {
                strategy: placement.name().to_owned(),
                init: *init,
                mean_abs: per_seed.iter().map(|s| s.mean_abs).sum::<f64>() / per_seed.len() as f64,
                max_abs: per_seed.iter().map(|s| s.max_abs).fold(0.0, f64::max),
                per_prompt_max_abs,
                per_seed,
            })
        })
        .collect::<Result<Vec<_>, SurgeryError>>()?;

    let among_layers_positions = match among {
        Placement::AmongLayers { positions } => positions,
        Placement::AfterModel { .. } => unreachable!("plan_extension places among layers"),
    };
    Ok(AblationReport {
        base_num_layers: ckpt.config.num_layers,
        k,
        among_layers_positions,
        noise_means: means.to_vec(),
        seeds: seeds.to_vec(),
        num_prompts: prompts.len(),
        cells,
    })
}
