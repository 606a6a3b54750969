//! Layer-extension surgery for transformer checkpoints and a multilingual
//! corpus curation pipeline: rule filtering, MinHash deduplication and
//! language-balanced mixture planning.
//!
//! The most used types are re-exported at the crate root.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod dedup;
pub mod filter;
pub mod mixture;
pub mod model;
pub mod surgery;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, DType, Tensor};
pub use config::{ConfigError, ModelConfig};
pub use corpus::{read_documents, write_jsonl, CorpusError, Document};
pub use dedup::{dedup, DedupError, DedupReport, MinHashParams};
pub use filter::{clean_corpus, normalize_filter, score_gate, FilterRules, RejectReason, Verdict};
pub use mixture::registry::{classify_resource, LanguageInfo, ResourceClass};
pub use mixture::{
    parse_budget, sample_manifest, stage1_allocation, stage2_allocation, Category, CorpusStats,
    DocIndex, Manifest, MixtureError, MixturePlan, TokenUnit,
};
pub use model::{compare_outputs, forward, DeviationStats, LogitMatrix, Model, ModelError, TokenSequence};
pub use surgery::{
    ablation_grid, apply_extension, count_parameters, plan_extension, AblationReport,
    ExtensionPlan, InitMethod, Placement, SurgeryError, SurgeryRecord,
};
