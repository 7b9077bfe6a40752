//! Orchestration: run configuration, the end-to-end training and clustering
//! loops, reduced ablation variants, saved-run artifacts, and inference.

mod ablation;
mod artifacts;
mod config;
mod run;

pub use ablation::{run_ablation, AblationMode, AblationOutcome};
pub use artifacts::{checkpoint_path, IterationRecord, RunArtifacts};
pub use config::RunConfig;
pub use run::{export_embeddings, run_cluster, run_infer, run_pretrain};
