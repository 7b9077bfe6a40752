//! Ablation runs: the full pipeline with individual stages removed, so their
//! contributions can be measured on the same footing.

use crate::autoencoder::MlpModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::build_affinity;
use crate::greedy::kmeans;
use crate::metrics::EvalReport;
use crate::pipeline::config::RunConfig;
use crate::pipeline::run::{cluster_loop, LoopVariant};
use crate::spectral::ncut_baseline;
use crate::{stream_seed, streams};

/// Which reduced variant of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    /// Kmeans directly on the pretrained embeddings. No training loop.
    AeKmeans,
    /// Normalized-cut eigenvectors of the embedding affinity graph, then
    /// Kmeans on them. No training loop.
    AeNcut,
    /// Train the encoder toward smoothed embeddings only, cluster afterwards.
    AeSe,
    /// Rotate-and-collapse targets from raw embeddings, train only the
    /// collapsed coordinate. No smoothing.
    AeGk,
    /// The complete pipeline, for side-by-side comparison.
    Dsc,
}

impl AblationMode {
    pub fn parse(s: &str) -> Result<AblationMode> {
        match s {
            "ae_kmeans" => Ok(AblationMode::AeKmeans),
            "ae_ncut" => Ok(AblationMode::AeNcut),
            "ae_se" => Ok(AblationMode::AeSe),
            "ae_gk" => Ok(AblationMode::AeGk),
            "dsc" => Ok(AblationMode::Dsc),
            other => Err(Error::invalid_config(format!(
                "unknown ablation mode `{other}`; expected one of \
                 ae_kmeans, ae_ncut, ae_se, ae_gk, dsc"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AblationMode::AeKmeans => "ae_kmeans",
            AblationMode::AeNcut => "ae_ncut",
            AblationMode::AeSe => "ae_se",
            AblationMode::AeGk => "ae_gk",
            AblationMode::Dsc => "dsc",
        }
    }
}

/// Result of one ablation run.
#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub mode: AblationMode,
    pub report: EvalReport,
    pub assignments: Vec<usize>,
}

/// Runs one pipeline variant on a pretrained model and scores it against the
/// dataset's labels. Ablations exist to be compared, so unlabeled data is an
/// error rather than a silent half-result.
pub fn run_ablation(
    ds: &Dataset,
    model: MlpModel,
    cfg: &RunConfig,
    mode: AblationMode,
) -> Result<AblationOutcome> {
    cfg.validate()?;
    let labels = ds.labels.as_ref().ok_or_else(|| {
        Error::invalid_input("ablation runs need ground-truth labels to score against")
    })?;
    let k = if cfg.k > 0 {
        cfg.k
    } else {
        ds.k_true().expect("labeled dataset has a cluster count")
    };

    let (assignments, report) = match mode {
        AblationMode::AeKmeans => {
            let h = model.encode(&ds.features)?;
            let seed = stream_seed(cfg.seed, streams::KMEANS, 0);
            let state = kmeans(&h, k, seed, cfg.n_init)?;
            let report = EvalReport::compute(labels, &state.assignments, None)?;
            (state.assignments, report)
        }
        AblationMode::AeNcut => {
            let h = model.encode(&ds.features)?;
            let graph = build_affinity(&h, cfg.m_neighbors)?;
            let spectral_coords = ncut_baseline(&graph.w, k)?;
            let seed = stream_seed(cfg.seed, streams::KMEANS, 0);
            let state = kmeans(&spectral_coords, k, seed, cfg.n_init)?;
            let report = EvalReport::compute(labels, &state.assignments, None)?;
            (state.assignments, report)
        }
        AblationMode::AeSe | AblationMode::AeGk | AblationMode::Dsc => {
            let variant = match mode {
                AblationMode::AeSe => LoopVariant::SpectralOnly,
                AblationMode::AeGk => LoopVariant::GreedyOnly,
                _ => LoopVariant::Full,
            };
            let artifacts = cluster_loop(ds, model, cfg, variant)?;
            let report = artifacts.report.expect("labeled run always has a report");
            (artifacts.assignments, report)
        }
    };

    log::info!(
        "ablation {}: acc {:.4}, nmi {:.4}",
        mode.name(),
        report.acc,
        report.nmi
    );
    Ok(AblationOutcome { mode, report, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::numerics::Matrix;
    use crate::pipeline::run::run_pretrain;

    fn blob_setup() -> (Dataset, RunConfig, MlpModel) {
        let centers = Matrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 0.0],
            vec![7.0, 7.0, 0.0, 0.0],
            vec![0.0, 7.0, 7.0, 0.0],
        ]);
        let ds = synth_blobs(30, &centers, 0.4, 21);
        let mut cfg = RunConfig::default();
        cfg.k = 3;
        cfg.embedding_dim = 4;
        cfg.layer_widths = vec![12];
        cfg.m_neighbors = 5;
        cfg.pretrain_epochs = 25;
        cfg.pretrain_batch = 32;
        cfg.train_batch = 10;
        cfg.batches_per_iter = 5;
        cfg.chunk_size = 50;
        cfg.max_outer_iters = 6;
        cfg.n_init = 4;
        cfg.seed = 5;
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        (ds, cfg, model)
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [
            AblationMode::AeKmeans,
            AblationMode::AeNcut,
            AblationMode::AeSe,
            AblationMode::AeGk,
            AblationMode::Dsc,
        ] {
            assert_eq!(AblationMode::parse(mode.name()).unwrap(), mode);
        }
        let err = AblationMode::parse("ae_everything").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
    }

    #[test]
    fn every_mode_clusters_easy_blobs_well() {
        let (ds, cfg, model) = blob_setup();
        for mode in [
            AblationMode::AeKmeans,
            AblationMode::AeNcut,
            AblationMode::AeSe,
            AblationMode::AeGk,
            AblationMode::Dsc,
        ] {
            let outcome = run_ablation(&ds, model.clone(), &cfg, mode).unwrap();
            assert_eq!(outcome.assignments.len(), ds.n());
            assert!(
                outcome.report.acc > 0.9,
                "{} got acc {}",
                mode.name(),
                outcome.report.acc
            );
        }
    }

    #[test]
    fn unlabeled_data_is_rejected() {
        let (ds, cfg, model) = blob_setup();
        let unlabeled =
            Dataset::new(ds.features.clone(), None, "anon", "test").unwrap();
        let err = run_ablation(&unlabeled, model, &cfg, AblationMode::Dsc).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    }

    #[test]
    fn ablations_are_deterministic() {
        let (ds, cfg, model) = blob_setup();
        let a = run_ablation(&ds, model.clone(), &cfg, AblationMode::AeGk).unwrap();
        let b = run_ablation(&ds, model, &cfg, AblationMode::AeGk).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.report.acc, b.report.acc);
    }
}
