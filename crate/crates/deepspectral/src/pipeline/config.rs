//! Run configuration: defaults, plain-text parsing, validation.
//!
//! Configs are flat `key = value` files. `#` starts a comment, blank lines
//! are skipped, unknown or repeated keys are errors so typos surface loudly
//! instead of silently running with defaults.

use crate::error::{Error, Result};

/// Everything a clustering run needs beyond the dataset itself.
///
/// `k = 0` is a sentinel meaning "take the cluster count from the dataset
/// labels"; it is resolved when a run starts and rejected if the dataset is
/// unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Number of clusters. 0 defers to the dataset's label count.
    pub k: usize,
    /// Width of the embedding layer.
    pub embedding_dim: usize,
    /// Hidden widths of the encoder, input to embedding, excluding both. The
    /// decoder mirrors them, so `[500, 500, 2000]` with a 784-wide input and
    /// `embedding_dim = 10` builds 784-500-500-2000-10-2000-500-500-784.
    pub layer_widths: Vec<usize>,
    /// Neighbor rank used for the self-tuning affinity scale.
    pub m_neighbors: usize,
    /// Acceleration threshold that stops embedding smoothing early.
    pub a_hat: f64,
    /// Hard cap on smoothing steps.
    pub t_max: usize,
    /// Reconstruction pretraining epochs.
    pub pretrain_epochs: usize,
    /// Batch size during pretraining.
    pub pretrain_batch: usize,
    /// Batch size during joint training.
    pub train_batch: usize,
    /// Mini-batches consumed from each chunk per outer iteration.
    pub batches_per_iter: usize,
    /// Rows drawn per outer iteration. Must equal `train_batch *
    /// batches_per_iter` so every batch of an iteration comes from its chunk.
    pub chunk_size: usize,
    /// Stop once the fraction of samples that switch clusters between outer
    /// iterations drops below this.
    pub convergence_threshold: f64,
    /// Safety cap on outer iterations.
    pub max_outer_iters: usize,
    /// Kmeans restarts per invocation.
    pub n_init: usize,
    /// Adam learning rate.
    pub lr: f64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// Master seed. Every stream of randomness in a run derives from it.
    pub seed: u64,
    /// Run one extra Kmeans over the full dataset after convergence and keep
    /// its centroids instead of the last chunk's.
    pub final_full_kmeans: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 0,
            embedding_dim: 10,
            layer_widths: vec![500, 500, 2000],
            m_neighbors: 7,
            a_hat: 0.01,
            t_max: 15,
            pretrain_epochs: 200,
            pretrain_batch: 256,
            train_batch: 32,
            batches_per_iter: 40,
            chunk_size: 1280,
            convergence_threshold: 0.005,
            max_outer_iters: 100,
            n_init: 10,
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            seed: 0,
            final_full_kmeans: false,
        }
    }
}

impl RunConfig {
    /// Parses a config file body on top of the defaults and validates the
    /// result.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid_config(format!(
                    "line {lineno}: expected `key = value`, got `{line}`"
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.contains(&key) {
                return Err(Error::invalid_config(format!(
                    "line {lineno}: duplicate key `{key}`"
                )));
            }
            cfg.apply(key, value, lineno)?;
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, lineno: usize) -> Result<()> {
        fn bad(lineno: usize, key: &str, value: &str, want: &str) -> Error {
            Error::invalid_config(format!(
                "line {lineno}: key `{key}` expects {want}, got `{value}`"
            ))
        }
        macro_rules! set {
            ($field:ident, $want:expr) => {
                self.$field = value
                    .parse()
                    .map_err(|_| bad(lineno, key, value, $want))?
            };
        }
        match key {
            "k" => set!(k, "a non-negative integer"),
            "embedding_dim" => set!(embedding_dim, "a positive integer"),
            "layer_widths" => {
                let widths: std::result::Result<Vec<usize>, _> = value
                    .split(',')
                    .map(|part| part.trim().parse::<usize>())
                    .collect();
                self.layer_widths = widths.map_err(|_| {
                    bad(lineno, key, value, "comma-separated positive integers")
                })?;
            }
            "m_neighbors" => set!(m_neighbors, "a positive integer"),
            "a_hat" => set!(a_hat, "a non-negative number"),
            "t_max" => set!(t_max, "a positive integer"),
            "pretrain_epochs" => set!(pretrain_epochs, "a non-negative integer"),
            "pretrain_batch" => set!(pretrain_batch, "a positive integer"),
            "train_batch" => set!(train_batch, "a positive integer"),
            "batches_per_iter" => set!(batches_per_iter, "a positive integer"),
            "chunk_size" => set!(chunk_size, "a positive integer"),
            "convergence_threshold" => {
                set!(convergence_threshold, "a number in (0, 1]")
            }
            "max_outer_iters" => set!(max_outer_iters, "a positive integer"),
            "n_init" => set!(n_init, "a positive integer"),
            "lr" => set!(lr, "a positive number"),
            "beta1" => set!(beta1, "a number in [0, 1)"),
            "beta2" => set!(beta2, "a number in [0, 1)"),
            "seed" => set!(seed, "a non-negative integer"),
            "final_full_kmeans" => set!(final_full_kmeans, "true or false"),
            other => {
                return Err(Error::invalid_config(format!(
                    "line {lineno}: unknown key `{other}`"
                )))
            }
        }
        Ok(())
    }

    /// Checks cross-field invariants. `parse` calls this; hand-built configs
    /// should call it before use.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid_config(msg))
            }
        }
        check(self.embedding_dim >= 2, "embedding_dim must be at least 2")?;
        check(
            self.layer_widths.iter().all(|&w| w > 0),
            "layer_widths must all be positive",
        )?;
        check(self.m_neighbors >= 1, "m_neighbors must be at least 1")?;
        check(
            self.a_hat.is_finite() && self.a_hat >= 0.0,
            "a_hat must be finite and non-negative",
        )?;
        check(self.t_max >= 1, "t_max must be at least 1")?;
        check(self.pretrain_batch >= 1, "pretrain_batch must be positive")?;
        check(self.train_batch >= 1, "train_batch must be positive")?;
        check(
            self.batches_per_iter >= 1,
            "batches_per_iter must be positive",
        )?;
        check(
            self.chunk_size == self.train_batch * self.batches_per_iter,
            "chunk_size must equal train_batch * batches_per_iter",
        )?;
        // 1.0 is allowed as a degenerate "stop after the first iteration"
        // setting; the changed fraction is always strictly below 1 because an
        // optimal alignment matches at least one sample.
        check(
            self.convergence_threshold > 0.0 && self.convergence_threshold <= 1.0,
            "convergence_threshold must lie in (0, 1]",
        )?;
        check(self.max_outer_iters >= 1, "max_outer_iters must be positive")?;
        check(self.n_init >= 1, "n_init must be positive")?;
        check(
            self.lr.is_finite() && self.lr >= 0.0,
            "lr must be finite and non-negative",
        )?;
        check(
            (0.0..1.0).contains(&self.beta1),
            "beta1 must lie in [0, 1)",
        )?;
        check(
            (0.0..1.0).contains(&self.beta2),
            "beta2 must lie in [0, 1)",
        )?;
        Ok(())
    }

    /// Renders the config in the same format `parse` accepts, so saved runs
    /// can be reproduced from their own artifacts.
    pub fn to_text(&self) -> String {
        let widths: Vec<String> =
            self.layer_widths.iter().map(|w| w.to_string()).collect();
        let mut out = String::new();
        let mut kv = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        kv("k", self.k.to_string());
        kv("embedding_dim", self.embedding_dim.to_string());
        kv("layer_widths", widths.join(","));
        kv("m_neighbors", self.m_neighbors.to_string());
        kv("a_hat", self.a_hat.to_string());
        kv("t_max", self.t_max.to_string());
        kv("pretrain_epochs", self.pretrain_epochs.to_string());
        kv("pretrain_batch", self.pretrain_batch.to_string());
        kv("train_batch", self.train_batch.to_string());
        kv("batches_per_iter", self.batches_per_iter.to_string());
        kv("chunk_size", self.chunk_size.to_string());
        kv(
            "convergence_threshold",
            self.convergence_threshold.to_string(),
        );
        kv("max_outer_iters", self.max_outer_iters.to_string());
        kv("n_init", self.n_init.to_string());
        kv("lr", self.lr.to_string());
        kv("beta1", self.beta1.to_string());
        kv("beta2", self.beta2.to_string());
        kv("seed", self.seed.to_string());
        kv("final_full_kmeans", self.final_full_kmeans.to_string());
        out
    }

    /// Full encoder-decoder widths for a dataset with `input_width` features:
    /// input, hidden encoder widths, embedding, mirrored hidden widths, input.
    pub fn model_widths(&self, input_width: usize) -> Vec<usize> {
        let mut widths = Vec::with_capacity(2 * self.layer_widths.len() + 3);
        widths.push(input_width);
        widths.extend(&self.layer_widths);
        widths.push(self.embedding_dim);
        widths.extend(self.layer_widths.iter().rev());
        widths.push(input_width);
        widths
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn empty_text_yields_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn parses_overrides_comments_and_blank_lines() {
        let text = "\n# clustering run\nk = 4\nlr = 0.01  # bigger steps\n\nlayer_widths = 64, 32\nchunk_size = 160\ntrain_batch = 16\nbatches_per_iter = 10\nfinal_full_kmeans = true\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.layer_widths, vec![64, 32]);
        assert_eq!(cfg.chunk_size, 160);
        assert!(cfg.final_full_kmeans);
        // Untouched keys keep their defaults.
        assert_eq!(cfg.embedding_dim, 10);
        assert_eq!(cfg.m_neighbors, 7);
    }

    #[test]
    fn unknown_key_is_rejected_with_line_number() {
        let err = RunConfig::parse("k = 3\nlearning_rate = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("learning_rate"), "{msg}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = RunConfig::parse("k = 3\nk = 4\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key `k`"));
    }

    #[test]
    fn malformed_value_names_key_and_line() {
        let err = RunConfig::parse("t_max = soon\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t_max"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn missing_equals_is_rejected() {
        let err = RunConfig::parse("just a line\n").unwrap_err();
        assert!(err.to_string().contains("key = value"));
    }

    #[test]
    fn chunk_size_must_match_batch_schedule() {
        let err = RunConfig::parse("chunk_size = 100\n").unwrap_err();
        assert!(err.to_string().contains("chunk_size"));
    }

    #[test]
    fn threshold_bounds_are_enforced() {
        assert!(RunConfig::parse("convergence_threshold = 0\n").is_err());
        assert!(RunConfig::parse("convergence_threshold = 1.5\n").is_err());
        // 1.0 is the degenerate stop-immediately setting and is allowed.
        assert!(RunConfig::parse("convergence_threshold = 1.0\n").is_ok());
    }

    #[test]
    fn text_round_trips_through_parse() {
        let mut cfg = RunConfig::default();
        cfg.k = 6;
        cfg.layer_widths = vec![128, 64];
        cfg.a_hat = 0.015;
        cfg.seed = 99;
        cfg.train_batch = 20;
        cfg.batches_per_iter = 8;
        cfg.chunk_size = 160;
        cfg.final_full_kmeans = true;
        let parsed = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn model_widths_builds_a_palindrome() {
        let mut cfg = RunConfig::default();
        cfg.layer_widths = vec![500, 500, 2000];
        cfg.embedding_dim = 10;
        assert_eq!(
            cfg.model_widths(784),
            vec![784, 500, 500, 2000, 10, 2000, 500, 500, 784]
        );
        cfg.layer_widths = vec![];
        assert_eq!(cfg.model_widths(4), vec![4, 10, 4]);
    }
}
