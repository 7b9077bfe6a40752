//! Command-line interface to the deep spectral clustering toolkit.
//!
//! Every subcommand is a thin wrapper over the library: load data, load or
//! build a config, call one pipeline entry point, write the results. Exit
//! code 0 means success, 1 means bad input/config/file, 2 means training or
//! a numeric routine diverged.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deepspectral::autoencoder::{load_model, save_model, MlpModel};
use deepspectral::data::{
    load_csv, load_idx, save_csv, synth_blobs, synth_circles, Dataset,
};
use deepspectral::graph::build_affinity;
use deepspectral::greedy::kmeans;
use deepspectral::metrics::EvalReport;
use deepspectral::numerics::Matrix;
use deepspectral::pipeline::{
    export_embeddings, run_ablation, run_cluster, run_infer, run_pretrain,
    AblationMode, RunArtifacts, RunConfig,
};
use deepspectral::spectral::ncut_baseline;
use deepspectral::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dsc",
    version,
    about = "Deep spectral clustering: pretrain, cluster, evaluate, infer"
)]
struct Cli {
    /// Print per-iteration detail to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset file. `.csv` is parsed as numeric columns with an optional
    /// header; anything else is treated as an idx image file.
    #[arg(long)]
    data: PathBuf,
    /// For CSV: label column name (or zero-based index when headerless).
    /// For idx data: path to the companion idx label file.
    #[arg(long)]
    labels: Option<String>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let is_csv = self
            .data
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
        if is_csv {
            load_csv(&self.data, self.labels.as_deref())
        } else {
            let labels_path = self.labels.as_ref().map(PathBuf::from);
            load_idx(&self.data, labels_path.as_deref())
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's cluster count (0 defers to dataset labels).
    #[arg(long)]
    k: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain an autoencoder on a dataset and save the checkpoint.
    Pretrain {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Where to write the model checkpoint.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full clustering pipeline from a pretrained checkpoint.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Pretrained model checkpoint.
        #[arg(long)]
        ckpt: PathBuf,
        /// Directory to write run artifacts into.
        #[arg(long)]
        out: PathBuf,
        /// Re-cluster the full dataset once after convergence.
        #[arg(long)]
        final_kmeans: bool,
    },
    /// Run a reduced pipeline variant and score it against the labels.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Pretrained model checkpoint.
        #[arg(long)]
        ckpt: PathBuf,
        /// One of: ae_kmeans, ae_ncut, ae_se, ae_gk, dsc.
        #[arg(long)]
        mode: String,
        /// Optional CSV file for the scores.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assign samples using a finished run's artifacts.
    Infer {
        #[command(flatten)]
        data: DataArgs,
        /// Artifacts directory written by `cluster`.
        #[arg(long)]
        run: PathBuf,
        /// Optional CSV file for the assignments.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster the raw features directly, without the autoencoder.
    Baseline {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// `kmeans` for plain Kmeans, `ncut` for normalized-cut spectral
        /// clustering on the feature affinity graph.
        #[arg(long)]
        method: String,
    },
    /// Project embeddings to 2 or 3 principal components and write CSV.
    ExportEmbeddings {
        #[command(flatten)]
        data: DataArgs,
        /// Pretrained model checkpoint to embed with.
        #[arg(long, required_unless_present = "run", conflicts_with = "run")]
        ckpt: Option<PathBuf>,
        /// Artifacts directory; uses its trained model and, when the sample
        /// count matches, its cluster assignments.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Output dimensionality (2 or 3).
        #[arg(long, default_value_t = 2)]
        dims: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a small labeled synthetic dataset as CSV.
    Synth {
        #[command(subcommand)]
        shape: SynthShape,
    },
}

#[derive(Subcommand)]
enum SynthShape {
    /// Gaussian blobs with centers spaced evenly along the diagonal.
    Blobs {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        per_cluster: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0.5)]
        stddev: f64,
        /// Distance between consecutive centers.
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two concentric noisy rings in the plane.
    Circles {
        #[arg(long, default_value_t = 300)]
        per_ring: usize,
        #[arg(long, default_value_t = 1.0)]
        inner: f64,
        #[arg(long, default_value_t = 5.0)]
        outer: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::max_level()
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("[{}] {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = log::set_logger(&LOGGER);
    log::set_max_level(if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    });
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            match err {
                Error::NumericalFailure(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pretrain { data, config, out } => {
            let ds = data.load()?;
            let cfg = config.load()?;
            let (model, log) = run_pretrain(&ds, &cfg)?;
            save_model(&model, &out)?;
            match (log.epoch_losses.first(), log.epoch_losses.last()) {
                (Some(first), Some(last)) => println!(
                    "pretrained {} epochs: loss {first:.6} -> {last:.6}",
                    log.epoch_losses.len()
                ),
                _ => println!("pretrained 0 epochs: checkpoint is the initialization"),
            }
            println!("checkpoint written to {}", out.display());
            Ok(())
        }
        Command::Cluster { data, config, ckpt, out, final_kmeans } => {
            let ds = data.load()?;
            let mut cfg = config.load()?;
            cfg.final_full_kmeans |= final_kmeans;
            let model = load_model(&ckpt)?;
            let artifacts = run_cluster(&ds, model, &cfg)?;
            artifacts.save(&cfg, &out)?;
            println!(
                "{} after {} iterations",
                if artifacts.converged { "converged" } else { "hit the iteration cap" },
                artifacts.iterations.len()
            );
            match &artifacts.report {
                Some(report) => print!("{}", report.to_text()),
                None => print_cluster_sizes(&artifacts.assignments),
            }
            println!("artifacts written to {}", out.display());
            Ok(())
        }
        Command::Ablate { data, config, ckpt, mode, out } => {
            let ds = data.load()?;
            let cfg = config.load()?;
            let mode = AblationMode::parse(&mode)?;
            let model = load_model(&ckpt)?;
            let outcome = run_ablation(&ds, model, &cfg, mode)?;
            println!("mode = {}", outcome.mode.name());
            print!("{}", outcome.report.to_text());
            if let Some(path) = out {
                let csv = format!(
                    "mode,{}\n{},{}\n",
                    EvalReport::csv_header(),
                    outcome.mode.name(),
                    outcome.report.to_csv_row()
                );
                fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
                println!("scores written to {}", path.display());
            }
            Ok(())
        }
        Command::Infer { data, run, out } => {
            let ds = data.load()?;
            let (artifacts, _) = RunArtifacts::load(&run)?;
            let (assignments, report) = run_infer(&ds, &artifacts)?;
            match &report {
                Some(report) => print!("{}", report.to_text()),
                None => print_cluster_sizes(&assignments),
            }
            if let Some(path) = out {
                write_assignments_csv(&path, &assignments)?;
                println!("assignments written to {}", path.display());
            }
            Ok(())
        }
        Command::Baseline { data, config, method } => {
            let ds = data.load()?;
            let cfg = config.load()?;
            let k = match (cfg.k, ds.k_true()) {
                (0, Some(k)) => k,
                (0, None) => {
                    return Err(Error::invalid_config(
                        "k = 0 defers to the dataset's label count, but the dataset is unlabeled",
                    ))
                }
                (k, _) => k,
            };
            let assignments = match method.as_str() {
                "kmeans" => {
                    kmeans(&ds.features, k, cfg.seed, cfg.n_init)?.assignments
                }
                "ncut" => {
                    let graph = build_affinity(&ds.features, cfg.m_neighbors)?;
                    let coords = ncut_baseline(&graph.w, k)?;
                    kmeans(&coords, k, cfg.seed, cfg.n_init)?.assignments
                }
                other => {
                    return Err(Error::invalid_config(format!(
                        "unknown baseline method `{other}`; expected kmeans or ncut"
                    )))
                }
            };
            println!("method = {method}");
            match &ds.labels {
                Some(labels) => {
                    let report = EvalReport::compute(labels, &assignments, None)?;
                    print!("{}", report.to_text());
                }
                None => print_cluster_sizes(&assignments),
            }
            Ok(())
        }
        Command::ExportEmbeddings { data, ckpt, run, dims, out } => {
            let ds = data.load()?;
            let (model, assignments): (MlpModel, Option<Vec<usize>>) = match (ckpt, run) {
                (Some(path), None) => (load_model(&path)?, None),
                (None, Some(dir)) => {
                    let (artifacts, _) = RunArtifacts::load(&dir)?;
                    let assignments = (artifacts.assignments.len() == ds.n())
                        .then_some(artifacts.assignments);
                    (artifacts.model, assignments)
                }
                // clap enforces exactly one of the two.
                _ => unreachable!("ckpt and run are mutually exclusive and one is required"),
            };
            export_embeddings(
                &ds.features,
                &model,
                dims,
                assignments.as_deref(),
                ds.labels.as_deref(),
                &out,
            )?;
            println!(
                "{} samples projected to {dims} dimensions at {}",
                ds.n(),
                out.display()
            );
            Ok(())
        }
        Command::Synth { shape } => {
            let (ds, path) = match shape {
                SynthShape::Blobs {
                    k,
                    per_cluster,
                    dim,
                    stddev,
                    separation,
                    seed,
                    out,
                } => {
                    if k == 0 || dim == 0 {
                        return Err(Error::invalid_input(
                            "blobs need at least one cluster and one dimension",
                        ));
                    }
                    // Centers sit on the diagonal, `separation` apart, so any
                    // k works in any dimension.
                    let step = separation / (dim as f64).sqrt();
                    let centers = Matrix::from_fn(k, dim, |i, _| (i as f64 + 1.0) * step);
                    (synth_blobs(per_cluster, &centers, stddev, seed), out)
                }
                SynthShape::Circles { per_ring, inner, outer, noise, seed, out } => {
                    (synth_circles(per_ring, [inner, outer], noise, seed), out)
                }
            };
            save_csv(&ds, &path)?;
            println!(
                "wrote {} samples x {} features to {}",
                ds.n(),
                ds.p(),
                path.display()
            );
            Ok(())
        }
    }
}

fn print_cluster_sizes(assignments: &[usize]) {
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let rendered: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    println!("cluster_sizes = {}", rendered.join(","));
}

fn write_assignments_csv(path: &Path, assignments: &[usize]) -> Result<()> {
    let mut out = String::from("index,cluster\n");
    for (i, &c) in assignments.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
