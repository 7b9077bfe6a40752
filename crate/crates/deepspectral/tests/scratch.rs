use std::time::Instant;

use deepspectral::data::{synth_circles, Dataset};
use deepspectral::graph::build_affinity;
use deepspectral::greedy::kmeans;
use deepspectral::metrics::acc;
use deepspectral::pipeline::{run_cluster, run_pretrain, RunConfig};
use deepspectral::spectral::ncut_baseline;

fn circles_cfg(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.k = 2;
    cfg.embedding_dim = 2;
    cfg.layer_widths = vec![64, 32];
    cfg.m_neighbors = 7;
    cfg.a_hat = 0.0;
    cfg.t_max = 2000;
    cfg.pretrain_epochs = 60;
    cfg.pretrain_batch = 256;
    cfg.train_batch = 30;
    cfg.batches_per_iter = 20;
    cfg.chunk_size = 600;
    cfg.max_outer_iters = 30;
    cfg.n_init = 10;
    cfg.lr = 1e-3;
    cfg.seed = seed;
    cfg
}

#[test]
#[ignore]
fn tune_circles() {
    let start = Instant::now();
    for seed in 0..5u64 {
        let t = Instant::now();
        let ds: Dataset = synth_circles(300, [1.0, 5.0], 0.05, seed);
        let labels = ds.labels.as_ref().unwrap();

        let raw = kmeans(&ds.features, 2, seed, 10).unwrap();
        let raw_acc = acc(labels, &raw.assignments).unwrap();

        let graph = build_affinity(&ds.features, 7).unwrap();
        let coords = ncut_baseline(&graph.w, 2).unwrap();
        let ncut = kmeans(&coords, 2, seed, 10).unwrap();
        let ncut_acc = acc(labels, &ncut.assignments).unwrap();

        let cfg = circles_cfg(seed);
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();
        let dsc_acc = artifacts.report.as_ref().unwrap().acc;

        let iter_accs: Vec<String> = artifacts
            .iterations
            .iter()
            .map(|r| format!("{:.3}", r.acc.unwrap()))
            .collect();
        println!(
            "seed {seed}: raw {raw_acc:.3} ncut {ncut_acc:.3} dsc {dsc_acc:.3} \
             (per-iter [{}], converged {}) in {:.1}s",
            iter_accs.join(" "),
            artifacts.converged,
            t.elapsed().as_secs_f64()
        );
    }
    println!("total {:.1}s", start.elapsed().as_secs_f64());
}
