use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::numerics::Matrix;
use crate::{stream_seed, streams};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; 1 - gen keeps u1 in (0, 1] so the log never sees zero.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Isotropic Gaussian blobs: `n_per_cluster` points around each row of
/// `centers`, labeled by component. Deterministic per seed.
pub fn synth_blobs(n_per_cluster: usize, centers: &Matrix, stddev: f64, seed: u64) -> Dataset {
    assert!(n_per_cluster > 0, "blobs need at least one point per cluster");
    assert!(stddev > 0.0 && stddev.is_finite(), "blob stddev must be positive");
    assert!(centers.rows() > 0, "blobs need at least one center");

    let k = centers.rows();
    let p = centers.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, streams::SYNTH, 0));
    let n = n_per_cluster * k;
    let mut features = Matrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for c in 0..k {
        for i in 0..n_per_cluster {
            let row = features.row_mut(c * n_per_cluster + i);
            for (d, dst) in row.iter_mut().enumerate() {
                *dst = centers.get(c, d) + stddev * normal(&mut rng);
            }
            labels.push(c as i64);
        }
    }
    Dataset::new(
        features,
        Some(labels),
        format!("blobs(k={k}, n={n}, stddev={stddev})"),
        format!("synth_blobs(seed={seed})"),
    )
    .expect("synthetic blobs are always valid")
}

/// Two concentric circles in the plane: `n_per_ring` points on each radius,
/// angles uniform, radial Gaussian noise of `noise_std`. Labels are the ring
/// index in the order given.
pub fn synth_circles(n_per_ring: usize, radii: [f64; 2], noise_std: f64, seed: u64) -> Dataset {
    assert!(n_per_ring > 0, "circles need at least one point per ring");
    assert!(
        radii.iter().all(|r| *r > 0.0 && r.is_finite()),
        "circle radii must be positive"
    );
    assert!(noise_std >= 0.0 && noise_std.is_finite(), "noise_std must be non-negative");

    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, streams::SYNTH, 1));
    let n = 2 * n_per_ring;
    let mut features = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for (ring, &radius) in radii.iter().enumerate() {
        for i in 0..n_per_ring {
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let r = radius + noise_std * normal(&mut rng);
            let row = features.row_mut(ring * n_per_ring + i);
            row[0] = r * theta.cos();
            row[1] = r * theta.sin();
            labels.push(ring as i64);
        }
    }
    Dataset::new(
        features,
        Some(labels),
        format!("circles(n={n}, radii=[{}, {}], noise={noise_std})", radii[0], radii[1]),
        format!("synth_circles(seed={seed})"),
    )
    .expect("synthetic circles are always valid")
}
