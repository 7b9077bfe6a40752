//! Lloyd's algorithm with kmeans++ seeding and deterministic restarts.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::{stream_seed, streams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_LLOYD_ITERS: usize = 300;

/// A hard clustering: per-sample assignments, the cluster means, and the sum
/// of squared distances from each sample to its assigned centroid.
#[derive(Debug, Clone)]
pub struct ClusterState {
    /// Cluster index in `0..k` for each sample, in row order.
    pub assignments: Vec<usize>,
    /// `k x d` matrix whose rows are the cluster means.
    pub centroids: Matrix,
    /// Total within-cluster squared distance under `assignments`.
    pub objective: f64,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assigns every row of `points` to its nearest centroid row, breaking ties
/// toward the lower cluster index. Returns the assignments and the summed
/// squared distance.
pub fn assign_to_nearest(points: &Matrix, centroids: &Matrix) -> Result<(Vec<usize>, f64)> {
    if points.cols() != centroids.cols() {
        return Err(Error::invalid_input(format!(
            "points have width {} but centroids have width {}",
            points.cols(),
            centroids.cols()
        )));
    }
    if centroids.rows() == 0 {
        return Err(Error::invalid_input("no centroids to assign to"));
    }
    let mut assignments = Vec::with_capacity(points.rows());
    let mut total = 0.0;
    for i in 0..points.rows() {
        let row = points.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = dist_sq(row, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments.push(best);
        total += best_d;
    }
    Ok((assignments, total))
}

/// kmeans++ seeding: first center uniform, each further center drawn with
/// probability proportional to squared distance from the chosen set. When
/// every remaining point coincides with a chosen center the draw falls back
/// to uniform.
fn seed_centroids(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));

    let mut closest: Vec<f64> = (0..n).map(|i| dist_sq(points.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in closest.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for i in 0..n {
            let d = dist_sq(points.row(i), centroids.row(c));
            if d < closest[i] {
                closest[i] = d;
            }
        }
    }
    centroids
}

/// Moves points into empty clusters: each empty cluster receives the point
/// currently farthest from its centroid, drawn only from clusters that would
/// keep at least one member.
fn repair_empty_clusters(
    points: &Matrix,
    centroids: &Matrix,
    assignments: &mut [usize],
    k: usize,
) {
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    let mut dist2: Vec<f64> = assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| dist_sq(points.row(i), centroids.row(a)))
        .collect();

    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut donor: Option<usize> = None;
        for i in 0..points.rows() {
            if counts[assignments[i]] < 2 {
                continue;
            }
            if donor.map_or(true, |d| dist2[i] > dist2[d]) {
                donor = Some(i);
            }
        }
        // Some cluster always has >= 2 members while another is empty.
        let donor = donor.expect("empty cluster with no donatable point");
        counts[assignments[donor]] -= 1;
        assignments[donor] = empty;
        counts[empty] = 1;
        dist2[donor] = 0.0;
    }
}

fn centroids_from_assignments(points: &Matrix, assignments: &[usize], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        let row = points.row(i);
        let target = sums.row_mut(a);
        for j in 0..d {
            target[j] += row[j];
        }
        counts[a] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for v in sums.row_mut(c) {
                *v *= inv;
            }
        }
    }
    sums
}

/// One full Lloyd run from a kmeans++ seeding. Returns the converged state
/// and the per-iteration objective trace (used to verify monotone descent).
fn lloyd(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> (ClusterState, Vec<f64>) {
    let mut centroids = seed_centroids(points, k, rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();

    for _ in 0..MAX_LLOYD_ITERS {
        let (mut next, _) = assign_to_nearest(points, &centroids).expect("widths match");
        repair_empty_clusters(points, &centroids, &mut next, k);
        centroids = centroids_from_assignments(points, &next, k);
        trace.push(assignment_objective(points, &next, &centroids));
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
    }

    let objective = *trace.last().expect("at least one Lloyd iteration");
    (ClusterState { assignments, centroids, objective }, trace)
}

fn assignment_objective(points: &Matrix, assignments: &[usize], centroids: &Matrix) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| dist_sq(points.row(i), centroids.row(a)))
        .sum()
}

/// Clusters the rows of `points` into `k` groups, keeping the best of
/// `n_init` kmeans++ restarts by objective (ties keep the earliest restart).
/// Deterministic per seed.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, n_init: usize) -> Result<ClusterState> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::invalid_input(format!(
            "cluster count must satisfy 1 <= k <= {n} samples, got {k}"
        )));
    }
    if n_init == 0 {
        return Err(Error::invalid_input("n_init must be at least 1"));
    }
    if !points.is_finite() {
        return Err(Error::invalid_input("points contain non-finite values"));
    }

    let mut best: Option<ClusterState> = None;
    for restart in 0..n_init {
        let mut rng =
            ChaCha8Rng::seed_from_u64(stream_seed(seed, streams::KMEANS, restart as u64));
        let (state, _) = lloyd(points, k, &mut rng);
        if best.as_ref().map_or(true, |b| state.objective < b.objective) {
            best = Some(state);
        }
    }
    Ok(best.expect("n_init >= 1"))
}
