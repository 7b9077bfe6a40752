//! Within-class scatter, its eigenbasis, and the pulled-target construction.

use super::kmeans::ClusterState;
use crate::error::{Error, Result};
use crate::numerics::{sym_eig, Matrix};

/// Orthogonal rotation into the scatter eigenbasis, worst direction last.
#[derive(Debug, Clone)]
pub struct GreedyRotation {
    /// `d x d` orthogonal matrix; column `j` is the eigenvector of the
    /// scatter matrix with the `j`-th smallest eigenvalue.
    pub v: Matrix,
    /// Scatter eigenvalues in ascending order; their sum is the Kmeans
    /// objective.
    pub eigenvalues: Vec<f64>,
    /// The scatter matrix the rotation was solved from.
    pub scatter: Matrix,
}

fn check_state(points: &Matrix, state: &ClusterState) -> Result<()> {
    if state.assignments.len() != points.rows() {
        return Err(Error::invalid_input(format!(
            "{} assignments for {} samples",
            state.assignments.len(),
            points.rows()
        )));
    }
    if state.centroids.cols() != points.cols() {
        return Err(Error::invalid_input(format!(
            "centroid width {} does not match sample width {}",
            state.centroids.cols(),
            points.cols()
        )));
    }
    let k = state.centroids.rows();
    if let Some(&bad) = state.assignments.iter().find(|&&a| a >= k) {
        return Err(Error::invalid_input(format!(
            "assignment {bad} out of range for {k} clusters"
        )));
    }
    Ok(())
}

/// Sum over samples of the outer product of the deviation from the assigned
/// centroid. Symmetric positive semidefinite; its trace is the Kmeans
/// objective.
pub fn scatter_matrix(points: &Matrix, state: &ClusterState) -> Result<Matrix> {
    check_state(points, state)?;
    let d = points.cols();
    let mut s = Matrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (i, &a) in state.assignments.iter().enumerate() {
        let row = points.row(i);
        let mu = state.centroids.row(a);
        for j in 0..d {
            diff[j] = row[j] - mu[j];
        }
        for r in 0..d {
            // diff[r]*diff[c] == diff[c]*diff[r], so s stays exactly symmetric.
            let dr = diff[r];
            let target = s.row_mut(r);
            for (c, &dc) in diff.iter().enumerate() {
                target[c] += dr * dc;
            }
        }
    }
    Ok(s)
}

/// Eigendecomposes the scatter matrix; ascending eigenvalue order puts the
/// tightest cluster direction first and the worst direction in the last
/// column.
pub fn solve_rotation(scatter: &Matrix) -> Result<GreedyRotation> {
    let eig = sym_eig(scatter)?;
    Ok(GreedyRotation { v: eig.vectors, eigenvalues: eig.values, scatter: scatter.clone() })
}

/// Builds the regression target: `points` rotated by `V`, with the last
/// coordinate replaced by the projection of each sample's centroid onto the
/// worst direction. Returns the target matrix and the replacement column,
/// which takes at most one distinct value per cluster.
pub fn build_target(
    points: &Matrix,
    rot: &GreedyRotation,
    state: &ClusterState,
) -> Result<(Matrix, Vec<f64>)> {
    check_state(points, state)?;
    if rot.v.rows() != points.cols() {
        return Err(Error::invalid_input(format!(
            "rotation is {}x{} but samples have width {}",
            rot.v.rows(),
            rot.v.cols(),
            points.cols()
        )));
    }
    let d = points.cols();
    let last = d - 1;
    let mut y = points.matmul(&rot.v);

    // Per-cluster centroid projection onto the worst direction, computed
    // once per cluster so equal assignments give bitwise equal targets.
    let v_last = rot.v.col(last);
    let pulled: Vec<f64> = (0..state.centroids.rows())
        .map(|c| state.centroids.row(c).iter().zip(&v_last).map(|(a, b)| a * b).sum())
        .collect();

    let mut column = Vec::with_capacity(points.rows());
    for (i, &a) in state.assignments.iter().enumerate() {
        y.set(i, last, pulled[a]);
        column.push(pulled[a]);
    }
    Ok((y, column))
}

fn check_loss_shapes(embeddings: &Matrix, v: &Matrix, targets: &Matrix) -> Result<()> {
    if v.rows() != v.cols() || v.rows() != embeddings.cols() {
        return Err(Error::invalid_input(format!(
            "rotation is {}x{} but embeddings have width {}",
            v.rows(),
            v.cols(),
            embeddings.cols()
        )));
    }
    if targets.shape() != (embeddings.rows(), embeddings.cols()) {
        return Err(Error::invalid_input(format!(
            "targets are {:?} but embeddings are {:?}",
            targets.shape(),
            embeddings.shape()
        )));
    }
    Ok(())
}

/// Squared error of the rotated embeddings against the target on the last
/// coordinate only: the pull toward centroid projections.
pub fn greedy_loss(embeddings: &Matrix, rot: &GreedyRotation, targets: &Matrix) -> Result<f64> {
    check_loss_shapes(embeddings, &rot.v, targets)?;
    let last = embeddings.cols() - 1;
    let v_last = rot.v.col(last);
    let mut total = 0.0;
    for i in 0..embeddings.rows() {
        let rotated: f64 = embeddings.row(i).iter().zip(&v_last).map(|(a, b)| a * b).sum();
        let r = rotated - targets.get(i, last);
        total += r * r;
    }
    Ok(total)
}

/// Squared error of the rotated embeddings against the target on every
/// coordinate except the last: the self-regression part.
pub fn spectral_loss(embeddings: &Matrix, v: &Matrix, targets: &Matrix) -> Result<f64> {
    check_loss_shapes(embeddings, v, targets)?;
    let rotated = embeddings.matmul(v);
    let last = embeddings.cols() - 1;
    let mut total = 0.0;
    for i in 0..rotated.rows() {
        for c in 0..last {
            let r = rotated.get(i, c) - targets.get(i, c);
            total += r * r;
        }
    }
    Ok(total)
}

/// Full squared error of the rotated embeddings against the target. Equals
/// the spectral part plus the greedy part up to summation rounding.
pub fn joint_loss(embeddings: &Matrix, v: &Matrix, targets: &Matrix) -> Result<f64> {
    check_loss_shapes(embeddings, v, targets)?;
    let rotated = embeddings.matmul(v);
    let mut total = 0.0;
    for i in 0..rotated.rows() {
        for c in 0..rotated.cols() {
            let r = rotated.get(i, c) - targets.get(i, c);
            total += r * r;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::kmeans;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_cluster_pair() -> (Matrix, ClusterState) {
        let points = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]);
        let state = ClusterState {
            assignments: vec![0, 0],
            centroids: Matrix::from_rows(&[vec![1.0, 0.0]]),
            objective: 2.0,
        };
        (points, state)
    }

    #[test]
    fn scatter_hand_case_and_trace_identity() {
        let (points, state) = one_cluster_pair();
        let s = scatter_matrix(&points, &state).unwrap();
        assert_eq!(s, Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]));
        assert!((s.trace() - state.objective).abs() < 1e-10);
    }

    #[test]
    fn zero_spread_gives_zero_scatter() {
        let points = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![5.0, 5.0]]);
        let state = ClusterState {
            assignments: vec![0, 0, 1],
            centroids: Matrix::from_rows(&[vec![1.0, 2.0], vec![5.0, 5.0]]),
            objective: 0.0,
        };
        let s = scatter_matrix(&points, &state).unwrap();
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn rotation_of_diagonal_scatter_sorts_axes() {
        let s = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]);
        let rot = solve_rotation(&s).unwrap();
        assert_eq!(rot.eigenvalues, vec![0.0, 2.0]);
        // Tightest direction first (e2), worst direction last (e1).
        assert_eq!(rot.v.col(0), vec![0.0, 1.0]);
        assert_eq!(rot.v.col(1), vec![1.0, 0.0]);
    }

    #[test]
    fn isotropic_scatter_keeps_the_identity_rotation() {
        let s = Matrix::identity(3).scale(0.7);
        let rot = solve_rotation(&s).unwrap();
        assert!(rot.v.sub(&Matrix::identity(3)).max_abs() < 1e-12);
        assert!(rot.eigenvalues.iter().all(|&l| (l - 0.7).abs() < 1e-12));
    }

    #[test]
    fn rotating_points_conjugates_scatter_and_keeps_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points = Matrix::from_fn(12, 2, |_, _| rng.gen_range(-2.0..2.0));
        let state = kmeans(&points, 3, 5, 3).unwrap();
        let s = scatter_matrix(&points, &state).unwrap();

        let (c, sn) = (0.6_f64.cos(), 0.6_f64.sin());
        let q = Matrix::from_rows(&[vec![c, -sn], vec![sn, c]]);
        let rotated_state = ClusterState {
            assignments: state.assignments.clone(),
            centroids: state.centroids.matmul(&q),
            objective: state.objective,
        };
        let s_rot = scatter_matrix(&points.matmul(&q), &rotated_state).unwrap();

        let conjugated = q.matmul_tn(&s.matmul(&q));
        assert!(s_rot.sub(&conjugated).max_abs() < 1e-8);

        let ev_a = solve_rotation(&s).unwrap().eigenvalues;
        let ev_b = solve_rotation(&s_rot).unwrap().eigenvalues;
        for (a, b) in ev_a.iter().zip(&ev_b) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn target_hand_case_pulls_both_points_to_the_centroid_projection() {
        let (points, state) = one_cluster_pair();
        let s = scatter_matrix(&points, &state).unwrap();
        let rot = solve_rotation(&s).unwrap();
        let (y, column) = build_target(&points, &rot, &state).unwrap();
        assert_eq!(y, Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]));
        assert_eq!(column, vec![1.0, 1.0]);
    }

    #[test]
    fn points_already_at_centroids_make_replacement_a_no_op() {
        let points = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let state = ClusterState {
            assignments: vec![0, 0, 1],
            centroids: Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]),
            objective: 0.0,
        };
        let rot = solve_rotation(&scatter_matrix(&points, &state).unwrap()).unwrap();
        let (y, _) = build_target(&points, &rot, &state).unwrap();
        let plain = points.matmul(&rot.v);
        assert!(y.sub(&plain).max_abs() < 1e-12);
    }

    #[test]
    fn target_column_has_at_most_k_distinct_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points = Matrix::from_fn(40, 3, |_, _| rng.gen_range(-1.0..1.0));
        let state = kmeans(&points, 4, 11, 3).unwrap();
        let rot = solve_rotation(&scatter_matrix(&points, &state).unwrap()).unwrap();
        let (_, column) = build_target(&points, &rot, &state).unwrap();

        let mut distinct: Vec<u64> = column.iter().map(|v| v.to_bits()).collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() <= 4, "{} distinct target values", distinct.len());
    }

    #[test]
    fn losses_decompose_and_mask_the_right_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let points = Matrix::from_fn(25, 3, |_, _| rng.gen_range(-2.0..2.0));
        let state = kmeans(&points, 3, 23, 3).unwrap();
        let rot = solve_rotation(&scatter_matrix(&points, &state).unwrap()).unwrap();
        let (y, _) = build_target(&points, &rot, &state).unwrap();

        // Pretend current embeddings drifted away from the clustered ones.
        let fx = Matrix::from_fn(25, 3, |i, j| points.get(i, j) + 0.1 * ((i + j) as f64).sin());

        let g = greedy_loss(&fx, &rot, &y).unwrap();
        let s = spectral_loss(&fx, &rot.v, &y).unwrap();
        let j = joint_loss(&fx, &rot.v, &y).unwrap();
        assert!((j - (s + g)).abs() < 1e-10 * (1.0 + j));

        // Perturbing along a non-last eigenvector leaves the greedy part
        // untouched and moves the spectral part.
        let v0 = rot.v.col(0);
        let shifted = Matrix::from_fn(25, 3, |i, j| fx.get(i, j) + 0.5 * v0[j]);
        let g_shifted = greedy_loss(&shifted, &rot, &y).unwrap();
        assert!((g_shifted - g).abs() < 1e-9 * (1.0 + g));
        let s_shifted = spectral_loss(&shifted, &rot.v, &y).unwrap();
        assert!((s_shifted - s).abs() > 1e-6);
    }

    #[test]
    fn perfect_fit_gives_zero_greedy_loss() {
        let (points, state) = one_cluster_pair();
        let rot = solve_rotation(&scatter_matrix(&points, &state).unwrap()).unwrap();
        let (y, _) = build_target(&points, &rot, &state).unwrap();
        // Embeddings whose rotation lands exactly on the target: rotate the
        // target back (V is orthogonal, so inverse = transpose).
        let fitted = y.matmul_nt(&rot.v);
        let g = greedy_loss(&fitted, &rot, &y).unwrap();
        assert!(g < 1e-20, "greedy loss {g}");
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let (points, state) = one_cluster_pair();
        let rot = solve_rotation(&scatter_matrix(&points, &state).unwrap()).unwrap();
        let (y, _) = build_target(&points, &rot, &state).unwrap();

        let narrow = Matrix::zeros(2, 1);
        assert!(matches!(greedy_loss(&narrow, &rot, &y), Err(Error::InvalidInput(_))));
        let wrong_state = ClusterState {
            assignments: vec![0],
            centroids: state.centroids.clone(),
            objective: 0.0,
        };
        assert!(matches!(
            scatter_matrix(&points, &wrong_state),
            Err(Error::InvalidInput(_))
        ));
        let bad_assign = ClusterState {
            assignments: vec![0, 7],
            centroids: state.centroids.clone(),
            objective: 0.0,
        };
        assert!(matches!(scatter_matrix(&points, &bad_assign), Err(Error::InvalidInput(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scatter_rotation_invariants(seed in 0u64..1000, n in 6usize..20, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 3;
            let points = Matrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
            let state = kmeans(&points, k, seed, 2).unwrap();
            let s = scatter_matrix(&points, &state).unwrap();
            let rot = solve_rotation(&s).unwrap();

            // Orthogonality and the trace identity.
            let gram = rot.v.matmul_tn(&rot.v);
            prop_assert!(gram.sub(&Matrix::identity(d)).frobenius_norm() < 1e-10);
            let ev_sum: f64 = rot.eigenvalues.iter().sum();
            prop_assert!((ev_sum - state.objective).abs() < 1e-8 * (1.0 + state.objective));
            prop_assert!((s.trace() - state.objective).abs() < 1e-10 * (1.0 + state.objective));

            // PSD up to rounding, ascending order.
            prop_assert!(rot.eigenvalues.iter().all(|&l| l > -1e-8));
            prop_assert!(rot.eigenvalues.windows(2).all(|w| w[0] <= w[1]));

            // Rotation preserves pairwise distances.
            let rotated = points.matmul(&rot.v);
            for i in 0..n {
                for j in (i + 1)..n {
                    let orig: f64 = (0..d)
                        .map(|c| (points.get(i, c) - points.get(j, c)).powi(2))
                        .sum();
                    let rot_d: f64 = (0..d)
                        .map(|c| (rotated.get(i, c) - rotated.get(j, c)).powi(2))
                        .sum();
                    prop_assert!((orig.sqrt() - rot_d.sqrt()).abs() < 1e-8);
                }
            }
        }
    }
}
