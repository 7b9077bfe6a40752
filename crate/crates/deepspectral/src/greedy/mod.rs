//! Kmeans clustering and the rotation that exposes its worst direction.
//!
//! After smoothing, embeddings are clustered with Kmeans, and the within-class
//! scatter of the result is eigendecomposed. Rotating embeddings into that
//! eigenbasis sorts coordinates from best to worst cluster structure; samples
//! are then pulled toward their centroid's projection along the single worst
//! direction while the remaining coordinates regress to themselves. The loss
//! helpers here measure those two parts and their sum.

mod kmeans;
mod rotation;

pub use kmeans::{assign_to_nearest, kmeans, ClusterState};
pub use rotation::{
    build_target, greedy_loss, joint_loss, scatter_matrix, solve_rotation, spectral_loss,
    GreedyRotation,
};
