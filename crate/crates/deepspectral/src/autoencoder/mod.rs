//! Dense autoencoder trained from scratch: mirrored relu layers around a
//! linear embedding, Adam updates, reconstruction pretraining, and
//! regression of rotated embeddings onto cluster targets.
//!
//! The encoder half is the trainable map the rest of the pipeline consumes;
//! the decoder exists to make reconstruction pretraining possible and is
//! frozen afterwards.

mod checkpoint;
mod gradcheck;
mod model;
mod optim;
mod train;

pub use checkpoint::{load_model, save_model};
pub use gradcheck::{grad_check, CheckLoss, GradCheckReport};
pub use model::{init_model, Activation, Layer, MlpModel};
pub use optim::AdamState;
pub use train::{pretrain, train_joint_step, JointOptions, LossColumns, PretrainLog, PretrainOptions};
