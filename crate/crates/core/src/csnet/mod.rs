//! Learned block sampling and reconstruction network.
//!
//! The sampling layer is a stride-`B` convolution whose filters are the rows
//! of a measurement matrix. A 1x1 convolution maps each block's measurements
//! to `B^2` values that are tiled back into an image, and a stack of
//! size-preserving convolutions refines the result. The network is trained
//! to reproduce its own input.

mod config;
mod format;
mod model;
mod train;

pub use config::CsNetConfig;
pub use format::{load_model, read_csnt, save_model, write_csnt};
pub use model::{
    build_model, build_model_with, deep_reconstruct, forward, initial_reconstruct, loss_and_gradients, sample,
    CsNetModel, DeepLayer, Forward,
};
pub use train::{
    read_loss_history, train, train_step, train_with_progress, write_loss_history, CsNetOptimizer, EpochRecord,
    LrStage, TrainSchedule, DESK_PATCH,
};
