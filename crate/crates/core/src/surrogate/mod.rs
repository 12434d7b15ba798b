//! LSTM surrogate of the solver: `(t, x)` sequences along the slab mapped to
//! `(T, q_r, q_c)`.

mod lstm;
mod model;
mod normalize;
mod reduce;
mod train;

pub use lstm::{
    forward_sequence, lstm_cell, sequence_loss, sequence_loss_and_grad, LstmParams, LstmState, Mat,
    PARAM_BLOCKS,
};
pub use model::{
    profile_windows, split_windows, Checkpoint, IdentityPredictor, Predictor, SplitMode, Surrogate,
    SurrogateConfig, TrainReport, CHECKPOINT_VERSION, INPUT_FEATURES, TARGET_FEATURES,
};
pub use normalize::Normalizer;
pub use reduce::{
    inverse_covariance, mahalanobis, mahalanobis_reduce, mahalanobis_reduce_with_metric,
};
pub use train::{dataset_mse, init_params, train_bptt, LossRecord, Sequence, TrainHyper};
