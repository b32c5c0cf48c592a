// SPDX-License-Identifier: Apache-2.0
//! Graph-to-sequence model: tensors, autodiff, encoder/decoder, training.

pub mod io;
pub mod metrics;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use metrics::{kendall_tau, spearman_rho, MetricError};
pub use model::{DecoderState, Encoded, GraphInput, Model, ModelConfig, ModelError};
pub use tape::{ParamStore, Tape, Var};
pub use tensor::{Scalar, Tensor};
pub use train::{
    masked_weighted_nll, AdamConfig, Sample, TrainConfig, Trainer, WeightSchedule,
};
