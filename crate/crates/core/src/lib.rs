// SPDX-License-Identifier: Apache-2.0
//! Variable-order prediction for binary decision diagrams.

pub mod blif;
pub mod decode;
pub mod featurize;
pub mod fixtures;
pub mod gen;
pub mod neural;
pub mod order;
pub mod revsynth;
pub mod robdd;

pub type Tensor32 = neural::Tensor<f32>;
pub type Tensor64 = neural::Tensor<f64>;
pub type Model32 = neural::Model<f32>;
pub type Model64 = neural::Model<f64>;
pub type Trainer32 = neural::Trainer<f32>;
pub type Trainer64 = neural::Trainer<f64>;
