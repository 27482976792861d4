//! Attention temporal graph convolutional network for traffic forecasting.
//!
//! A small reverse-mode autodiff engine ([`tensor`]), graph normalization
//! ([`graph`]), the forecasting models ([`model`]), data preparation
//! ([`data`]) and the training and evaluation loop ([`train_eval`]).

pub mod csvio;
pub mod data;
pub mod error;
pub mod exec;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod tensor;
pub mod train_eval;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use graph::RoadGraph;
pub use model::{ModelDims, ModelKind, ModelParams};
pub use tensor::{Tape, Tensor, Var};
