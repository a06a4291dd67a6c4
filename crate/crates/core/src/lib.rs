//! Error-correction recurrent networks for time-series forecasting, with
//! plain RNN and LSTM baselines, hand-written backpropagation through time,
//! a financial data pipeline, evaluation metrics, and a trading backtest.
//!
//! Everything numerical is generic over the scalar type (`f32` or `f64`)
//! through the [`scalar::Scalar`] trait; the `*64` aliases below are the
//! concrete types the higher-level pipeline and the CLI work with.

pub mod backtest;
pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod ecnn;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod smoothing;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};

pub type Vector64 = linalg::Vector<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type EcnnParams64 = ecnn::EcnnParams<f64>;
pub type RnnParams64 = baselines::RnnParams<f64>;
pub type LstmParams64 = baselines::LstmParams<f64>;
pub type WindowedDataset64 = data::WindowedDataset<f64>;
