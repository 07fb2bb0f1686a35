//! Online bagging ensembles of Hoeffding trees for data-stream classification, with
//! sequential, per-instance parallel and mini-batch executors, a framed TCP transport, and
//! accuracy, delay, throughput and energy accounting.
//!
//! Numerics are generic over [`num::Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

pub mod change_detection;
pub mod clock;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod executor;
pub mod metrics;
pub mod netstream;
pub mod num;
pub mod tree;

pub use error::{Error, Result};

pub type Instance = data::Instance<f64>;
pub type StreamRecord = data::StreamRecord<f64>;
pub type HoeffdingTree = tree::HoeffdingTree<f64>;
pub type Adwin = change_detection::Adwin<f64>;
pub type Ensemble = ensemble::Ensemble<f64>;

pub type InstanceF32 = data::Instance<f32>;
pub type HoeffdingTreeF32 = tree::HoeffdingTree<f32>;
pub type AdwinF32 = change_detection::Adwin<f32>;
pub type EnsembleF32 = ensemble::Ensemble<f32>;
