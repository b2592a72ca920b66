//! Simulation and verification of Pólya and Cox point-process flows on a
//! discretized window.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dist;
pub mod error;
pub mod flows;
pub mod kernels;
pub mod mc;
pub mod measures;
pub mod rng;
pub mod samplers;
pub mod suites;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use flows::{backward_resample, exit_limit, sample_extremal_flow, simulate_path, Path};
pub use kernels::{FlowSpec, Variant};
pub use measures::{CellMeasure, PointConfig, StepFunction, Window};
pub use rng::RngStream;
