//! Exceptional-point localization for parameter-dependent complex-symmetric
//! matrices: orbit tracing, eigenvalue-exchange detection and a Gaussian
//! process surrogate search.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod epsearch;
pub mod error;
pub mod gpr;
pub mod grouping;
pub mod linalg;
pub mod models;
pub mod pipeline;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use epsearch::{brute_force_ep, iterate, EpResult, SearchConfig, Status};
pub use gpr::{fit, FitOptions, GprModel, Hyperparameters, Prediction};
pub use grouping::{group_paths, ExchangeReport, GroupingOptions, TrainingPair};
pub use models::{trace_orbit, MatrixFamily, Orbit, OrbitSpectrumSet, ParameterMap};
pub use pipeline::{find_eps, PipelineOptions};
