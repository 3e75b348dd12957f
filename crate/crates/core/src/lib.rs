//! Exact, spectral, regression and neural estimators of the Cheeger
//! (edge-expansion) constant of connected regular graphs.
//!
//! The pipeline: [`graph::generate_regular`] draws seeded random regular
//! graphs, [`cheeger::cheeger_exact`] computes `h(G)` by exhaustive search,
//! [`spectral::spectrum`] computes adjacency eigenvalues, and the
//! [`estimators`] and [`nn`] modules predict `h(G)` from the leading
//! eigenvalues. [`experiments`] persists datasets and produces reports.

pub mod cheeger;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod graph;
pub mod nn;
pub mod seed;
pub mod spectral;

pub use cheeger::{cheeger_exact, cheeger_exact_parallel, cheeger_naive, CheegerResult};
pub use error::{Error, Result};
pub use estimators::{
    bounds, deviation, fit_linear, predict_linear, BoundSet, LinearModel, Sample,
};
pub use experiments::{Dataset, ExperimentConfig, GraphRecord, ReportTable};
pub use graph::{generate_regular, Graph, Violation};
pub use nn::{
    mlp_forward, mlp_grad, mlp_init, model_select, train, MlpModel, Regime, TrainConfig,
    TrainReport,
};
pub use seed::Seed;
pub use spectral::{spectral_gap, spectrum, Spectrum};
