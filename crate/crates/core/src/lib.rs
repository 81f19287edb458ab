//! Spectral regularization of statistical linear inverse problems in the
//! sequence model, with the Raus-Gfrerer (RG) a-posteriori parameter choice.
//!
//! The operator is represented by the eigenvalues of `A = T*T`, so every
//! quantity is a weighted sum over spectral coefficients. The crate provides:
//!
//! - [`Spectrum`] / [`SpectralVector`] / [`ProblemInstance`]: the sequence
//!   model `z = A x + delta * zeta`, spectral calculus, effective dimension
//!   `N(lambda)` and the calibration functions `rho_N`, `Theta_{rho_N}`.
//! - [`Scheme`]: the five regularization filter families (Tikhonov, iterated
//!   Tikhonov, spectral cutoff, Landweber, Showalter) with residual/filter
//!   evaluation and numeric verification of the filter axioms.
//! - [`noise`]: Gaussian white-noise realizations of `zeta` in the eigenbasis,
//!   power-bounded deterministic noise, weighted noise norms, and membership
//!   tests for the good-noise set `Z_kappa`.
//! - [`rules`]: the geometric grid, the statistical RG rule, its deterministic
//!   general-noise counterpart, emergency thresholds, and oracle baselines.
//! - [`selfsim`]: the self-similarity admission gate on `x - x0` (filter form
//!   and projector form).
//! - [`mc`] / [`lemmas`] / [`report`]: seeded, replicable Monte Carlo
//!   experiments measuring RMSE, oracle-inequality ratios, convergence-rate
//!   slopes, concentration counts, and step growth, exported as CSV/JSON.
//!
//! Everything is deterministic given a seed: per-replicate randomness is
//! derived counter-style, and aggregation is order-independent, so any worker
//! count produces identical results.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod lemmas;
pub mod mc;
pub mod noise;
mod numerics;
pub mod report;
pub mod rules;
pub mod schemes;
pub mod selfsim;
pub mod spectrum;

pub use config::{Experiment, ExperimentConfig};
pub use error::{Error, Result};
pub use noise::{DeltaBound, NoiseSpec};
pub use numerics::{fmt_f64, geometric_grid};
pub use report::{DeltaRow, MCReport, OutputFormat};
pub use rules::{Grid, GridPoint, GridTables, RuleConfig, SelectionResult, StopKind};
pub use schemes::{AxiomReport, Scheme};
pub use selfsim::{KnConfig, KnOutcome, KnReport};
pub use spectrum::{ProblemInstance, SpectralVector, Spectrum};

/// Version string stamped into JSON reports.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
