//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument violates its domain constraint.
    #[error("{what} = {value} violates constraint: {constraint}")]
    Domain {
        what: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// A coefficient vector is used against a spectrum of different length.
    #[error("vector of length {got} is not paired with the spectrum ({expected} eigenvalues)")]
    Pairing { expected: usize, got: usize },

    /// A root-finding target lies outside the image of the supplied bracket.
    #[error("target {target} lies outside the bracket image [{lo_image}, {hi_image}]")]
    OutOfBracket {
        target: f64,
        lo_image: f64,
        hi_image: f64,
    },

    /// A grid scan ran out of points before its stopping condition held.
    #[error("grid exhausted after {points} points while {context}; increase k_max")]
    GridExhausted {
        points: usize,
        context: &'static str,
    },

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Instance refused by the self-similarity admission gate.
    #[error(
        "instance rejected by the self-similarity gate: worst ratio {worst_ratio} \
         at probe alpha = {witness_alpha}"
    )]
    Admission {
        witness_alpha: f64,
        worst_ratio: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
