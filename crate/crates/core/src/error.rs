//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong across the library.
///
/// Payloads are plain `f64`/`usize` so the error type stays non-generic;
/// scalar-generic callers convert with `to_f64` when constructing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is not supported (expected 1, 2 or 3)")]
    BadDimension(usize),

    #[error("negative cutoff {0} is not a valid frequency grid radius")]
    BadCutoff(i64),

    #[error("fields live on different grids (d={d1}, R={r1} vs d={d2}, R={r2})")]
    GridMismatch { d1: usize, r1: i64, d2: usize, r2: i64 },

    #[error("component counts {0} and {1} cannot be combined")]
    ComponentMismatch(usize, usize),

    #[error("operation needs a {expected}-component field, got {got}")]
    WrongComponentCount { expected: usize, got: usize },

    #[error("requested cutoff {requested} exceeds the admissible cutoff {limit}")]
    CutoffTooLarge { requested: i64, limit: i64 },

    #[error("a grid of {n} points per axis cannot resolve modes up to |ξ|∞ = {r}")]
    GridTooCoarse { n: usize, r: i64 },

    #[error("field violates Hermitian symmetry (drift {drift:.3e}, tolerance {tol:.3e})")]
    HermitianDrift { drift: f64, tol: f64 },

    #[error(
        "synthesis of a Hermitian field left an imaginary residue {residue:.3e} \
         (tolerance {tol:.3e} relative to the field amplitude)"
    )]
    ImaginaryResidue { residue: f64, tol: f64 },

    #[error("{what} contains a non-finite value")]
    NonFinite { what: &'static str },

    #[error("solution blew up (non-finite value) at t = {time}, stage {stage}")]
    BlowUp { time: f64, stage: usize },

    #[error("flow map degenerates at t = {time}: det Dφ = {det:.6e} ≤ 0 at grid node {node:?}")]
    DegenerateFlow { time: f64, node: Vec<usize>, det: f64 },

    #[error("sample time {time} is not a multiple of the step size 1/{nsteps}")]
    SampleTimeOffGrid { time: f64, nsteps: usize },

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("rate fit needs at least two valid (R, error) points, got {valid}")]
    FitUnderdetermined { valid: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{file}:{line}: {msg}")]
    MalformedCsv { file: String, line: usize, msg: String },
}
