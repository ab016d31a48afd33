//! Frequency-domain waveform inversion for 2-D VTI acoustic media.
//!
//! The crate implements an iteratively refined wavefield reconstruction
//! inversion: an ADMM scheme that alternates between
//!
//! 1. reconstructing per-frequency wavefields that jointly honour the wave
//!    equation and the observed data (in a penalised least-squares sense),
//! 2. a model update that exploits the bilinearity of the wave equation in
//!    (wavefield, model) through an exact model-linear re-arrangement,
//! 3. proximal updates for total-variation regularisation,
//! 4. projection onto physical bound constraints, and
//! 5. dual (running-sum) updates that iteratively refine both fits.
//!
//! Media are vertical-transverse-isotropic acoustic, parametrised by the
//! vertical velocity `v0` and the Thomsen parameters `epsilon` and `delta`.
//! All distances are kilometres, velocities km/s, frequencies Hz
//! (`omega = 2*pi*f` rad/s).
//!
//! Module map:
//! - [`mesh`]: grid, PML profile, staggered finite-difference operators.
//! - [`medium`]: model parametrisations, conversions, bounds, model file I/O.
//! - [`linalg`]: CSR sparse matrices, direct/iterative solvers, power iteration.
//! - [`wave`]: wave-operator assemblies (second-order, first-order
//!   stiffness/compliance, reduced fourth-order) and forward modelling.
//! - [`bilinear`]: model-linear re-arrangements `A(m)u - s = L(u)m - y(u)`,
//!   virtual sources, and normal-system accumulation.
//! - [`survey`]: acquisition geometry, sampling operators, data sets, noise.
//! - [`inversion`]: the ADMM loop, hyper-parameter tuning, frequency
//!   continuation, iteration logging.

pub mod bilinear;
pub mod inversion;
pub mod linalg;
pub mod medium;
pub mod mesh;
pub mod survey;
pub mod wave;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum WriError {
    /// Matrix/vector dimensions do not conform for the requested operation.
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    /// A factorisation or closed-form inverse hit a (numerically) singular system.
    #[error("singular system in {0}")]
    Singular(String),
    /// An iterative solver ran out of iterations before reaching its tolerance.
    #[error("{what} did not converge: {iterations} iterations, residual {residual:.3e}")]
    NotConverged {
        what: String,
        iterations: usize,
        residual: f64,
    },
    /// Physically or structurally invalid input (bounds, grid, geometry, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Underlying I/O failure while reading or writing survey/model files.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    /// A structured file (header, manifest) failed to parse.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, WriError>;
