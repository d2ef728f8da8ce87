//! Symmetric sparse grids on the unit cube and constructive squared-ReLU
//! network synthesis for permutation-invariant targets.
//!
//! The crate is organized around a hierarchical hat-function expansion of
//! functions vanishing on the boundary of `[0,1]^d`:
//!
//! * [`grid`] — dyadic levels, odd grid indices, the total-degree and
//!   energy-based index sets, and tensor hat functions with derivatives.
//! * [`targets`] — an analytic corpus of symmetric test functions with
//!   gradients, mixed second derivatives and reference norms.
//! * [`interpolant`] — hierarchical surplus coefficients and truncated
//!   expansions, in plain and symmetrized (orbit-canonical) form.
//! * [`symmetry`] — permutation orbits of level/index pairs, integer
//!   partition counting, and the exact Vandermonde symmetrization
//!   coefficients used by the network builders.
//! * [`factored`] — exact `L²`/energy inner products for sums of
//!   tensor-product piecewise polynomials.
//! * [`net`] — a layered squared-ReLU network representation plus builders
//!   for product trees, smoothed hats, symmetrized basis networks and full
//!   expansion networks.
//! * [`norms`] — quadrature-based `L²`, energy and `H¹` error estimation.
//!
//! All operations are pure functions of their inputs; everything is safe to
//! share across threads once constructed.

pub mod factored;
pub mod grid;
pub mod interpolant;
pub mod net;
pub mod norms;
pub mod symmetry;
pub mod targets;
pub mod vandermonde;

use thiserror::Error;

/// Hard cap on the ambient dimension. Counting past this explodes beyond
/// desk scale and the fixed-width index vectors assume it.
pub const MAX_DIM: usize = 16;

/// Cap on the refinement level `n`; keeps `4^(n+d)`-scale integer
/// arithmetic inside `u128`.
pub const MAX_LEVEL: u8 = 25;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("dimension must lie in 1..={max}, got {got}")]
    DimensionOutOfRange { got: usize, max: usize },
    #[error("refinement level must lie in 1..={max}, got {got}")]
    LevelOutOfRange { got: u32, max: u32 },
    #[error("level vector component must be >= 1")]
    InvalidLevel,
    #[error("index {index} is not an odd integer in [1, 2^{level})")]
    InvalidOddIndex { level: u8, index: u32 },
    #[error("level and index vectors have mismatched lengths {levels} vs {indices}")]
    PairLengthMismatch { levels: usize, indices: usize },
    #[error("unknown builtin target `{0}`")]
    UnknownTarget(String),
    #[error("target does not provide the mixed derivative D^(2,...,2)f")]
    MissingMixedDerivative,
    #[error("target does not expose a separable form")]
    MissingSeparableForm,
    #[error("target failed the permutation-invariance spot check (max deviation {max_dev:e})")]
    AsymmetricTarget { max_dev: f64 },
    #[error("smoothing parameter delta={delta} outside the valid range (0, {limit})")]
    DeltaOutOfRange { delta: f64, limit: f64 },
    #[error("expected a {expected} surplus table")]
    WrongTableKind { expected: &'static str },
    #[error("level/index pair is not canonical (levels non-decreasing, indices sorted per block)")]
    NonCanonicalPair,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("quadrature cell level {cell_level} is coarser than the finest dyadic level {required}")]
    CellLevelTooCoarse { cell_level: u8, required: u8 },
    #[error("quadrature sample count {got} below the minimum {min}")]
    SampleCountTooSmall { got: usize, min: usize },
    #[error("Vandermonde coefficients were built for dimension {coeffs} but the basis has dimension {basis}")]
    CoefficientDimensionMismatch { coeffs: usize, basis: usize },
    #[error("unsupported schema `{got}`, expected `{expected}`")]
    SchemaMismatch { got: String, expected: &'static str },
    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
