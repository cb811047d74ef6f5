//! Numerical toolkit for linear singular functional differential equations
//!
//! ```text
//! x'(t) = -k p(t) x(t) + (T x)(t) + f(t),   t in (0, 1],
//! ```
//!
//! where `p` has a non-integrable singularity at `t = 0` and `T = T+ - T-`
//! is a regular operator from `C[0,1]` to `L[0,1]`.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`] and [`quadrature`]: graded meshes, piecewise-linear grid
//!   functions and exact weighted integration against the singular kernels.
//! - [`space`]: singular coefficients, weights, the solution-space norms and
//!   membership tests.
//! - [`operator`]: regular operators built from point-evaluation and kernel
//!   terms.
//! - [`model`]: closed-form solutions of the model equation, the inverse
//!   operators and spectral-radius estimation.
//! - [`solver`]: Picard and collocation solvers for the full problems.
//! - [`criteria`] and [`sharpness`]: the sharp solvability regions and the
//!   extremal two-point determinant search behind them.
//! - [`weighted`]: equations whose every right-hand term carries the
//!   singular factor.

// `!(x > 0.0)` is used on purpose so that NaN is rejected as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod mesh;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod sharpness;
pub mod solver;
pub mod space;
pub mod weighted;

pub use error::{Error, Result};
pub use mesh::{GridFunction, Mesh};
pub use operator::{Deviation, KernelTerm, PointTerm, RegularOperator, VolterraClass};
pub use space::{Extended, SingularCoefficient, SpaceTag, WeightFunction};
