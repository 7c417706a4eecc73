//! Numerical continuation and verification for the nonlocal Kirchhoff problem
//!
//! ```text
//! -(g(|u'|_2^2) u + u^r)'' = a u + b u^p  on (0, 1),  u > 0,  u(0) = u(1) = 0.
//! ```
//!
//! The nonlocal coefficient is frozen to `1/lambda`, which gives a local
//! problem in `u`. The substitution `w = u/lambda + u^r` turns that into the
//! semilinear problem `-w'' = a q(w) + b q(w)^p`, whose positive solutions form
//! a continuum emanating from `(lambda_1/a, 0)`. [`continuation`] traces that
//! continuum, [`kirchhoff`] locates the zeros of `h = 1/lambda - g(|u'|_2^2)`
//! along it (each zero is a solution of the original problem), and [`audit`]
//! checks every result against the known necessary conditions and bounds.

// Negated comparisons are how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod continuation;
pub mod elliptic;
pub mod error;
pub mod exec;
pub mod export;
pub mod kirchhoff;
pub mod model;
pub mod pa2;
pub mod qmap;
pub mod scenarios;
pub mod tridiag;

pub use continuation::{Branch, BranchPoint, ContinuationSettings, Direction, StopReason};
pub use elliptic::{EigenPair, GridFunction, Mesh1D};
pub use error::{Error, NewtonFailure, Result};
pub use exec::ExecMode;
pub use kirchhoff::{P1Solution, TheoremCOutcome};
pub use model::{GFunction, ProblemParams, Regime, ScenarioConfig, ToleranceSettings};
pub use qmap::ChangeOfVariables;
