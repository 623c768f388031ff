//! Summability matrices acting on sequences of extended-real random
//! variables, with exact convergence diagnostics.
//!
//! The crate models random variables as step functions on `[0, 1)` with
//! dyadic breakpoints, so event probabilities are exact rationals. Values
//! live in the two-dimensional vector space of extended reals `a + b*inf`,
//! which makes matrix rows applicable to sequences with infinite entries.
//! On top of that sit:
//!
//! - [`summability`]: lazy infinite matrices, row application with
//!   certified truncation, and a finite-depth regularity checker;
//! - [`diagnostics`]: exact profiles for convergence in probability,
//!   almost-sure (windowed sup-tail), and `L_p` modes, plus pointwise
//!   checks and a clearly-approximate Monte Carlo path;
//! - [`sequences`]: builtin families, including the sliding-block family
//!   whose arithmetic means fail to converge in probability;
//! - [`experiment`]: a config-driven runner producing deterministic
//!   JSON/CSV reports.
//!
//! Core types are generic over the scalar via [`scalar::Scalar`]
//! (`f32`/`f64`); event measures always use exact dyadic/rational
//! arithmetic. The aliases below fix the default `f64` scalar.

pub mod diagnostics;
pub mod dyadic;
pub mod error;
pub mod experiment;
pub mod extended_real;
pub mod scalar;
pub mod sequences;
pub mod step_rv;
pub mod summability;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar for the CLI and builtin families.
pub type Real = f64;

pub type ExtReal = extended_real::ExtendedReal<Real>;
pub type StepRv = step_rv::StepRandomVariable<Real>;
pub type SumMatrix = summability::SummabilityMatrix<Real>;
pub type Regularity = summability::RegularityReport<Real>;
pub type Profile = diagnostics::ConvergenceProfile<Real>;
pub type Family = sequences::SequenceFamily<Real>;
