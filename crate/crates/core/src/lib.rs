//! Intrinsic-dimension concentration bounds for sums of random symmetric
//! matrices.
//!
//! The crate evaluates Chernoff-type tail bounds whose dimensional
//! prefactor is the intrinsic dimension `tr(V)/‖V‖` of a variance proxy
//! rather than the ambient dimension, inverts them into confidence radii,
//! and checks them against exact enumeration and Monte Carlo simulation.
//!
//! Module map:
//!
//! - [`specmat`]: dense symmetric matrices, spectral calculus, Loewner order.
//! - [`psi`]: CGF-like ψ functions, auxiliary scalars, Chernoff infimum.
//! - [`bounds`]: tail bounds under independence and the confidence radius.
//! - [`martingale`]: Freedman-type bounds and variance-process accumulators.
//! - [`ensembles`]: reproducible random-matrix sequence generators.
//! - [`mc`]: exact enumeration, Monte Carlo tails, (super/sub)martingale checks.
//! - [`compare`]: comparisons against prior ambient and intrinsic bounds.
//! - [`verify`]: deterministic inequality suites.

pub mod bounds;
pub mod compare;
pub mod ensembles;
mod error;
pub mod martingale;
pub mod mc;
pub mod policy;
pub mod psi;
pub mod report;
pub mod rng;
pub mod specmat;
pub mod verify;

pub use error::{Error, Result};
pub use policy::NumericPolicy;
pub use specmat::{Spectrum, SymMatrix};
