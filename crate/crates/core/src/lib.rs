//! Anytime estimation-to-decisions (E2D) for structured bandits.
//!
//! The crate is organised around the average-constrained decision-estimation
//! coefficient `dec^ac_ε(f)`: a min-max program in which the learner picks a
//! sampling distribution `μ` over decisions and an adversary picks a
//! distribution `ν` over models, subject to the averaged information
//! constraint `μ I_f ν ≤ ε²`.
//!
//! - [`model`]: finite and linear instances, gap and information matrices.
//! - [`lp`]: dense simplex solver for the zero-sum matrix games behind the
//!   offset coefficient.
//! - [`dec`]: coefficient solvers for finite model classes, plus the
//!   information ratio and the brute-force constrained oracle.
//! - [`linear_dec`]: Frank–Wolfe solver for linear models with
//!   side-observations and the G-optimal design value.
//! - [`estimation`]: exponential weights and projected ridge regression.
//! - [`env`]: seeded simulators and instance generators.
//! - [`policy`]: Anytime-E2D, fixed-λ E2D, UCB and Thompson sampling.
//! - [`harness`]: multi-run experiments, CSV traces and presets.

pub mod dec;
pub mod env;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linear_dec;
pub mod lp;
pub mod model;
pub mod policy;
pub mod simplex;

pub use error::{E2dError, Result};
pub use model::{FiniteInstance, GapMatrix, InfoMatrix, LinearInstance};
pub use simplex::SimplexVector;
