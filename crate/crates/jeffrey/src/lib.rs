//! Iterative Bayesian inversion of discrete probability channels.
//!
//! A channel `C` maps inputs `x` to a distribution over outputs `y`
//! (a row-stochastic matrix). Given an observed output distribution `tau`,
//! the update rule implemented here replaces the current input estimate
//! `theta` with the Bayesian inverse of the channel applied to `tau`:
//!
//! ```text
//! theta' (x) = sum_y tau(y) * theta(x) C(y|x) / sum_x' theta(x') C(y|x')
//! ```
//!
//! Each step provably never increases the divergence `KL(tau || C(theta))`,
//! and [`em::certify_monotone`] checks that guarantee numerically on any
//! recorded trajectory. The [`em::run`] driver handles input pruning,
//! stopping rules, and per-step diagnostics; [`datagen`] produces seeded
//! synthetic observations; [`cli`] backs the `jeffrey` binary.

pub mod channel;
pub mod cli;
pub mod datagen;
pub mod dist;
pub mod em;
pub mod error;
pub mod io;

pub use channel::{Channel, InverseChannel, Joint};
pub use dist::{kl_divergence, log_likelihood, Dist, ExtendedReal};
pub use em::{StepRecord, StopCriteria, StopReason, Trace};
pub use error::Error;

/// Absolute tolerance for validating that weights form a distribution.
///
/// Inputs within this distance of the simplex are accepted and renormalized;
/// anything farther is rejected. Internal arithmetic renormalizes through the
/// same path so drift never accumulates across iterations.
pub const SIMPLEX_TOL: f64 = 1e-9;

pub type Result<T> = std::result::Result<T, Error>;
