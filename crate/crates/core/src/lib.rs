//! Exact and approximate dynamic programming for finite discounted-reward
//! MDPs, built around a min-plus (tropical) linear approximation
//! architecture.
//!
//! The library has three layers:
//!
//! * [`mdp`] and [`solve`] — models, Bellman operators, and exact solvers
//!   (value iteration, policy iteration, direct policy evaluation,
//!   stationary distributions).
//! * [`minplus`], [`features`], and [`adp`] — min-plus linear algebra,
//!   subsemimodule and variational projections, feature constructions, and
//!   approximate Q iteration (AQI / VAQI) with a-priori error bounds. The
//!   projected operator Π∘H stays a sup-norm α-contraction, which is the
//!   point of the architecture.
//! * [`conventional`] — the least-squares counterpart (projected Bellman
//!   equation, approximate policy evaluation and iteration) used as the
//!   baseline, whose projected operator contracts only in a weighted L2
//!   norm.
//!
//! [`experiment`] ties the layers together into a reproducible random-MDP
//! study with file outputs.

pub mod adp;
pub mod conventional;
pub mod error;
pub mod experiment;
pub mod features;
pub mod mdp;
pub mod minplus;
pub mod solve;
mod util;

pub use error::{Error, Result};
