//! Noisy XY spin-chain control coupled to a toy secure/green supply chain.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: exact state-vector simulation of an open XY chain with
//!   local z-fields, Gaussian field noise, Pauli trajectory channels and a
//!   Lie-algebra rank probe.
//! - [`env`]: the supply-chain MDP wrapping the chain (inventories, security
//!   score, CO₂ accounting, window-normalised multi-objective reward).
//! - [`neural`]: a small dense MLP with exact reverse-mode gradients and Adam.
//! - [`agents`]: Double-DQN, clipped-surrogate PPO and the reward-weighted
//!   ensemble policy.
//! - [`baselines`]: finite-difference GRAPE, exhaustive receding-horizon MPC
//!   and fixed reference constants.

pub mod agents;
pub mod baselines;
pub mod env;
mod error;
pub mod neural;
pub mod quantum;

pub use error::{Error, Result};
