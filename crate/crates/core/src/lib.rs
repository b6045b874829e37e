//! Simulation and optimization toolkit for prosumer households with PV,
//! a stationary battery (BESS) and an EV charger under fixed tariffs.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`] – shared value types and their invariants.
//! * [`dataio`] – measurement ingestion, hourly resampling, gap filling,
//!   capacity inference and transaction-preserving splits.
//! * [`timeline`] – per-hour exogenous context (PV, demand, EV presence).
//! * [`env`] – the deterministic MDP step function.
//! * [`control`] – the rule-based power-mode controller, rollouts, metrics.
//! * [`lp`] / [`mpc`] – a bounded dense simplex and the full-information
//!   linear-programming benchmark built on it.
//! * [`ddpg`] – actor/critic networks with manual backpropagation, Adam,
//!   replay buffer, exploration noise and the training procedure.
//! * [`analysis`] – EV behavior clustering, optimizable-transaction
//!   classification, grid-savings estimation and the synthetic household.

pub mod analysis;
pub mod control;
pub mod dataio;
pub mod ddpg;
pub mod domain;
pub mod env;
pub mod error;
pub mod lp;
pub mod mpc;
pub mod timeline;

pub use error::{Error, Result};
