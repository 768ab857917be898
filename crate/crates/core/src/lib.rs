//! Finite-key security bounds and protocol simulation for quantum key
//! distribution with sources whose pulses are correlated over a finite range.
//!
//! Security depends only on a floor for each pulse's vacuum probability and on
//! the correlation ranges `(r1, r2)`. The crate evaluates the phase-error and
//! key-length bounds, optimizes the signal intensity and estimation
//! probability, and checks the underlying concentration and state-overlap
//! bounds by simulation.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod concentration;
pub mod error;
pub mod optimizer;
pub mod security;
pub mod simulator;
pub mod statemodel;

pub use channel::{ChannelParams, ClickDistribution, ExpectedTallies};
pub use concentration::{ConfidenceLevel, KatoCoefficients, TallyFrame};
pub use error::{Error, Result};
pub use optimizer::{optimize, optimize_params, OptimizationResult, SearchBox};
pub use security::{
    epsilon_budget, key_rate, key_rate_with, EpsilonBudget, KeyRateResult, ProtocolParams, Tallies, Thresholds,
    VacuumFloors,
};
pub use simulator::{run_protocol, SimConfig, SimResult};
pub use statemodel::{BlockState, CorrelationKernel, Kernel};
