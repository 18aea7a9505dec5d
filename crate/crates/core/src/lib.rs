//! Distributed function computation over deterministic two-user
//! multiple-access channels.
//!
//! The crate decides zero-error and δ-feasibility of computing a target
//! function `a(u1, u2)` over a channel `y = g(x1, x2)`, builds the graph
//! codes for the identity and equality functions, evaluates rate-region
//! quantities, and runs seeded Monte Carlo experiments on random channels
//! and targets.

pub mod error;
pub mod feasibility;
pub mod graphcodes;
pub mod instance;
pub mod model;
pub mod montecarlo;
pub mod rates;
pub mod rng;
pub mod typicality;

pub use error::{Error, Result};
pub use feasibility::{
    check_code, extract_delta_approximation, zero_feasible_search, Answer, ApproxFunction,
    FeasibilityVerdict, SearchMode, SearchOptions,
};
pub use model::{
    error_probability, is_c_balanced, BalanceWitness, ChannelFunction, ChannelKind, Code,
    TargetFunction, TargetKind,
};
