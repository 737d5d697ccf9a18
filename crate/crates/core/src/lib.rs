//! Proportional bidding for links whose supply is elastic.
//!
//! Each link charges a convex, strictly increasing marginal-cost price `p(f)`.
//! Users submit bids; the link clears the market by choosing the total rate
//! `f` with `sum(w) = f * p(f)` and splits `f` in proportion to the bids.
//!
//! The crate computes:
//!
//! * market clearing, aggregate surplus and the social optimum ([`market`]),
//! * Nash equilibria of the price-anticipating game on one link, together with
//!   an exact verifier of the equilibrium conditions ([`nash`]),
//! * efficiency-loss ratios, the closed-form worst-case curves and the
//!   constructive worst-case instances ([`efficiency`]),
//! * the multi-link game with per-user max-flow allocation ([`network`]).
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod efficiency;
mod error;
pub mod market;
pub(crate) mod math;
pub mod models;
pub mod nash;
pub mod network;
pub mod simplex;

pub use error::{Error, Result};
pub use market::{ClearingOutcome, LinkInstance, SystemSolution};
pub use models::{Demand, PriceModel, UtilityModel};
pub use nash::{NashMethod, NashResult, SolverConfig, StrategyProfile, VerifyReport};
