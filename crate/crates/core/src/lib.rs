//! Position auctions with expressive and simplified bids.
//!
//! The crate covers four areas:
//!
//! - [`auction`]: slot curves, bid profiles, the greedy allocation rule and the
//!   first-price, second-price and VCG payment rules.
//! - [`complete_info`]: closed-form truthful VCG payments, the efficient Nash
//!   equilibrium of the expressive first-price auction, and a deviation-search
//!   Nash verifier.
//! - [`distributions`]: value distributions on a bounded support, adaptive
//!   quadrature and the normalized incomplete moments `Z_m`.
//! - [`bayes`]: the Bayes-Nash equilibrium bids `b*_j(v)`, allocation
//!   probabilities, expected utilities, residual checks of the derivative
//!   identities, best-response scans and paired revenue simulation.
//!
//! Positions and agents are 0-based throughout the API.

pub mod auction;
pub mod bayes;
pub mod complete_info;
pub mod distributions;
mod error;
mod exec;
pub mod math;

pub use error::{Error, Result};
pub use exec::Execution;
