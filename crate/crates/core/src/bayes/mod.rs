//! Incomplete information: the symmetric Bayes-Nash equilibrium of expressive
//! GFP, its allocation probabilities, and numerical checks of the identities
//! that make it an equilibrium.
//!
//! All agents draw values i.i.d. from one [`Distribution`]. The equilibrium bid
//! on position `j` is the expected truthful VCG payment for `j` conditioned on
//! the bidder's value being the `j`-th highest:
//!
//! ```text
//! b*_j(v) = Σ_{s=j..k} (β_s − β_{s+1}) E[v_(s+1) | v is j-th highest]
//! ```
//!
//! Formulas are written with 1-based positions in comments; the API is 0-based.

mod alloc;
mod bstar;
mod checks;
mod scan;
mod simulate;
mod table;
mod utility;

use crate::auction::SlotCurve;
use crate::distributions::{Distribution, QuadratureConfig, ValueDistribution};
use crate::{Error, Result};

pub use alloc::{alloc_prob, alloc_probs, AllocProbInput};
pub use bstar::{bstar_binomial, bstar_derivative, bstar_integral};
pub use checks::{
    check_auxiliary_lemma, check_lemma1, check_lemma2, check_monotone_allocation, check_ode, lemma1_residual,
    observed_order, ode_residual_fd, payment_identity_residual, AuxLemma, Lemma2Report,
};
pub use scan::{best_response_scan, best_response_scan_with, ScanReport};
pub use simulate::{simulate_revenue, simulate_revenue_rounds, MeanEstimate, RevenueEstimate, RevenueRounds};
pub use table::EquilibriumBidTable;
pub use utility::{
    diagonal_alloc_probs, expected_bid_payment, expected_utility, expected_utility_with, myerson_expected_payment,
    truthful_expected_utility,
};

/// `n` symmetric agents, a slot curve and a value distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesSetting {
    n: usize,
    curve: SlotCurve,
    dist: Distribution,
    cfg: QuadratureConfig,
}

impl BayesSetting {
    /// Requires `n ≥ k + 1`, so every order statistic the bids use exists.
    pub fn new(n: usize, curve: SlotCurve, dist: Distribution, cfg: QuadratureConfig) -> Result<Self> {
        if n < curve.len() + 1 {
            return Err(Error::InsufficientAgents { n, k: curve.len() });
        }
        cfg.validate()?;
        Ok(Self { n, curve, dist, cfg })
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn num_positions(&self) -> usize {
        self.curve.len()
    }

    pub fn curve(&self) -> &SlotCurve {
        &self.curve
    }

    pub fn dist(&self) -> &Distribution {
        &self.dist
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.cfg
    }

    pub fn upper(&self) -> f64 {
        self.dist.upper()
    }

    /// Same setting with a different slot curve.
    pub fn with_curve(&self, curve: SlotCurve) -> Result<Self> {
        Self::new(self.n, curve, self.dist.clone(), self.cfg)
    }

    /// The equilibrium bids evaluated by quadrature.
    pub fn exact_bids(&self) -> ExactBids<'_> {
        ExactBids { setting: self }
    }

    pub(crate) fn check_value(&self, v: f64) -> Result<()> {
        let top = self.upper();
        if !(0.0..=top * (1.0 + 1e-12)).contains(&v) {
            return Err(Error::InvalidArgument(format!("value {v} outside the support [0, {top}]")));
        }
        Ok(())
    }

    pub(crate) fn check_position(&self, j: usize) -> Result<()> {
        if j >= self.num_positions() {
            return Err(Error::IndexOutOfRange { what: "position", index: j, len: self.num_positions() });
        }
        Ok(())
    }
}

/// A symmetric bidding strategy: the bid on each position as a function of
/// the bidder's value.
pub trait PositionBids: Sync {
    fn num_positions(&self) -> usize;

    fn bid(&self, position: usize, value: f64) -> Result<f64>;

    /// Bids on all positions at once.
    fn bids_into(&self, value: f64, out: &mut [f64]) -> Result<()> {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.bid(j, value)?;
        }
        Ok(())
    }
}

/// `b*_j` through [`bstar_integral`].
#[derive(Debug, Clone, Copy)]
pub struct ExactBids<'a> {
    setting: &'a BayesSetting,
}

impl PositionBids for ExactBids<'_> {
    fn num_positions(&self) -> usize {
        self.setting.num_positions()
    }

    fn bid(&self, position: usize, value: f64) -> Result<f64> {
        bstar_integral(position, value, self.setting)
    }
}

/// Another strategy with every bid multiplied by a constant.
#[derive(Debug, Clone, Copy)]
pub struct ScaledBids<B> {
    pub inner: B,
    pub factor: f64,
}

impl<B: PositionBids> PositionBids for ScaledBids<B> {
    fn num_positions(&self) -> usize {
        self.inner.num_positions()
    }

    fn bid(&self, position: usize, value: f64) -> Result<f64> {
        Ok(self.factor * self.inner.bid(position, value)?)
    }

    fn bids_into(&self, value: f64, out: &mut [f64]) -> Result<()> {
        self.inner.bids_into(value, out)?;
        out.iter_mut().for_each(|b| *b *= self.factor);
        Ok(())
    }
}

impl<B: PositionBids + ?Sized> PositionBids for &B {
    fn num_positions(&self) -> usize {
        (**self).num_positions()
    }

    fn bid(&self, position: usize, value: f64) -> Result<f64> {
        (**self).bid(position, value)
    }

    fn bids_into(&self, value: f64, out: &mut [f64]) -> Result<()> {
        (**self).bids_into(value, out)
    }
}
