use super::alloc::{alloc_probs, AllocProbInput};
use super::{bstar_integral, BayesSetting, PositionBids};
use crate::distributions::{integrate, ValueDistribution};
use crate::math::binomial;
use crate::{Error, Result};

/// `u*(x, v) = Σ_s P_{s,n−1}(x) (β_s v − b*_s(x_s))` with exact equilibrium bids.
pub fn expected_utility(x: &AllocProbInput, v: f64, s: &BayesSetting) -> Result<f64> {
    expected_utility_with(x, v, s, &s.exact_bids())
}

/// [`expected_utility`] with the agent's own bids taken from `bids`.
/// Opponents still bid the equilibrium, so allocation is decided in value space.
pub fn expected_utility_with<B: PositionBids + ?Sized>(
    x: &AllocProbInput,
    v: f64,
    s: &BayesSetting,
    bids: &B,
) -> Result<f64> {
    let k = s.num_positions();
    if x.len() != k {
        return Err(Error::DimensionMismatch { what: "report", expected: k, found: x.len() });
    }
    s.check_value(v)?;
    let p = alloc_probs(s.num_agents() - 1, x, s.dist());
    let mut total = 0.0;
    for (j, (&pj, &xj)) in p.iter().zip(x.values()).enumerate() {
        if pj != 0.0 {
            total += pj * (s.curve().beta(j) * v - bids.bid(j, xj)?);
        }
    }
    Ok(total)
}

/// `P_{s,n−1}(t, …, t) = C(n−1, s−1) F(t)^{n−s} (1 − F(t))^{s−1}` for every position.
pub fn diagonal_alloc_probs(t: f64, s: &BayesSetting) -> Vec<f64> {
    let n = s.num_agents();
    let f = s.dist().cdf(t);
    (0..s.num_positions()).map(|j| binomial(n - 1, j) * f.powi((n - 1 - j) as i32) * (1.0 - f).powi(j as i32)).collect()
}

fn weighted_allocation(t: f64, s: &BayesSetting) -> f64 {
    diagonal_alloc_probs(t, s).iter().enumerate().map(|(j, p)| s.curve().beta(j) * p).sum()
}

/// Utility of a truthful report, `Σ_s β_s ∫₀^v P_{s,n−1}(t, …, t) dt`.
pub fn truthful_expected_utility(v: f64, s: &BayesSetting) -> Result<f64> {
    s.check_value(v)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    integrate(|t| weighted_allocation(t, s), 0.0, v, s.quadrature())
}

/// Expected payment pinned down by the efficient allocation rule:
/// `Σ_s P_s(v) β_s v − ∫₀^v Σ_s P_s(z) β_s dz`.
pub fn myerson_expected_payment(v: f64, s: &BayesSetting) -> Result<f64> {
    Ok(weighted_allocation(v, s) * v - truthful_expected_utility(v, s)?)
}

/// Expected payment of a truthful bidder in GFP, `Σ_s P_{s,n−1}(v, …, v) b*_s(v)`.
pub fn expected_bid_payment(v: f64, s: &BayesSetting) -> Result<f64> {
    s.check_value(v)?;
    let mut total = 0.0;
    for (j, p) in diagonal_alloc_probs(v, s).into_iter().enumerate() {
        if p != 0.0 {
            total += p * bstar_integral(j, v, s)?;
        }
    }
    Ok(total)
}
