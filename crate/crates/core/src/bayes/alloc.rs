use crate::distributions::ValueDistribution;
use crate::math::binomial;
use crate::{Error, Result};

/// A report in value space: the agent bids `b*_j(x_j)` on position `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocProbInput {
    x: Vec<f64>,
}

impl AllocProbInput {
    /// Non-increasing reports within `[0, upper]`.
    pub fn new(x: Vec<f64>, upper: f64) -> Result<Self> {
        let input = Self::relaxed(x, upper)?;
        if input.x.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!("report {:?} is not non-increasing", input.x)));
        }
        Ok(input)
    }

    /// Only checks the support. The recursion is still defined for reports
    /// that are not monotone, but no longer equals a probability there;
    /// finite differences straddling a tie need it.
    pub fn relaxed(x: Vec<f64>, upper: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidArgument("empty report".into()));
        }
        let top = upper * (1.0 + 1e-12);
        if let Some(bad) = x.iter().find(|&&xi| !(0.0..=top).contains(&xi)) {
            return Err(Error::InvalidArgument(format!("report {bad} outside the support [0, {upper}]")));
        }
        Ok(Self { x })
    }

    /// The truthful report `(v, …, v)` on `k` positions.
    pub fn truthful(v: f64, k: usize) -> Self {
        Self { x: vec![v; k] }
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `P_{s,m}(x)` for every position from CDF values `fx[s] = F(x_s)`.
///
/// Uses `L(s) = 1 − Σ_{t<s} P_{t,s−1}`, the chance of losing the first `s − 1`
/// positions to `s − 1` opponents, so that `P_{s,m} = C(m, m−s+1) F(x_s)^{m−s+1} L(s)`.
/// Entries for positions past `m + 1` are 0.
pub(crate) fn alloc_probs_from_cdf(m: usize, fx: &[f64]) -> Vec<f64> {
    let k = fx.len();
    let mut lose = Vec::with_capacity(k);
    for s in 1..=k {
        let won: f64 = (1..s).map(|t| binomial(s - 1, s - t) * fx[t - 1].powi((s - t) as i32) * lose[t - 1]).sum();
        lose.push(1.0 - won);
    }
    (1..=k)
        .map(|s| {
            if s > m + 1 {
                0.0
            } else {
                let e = m + 1 - s;
                binomial(m, e) * fx[s - 1].powi(e as i32) * lose[s - 1]
            }
        })
        .collect()
}

/// Allocation probabilities for all positions against `m` truthful opponents.
pub fn alloc_probs<D: ValueDistribution + ?Sized>(m: usize, x: &AllocProbInput, dist: &D) -> Vec<f64> {
    let fx: Vec<f64> = x.values().iter().map(|&xi| dist.cdf(xi)).collect();
    alloc_probs_from_cdf(m, &fx)
}

/// Probability of being assigned position `s` (0-based) against `m` opponents.
pub fn alloc_prob<D: ValueDistribution + ?Sized>(s: usize, m: usize, x: &AllocProbInput, dist: &D) -> Result<f64> {
    if s >= x.len() {
        return Err(Error::IndexOutOfRange { what: "position", index: s, len: x.len() });
    }
    if s > m {
        return Err(Error::InvalidArgument(format!("position {} needs at least {s} opponents, got {m}", s + 1)));
    }
    let fx: Vec<f64> = x.values()[..=s].iter().map(|&xi| dist.cdf(xi)).collect();
    Ok(alloc_probs_from_cdf(m, &fx)[s])
}
