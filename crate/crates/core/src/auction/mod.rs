//! Auction instances, greedy winner determination and payment rules.

mod allocation;
mod payments;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub(crate) use allocation::greedy_flat;
pub use allocation::{greedy_allocate, Assignment};
pub(crate) use payments::{agent_payment, FlatBids};
pub use payments::{first_price_payments, second_price_payments, vcg_payments_from_bids};

fn validate_shape(what: &str, xs: &[f64]) -> std::result::Result<(), String> {
    if xs.is_empty() {
        return Err(format!("{what} must have at least one entry"));
    }
    for (j, &x) in xs.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            return Err(format!("{what}[{j}] = {x} is not a positive finite number"));
        }
        if j > 0 && x > xs[j - 1] {
            return Err(format!("{what} must be non-increasing ({what}[{j}] = {x} > {})", xs[j - 1]));
        }
    }
    Ok(())
}

/// Per-position value multipliers `β_1 ≥ … ≥ β_k > 0`.
///
/// `beta(j)` for `j ≥ k` returns the virtual entry `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotCurve {
    betas: Vec<f64>,
}

impl SlotCurve {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        validate_shape("beta", &betas).map_err(Error::InvalidCurve)?;
        Ok(Self { betas })
    }

    /// Number of positions `k`.
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.betas.get(j).copied().unwrap_or(0.0)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `β_j − β_{j+1}`, with the virtual `β_{k+1} = 0`.
    pub fn step(&self, j: usize) -> f64 {
        self.beta(j) - self.beta(j + 1)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.betas.iter().map(|b| b * factor).collect())
    }
}

/// The public vector `α` that extends a scalar bid to all positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector {
    alphas: Vec<f64>,
}

impl ScalingVector {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        validate_shape("alpha", &alphas).map_err(Error::InvalidCurve)?;
        Ok(Self { alphas })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

impl From<&SlotCurve> for ScalingVector {
    fn from(curve: &SlotCurve) -> Self {
        Self { alphas: curve.betas.clone() }
    }
}

/// Per-agent, per-unit values `v_i ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueProfile {
    values: Vec<f64>,
}

impl ValueProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidValues(format!("value {i} = {v} is not a non-negative finite number")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Agent indices sorted by value, highest first; equal values keep index order.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        order
    }
}

/// An `n × k` matrix of per-position bids, each row non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressiveBidProfile {
    n: usize,
    k: usize,
    bids: Vec<f64>,
}

impl ExpressiveBidProfile {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        let mut bids = Vec::with_capacity(n * k);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { what: "bid row", expected: k, found: row.len() });
            }
            for (j, &b) in row.iter().enumerate() {
                if !b.is_finite() || b < 0.0 {
                    return Err(Error::InvalidBids(format!(
                        "bid ({i}, {j}) = {b} is not a non-negative finite number"
                    )));
                }
                if j > 0 && b > row[j - 1] {
                    return Err(Error::InvalidBids(format!(
                        "row {i} increases at position {j} ({} -> {b})",
                        row[j - 1]
                    )));
                }
            }
            bids.extend(row);
        }
        Ok(Self { n, k, bids })
    }

    /// Agents bid `scalars[i] · shape[j]` on position `j`.
    pub fn proportional(scalars: &[f64], shape: &[f64]) -> Result<Self> {
        Self::new(scalars.iter().map(|c| shape.iter().map(|b| c * b).collect()).collect())
    }

    /// Truthful bids `β_j v_i`.
    pub fn truthful(values: &ValueProfile, curve: &SlotCurve) -> Result<Self> {
        Self::proportional(values.values(), curve.betas())
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn num_positions(&self) -> usize {
        self.k
    }

    pub fn bid(&self, agent: usize, position: usize) -> f64 {
        self.bids[agent * self.k + position]
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.bids[agent * self.k..(agent + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.bids.chunks(self.k.max(1)).take(self.n)
    }

    pub fn max_bid(&self) -> f64 {
        self.bids.iter().copied().fold(0.0, f64::max)
    }

    /// Copy with one agent's row replaced.
    pub fn with_row(&self, agent: usize, row: &[f64]) -> Result<Self> {
        if agent >= self.n {
            return Err(Error::IndexOutOfRange { what: "agent", index: agent, len: self.n });
        }
        let mut rows: Vec<Vec<f64>> = self.rows().map(<[f64]>::to_vec).collect();
        rows[agent] = row.to_vec();
        Self::new(rows)
    }

    pub(crate) fn flat(&self) -> &[f64] {
        &self.bids
    }
}

/// Scalar bids extended to all positions through a scaling vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedBidProfile {
    bids: Vec<f64>,
    scaling: ScalingVector,
}

impl SimplifiedBidProfile {
    pub fn new(bids: Vec<f64>, scaling: ScalingVector) -> Result<Self> {
        if let Some((i, b)) = bids.iter().enumerate().find(|(_, b)| !b.is_finite() || **b < 0.0) {
            return Err(Error::InvalidBids(format!("scalar bid {i} = {b} is not a non-negative finite number")));
        }
        Ok(Self { bids, scaling })
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn scaling(&self) -> &ScalingVector {
        &self.scaling
    }

    pub fn expand(&self) -> ExpressiveBidProfile {
        ExpressiveBidProfile::proportional(&self.bids, self.scaling.alphas())
            .expect("scaled non-negative bids are row-monotone")
    }

    pub fn with_bid(&self, agent: usize, bid: f64) -> Result<Self> {
        if agent >= self.bids.len() {
            return Err(Error::IndexOutOfRange { what: "agent", index: agent, len: self.bids.len() });
        }
        let mut bids = self.bids.clone();
        bids[agent] = bid;
        Self::new(bids, self.scaling.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BidProfile {
    Expressive(ExpressiveBidProfile),
    Simplified(SimplifiedBidProfile),
}

impl BidProfile {
    pub fn num_agents(&self) -> usize {
        match self {
            BidProfile::Expressive(b) => b.num_agents(),
            BidProfile::Simplified(b) => b.bids().len(),
        }
    }

    pub fn expand(&self) -> ExpressiveBidProfile {
        match self {
            BidProfile::Expressive(b) => b.clone(),
            BidProfile::Simplified(b) => b.expand(),
        }
    }
}

impl From<ExpressiveBidProfile> for BidProfile {
    fn from(b: ExpressiveBidProfile) -> Self {
        BidProfile::Expressive(b)
    }
}

impl From<SimplifiedBidProfile> for BidProfile {
    fn from(b: SimplifiedBidProfile) -> Self {
        BidProfile::Simplified(b)
    }
}

/// Per-position tie-break overrides: position → agent that wins ties there.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TieHint {
    pointers: BTreeMap<usize, usize>,
}

impl TieHint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn point(&mut self, position: usize, agent: usize) -> &mut Self {
        self.pointers.insert(position, agent);
        self
    }

    pub fn get(&self, position: usize) -> Option<usize> {
        self.pointers.get(&position).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pointers.iter().map(|(&p, &a)| (p, a))
    }
}

impl FromIterator<(usize, usize)> for TieHint {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        Self { pointers: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PaymentRule {
    FirstPrice,
    SecondPrice,
    Vcg,
}

impl fmt::Display for PaymentRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaymentRule::FirstPrice => "first-price",
            PaymentRule::SecondPrice => "second-price",
            PaymentRule::Vcg => "vcg",
        })
    }
}

impl FromStr for PaymentRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "first-price" | "gfp" => Ok(PaymentRule::FirstPrice),
            "second-price" | "gsp" => Ok(PaymentRule::SecondPrice),
            "vcg" => Ok(PaymentRule::Vcg),
            other => Err(Error::Parse(format!("unknown payment rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BidSpace {
    Expressive,
    Simplified(ScalingVector),
}

/// A payment rule paired with a bid space, e.g. expressive GFP or GSP_α.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismSpec {
    pub payment_rule: PaymentRule,
    pub bid_space: BidSpace,
}

impl MechanismSpec {
    pub fn expressive(payment_rule: PaymentRule) -> Self {
        Self { payment_rule, bid_space: BidSpace::Expressive }
    }

    pub fn simplified(payment_rule: PaymentRule, alphas: ScalingVector) -> Self {
        Self { payment_rule, bid_space: BidSpace::Simplified(alphas) }
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.payment_rule {
            PaymentRule::FirstPrice => "GFP",
            PaymentRule::SecondPrice => "GSP",
            PaymentRule::Vcg => "VCG",
        };
        match self.bid_space {
            BidSpace::Expressive => write!(f, "{name}"),
            BidSpace::Simplified(_) => write!(f, "{name}_alpha"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub assignment: Assignment,
    pub payments: Vec<f64>,
    pub utilities: Vec<f64>,
}

impl AuctionOutcome {
    pub fn revenue(&self) -> f64 {
        self.payments.iter().sum()
    }
}

/// Allocates greedily, applies the mechanism's payment rule and evaluates
/// quasi-linear utilities `β_j v_i − payment`.
pub fn run_auction(
    spec: &MechanismSpec,
    bids: &BidProfile,
    curve: &SlotCurve,
    values: &ValueProfile,
    tie_hint: Option<&TieHint>,
) -> Result<AuctionOutcome> {
    let expanded = match (&spec.bid_space, bids) {
        (BidSpace::Expressive, BidProfile::Expressive(b)) => b.clone(),
        (BidSpace::Simplified(alpha), BidProfile::Simplified(b)) => {
            if b.scaling() != alpha {
                return Err(Error::InvalidBids(
                    "scalar bids carry a different scaling vector than the mechanism".into(),
                ));
            }
            b.expand()
        }
        (BidSpace::Expressive, BidProfile::Simplified(_)) => {
            return Err(Error::InvalidBids("expressive mechanism given scalar bids".into()))
        }
        (BidSpace::Simplified(_), BidProfile::Expressive(_)) => {
            return Err(Error::InvalidBids("simplified mechanism given expressive bids".into()))
        }
    };
    let k = curve.len();
    if expanded.num_positions() != k {
        return Err(Error::DimensionMismatch {
            what: "bid columns vs. slot curve",
            expected: k,
            found: expanded.num_positions(),
        });
    }
    if values.len() != expanded.num_agents() {
        return Err(Error::DimensionMismatch {
            what: "values vs. bidders",
            expected: expanded.num_agents(),
            found: values.len(),
        });
    }
    let assignment = greedy_allocate(&expanded, k, tie_hint)?;
    let payments = match spec.payment_rule {
        PaymentRule::FirstPrice => first_price_payments(&expanded, &assignment)?,
        PaymentRule::SecondPrice => second_price_payments(&expanded, &assignment)?,
        PaymentRule::Vcg => vcg_payments_from_bids(&expanded, &assignment, tie_hint)?,
    };
    let utilities = (0..values.len())
        .map(|i| {
            let gross = assignment.position_of(i).map_or(0.0, |j| curve.beta(j) * values.values()[i]);
            gross - payments[i]
        })
        .collect();
    Ok(AuctionOutcome { assignment, payments, utilities })
}
