//! Complete-information analysis: truthful VCG, the efficient first-price
//! equilibrium, and a deviation-search Nash verifier.

mod nash;

use crate::auction::{AuctionOutcome, ExpressiveBidProfile, SlotCurve, TieHint, ValueProfile};
use crate::{Error, Result};

pub use nash::{verify_nash, verify_nash_with, DeviationGrid, NashReport, Violation};

/// Truthful VCG outcome in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct VcgResult {
    /// Agent indices by descending value (ties by index).
    pub ordering: Vec<usize>,
    /// Payment for each position `0..k`.
    pub payments: Vec<f64>,
    /// Utility of each agent, indexed by agent.
    pub utilities: Vec<f64>,
}

impl VcgResult {
    /// Utility of the agent ranked `r` (0-based).
    pub fn utility_by_rank(&self, r: usize) -> f64 {
        self.ordering.get(r).map_or(0.0, |&i| self.utilities[i])
    }

    pub fn revenue(&self) -> f64 {
        self.payments.iter().sum()
    }
}

/// Truthful VCG payments via the bottom-up recursion
/// `p_j = (β_j − β_{j+1}) v_(j+1) + p_{j+1}` with `v_(m) = 0` past the last agent.
pub fn truthful_vcg(values: &ValueProfile, curve: &SlotCurve) -> VcgResult {
    let ordering = values.descending_order();
    let k = curve.len();
    let sorted = |r: usize| ordering.get(r).map_or(0.0, |&i| values.values()[i]);
    let mut payments = vec![0.0; k];
    let mut next = 0.0;
    for j in (0..k).rev() {
        payments[j] = curve.step(j) * sorted(j + 1) + next;
        next = payments[j];
    }
    let mut utilities = vec![0.0; values.len()];
    for (r, &i) in ordering.iter().enumerate().take(k) {
        utilities[i] = curve.beta(r) * values.values()[i] - payments[r];
    }
    VcgResult { ordering, payments, utilities }
}

/// Sum of `β_j · v` over the assigned agents.
pub fn assignment_welfare(outcome: &AuctionOutcome, values: &ValueProfile, curve: &SlotCurve) -> f64 {
    outcome
        .assignment
        .slots()
        .iter()
        .enumerate()
        .filter_map(|(j, a)| a.map(|i| curve.beta(j) * values.values()[i]))
        .sum()
}

/// Whether the outcome attains the maximal welfare `Σ_j β_j v_(j)`.
pub fn is_efficient(outcome: &AuctionOutcome, values: &ValueProfile, curve: &SlotCurve) -> bool {
    let order = values.descending_order();
    let best: f64 = order.iter().take(curve.len()).enumerate().map(|(j, &i)| curve.beta(j) * values.values()[i]).sum();
    let got = assignment_welfare(outcome, values, curve);
    got >= best - 1e-12 * best.abs().max(1.0)
}

/// The efficient first-price equilibrium `b_{i,j} = max(β_j v_i − u_i, 0)` with
/// `u_i` the truthful VCG utility, plus the hint letting the `r`-th highest
/// agent point to position `r`.
///
/// Bids that exceed the pointing agent's bid on a position by rounding error
/// alone are snapped down to it, so the hinted tie-break is what decides.
pub fn construct_equilibrium_bids(values: &ValueProfile, curve: &SlotCurve) -> (ExpressiveBidProfile, TieHint) {
    let vcg = truthful_vcg(values, curve);
    let k = curve.len();
    let n = values.len();
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..k).map(|j| (curve.beta(j) * values.values()[i] - vcg.utilities[i]).max(0.0)).collect())
        .collect();

    let hint: TieHint = vcg.ordering.iter().take(k).enumerate().map(|(j, &i)| (j, i)).collect();
    for (j, pointer) in hint.iter() {
        let top = rows[pointer][j];
        let slack = 1e-12 * (curve.beta(0) * values.max()).max(1.0);
        for row in rows.iter_mut() {
            if row[j] > top && row[j] <= top + slack {
                row[j] = top;
            }
        }
    }
    for row in rows.iter_mut() {
        for j in 1..k {
            row[j] = row[j].min(row[j - 1]);
        }
    }
    let bids = ExpressiveBidProfile::new(rows).expect("equilibrium bids are non-negative and row-monotone");
    (bids, hint)
}

/// True iff every assigned agent pays at least the truthful VCG payment of its
/// position, less `tol`. Fails on inefficient outcomes.
pub fn check_payment_floor(
    outcome: &AuctionOutcome,
    values: &ValueProfile,
    curve: &SlotCurve,
    tol: f64,
) -> Result<bool> {
    if outcome.payments.len() != values.len() {
        return Err(Error::DimensionMismatch {
            what: "payments vs. values",
            expected: values.len(),
            found: outcome.payments.len(),
        });
    }
    if !is_efficient(outcome, values, curve) {
        return Err(Error::NotEfficient);
    }
    let vcg = truthful_vcg(values, curve);
    Ok(outcome
        .assignment
        .slots()
        .iter()
        .enumerate()
        .all(|(j, a)| a.is_none_or(|i| outcome.payments[i] >= vcg.payments[j] - tol)))
}
