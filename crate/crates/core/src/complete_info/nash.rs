use crate::auction::{
    agent_payment, greedy_flat, run_auction, BidProfile, BidSpace, FlatBids, MechanismSpec, SlotCurve, TieHint,
    ValueProfile,
};
use crate::{Error, Execution, Result};

use super::{check_payment_floor, is_efficient};

/// Price resolution of the deviation search.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationGrid {
    step: f64,
    eps_ladder: Vec<f64>,
}

impl DeviationGrid {
    /// `step` spaces the uniform price grid; each `ε` in the ladder yields a
    /// candidate price `w + ε` above every current winning bid `w`.
    pub fn new(step: f64, eps_ladder: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidArgument(format!("deviation grid step must be positive, got {step}")));
        }
        if eps_ladder.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidArgument("epsilon ladder entries must be non-negative".into()));
        }
        Ok(Self { step, eps_ladder })
    }

    /// Step `1e-3·scale`, ladder `{1e-3, 1e-6}·scale`.
    pub fn for_scale(scale: f64) -> Self {
        let scale = if scale > 0.0 { scale } else { 1.0 };
        Self { step: 1e-3 * scale, eps_ladder: vec![1e-3 * scale, 1e-6 * scale] }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn eps_ladder(&self) -> &[f64] {
        &self.eps_ladder
    }

    fn prices(&self, top: f64) -> impl Iterator<Item = f64> + '_ {
        let count = (top / self.step).floor() as usize + 1;
        (0..=count).map(move |g| g as f64 * self.step)
    }
}

/// A profitable unilateral deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub agent: usize,
    /// The deviating bid: a full row for expressive mechanisms, a single
    /// scalar for simplified ones.
    pub deviation: Vec<f64>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashReport {
    pub is_equilibrium: bool,
    /// Largest utility gain found over all agents (may be ≤ 0).
    pub max_gain: f64,
    /// Present only when `max_gain` exceeds the tolerance.
    pub worst_violation: Option<Violation>,
    pub efficiency_flag: bool,
    pub payment_floor_ok: bool,
}

pub fn verify_nash(
    bids: &BidProfile,
    tie_hint: Option<&TieHint>,
    values: &ValueProfile,
    spec: &MechanismSpec,
    curve: &SlotCurve,
    grid: &DeviationGrid,
    tol: f64,
) -> Result<NashReport> {
    verify_nash_with(bids, tie_hint, values, spec, curve, grid, tol, Execution::default())
}

/// Searches each agent's structured deviations and reports the largest gain.
///
/// Expressive deviations are "flat then zero": bid a price `p` on positions
/// `0..=j` and nothing below, for every target `j` and every candidate price
/// (current winning bids plus the ε-ladder, and the uniform grid up to the
/// largest bid). A coarser pass moves one coordinate of the current row over
/// the grid, clamped to keep the row non-increasing. Simplified mechanisms
/// scan the scalar bid. Agents are searched independently; the merge keeps
/// the lowest-index agent on equal gains, so the report does not depend on
/// `exec`.
#[allow(clippy::too_many_arguments)]
pub fn verify_nash_with(
    bids: &BidProfile,
    tie_hint: Option<&TieHint>,
    values: &ValueProfile,
    spec: &MechanismSpec,
    curve: &SlotCurve,
    grid: &DeviationGrid,
    tol: f64,
    exec: Execution,
) -> Result<NashReport> {
    let baseline = run_auction(spec, bids, curve, values, tie_hint)?;
    let expanded = bids.expand();
    let n = expanded.num_agents();
    let k = curve.len();
    let top = expanded.max_bid();
    let winning: Vec<f64> =
        (0..k).map(|j| baseline.assignment.agent_at(j).map_or(0.0, |i| expanded.bid(i, j))).collect();

    let best_per_agent = exec.map(n, |i| {
        let value = values.values()[i];
        let current = baseline.utilities[i];
        let mut scratch = expanded.flat().to_vec();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut consider = |row: &[f64], reported: &[f64], scratch: &mut Vec<f64>| {
            scratch[i * k..(i + 1) * k].copy_from_slice(row);
            let gain = utility_of(spec, scratch, n, k, tie_hint, i, curve, value) - current;
            if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((gain, reported.to_vec()));
            }
        };

        match (&spec.bid_space, bids) {
            (BidSpace::Simplified(alpha), BidProfile::Simplified(scalars)) => {
                let a = alpha.alphas();
                let scalar_top = scalars.bids().iter().copied().fold(0.0, f64::max);
                let mut candidates: Vec<f64> = grid.prices(scalar_top).collect();
                for (o, &s) in scalars.bids().iter().enumerate() {
                    if o == i {
                        continue;
                    }
                    candidates.push(s);
                    candidates.extend(grid.eps_ladder().iter().map(|e| s + e));
                }
                let mut row = vec![0.0; k];
                for q in candidates {
                    for (r, alpha_j) in row.iter_mut().zip(a) {
                        *r = q * alpha_j;
                    }
                    consider(&row, &[q], &mut scratch);
                }
            }
            _ => {
                let mut prices: Vec<f64> = grid.prices(top).collect();
                for &w in &winning {
                    prices.push(w);
                    prices.extend(grid.eps_ladder().iter().map(|e| w + e));
                }
                let mut row = vec![0.0; k];
                for j in 0..k {
                    for &p in &prices {
                        row.iter_mut().enumerate().for_each(|(t, r)| *r = if t <= j { p } else { 0.0 });
                        consider(&row, &row.clone(), &mut scratch);
                    }
                }
                let own = expanded.row(i).to_vec();
                for c in 0..k {
                    let hi = if c == 0 { f64::INFINITY } else { own[c - 1] };
                    let lo = if c + 1 < k { own[c + 1] } else { 0.0 };
                    for p in grid.prices(top) {
                        let mut row = own.clone();
                        row[c] = p.clamp(lo, hi);
                        consider(&row, &row.clone(), &mut scratch);
                    }
                }
            }
        }
        best.map(|(g, dev)| (i, g, dev))
    });

    let mut max_gain = f64::NEG_INFINITY;
    let mut worst = None;
    for (i, gain, dev) in best_per_agent.into_iter().flatten() {
        if gain > max_gain {
            max_gain = gain;
            worst = Some(Violation { agent: i, deviation: dev, gain });
        }
    }
    if max_gain == f64::NEG_INFINITY {
        max_gain = 0.0;
    }
    let is_equilibrium = max_gain <= tol;
    let efficiency_flag = is_efficient(&baseline, values, curve);
    let payment_floor_ok = efficiency_flag && check_payment_floor(&baseline, values, curve, tol)?;
    Ok(NashReport {
        is_equilibrium,
        max_gain,
        worst_violation: if is_equilibrium { None } else { worst },
        efficiency_flag,
        payment_floor_ok,
    })
}

#[allow(clippy::too_many_arguments)]
fn utility_of(
    spec: &MechanismSpec,
    bids: &[f64],
    n: usize,
    k: usize,
    tie_hint: Option<&TieHint>,
    agent: usize,
    curve: &SlotCurve,
    value: f64,
) -> f64 {
    let assignment = greedy_flat(bids, n, k, k, tie_hint, None);
    let view = FlatBids { bids, n, stride: k };
    let pay = agent_payment(spec.payment_rule, &view, &assignment, agent, tie_hint);
    assignment.position_of(agent).map_or(0.0, |j| curve.beta(j) * value) - pay
}
