use super::allocation::greedy_flat;
use super::{Assignment, ExpressiveBidProfile, PaymentRule, TieHint};
use crate::Result;

/// Each winner pays its own bid on the position it won.
pub fn first_price_payments(bids: &ExpressiveBidProfile, assignment: &Assignment) -> Result<Vec<f64>> {
    all_payments(PaymentRule::FirstPrice, bids, assignment, None)
}

/// The winner of position `j` pays the highest bid on `j` among agents not
/// assigned to any of positions `0..=j`, or 0 when no such agent exists.
pub fn second_price_payments(bids: &ExpressiveBidProfile, assignment: &Assignment) -> Result<Vec<f64>> {
    all_payments(PaymentRule::SecondPrice, bids, assignment, None)
}

/// Externality payments: the bid-value the others would get by greedy
/// reallocation without the agent, minus what they get now (clipped at 0).
pub fn vcg_payments_from_bids(
    bids: &ExpressiveBidProfile,
    assignment: &Assignment,
    tie_hint: Option<&TieHint>,
) -> Result<Vec<f64>> {
    all_payments(PaymentRule::Vcg, bids, assignment, tie_hint)
}

fn all_payments(
    rule: PaymentRule,
    bids: &ExpressiveBidProfile,
    assignment: &Assignment,
    tie_hint: Option<&TieHint>,
) -> Result<Vec<f64>> {
    assignment.check_against(bids)?;
    let view = FlatBids { bids: bids.flat(), n: bids.num_agents(), stride: bids.num_positions() };
    Ok((0..view.n).map(|i| agent_payment(rule, &view, assignment, i, tie_hint)).collect())
}

/// Row-major bid matrix borrowed from a profile or a scratch buffer.
pub(crate) struct FlatBids<'a> {
    pub bids: &'a [f64],
    pub n: usize,
    pub stride: usize,
}

impl FlatBids<'_> {
    fn bid(&self, agent: usize, position: usize) -> f64 {
        self.bids[agent * self.stride + position]
    }
}

/// Payment of one agent under `rule`; 0 when it holds no position.
pub(crate) fn agent_payment(
    rule: PaymentRule,
    view: &FlatBids<'_>,
    assignment: &Assignment,
    agent: usize,
    tie_hint: Option<&TieHint>,
) -> f64 {
    let Some(j) = assignment.position_of(agent) else {
        return 0.0;
    };
    match rule {
        PaymentRule::FirstPrice => view.bid(agent, j),
        PaymentRule::SecondPrice => (0..view.n)
            .filter(|&o| assignment.position_of(o).is_none_or(|p| p > j))
            .map(|o| view.bid(o, j))
            .fold(0.0, f64::max),
        PaymentRule::Vcg => {
            let others = |a: &Assignment| -> f64 {
                a.slots()
                    .iter()
                    .enumerate()
                    .filter_map(|(p, o)| o.filter(|&o| o != agent).map(|o| view.bid(o, p)))
                    .sum()
            };
            let k = assignment.num_positions();
            let without = greedy_flat(view.bids, view.n, view.stride, k, tie_hint, Some(agent));
            (others(&without) - others(assignment)).max(0.0)
        }
    }
}
