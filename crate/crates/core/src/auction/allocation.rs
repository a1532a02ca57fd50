use super::{ExpressiveBidProfile, TieHint};
use crate::{Error, Result};

/// Position ↔ agent matching produced by greedy winner determination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    slots: Vec<Option<usize>>,
    positions: Vec<Option<usize>>,
}

impl Assignment {
    pub(crate) fn empty(num_agents: usize, k: usize) -> Self {
        Self { slots: vec![None; k], positions: vec![None; num_agents] }
    }

    /// Builds an assignment from a position → agent list, checking injectivity.
    pub fn from_slots(slots: Vec<Option<usize>>, num_agents: usize) -> Result<Self> {
        let mut positions = vec![None; num_agents];
        for (j, agent) in slots.iter().enumerate() {
            if let Some(a) = *agent {
                if a >= num_agents {
                    return Err(Error::IndexOutOfRange { what: "agent", index: a, len: num_agents });
                }
                if positions[a].is_some() {
                    return Err(Error::InvalidArgument(format!("agent {a} holds two positions")));
                }
                positions[a] = Some(j);
            }
        }
        Ok(Self { slots, positions })
    }

    pub(crate) fn assign(&mut self, position: usize, agent: usize) {
        self.slots[position] = Some(agent);
        self.positions[agent] = Some(position);
    }

    pub fn num_positions(&self) -> usize {
        self.slots.len()
    }

    pub fn num_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn agent_at(&self, position: usize) -> Option<usize> {
        self.slots.get(position).copied().flatten()
    }

    pub fn position_of(&self, agent: usize) -> Option<usize> {
        self.positions.get(agent).copied().flatten()
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slots
    }

    pub(crate) fn check_against(&self, bids: &ExpressiveBidProfile) -> Result<()> {
        if self.num_agents() != bids.num_agents() {
            return Err(Error::DimensionMismatch {
                what: "assignment agents vs. bidders",
                expected: bids.num_agents(),
                found: self.num_agents(),
            });
        }
        if self.num_positions() > bids.num_positions() {
            return Err(Error::IndexOutOfRange {
                what: "position",
                index: self.num_positions() - 1,
                len: bids.num_positions(),
            });
        }
        Ok(())
    }
}

/// Fills positions top-down, giving each to the highest remaining bid on it.
///
/// Ties go to the hinted agent for that position when it attains the maximum,
/// otherwise to the lowest agent index. Positions beyond the number of agents
/// stay empty.
pub fn greedy_allocate(bids: &ExpressiveBidProfile, k: usize, tie_hint: Option<&TieHint>) -> Result<Assignment> {
    if k > bids.num_positions() {
        return Err(Error::DimensionMismatch {
            what: "positions vs. bid columns",
            expected: bids.num_positions(),
            found: k,
        });
    }
    if let Some(hint) = tie_hint {
        for (_, agent) in hint.iter() {
            if agent >= bids.num_agents() {
                return Err(Error::IndexOutOfRange { what: "tie hint agent", index: agent, len: bids.num_agents() });
            }
        }
    }
    Ok(greedy_flat(bids.flat(), bids.num_agents(), bids.num_positions(), k, tie_hint, None))
}

/// Greedy core over a row-major bid slice; `excluded` removes one agent.
pub(crate) fn greedy_flat(
    bids: &[f64],
    n: usize,
    stride: usize,
    k: usize,
    tie_hint: Option<&TieHint>,
    excluded: Option<usize>,
) -> Assignment {
    let mut out = Assignment::empty(n, k);
    let mut taken = vec![false; n];
    if let Some(e) = excluded {
        taken[e] = true;
    }
    for j in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let b = bids[i * stride + j];
            if best.is_none_or(|(_, top)| b > top) {
                best = Some((i, b));
            }
        }
        let Some((mut winner, top)) = best else { break };
        if let Some(h) = tie_hint.and_then(|t| t.get(j)) {
            if h < n && !taken[h] && bids[h * stride + j] == top {
                winner = h;
            }
        }
        taken[winner] = true;
        out.assign(j, winner);
    }
    out
}
