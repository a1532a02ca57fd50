use super::alloc::alloc_probs_from_cdf;
use super::{BayesSetting, PositionBids};
use crate::distributions::ValueDistribution;
use crate::{Error, Execution, Result};

/// Largest number of reports [`best_response_scan`] will enumerate.
pub const MAX_SCAN_REPORTS: usize = 50_000_000;

/// Outcome of a best-response scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    /// `max_x u*(x, v) − u*((v, …, v), v)` over the scanned reports.
    pub max_gain: f64,
    pub best_report: Vec<f64>,
    pub truthful_utility: f64,
    pub evaluated: usize,
}

/// Scan every non-increasing report `x ∈ grid^k` for an improvement over
/// truthful reporting, using exact equilibrium bids.
pub fn best_response_scan(v: f64, s: &BayesSetting, grid: &[f64]) -> Result<ScanReport> {
    best_response_scan_with(v, s, grid, &s.exact_bids(), Execution::default())
}

// Number of non-increasing k-tuples drawn from g sorted points.
fn monotone_count(g: usize, k: usize) -> Option<usize> {
    let mut c: usize = 1;
    for i in 0..k {
        c = c.checked_mul(g + i)? / (i + 1);
    }
    Some(c)
}

/// [`best_response_scan`] with the agent's own bids taken from `bids`.
///
/// The scan is exhaustive over the grid, which contains every report the
/// coordinate-wise search could visit. Work is split over the top coordinate.
pub fn best_response_scan_with<B: PositionBids + ?Sized>(
    v: f64,
    s: &BayesSetting,
    grid: &[f64],
    bids: &B,
    exec: Execution,
) -> Result<ScanReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("best-response grid is empty".into()));
    }
    s.check_value(v)?;
    let k = s.num_positions();
    let mut pts = grid.to_vec();
    pts.sort_by(|a, b| b.total_cmp(a));
    pts.dedup();
    for &x in &pts {
        s.check_value(x)?;
    }
    let g = pts.len();
    if monotone_count(g, k).is_none_or(|c| c > MAX_SCAN_REPORTS) {
        return Err(Error::InvalidArgument(format!("{g} grid points over {k} positions is too many reports to scan")));
    }

    let m = s.num_agents() - 1;
    let cdf: Vec<f64> = pts.iter().map(|&x| s.dist().cdf(x)).collect();
    let margins = exec.try_map(g, |i| -> Result<Vec<f64>> {
        let mut row = vec![0.0; k];
        bids.bids_into(pts[i], &mut row)?;
        Ok(row.iter().enumerate().map(|(j, b)| s.curve().beta(j) * v - b).collect())
    })?;
    let utility = |idx: &[usize], fx: &mut Vec<f64>| -> f64 {
        fx.clear();
        fx.extend(idx.iter().map(|&i| cdf[i]));
        alloc_probs_from_cdf(m, fx).iter().enumerate().map(|(j, p)| p * margins[idx[j]][j]).sum()
    };

    let truthful = {
        let mut row = vec![0.0; k];
        bids.bids_into(v, &mut row)?;
        let fx = vec![s.dist().cdf(v); k];
        alloc_probs_from_cdf(m, &fx).iter().enumerate().map(|(j, p)| p * (s.curve().beta(j) * v - row[j])).sum::<f64>()
    };

    // Each branch fixes the top coordinate and walks the rest in
    // lexicographic order of non-decreasing indices into `pts` (descending).
    let branches = exec.map(g, |first| {
        let mut idx = vec![first; k];
        let mut fx = Vec::with_capacity(k);
        let mut best = (f64::NEG_INFINITY, idx.clone());
        let mut count = 0usize;
        loop {
            let u = utility(&idx, &mut fx);
            count += 1;
            if u > best.0 {
                best = (u, idx.clone());
            }
            let Some(p) = (1..k).rev().find(|&p| idx[p] + 1 < g) else {
                break;
            };
            idx[p] += 1;
            let base = idx[p];
            idx[p + 1..].iter_mut().for_each(|t| *t = base);
        }
        (best, count)
    });

    let mut evaluated = 0;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for ((u, idx), count) in branches {
        evaluated += count;
        if u > best.0 {
            best = (u, idx);
        }
    }
    Ok(ScanReport {
        max_gain: best.0 - truthful,
        best_report: best.1.iter().map(|&i| pts[i]).collect(),
        truthful_utility: truthful,
        evaluated,
    })
}
