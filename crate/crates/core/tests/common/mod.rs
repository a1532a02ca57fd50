//! Independent oracles for integration tests. Nothing here uses the library's
//! quadrature, bid formulas or allocation recursion.

#![allow(dead_code)]

use posauc::distributions::ValueDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Stat {
    pub fn from_sums(count: usize, sum: f64, sum_sq: f64) -> Self {
        let n = count as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Stat { mean, se: (var / n).sqrt(), count }
    }

    /// Bernoulli frequency `hits / n` with its binomial standard error.
    pub fn frequency(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Stat { mean: p, se: (p * (1.0 - p) / n as f64).sqrt(), count: n }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.se.max(1e-300)
    }
}

/// Truthful VCG payment for 0-based slot `j` given all values sorted in
/// descending order (`v_(k+1)` and beyond count as 0 past the end).
pub fn vcg_slot_payment(sorted: &[f64], betas: &[f64], j: usize) -> f64 {
    let beta = |s: usize| betas.get(s).copied().unwrap_or(0.0);
    (j..betas.len()).map(|s| (beta(s) - beta(s + 1)) * sorted.get(s + 1).copied().unwrap_or(0.0)).sum()
}

/// `b*_j(v)` by rejection: draw `n − 1` opponents, keep draws where exactly
/// `j` of them beat `v`, and average the truthful VCG payment of slot `j`.
pub fn mc_bstar<D: ValueDistribution>(
    dist: &D,
    n: usize,
    betas: &[f64],
    j: usize,
    v: f64,
    proposals: usize,
    seed: u64,
) -> Stat {
    let mut r = rng(seed);
    let (mut count, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
    let mut all = vec![0.0; n];
    for _ in 0..proposals {
        all[0] = v;
        let mut above = 0;
        for slot in all.iter_mut().skip(1) {
            *slot = dist.quantile(r.random::<f64>());
            if *slot > v {
                above += 1;
            }
        }
        if above != j {
            continue;
        }
        all.sort_by(|a, b| b.total_cmp(a));
        let p = vcg_slot_payment(&all, betas, j);
        count += 1;
        sum += p;
        sum_sq += p * p;
    }
    Stat::from_sums(count, sum, sum_sq)
}

/// Frequencies of winning each position, and of winning none, when reporting
/// `x` (in value space) against `m` truthful opponents. The best remaining
/// opponent takes a position unless the report for that position beats it.
pub fn mc_alloc<D: ValueDistribution>(dist: &D, x: &[f64], m: usize, draws: usize, seed: u64) -> (Vec<Stat>, Stat) {
    let mut r = rng(seed);
    let k = x.len();
    let mut wins = vec![0usize; k];
    let mut lost = 0usize;
    let mut opp = vec![0.0; m];
    for _ in 0..draws {
        for o in opp.iter_mut() {
            *o = dist.quantile(r.random::<f64>());
        }
        opp.sort_by(|a, b| b.total_cmp(a));
        let mut used = 0;
        let mut won = false;
        for (s, &xs) in x.iter().enumerate() {
            if used < m && opp[used] > xs {
                used += 1;
            } else {
                wins[s] += 1;
                won = true;
                break;
            }
        }
        if !won {
            lost += 1;
        }
    }
    (wins.iter().map(|&w| Stat::frequency(w, draws)).collect(), Stat::frequency(lost, draws))
}

/// `C(n, r)` by Pascal's triangle.
pub fn choose(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row[r]
}

/// Random complete-information instance: `n ∈ 2..=8`, `k ∈ 1..=min(n−1, 5)`,
/// distinct values in `[0, 1)`, positive non-increasing `β`.
pub fn random_instance(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = r.random_range(2..=8usize);
    let k = r.random_range(1..=(n - 1).min(5));
    let mut values: Vec<f64> = Vec::with_capacity(n);
    while values.len() < n {
        let v: f64 = r.random();
        if values.iter().all(|&w| w != v) {
            values.push(v);
        }
    }
    let mut betas: Vec<f64> = (0..k).map(|_| 0.05 + 2.0 * r.random::<f64>()).collect();
    betas.sort_by(|a, b| b.total_cmp(a));
    (values, betas)
}
