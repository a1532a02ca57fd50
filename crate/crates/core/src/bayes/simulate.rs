use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BayesSetting, PositionBids};
use crate::auction::greedy_flat;
use crate::distributions::ValueDistribution;
use crate::{Error, Execution, Result};

/// Rounds per RNG stream. Block `b` draws from stream `b` of the seed, so the
/// rounds do not depend on how blocks are spread over threads.
pub const BLOCK_ROUNDS: usize = 1 << 14;

/// Sample mean with its standard error (absent for a single sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: Option<f64>,
}

/// Paired revenue estimates from one set of value draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueEstimate {
    pub samples: usize,
    /// Expressive first-price revenue under the given bids.
    pub gfp: MeanEstimate,
    /// Truthful VCG revenue.
    pub vcg: MeanEstimate,
    /// Per-round `gfp − vcg`.
    pub difference: MeanEstimate,
}

/// Per-round revenues, in round order.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueRounds {
    pub gfp: Vec<f64>,
    pub vcg: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn estimate(&self) -> MeanEstimate {
        let n = self.count as f64;
        let mean = self.sum / n;
        let std_error = (self.count > 1).then(|| {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        });
        MeanEstimate { mean, std_error }
    }
}

struct RoundState {
    values: Vec<f64>,
    sorted: Vec<f64>,
    bids: Vec<f64>,
}

fn play_round<B: PositionBids + ?Sized>(
    s: &BayesSetting,
    bids: &B,
    rng: &mut ChaCha8Rng,
    st: &mut RoundState,
) -> Result<(f64, f64)> {
    let n = s.num_agents();
    let k = s.num_positions();
    for v in st.values.iter_mut() {
        *v = s.dist().sample(rng);
    }
    for (i, &v) in st.values.iter().enumerate() {
        bids.bids_into(v, &mut st.bids[i * k..(i + 1) * k])?;
    }
    let assignment = greedy_flat(&st.bids, n, k, k, None, None);
    let gfp: f64 = assignment.slots().iter().enumerate().filter_map(|(j, a)| a.map(|i| st.bids[i * k + j])).sum();

    // Truthful VCG total: Σ_j Σ_{s≥j} (β_s − β_{s+1}) v_(s+1) = Σ_s s·(β_s − β_{s+1}) v_(s+1).
    st.sorted.copy_from_slice(&st.values);
    st.sorted.sort_by(|a, b| b.total_cmp(a));
    let vcg: f64 = (0..k).map(|j| (j + 1) as f64 * s.curve().step(j) * st.sorted[j + 1]).sum();
    Ok((gfp, vcg))
}

fn run_block<B: PositionBids + ?Sized>(
    s: &BayesSetting,
    bids: &B,
    seed: u64,
    block: usize,
    rounds: usize,
    mut sink: impl FnMut(f64, f64),
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    let n = s.num_agents();
    let mut st = RoundState { values: vec![0.0; n], sorted: vec![0.0; n], bids: vec![0.0; n * s.num_positions()] };
    for _ in 0..rounds {
        let (g, v) = play_round(s, bids, &mut rng, &mut st)?;
        sink(g, v);
    }
    Ok(())
}

fn check_inputs<B: PositionBids + ?Sized>(s: &BayesSetting, bids: &B, samples: usize) -> Result<usize> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if bids.num_positions() != s.num_positions() {
        return Err(Error::DimensionMismatch {
            what: "bid strategy positions",
            expected: s.num_positions(),
            found: bids.num_positions(),
        });
    }
    Ok(samples.div_ceil(BLOCK_ROUNDS))
}

fn block_len(samples: usize, block: usize) -> usize {
    BLOCK_ROUNDS.min(samples - block * BLOCK_ROUNDS)
}

/// Monte Carlo revenue of expressive GFP when every agent bids `bids`, paired
/// with truthful VCG on the same draws. Bit-identical for a given seed in
/// either execution mode.
pub fn simulate_revenue<B: PositionBids + ?Sized>(
    s: &BayesSetting,
    bids: &B,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<RevenueEstimate> {
    let blocks = check_inputs(s, bids, samples)?;
    let parts = exec.try_map(blocks, |b| {
        let mut m = [Moments::default(); 3];
        run_block(s, bids, seed, b, block_len(samples, b), |g, v| {
            m[0].push(g);
            m[1].push(v);
            m[2].push(g - v);
        })?;
        Ok::<_, Error>(m)
    })?;
    let mut total = [Moments::default(); 3];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(RevenueEstimate { samples, gfp: total[0].estimate(), vcg: total[1].estimate(), difference: total[2].estimate() })
}

/// The individual rounds behind [`simulate_revenue`].
pub fn simulate_revenue_rounds<B: PositionBids + ?Sized>(
    s: &BayesSetting,
    bids: &B,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<RevenueRounds> {
    let blocks = check_inputs(s, bids, samples)?;
    let parts = exec.try_map(blocks, |b| {
        let mut out = Vec::with_capacity(block_len(samples, b));
        run_block(s, bids, seed, b, block_len(samples, b), |g, v| out.push((g, v)))?;
        Ok::<_, Error>(out)
    })?;
    let (gfp, vcg) = parts.into_iter().flatten().unzip();
    Ok(RevenueRounds { gfp, vcg })
}
