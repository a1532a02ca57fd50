//! Finite-difference checks of the identities behind the equilibrium.
//!
//! Every residual here is a central difference, so when the identity holds it
//! shrinks like `h²` until quadrature noise takes over.

use super::alloc::{alloc_probs, AllocProbInput};
use super::utility::{diagonal_alloc_probs, expected_bid_payment, expected_utility_with, myerson_expected_payment};
use super::{bstar_derivative, bstar_integral, BayesSetting, PositionBids};
use crate::distributions::ValueDistribution;
use crate::{Error, Result};

fn check_step(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    Ok(())
}

fn utility_at<B: PositionBids + ?Sized>(x: Vec<f64>, v: f64, s: &BayesSetting, bids: &B) -> Result<f64> {
    let x = AllocProbInput::relaxed(x, s.upper())?;
    expected_utility_with(&x, v, s, bids)
}

/// `|∂u*/∂x_j|` at `x_j = v` for the fully truthful report `(v, …, v)`.
pub fn check_lemma1(j: usize, v: f64, s: &BayesSetting, h: f64) -> Result<f64> {
    lemma1_residual(j, &vec![v; s.num_positions()], v, s, h, &s.exact_bids())
}

/// `|∂u*/∂x_j|` at `x_j = v` for the report `x` (its `j`-th entry is replaced)
/// and the agent's own bids `bids`.
pub fn lemma1_residual<B: PositionBids + ?Sized>(
    j: usize,
    x: &[f64],
    v: f64,
    s: &BayesSetting,
    h: f64,
    bids: &B,
) -> Result<f64> {
    s.check_position(j)?;
    check_step(h)?;
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    if j >= up.len() {
        return Err(Error::DimensionMismatch { what: "report", expected: s.num_positions(), found: up.len() });
    }
    up[j] = v + h;
    down[j] = v - h;
    let d = utility_at(up, v, s, bids)? - utility_at(down, v, s, bids)?;
    Ok((d / (2.0 * h)).abs())
}

/// Outcome of [`check_lemma2`].
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Report {
    /// Smallest mixed difference found (`+∞` if nothing was evaluated).
    pub min: f64,
    /// `(v, x_j)` where the minimum occurs.
    pub at: Option<(f64, f64)>,
    pub evaluated: usize,
    /// Grid pairs whose stencil would leave the monotone report region.
    pub skipped: usize,
}

/// Minimum over the grids of the mixed difference `∂²u*/∂v∂x_j` at report
/// `(x̂, …, x̂, x_j, v, …, v)` with `x̂ = max(x_grid)` above position `j`.
///
/// Only pairs whose whole stencil keeps the report non-increasing are used:
/// `x_j − h ≥ v + h` and, for `j > 0`, `x_j + h ≤ x̂`. Below the diagonal the
/// allocation recursion no longer describes a probability.
pub fn check_lemma2(j: usize, v_grid: &[f64], x_grid: &[f64], s: &BayesSetting, h: f64) -> Result<Lemma2Report> {
    s.check_position(j)?;
    check_step(h)?;
    if v_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::InvalidArgument("cross-derivative grids must be non-empty".into()));
    }
    let k = s.num_positions();
    let top = x_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bids = s.exact_bids();
    let report = |xj: f64, v: f64| {
        let mut x = vec![top; k];
        x[j] = xj;
        x[j + 1..].iter_mut().for_each(|t| *t = v);
        x
    };
    let u = |xj: f64, v: f64| utility_at(report(xj, v), v, s, &bids);
    let mut out = Lemma2Report { min: f64::INFINITY, at: None, evaluated: 0, skipped: 0 };
    for &v in v_grid {
        for &xj in x_grid {
            let inside = v - h > 0.0 && xj + h <= s.upper() && xj - h >= v + h && (j == 0 || xj + h <= top);
            if !inside {
                out.skipped += 1;
                continue;
            }
            let d = (u(xj + h, v + h)? - u(xj + h, v - h)? - u(xj - h, v + h)? + u(xj - h, v - h)?) / (4.0 * h * h);
            out.evaluated += 1;
            if d < out.min {
                out.min = d;
                out.at = Some((v, xj));
            }
        }
    }
    Ok(out)
}

fn ode_rhs(j: usize, v: f64, s: &BayesSetting) -> Result<f64> {
    let n = s.num_agents();
    let hazard = s.dist().pdf(v) / s.dist().cdf(v);
    let margin = |p: usize| -> Result<f64> {
        if p >= s.num_positions() {
            return Ok(0.0);
        }
        Ok(s.curve().beta(p) * v - bstar_integral(p, v, s)?)
    };
    Ok((n - j - 1) as f64 * hazard * (margin(j)? - margin(j + 1)?))
}

/// `|b*_j'(v) − (n−j) f/F [(β_j v − b*_j) − (β_{j+1} v − b*_{j+1})]|` with the
/// closed-form derivative (1-based `j` in the formula).
pub fn check_ode(j: usize, v: f64, s: &BayesSetting) -> Result<f64> {
    s.check_position(j)?;
    Ok((bstar_derivative(j, v, s)? - ode_rhs(j, v, s)?).abs())
}

/// As [`check_ode`] but with the derivative taken by central difference.
pub fn ode_residual_fd(j: usize, v: f64, s: &BayesSetting, h: f64) -> Result<f64> {
    s.check_position(j)?;
    check_step(h)?;
    let fd = (bstar_integral(j, v + h, s)? - bstar_integral(j, v - h, s)?) / (2.0 * h);
    Ok((fd - ode_rhs(j, v, s)?).abs())
}

/// The two allocation-probability identities used for positions below `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxLemma {
    /// `∂/∂x_j (P_{j,m} + P_{j+1,m}) = 0` at `x_j = v`; needs `m ≥ j + 2`
    /// (0-based `j`).
    PairSum,
    /// `∂/∂x_j P_{ℓ,m} = 0` at `x_j = v`; needs `ℓ ≥ j + 2` and `m ≥ ℓ + 1`
    /// (0-based `j`, `ℓ`).
    Deep { ell: usize },
}

/// Central-difference residual of an [`AuxLemma`] at `x_j = v`, with the
/// report's other entries taken from `x`.
pub fn check_auxiliary_lemma<D: ValueDistribution + ?Sized>(
    lemma: AuxLemma,
    j: usize,
    m: usize,
    x: &[f64],
    v: f64,
    dist: &D,
    h: f64,
) -> Result<f64> {
    check_step(h)?;
    let (targets, deepest) = match lemma {
        AuxLemma::PairSum => {
            if m < j + 2 {
                return Err(Error::InvalidArgument(format!("pair-sum identity needs m >= {}, got {m}", j + 2)));
            }
            (vec![j, j + 1], j + 1)
        }
        AuxLemma::Deep { ell } => {
            if ell < j + 2 || m < ell + 1 {
                return Err(Error::InvalidArgument(format!(
                    "deep identity needs l >= j + 2 and m >= l + 1, got j={j} l={ell} m={m}"
                )));
            }
            (vec![ell], ell)
        }
    };
    if deepest >= x.len() {
        return Err(Error::DimensionMismatch { what: "report", expected: deepest + 1, found: x.len() });
    }
    let eval = |xj: f64| -> Result<f64> {
        let mut y = x[..=deepest].to_vec();
        y[j] = xj;
        let p = alloc_probs(m, &AllocProbInput::relaxed(y, dist.upper())?, dist);
        Ok(targets.iter().map(|&t| p[t]).sum())
    };
    Ok(((eval(v + h)? - eval(v - h)?) / (2.0 * h)).abs())
}

/// Whether `Σ_s β_s P_{s,n−1}(v, …, v)` is non-decreasing along `grid`.
pub fn check_monotone_allocation(s: &BayesSetting, grid: &[f64]) -> Result<bool> {
    let mut prev = f64::NEG_INFINITY;
    for &v in grid {
        s.check_value(v)?;
        let w: f64 = diagonal_alloc_probs(v, s).iter().enumerate().map(|(j, p)| s.curve().beta(j) * p).sum();
        if w < prev - 1e-12 {
            return Ok(false);
        }
        prev = w;
    }
    Ok(true)
}

/// `|Σ_s P_s(v) b*_s(v) − Myerson payment(v)|`.
pub fn payment_identity_residual(v: f64, s: &BayesSetting) -> Result<f64> {
    Ok((expected_bid_payment(v, s)? - myerson_expected_payment(v, s)?).abs())
}

/// Residuals at `h` and `h/2` and the observed order `log₂(r_h / r_{h/2})`.
pub fn observed_order<F>(mut residual: F, h: f64) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    check_step(h)?;
    let coarse = residual(h)?;
    let fine = residual(h / 2.0)?;
    Ok((coarse, fine, (coarse / fine).log2()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::SlotCurve;
    use crate::bayes::ScaledBids;
    use crate::distributions::{Distribution, QuadratureConfig};

    fn setting(n: usize, betas: &[f64], dist: Distribution) -> BayesSetting {
        BayesSetting::new(n, SlotCurve::new(betas.to_vec()).unwrap(), dist, QuadratureConfig::default()).unwrap()
    }

    fn uniform() -> Distribution {
        Distribution::uniform(1.0).unwrap()
    }

    #[test]
    fn lemma1_examples() {
        let s = setting(3, &[2.0, 1.0], uniform());
        assert!(check_lemma1(0, 0.5, &s, 1e-3).unwrap() < 1e-4);
        for &v in &[0.2, 0.5, 0.8] {
            assert!(check_lemma1(1, v, &s, 1e-3).unwrap() < 1e-4);
        }
        let s = setting(2, &[1.0], uniform());
        assert!(check_lemma1(0, 0.7, &s, 1e-3).unwrap() < 1e-5);
    }

    #[test]
    fn lemma1_negative_controls() {
        let s = setting(4, &[2.0, 1.0], uniform());
        let halved = ScaledBids { inner: s.exact_bids(), factor: 0.5 };
        assert!(lemma1_residual(0, &[0.5, 0.5], 0.5, &s, 1e-3, &halved).unwrap() > 1e-2);
        let skewed = [0.5, 0.2];
        assert!(lemma1_residual(0, &skewed, 0.5, &s, 1e-3, &s.exact_bids()).unwrap() > 1e-2);
    }

    #[test]
    fn lemma2_examples() {
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 11.0).collect();
        let s = setting(3, &[2.0, 1.0], uniform());
        let r = check_lemma2(0, &grid, &grid, &s, 1e-3).unwrap();
        assert!(r.evaluated > 0);
        assert!(r.min >= -1e-4, "{r:?}");

        let s = setting(2, &[1.0], uniform());
        let r = check_lemma2(0, &grid, &grid, &s, 1e-3).unwrap();
        // ∂²/∂v∂x [F(x)(v − b*(x))] = f(x) = 1.
        assert!((r.min - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn lemma2_scales_with_last_beta() {
        let grid = [0.3, 0.6, 0.9];
        let a = setting(3, &[2.0, 1.0], uniform());
        let b = setting(3, &[2.0, 0.5], uniform());
        let ra = check_lemma2(1, &grid, &grid, &a, 1e-3).unwrap();
        let rb = check_lemma2(1, &grid, &grid, &b, 1e-3).unwrap();
        assert!(ra.evaluated > 0);
        assert!((ra.min - 2.0 * rb.min).abs() < 1e-4, "{ra:?} {rb:?}");
    }

    #[test]
    fn ode_examples() {
        let s = setting(2, &[1.0], uniform());
        assert!(check_ode(0, 0.5, &s).unwrap() < 1e-8);
        let s = setting(4, &[2.0, 1.0], uniform());
        for i in 1..=20 {
            let v = i as f64 / 21.0;
            for j in 0..2 {
                assert!(check_ode(j, v, &s).unwrap() < 1e-6);
            }
        }
        let s = setting(3, &[1.0], Distribution::power(1.0, 2.0).unwrap());
        assert!(check_ode(0, 0.4, &s).unwrap() < 1e-6);
        assert!(check_ode(0, 0.0, &s).is_err());
    }

    #[test]
    fn auxiliary_examples_and_controls() {
        let d = uniform();
        let x = [0.9, 0.5, 0.5, 0.5, 0.5];
        assert!(check_auxiliary_lemma(AuxLemma::PairSum, 0, 3, &x, 0.5, &d, 1e-4).unwrap() < 1e-6);
        assert!(check_auxiliary_lemma(AuxLemma::Deep { ell: 2 }, 0, 4, &x, 0.5, &d, 1e-4).unwrap() < 1e-6);
        let skewed = [0.9, 0.3, 0.3, 0.3, 0.3];
        assert!(check_auxiliary_lemma(AuxLemma::PairSum, 0, 3, &skewed, 0.5, &d, 1e-4).unwrap() > 1e-2);
        assert!(check_auxiliary_lemma(AuxLemma::PairSum, 1, 2, &x, 0.5, &d, 1e-4).is_err());
        assert!(check_auxiliary_lemma(AuxLemma::Deep { ell: 2 }, 1, 4, &x, 0.5, &d, 1e-4).is_err());
        assert!(check_auxiliary_lemma(AuxLemma::Deep { ell: 2 }, 0, 2, &x, 0.5, &d, 1e-4).is_err());
    }

    #[test]
    fn lemma1_converges_quadratically() {
        let s = setting(4, &[2.0, 1.0], uniform());
        let (_, _, order) = observed_order(|h| check_lemma1(0, 0.5, &s, h), 0.04).unwrap();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn monotone_allocation_and_payment_identity() {
        let s = setting(4, &[3.0, 1.0, 0.5], Distribution::truncated_exponential(1.0, 2.0).unwrap());
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        assert!(check_monotone_allocation(&s, &grid).unwrap());
        for &v in &[0.1, 0.4, 0.9] {
            assert!(payment_identity_residual(v, &s).unwrap() < 1e-9);
        }
    }
}
