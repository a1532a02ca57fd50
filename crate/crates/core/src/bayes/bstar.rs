use super::BayesSetting;
use crate::distributions::{integrate, z_function, ValueDistribution};
use crate::math::binomial;
use crate::{Error, Result};

// Coefficient (n−j)! / ((n−s−1)! (s−j)!) = C(n−j, s−j)·(n−s), 1-based j ≤ s.
fn order_coefficient(n: usize, j: usize, s: usize) -> f64 {
    binomial(n - j, s - j) * (n - s) as f64
}

fn prepare(j: usize, v: f64, s: &BayesSetting) -> Result<Option<f64>> {
    s.check_position(j)?;
    s.check_value(v)?;
    if v == 0.0 {
        return Ok(None);
    }
    let fv = s.dist().cdf(v);
    if fv <= 0.0 {
        return Err(Error::SupportViolation { v });
    }
    Ok(Some(fv))
}

/// `b*_j(v)` by direct quadrature of the order-statistic densities.
///
/// With `G = F/F(v)` and `g = f/F(v)` on `[0, v]`, and 1-based positions,
///
/// ```text
/// b*_j(v) = ∫₀^v u·g(u) Σ_{s=j..k} (β_s − β_{s+1}) C(n−j, s−j)(n−s) G^{n−s−1} (1−G)^{s−j} du
/// ```
///
/// which sums every term under a single integral. Returns 0 at `v = 0`.
pub fn bstar_integral(j: usize, v: f64, s: &BayesSetting) -> Result<f64> {
    let Some(fv) = prepare(j, v, s)? else { return Ok(0.0) };
    let n = s.num_agents();
    let k = s.num_positions();
    let jj = j + 1;
    let terms: Vec<(f64, i32, i32)> = (jj..=k)
        .map(|ss| {
            let coef = s.curve().step(ss - 1) * order_coefficient(n, jj, ss);
            (coef, (n - ss - 1) as i32, (ss - jj) as i32)
        })
        .filter(|t| t.0 != 0.0)
        .collect();
    let dist = s.dist();
    let value = integrate(
        |u| {
            let g = (dist.cdf(u) / fv).min(1.0);
            let density = dist.pdf(u) / fv;
            let mix: f64 = terms.iter().map(|&(c, a, b)| c * g.powi(a) * (1.0 - g).powi(b)).sum();
            u * density * mix
        },
        0.0,
        v,
        s.quadrature(),
    )?;
    Ok(value.max(0.0))
}

// Z_m(v) for m in (n−k)..=(n−j), indexed by m; j is 1-based.
fn z_table(j: usize, v: f64, s: &BayesSetting) -> Result<Vec<f64>> {
    let n = s.num_agents();
    let k = s.num_positions();
    let mut z = vec![0.0; n - j + 1];
    for (m, slot) in z.iter_mut().enumerate().skip(n - k) {
        *slot = z_function(m, v, s.dist(), s.quadrature())?;
    }
    Ok(z)
}

/// `b*_j(v)` through the binomial expansion of `(1 − G)^{s−j}`:
///
/// ```text
/// Σ_{s=j..k} (β_s − β_{s+1}) Σ_{t=0..s−j} (−1)^t C(s−j, t) C(n−j, s−j)(n−s) (v − Z_{n−s+t}(v)) / (n−s+t)
/// ```
///
/// The alternating sum cancels badly once `n − j` is large; use it as a
/// cross-check for small settings.
pub fn bstar_binomial(j: usize, v: f64, s: &BayesSetting) -> Result<f64> {
    if prepare(j, v, s)?.is_none() {
        return Ok(0.0);
    }
    let n = s.num_agents();
    let jj = j + 1;
    let z = z_table(jj, v, s)?;
    let mut total = 0.0;
    for ss in jj..=s.num_positions() {
        let outer = s.curve().step(ss - 1) * order_coefficient(n, jj, ss);
        let mut inner = 0.0;
        for t in 0..=(ss - jj) {
            let m = n - ss + t;
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * binomial(ss - jj, t) * (v - z[m]) / m as f64;
        }
        total += outer * inner;
    }
    Ok(total)
}

/// Closed-form `d/dv b*_j(v)`:
///
/// ```text
/// Σ_{s=j..k} (β_s − β_{s+1}) Σ_{t=0..s−j} (−1)^t C(s−j, t) C(n−j, s−j)(n−s) · f(v)/F(v) · Z_{n−s+t}(v)
/// ```
///
/// Undefined at `v = 0`.
pub fn bstar_derivative(j: usize, v: f64, s: &BayesSetting) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::InvalidArgument("b* derivative is undefined at v = 0".into()));
    }
    let Some(fv) = prepare(j, v, s)? else { unreachable!() };
    let n = s.num_agents();
    let jj = j + 1;
    let z = z_table(jj, v, s)?;
    let hazard = s.dist().pdf(v) / fv;
    let mut total = 0.0;
    for ss in jj..=s.num_positions() {
        let outer = s.curve().step(ss - 1) * order_coefficient(n, jj, ss);
        let mut inner = 0.0;
        for t in 0..=(ss - jj) {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * binomial(ss - jj, t) * z[n - ss + t];
        }
        total += outer * inner;
    }
    Ok(hazard * total)
}
