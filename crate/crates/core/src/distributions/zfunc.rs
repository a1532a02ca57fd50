use super::{integrate, QuadratureConfig, ValueDistribution};
use crate::{Error, Result};

fn check_in_support<D: ValueDistribution + ?Sized>(v: f64, dist: &D) -> Result<()> {
    let top = dist.upper();
    if !(0.0..=top * (1.0 + 1e-12)).contains(&v) {
        return Err(Error::InvalidArgument(format!("value {v} outside the support [0, {top}]")));
    }
    Ok(())
}

/// `Z_m(v) = F(v)^{-m} ∫₀^v F(u)^m du`, evaluated as `∫₀^v (F(u)/F(v))^m du`.
///
/// `Z_m(0) = 0` by continuity; the result always lies in `[0, v]`.
pub fn z_function<D: ValueDistribution + ?Sized>(m: usize, v: f64, dist: &D, cfg: &QuadratureConfig) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("Z_m needs m >= 1".into()));
    }
    check_in_support(v, dist)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    let fv = dist.cdf(v);
    if fv <= 0.0 {
        return Err(Error::SupportViolation { v });
    }
    let z = integrate(|u| (dist.cdf(u) / fv).powi(m as i32), 0.0, v, cfg)?;
    Ok(z.clamp(0.0, v))
}

/// Residual of `d/dv (v − Z_m(v)) = m · f(v)/F(v) · Z_m(v)` with the left side
/// taken by central difference of step `h`.
pub fn z_derivative_identity_check<D: ValueDistribution + ?Sized>(
    m: usize,
    v: f64,
    dist: &D,
    h: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if h.is_nan() || h <= 0.0 || v - h <= 0.0 || v + h > dist.upper() {
        return Err(Error::InvalidArgument(format!("step {h} does not fit inside the support around v = {v}")));
    }
    let lhs = ((v + h - z_function(m, v + h, dist, cfg)?) - (v - h - z_function(m, v - h, dist, cfg)?)) / (2.0 * h);
    let fv = dist.cdf(v);
    if fv <= 0.0 {
        return Err(Error::SupportViolation { v });
    }
    let rhs = m as f64 * dist.pdf(v) / fv * z_function(m, v, dist, cfg)?;
    Ok((lhs - rhs).abs())
}
