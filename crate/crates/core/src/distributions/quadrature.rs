use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of bisections applied to any one subinterval.
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-8, max_depth: 40 }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_depth: u32) -> Result<Self> {
        let cfg = Self { abs_tol, rel_tol, max_depth };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        Ok(())
    }
}

// Hard cap on the number of live subintervals.
const MAX_INTERVALS: usize = 1 << 14;

// Kronrod 15-point abscissae (non-negative half) and weights, with the
// embedded 7-point Gauss weights on the odd-indexed nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = g(center - dx) + g(center + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `g` over `[a, b]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate falls below `max(abs_tol, rel_tol·|I|)`. Panels that reached
/// `max_depth` are frozen; if the budget runs out first the call fails.
pub fn integrate<F>(g: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidArgument(format!("bad integration bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }

    let (value, error) = kronrod15(&g, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut live = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut frozen_err = 0.0;
    live.push(Panel { a, b, value, error, depth: 0 });

    loop {
        let tolerance = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tolerance {
            break;
        }
        let Some(worst) = live.pop() else {
            return Err(Error::QuadratureDiverged { estimate: total_err, tolerance });
        };
        if worst.depth >= cfg.max_depth || live.len() + 2 > MAX_INTERVALS {
            frozen_err += worst.error;
            frozen.push(worst);
            if live.is_empty() || frozen_err > tolerance {
                return Err(Error::QuadratureDiverged { estimate: total_err, tolerance });
            }
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = kronrod15(&g, worst.a, mid);
        let (rv, re) = kronrod15(&g, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        live.push(Panel { a: worst.a, b: mid, value: lv, error: le, depth: worst.depth + 1 });
        live.push(Panel { a: mid, b: worst.b, value: rv, error: re, depth: worst.depth + 1 });
    }
    if !total.is_finite() {
        return Err(Error::InvalidArgument("integrand is not finite on the interval".into()));
    }
    // sum in position order so the result does not depend on refinement order
    let mut panels = live.into_vec();
    panels.append(&mut frozen);
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(panels.iter().map(|p| p.value).sum())
}
