//! Value distributions on `[0, v̄]`, quadrature, and the `Z_m` moments.

mod quadrature;
mod zfunc;

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::{Error, Result};

pub use quadrature::{integrate, QuadratureConfig};
pub use zfunc::{z_derivative_identity_check, z_function};

/// A continuous distribution supported on `[0, v̄]`.
///
/// Implementations are immutable; sampling draws from a caller-owned RNG.
pub trait ValueDistribution: Send + Sync + fmt::Debug {
    fn cdf(&self, v: f64) -> f64;
    fn pdf(&self, v: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;
    /// Upper end `v̄` of the support.
    fn upper(&self) -> f64;

    /// Inverse-transform sample.
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uniform {
    upper: f64,
}

impl Uniform {
    pub fn new(upper: f64) -> Result<Self> {
        check_upper(upper)?;
        Ok(Self { upper })
    }
}

impl ValueDistribution for Uniform {
    fn cdf(&self, v: f64) -> f64 {
        (v / self.upper).clamp(0.0, 1.0)
    }
    fn pdf(&self, v: f64) -> f64 {
        if (0.0..=self.upper).contains(&v) {
            1.0 / self.upper
        } else {
            0.0
        }
    }
    fn quantile(&self, p: f64) -> f64 {
        p.clamp(0.0, 1.0) * self.upper
    }
    fn upper(&self) -> f64 {
        self.upper
    }
}

/// `F(v) = (v / v̄)^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Power {
    upper: f64,
    exponent: f64,
}

impl Power {
    pub fn new(upper: f64, exponent: f64) -> Result<Self> {
        check_upper(upper)?;
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidDistribution(format!("power exponent must be positive, got {exponent}")));
        }
        Ok(Self { upper, exponent })
    }
}

impl ValueDistribution for Power {
    fn cdf(&self, v: f64) -> f64 {
        (v / self.upper).clamp(0.0, 1.0).powf(self.exponent)
    }
    fn pdf(&self, v: f64) -> f64 {
        if !(0.0..=self.upper).contains(&v) {
            return 0.0;
        }
        let t = v / self.upper;
        self.exponent * t.powf(self.exponent - 1.0) / self.upper
    }
    fn quantile(&self, p: f64) -> f64 {
        p.clamp(0.0, 1.0).powf(1.0 / self.exponent) * self.upper
    }
    fn upper(&self) -> f64 {
        self.upper
    }
}

/// Exponential with rate `λ` truncated to `[0, v̄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedExponential {
    upper: f64,
    rate: f64,
    mass: f64,
}

impl TruncatedExponential {
    pub fn new(upper: f64, rate: f64) -> Result<Self> {
        check_upper(upper)?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidDistribution(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self { upper, rate, mass: -(-rate * upper).exp_m1() })
    }
}

impl ValueDistribution for TruncatedExponential {
    fn cdf(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, self.upper);
        (-(-self.rate * v).exp_m1() / self.mass).min(1.0)
    }
    fn pdf(&self, v: f64) -> f64 {
        if !(0.0..=self.upper).contains(&v) {
            return 0.0;
        }
        self.rate * (-self.rate * v).exp() / self.mass
    }
    fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        (-(-p * self.mass).ln_1p() / self.rate).min(self.upper)
    }
    fn upper(&self) -> f64 {
        self.upper
    }
}

/// Piecewise-linear CDF through `(value, cdf)` knots; the density is the
/// piecewise-constant slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    knots: Vec<(f64, f64)>,
}

impl Empirical {
    /// Knots must be strictly increasing in both coordinates, start at `(0, 0)`
    /// and end at `(v̄, 1)`.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        if knots.len() < 2 {
            return bad("empirical cdf needs at least two rows".into());
        }
        if knots[0] != (0.0, 0.0) {
            return bad(format!("first row must be `0 0`, got {:?}", knots[0]));
        }
        let last = knots[knots.len() - 1];
        if last.1 != 1.0 {
            return bad(format!("last row must have cdf 1, got {:?}", last));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) || !w[1].0.is_finite() {
                return bad(format!("rows must be strictly increasing: {:?} then {:?}", w[0], w[1]));
            }
        }
        Ok(Self { knots })
    }

    /// Reads the two-column `value cdf` text format. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut knots = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected `value cdf`, got `{line}`", lineno + 1)));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)));
            knots.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(knots)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    // index of the segment [knots[i], knots[i+1]] holding v
    fn segment(&self, v: f64) -> usize {
        let idx = self.knots.partition_point(|&(x, _)| x <= v);
        idx.saturating_sub(1).min(self.knots.len() - 2)
    }
}

impl ValueDistribution for Empirical {
    fn cdf(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= self.upper() {
            return 1.0;
        }
        let i = self.segment(v);
        let (x0, c0) = self.knots[i];
        let (x1, c1) = self.knots[i + 1];
        c0 + (c1 - c0) * (v - x0) / (x1 - x0)
    }
    fn pdf(&self, v: f64) -> f64 {
        if !(0.0..=self.upper()).contains(&v) {
            return 0.0;
        }
        let i = self.segment(v);
        let (x0, c0) = self.knots[i];
        let (x1, c1) = self.knots[i + 1];
        (c1 - c0) / (x1 - x0)
    }
    fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let idx = self.knots.partition_point(|&(_, c)| c <= p);
        let i = idx.saturating_sub(1).min(self.knots.len() - 2);
        let (x0, c0) = self.knots[i];
        let (x1, c1) = self.knots[i + 1];
        x0 + (x1 - x0) * (p - c0) / (c1 - c0)
    }
    fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }
}

fn check_upper(upper: f64) -> Result<()> {
    if upper.is_finite() && upper > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!("support upper bound must be positive and finite, got {upper}")))
    }
}

/// The built-in distributions behind one cloneable type.
///
/// Displays as (and parses from) a one-line descriptor:
/// `uniform <v̄>`, `power <v̄> <a>`, `truncated-exponential <v̄> <rate>`,
/// `empirical <v>:<cdf> <v>:<cdf> …`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Uniform(Uniform),
    Power(Power),
    TruncatedExponential(TruncatedExponential),
    Empirical(Empirical),
}

impl Distribution {
    pub fn uniform(upper: f64) -> Result<Self> {
        Uniform::new(upper).map(Distribution::Uniform)
    }

    pub fn power(upper: f64, exponent: f64) -> Result<Self> {
        Power::new(upper, exponent).map(Distribution::Power)
    }

    pub fn truncated_exponential(upper: f64, rate: f64) -> Result<Self> {
        TruncatedExponential::new(upper, rate).map(Distribution::TruncatedExponential)
    }

    pub fn empirical(knots: Vec<(f64, f64)>) -> Result<Self> {
        Empirical::new(knots).map(Distribution::Empirical)
    }

    fn inner(&self) -> &dyn ValueDistribution {
        match self {
            Distribution::Uniform(d) => d,
            Distribution::Power(d) => d,
            Distribution::TruncatedExponential(d) => d,
            Distribution::Empirical(d) => d,
        }
    }
}

impl ValueDistribution for Distribution {
    fn cdf(&self, v: f64) -> f64 {
        self.inner().cdf(v)
    }
    fn pdf(&self, v: f64) -> f64 {
        self.inner().pdf(v)
    }
    fn quantile(&self, p: f64) -> f64 {
        self.inner().quantile(p)
    }
    fn upper(&self) -> f64 {
        self.inner().upper()
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform(d) => write!(f, "uniform {}", d.upper),
            Distribution::Power(d) => write!(f, "power {} {}", d.upper, d.exponent),
            Distribution::TruncatedExponential(d) => {
                write!(f, "truncated-exponential {} {}", d.upper, d.rate)
            }
            Distribution::Empirical(d) => {
                f.write_str("empirical")?;
                for (v, c) in &d.knots {
                    write!(f, " {v}:{c}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let kind = parts.next().ok_or_else(|| Error::Parse("empty distribution descriptor".into()))?;
        let rest: Vec<&str> = parts.collect();
        let num = |t: &str| {
            t.parse::<f64>().map_err(|e| Error::Parse(format!("bad number `{t}` in distribution descriptor: {e}")))
        };
        let arity = |want: usize| {
            if rest.len() == want {
                Ok(())
            } else {
                Err(Error::Parse(format!("`{kind}` takes {want} parameter(s), got {}", rest.len())))
            }
        };
        match kind {
            "uniform" => {
                arity(1)?;
                Distribution::uniform(num(rest[0])?)
            }
            "power" => {
                arity(2)?;
                Distribution::power(num(rest[0])?, num(rest[1])?)
            }
            "truncated-exponential" => {
                arity(2)?;
                Distribution::truncated_exponential(num(rest[0])?, num(rest[1])?)
            }
            "empirical" => {
                let knots = rest
                    .iter()
                    .map(|t| {
                        let (v, c) = t
                            .split_once(':')
                            .ok_or_else(|| Error::Parse(format!("empirical knot `{t}` is not `v:cdf`")))?;
                        Ok((num(v)?, num(c)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Distribution::empirical(knots)
            }
            other => Err(Error::Parse(format!("unknown distribution `{other}`"))),
        }
    }
}
