use std::fmt::Write as _;
use std::path::Path;

use super::{bstar_integral, BayesSetting, PositionBids};
use crate::auction::SlotCurve;
use crate::distributions::{Distribution, ValueDistribution};
use crate::{Error, Execution, Result};

const MAGIC: &str = "# equilibrium bid table";

/// `b*_j(v)` sampled on a grid over `[0, v̄]` and interpolated by monotone
/// cubic Hermite splines.
///
/// Node values always satisfy `b*_j(0) = 0`, monotonicity in `v`,
/// `b*_j ≥ b*_{j+1}` and `0 ≤ b*_j(v) ≤ β_j v`; interpolated values are
/// clamped back into the same cone.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumBidTable {
    n: usize,
    curve: SlotCurve,
    dist: Distribution,
    grid: Vec<f64>,
    rows: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl EquilibriumBidTable {
    pub const DEFAULT_POINTS: usize = 512;

    /// Evaluates `b*` by quadrature on `points` equally spaced values.
    pub fn build(setting: &BayesSetting, points: usize, exec: Execution) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidArgument(format!("a bid table needs at least 2 grid points, got {points}")));
        }
        let top = setting.upper();
        let last = (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|g| if g + 1 == points { top } else { top * g as f64 / last }).collect();
        let k = setting.num_positions();
        let mut rows = exec
            .try_map(points, |g| (0..k).map(|j| bstar_integral(j, grid[g], setting)).collect::<Result<Vec<f64>>>())?;
        enforce_cone(&grid, &mut rows, setting.curve());
        Self::from_parts(setting.num_agents(), setting.curve().clone(), setting.dist().clone(), grid, rows)
    }

    /// A table from explicit node values, which must already satisfy the
    /// cone invariants.
    pub fn from_rows(setting: &BayesSetting, grid: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_parts(setting.num_agents(), setting.curve().clone(), setting.dist().clone(), grid, rows)
    }

    fn from_parts(n: usize, curve: SlotCurve, dist: Distribution, grid: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = curve.len();
        if n < k + 1 {
            return Err(Error::InsufficientAgents { n, k });
        }
        if grid.len() < 2 || grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0] || w[1].is_nan()) {
            return Err(Error::InvalidBids("table grid must start at 0 and be strictly increasing".into()));
        }
        if *grid.last().unwrap() > dist.upper() * (1.0 + 1e-12) {
            return Err(Error::InvalidBids("table grid leaves the support".into()));
        }
        if rows.len() != grid.len() {
            return Err(Error::DimensionMismatch { what: "table rows", expected: grid.len(), found: rows.len() });
        }
        for (g, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { what: "table row", expected: k, found: row.len() });
            }
            let v = grid[g];
            for (j, &b) in row.iter().enumerate() {
                let cone = b >= 0.0
                    && b <= curve.beta(j) * v
                    && (j == 0 || b <= row[j - 1])
                    && (g == 0 || b >= rows[g - 1][j]);
                if !cone {
                    return Err(Error::InvalidBids(format!(
                        "table entry ({v}, position {j}) = {b} leaves the bid cone"
                    )));
                }
            }
        }
        let slopes = (0..k).map(|j| pchip_slopes(&grid, &rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
        Ok(Self { n, curve, dist, grid, rows, slopes })
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn curve(&self) -> &SlotCurve {
        &self.curve
    }

    pub fn dist(&self) -> &Distribution {
        &self.dist
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Node values; row `g` holds `b*(grid[g])`.
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Interpolated bids on all positions.
    pub fn bids_at(&self, v: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.curve.len()];
        self.fill(v, &mut out)?;
        Ok(out)
    }

    fn fill(&self, v: f64, out: &mut [f64]) -> Result<()> {
        let top = *self.grid.last().unwrap();
        if !(0.0..=top * (1.0 + 1e-12)).contains(&v) {
            return Err(Error::InvalidArgument(format!("value {v} outside the table range [0, {top}]")));
        }
        let v = v.min(top);
        let i = self.grid.partition_point(|&g| g <= v).clamp(1, self.grid.len() - 1) - 1;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let h = x1 - x0;
        let t = (v - x0) / h;
        let (h00, h10, h01, h11) = hermite_basis(t);
        for j in 0..out.len() {
            let (y0, y1) = (self.rows[i][j], self.rows[i + 1][j]);
            let raw = h00 * y0 + h10 * h * self.slopes[j][i] + h01 * y1 + h11 * h * self.slopes[j][i + 1];
            let mut b = raw.clamp(y0.min(y1), y0.max(y1)).min(self.curve.beta(j) * v);
            if j > 0 {
                b = b.min(out[j - 1]);
            }
            out[j] = b.max(0.0);
        }
        Ok(())
    }

    /// Serialises the table; [`EquilibriumBidTable::from_text`] inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |xs: &[f64]| xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "n {}", self.n).unwrap();
        writeln!(s, "k {}", self.curve.len()).unwrap();
        writeln!(s, "beta {}", join(self.curve.betas())).unwrap();
        writeln!(s, "distribution {}", self.dist).unwrap();
        writeln!(s, "grid {}", self.grid.len()).unwrap();
        let header: Vec<String> = (1..=self.curve.len()).map(|j| format!("b{j}")).collect();
        writeln!(s, "v {}", header.join(" ")).unwrap();
        for (v, row) in self.grid.iter().zip(&self.rows) {
            writeln!(s, "{v} {}", join(row)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next =
            |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("bid table ends before its {what}")));
        if next("header")? != MAGIC {
            return Err(Error::Parse("not an equilibrium bid table".into()));
        }
        let field = |line: &str, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| Error::Parse(format!("expected `{key} …`, found `{line}`")))
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")));
        let count = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad count `{s}`")));

        let n = count(&field(next("n")?, "n")?)?;
        let k = count(&field(next("k")?, "k")?)?;
        let betas = field(next("beta")?, "beta")?.split(' ').map(num).collect::<Result<Vec<f64>>>()?;
        if betas.len() != k {
            return Err(Error::DimensionMismatch { what: "beta", expected: k, found: betas.len() });
        }
        let curve = SlotCurve::new(betas)?;
        let dist: Distribution = field(next("distribution")?, "distribution")?.parse()?;
        let points = count(&field(next("grid")?, "grid")?)?;
        let columns = next("column header")?;
        if columns.split(' ').count() != k + 1 || !columns.starts_with("v ") {
            return Err(Error::Parse(format!("bad column header `{columns}`")));
        }
        let mut grid = Vec::with_capacity(points);
        let mut rows = Vec::with_capacity(points);
        for line in lines {
            let mut vals = line.split(' ').map(num).collect::<Result<Vec<f64>>>()?;
            if vals.len() != k + 1 {
                return Err(Error::DimensionMismatch { what: "table row", expected: k + 1, found: vals.len() });
            }
            grid.push(vals.remove(0));
            rows.push(vals);
        }
        if grid.len() != points {
            return Err(Error::DimensionMismatch { what: "table rows", expected: points, found: grid.len() });
        }
        Self::from_parts(n, curve, dist, grid, rows)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

impl PositionBids for EquilibriumBidTable {
    fn num_positions(&self) -> usize {
        self.curve.len()
    }

    fn bid(&self, position: usize, value: f64) -> Result<f64> {
        if position >= self.curve.len() {
            return Err(Error::IndexOutOfRange { what: "position", index: position, len: self.curve.len() });
        }
        Ok(self.bids_at(value)?[position])
    }

    fn bids_into(&self, value: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.curve.len() {
            return Err(Error::DimensionMismatch { what: "bid buffer", expected: self.curve.len(), found: out.len() });
        }
        self.fill(value, out)
    }
}

fn enforce_cone(grid: &[f64], rows: &mut [Vec<f64>], curve: &SlotCurve) {
    let k = curve.len();
    for j in 0..k {
        let mut run = 0.0f64;
        for row in rows.iter_mut() {
            run = run.max(row[j]);
            row[j] = run;
        }
    }
    for (row, &v) in rows.iter_mut().zip(grid) {
        for j in 0..k {
            let mut b = row[j].min(curve.beta(j) * v);
            if j > 0 {
                b = b.min(row[j - 1]);
            }
            row[j] = b.max(0.0);
        }
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2)
}

// Fritsch–Butland slopes: weighted harmonic mean of neighbouring secants,
// zero at local extrema, one-sided secants at the ends.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::QuadratureConfig;
    use approx::assert_abs_diff_eq;

    fn setting(n: usize, betas: &[f64], dist: Distribution) -> BayesSetting {
        BayesSetting::new(n, SlotCurve::new(betas.to_vec()).unwrap(), dist, QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn linear_case_is_reproduced() {
        let s = setting(2, &[1.0], Distribution::uniform(1.0).unwrap());
        let t = EquilibriumBidTable::build(&s, 9, Execution::Sequential).unwrap();
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            assert_abs_diff_eq!(t.bid(0, v).unwrap(), v / 2.0, epsilon = 1e-12);
        }
        assert!(t.bids_at(1.1).is_err());
    }

    #[test]
    fn interpolation_tracks_exact_bids() {
        let s = setting(4, &[2.0, 1.0, 0.5], Distribution::power(1.0, 2.0).unwrap());
        let t = EquilibriumBidTable::build(&s, 128, Execution::Parallel).unwrap();
        for i in 0..37 {
            let v = (i as f64 + 0.37) / 37.5;
            let exact: Vec<f64> = (0..3).map(|j| bstar_integral(j, v, &s).unwrap()).collect();
            let got = t.bids_at(v).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(got[j], exact[j], epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn cone_holds_off_grid() {
        let s = setting(5, &[3.0, 2.9, 0.4], Distribution::truncated_exponential(2.0, 1.5).unwrap());
        let t = EquilibriumBidTable::build(&s, 40, Execution::Sequential).unwrap();
        let mut prev = vec![0.0; 3];
        for i in 0..=997 {
            let v = 2.0 * i as f64 / 997.0;
            let b = t.bids_at(v).unwrap();
            for j in 0..3 {
                assert!(b[j] >= prev[j]);
                assert!(b[j] >= 0.0 && b[j] <= s.curve().beta(j) * v + 1e-15);
                if j > 0 {
                    assert!(b[j] <= b[j - 1]);
                }
            }
            prev = b;
        }
        assert_eq!(t.bids_at(0.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = setting(4, &[2.0, 1.0], Distribution::power(1.5, 1.3).unwrap());
        let t = EquilibriumBidTable::build(&s, 33, Execution::Parallel).unwrap();
        let text = t.to_text();
        let back = EquilibriumBidTable::from_text(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
        assert!(text.starts_with(
            "# equilibrium bid table\nn 4\nk 2\nbeta 2 1\ndistribution power 1.5 1.3\ngrid 33\nv b1 b2\n0 0 0\n"
        ));
    }

    #[test]
    fn malformed_text_rejected() {
        let s = setting(2, &[1.0], Distribution::uniform(1.0).unwrap());
        let text = EquilibriumBidTable::build(&s, 3, Execution::Sequential).unwrap().to_text();
        assert!(EquilibriumBidTable::from_text("").is_err());
        assert!(EquilibriumBidTable::from_text(&text.replace("grid 3", "grid 4")).is_err());
        assert!(EquilibriumBidTable::from_text(&text.replace("0.5 0.25", "0.5 0.75")).is_err());
        assert!(EquilibriumBidTable::from_text(&text.replace("n 2", "n 1")).is_err());
    }

    #[test]
    fn from_rows_checks_the_cone() {
        let s = setting(3, &[2.0, 1.0], Distribution::uniform(1.0).unwrap());
        let grid = vec![0.0, 0.5, 1.0];
        assert!(EquilibriumBidTable::from_rows(&s, grid.clone(), vec![vec![0.0; 2]; 3]).is_ok());
        let bad = vec![vec![0.0, 0.0], vec![0.2, 0.3], vec![0.4, 0.3]];
        assert!(EquilibriumBidTable::from_rows(&s, grid, bad).is_err());
    }

    #[test]
    fn execution_modes_agree() {
        let s = setting(4, &[2.0, 1.0], Distribution::uniform(1.0).unwrap());
        let a = EquilibriumBidTable::build(&s, 64, Execution::Sequential).unwrap();
        let b = EquilibriumBidTable::build(&s, 64, Execution::Parallel).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }
}
