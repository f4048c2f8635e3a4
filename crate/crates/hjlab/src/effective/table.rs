//! Tabulated effective Hamiltonians on a uniform gradient window, with
//! provenance, a convexity classification, and a difference-of-convex split
//! when the values are neither convex nor concave.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a table's values came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Long-time cell-problem solves.
    Numeric,
    /// The forced-eikonal cell closed form.
    CellClosedForm,
    /// The two-noise coefficient pair closed forms.
    TwoNoise,
    /// The nonconvex sawtooth family closed forms.
    SawtoothFamily,
    /// The correlated two-level closed forms.
    Correlated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvexityTag {
    Convex,
    Concave,
    DifferenceOfConvex,
}

/// `p -> value` on a uniform grid with piecewise-linear interpolation and
/// linear extension beyond the window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveTable {
    pub p_lo: f64,
    pub p_hi: f64,
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub convexity: ConvexityTag,
    /// Convex parts `(plus, minus)` with `values = plus - minus`, recorded
    /// whenever the tag is `DifferenceOfConvex`.
    pub split: Option<(Vec<f64>, Vec<f64>)>,
}

/// Discrete convexity: all second differences at or above `-tol`.
fn discretely_convex(values: &[f64], tol: f64) -> bool {
    values.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -tol)
}

impl EffectiveTable {
    /// Tabulate `f` on `n` nodes spanning `[p_lo, p_hi]`.
    pub fn from_fn(
        p_lo: f64,
        p_hi: f64,
        n: usize,
        provenance: Provenance,
        mut f: impl FnMut(f64) -> Result<f64>,
    ) -> Result<Self> {
        if n < 3 || !(p_lo < p_hi) {
            return Err(Error::invalid("table needs at least 3 nodes and p_lo < p_hi"));
        }
        let values = (0..n)
            .map(|i| f(p_lo + (p_hi - p_lo) * i as f64 / (n - 1) as f64))
            .collect::<Result<Vec<f64>>>()?;
        Ok(EffectiveTable::from_values(p_lo, p_hi, values, provenance))
    }

    pub fn from_values(p_lo: f64, p_hi: f64, values: Vec<f64>, provenance: Provenance) -> Self {
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-11 * scale;
        let (convexity, split) = if discretely_convex(&values, tol) {
            (ConvexityTag::Convex, None)
        } else {
            let negated: Vec<f64> = values.iter().map(|v| -v).collect();
            if discretely_convex(&negated, tol) {
                (ConvexityTag::Concave, None)
            } else {
                (ConvexityTag::DifferenceOfConvex, Some(dc_split(&values)))
            }
        };
        EffectiveTable { p_lo, p_hi, values, provenance, convexity, split }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dp(&self) -> f64 {
        (self.p_hi - self.p_lo) / (self.n() - 1) as f64
    }

    pub fn p_at(&self, i: usize) -> f64 {
        self.p_lo + self.dp() * i as f64
    }

    /// Piecewise-linear value; outside the window, extended linearly with
    /// the edge slope (effective Hamiltonians grow at most linearly).
    pub fn eval(&self, p: f64) -> f64 {
        let n = self.n();
        let dp = self.dp();
        if p <= self.p_lo {
            let slope = (self.values[1] - self.values[0]) / dp;
            return self.values[0] + slope * (p - self.p_lo);
        }
        if p >= self.p_hi {
            let slope = (self.values[n - 1] - self.values[n - 2]) / dp;
            return self.values[n - 1] + slope * (p - self.p_hi);
        }
        let t = (p - self.p_lo) / dp;
        let i = (t.floor() as usize).min(n - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Same grid: length, window ends within 1e-12 of each other.
    pub fn same_grid(&self, other: &EffectiveTable) -> bool {
        self.n() == other.n()
            && (self.p_lo - other.p_lo).abs() <= 1e-12
            && (self.p_hi - other.p_hi).abs() <= 1e-12
    }

    /// CSV rows `p,value[,convex_part,concave_part]` prefixed by one
    /// `# {json}` header line carrying provenance and parameters.
    pub fn write_csv<W: std::io::Write>(
        &self,
        mut out: W,
        extra_header: &serde_json::Value,
    ) -> Result<()> {
        let header = serde_json::json!({
            "provenance": self.provenance,
            "convexity": self.convexity,
            "p_lo": self.p_lo,
            "p_hi": self.p_hi,
            "n": self.n(),
            "extra": extra_header,
        });
        writeln!(out, "# {header}")?;
        let has_split = self.split.is_some();
        if has_split {
            writeln!(out, "p,value,convex_part,concave_part")?;
        } else {
            writeln!(out, "p,value")?;
        }
        for i in 0..self.n() {
            let p = self.p_at(i);
            match &self.split {
                Some((plus, minus)) => {
                    writeln!(out, "{p},{},{},{}", self.values[i], plus[i], minus[i])?
                }
                None => writeln!(out, "{p},{}", self.values[i])?,
            }
        }
        Ok(())
    }
}

/// Split `values = plus - minus` with both parts discretely convex: the
/// negative curvature is accumulated into `minus`, then `plus := values +
/// minus` carries the rest.
fn dc_split(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let mut minus = vec![0.0f64; n];
    // Second differences of `minus` are the negative parts of the second
    // differences of `values`; integrate twice from a flat start.
    let mut slope = 0.0;
    for i in 1..n {
        minus[i] = minus[i - 1] + slope;
        if i < n - 1 {
            let d2 = values[i + 1] - 2.0 * values[i] + values[i - 1];
            slope += (-d2).max(0.0);
        }
    }
    let plus: Vec<f64> = values.iter().zip(&minus).map(|(v, m)| v + m).collect();
    (plus, minus)
}
