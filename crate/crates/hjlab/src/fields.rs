//! Piecewise-constant step noise fields on unit intervals and their
//! diffusively rescaled integral paths.
//!
//! A [`StepField`] holds an `n_steps x m` matrix of signs or weighted signs
//! `X_k^i`, interpreted as the value of component `i` on the time interval
//! `[k, k+1)`. [`StepField::rescale`] integrates one component and applies the
//! scaling `t -> eps^{2*gamma} t`, `value -> eps^gamma * value`, producing a
//! [`PiecewisePath`] whose slopes are `eps^{-gamma} X_k`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution tag for a [`StepField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FieldLaw {
    /// Independent signs, uniform on {-1, +1}.
    Rademacher,
    /// Component 1 is Rademacher `X`; component 2 is
    /// `(a+b)/2 * Y + (a-b)/2 * Z` with `X, Y, Z` independent Rademacher.
    CorrelatedPair { a: f64, b: f64 },
    /// Anything else (products, user-supplied matrices).
    Custom,
}

/// A matrix of step values `X_k^i`, component `i` on interval `[k, k+1)`.
///
/// Values are stored column-major: component `i` occupies the contiguous
/// slice `values[i * n_steps .. (i+1) * n_steps]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepField {
    m: usize,
    n_steps: usize,
    values: Vec<f64>,
    law: FieldLaw,
}

/// Fill a slice with independent signs drawn from 64-bit blocks of the
/// generator, one bit per step.
fn fill_signs(rng: &mut ChaCha12Rng, out: &mut [f64]) {
    let mut bits = 0u64;
    for (k, v) in out.iter_mut().enumerate() {
        if k % 64 == 0 {
            bits = rng.next_u64();
        }
        *v = if bits & 1 == 1 { 1.0 } else { -1.0 };
        bits >>= 1;
    }
}

impl StepField {
    /// Independent Rademacher field with `m` components and `n_steps` steps.
    pub fn rademacher(m: usize, n_steps: usize, seed: u64) -> Result<Self> {
        if m == 0 || n_steps == 0 {
            return Err(Error::invalid("component count and step count must be positive"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut values = vec![0.0; m * n_steps];
        for i in 0..m {
            fill_signs(&mut rng, &mut values[i * n_steps..(i + 1) * n_steps]);
        }
        Ok(StepField { m, n_steps, values, law: FieldLaw::Rademacher })
    }

    /// Two-component field `(X, (a+b)/2 Y + (a-b)/2 Z)` built from an
    /// independent Rademacher triple seeded by `seed` (the triple is the
    /// field produced by `rademacher(3, n_steps, seed)`, in order X, Y, Z).
    pub fn correlated_pair(a: f64, b: f64, n_steps: usize, seed: u64) -> Result<Self> {
        let triple = StepField::rademacher(3, n_steps, seed)?;
        StepField::correlated_pair_of(&triple, a, b)
    }

    /// The same construction on a caller-supplied sign triple (components
    /// ordered X, Y, Z), so experiments can keep the underlying cube.
    pub fn correlated_pair_of(triple: &StepField, a: f64, b: f64) -> Result<Self> {
        if !(0.0 < b && b < a) || (a * a + b * b - 2.0).abs() > 1e-12 {
            if !(a == b && a == 1.0) {
                return Err(Error::invalid(format!(
                    "correlated pair needs 0 < b < a with a^2 + b^2 = 2, got a = {a}, b = {b}"
                )));
            }
        }
        if triple.m != 3 {
            return Err(Error::invalid("correlated pair needs a 3-component sign field"));
        }
        let n = triple.n_steps;
        let mut values = vec![0.0; 2 * n];
        values[..n].copy_from_slice(triple.component(0)?);
        let (y, z) = (triple.component(1)?, triple.component(2)?);
        let (cy, cz) = ((a + b) / 2.0, (a - b) / 2.0);
        for k in 0..n {
            values[n + k] = cy * y[k] + cz * z[k];
        }
        Ok(StepField { m: 2, n_steps: n, values, law: FieldLaw::CorrelatedPair { a, b } })
    }

    /// Wrap an explicit matrix (`values[i]` is component `i`).
    pub fn from_components(components: Vec<Vec<f64>>) -> Result<Self> {
        let m = components.len();
        if m == 0 || components[0].is_empty() {
            return Err(Error::invalid("component count and step count must be positive"));
        }
        let n_steps = components[0].len();
        if components.iter().any(|c| c.len() != n_steps) {
            return Err(Error::invalid("components must have equal length"));
        }
        let mut values = Vec::with_capacity(m * n_steps);
        for c in &components {
            values.extend_from_slice(c);
        }
        Ok(StepField { m, n_steps, values, law: FieldLaw::Custom })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn law(&self) -> &FieldLaw {
        &self.law
    }

    /// Component `i` as a slice over steps.
    pub fn component(&self, i: usize) -> Result<&[f64]> {
        if i >= self.m {
            return Err(Error::invalid(format!("component {i} out of range (m = {})", self.m)));
        }
        Ok(&self.values[i * self.n_steps..(i + 1) * self.n_steps])
    }

    /// Value `X_k^i`.
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.n_steps + k]
    }

    /// Product field `X^J_k = prod_{i in J} X^i_k` as a single-component field.
    pub fn product(&self, index_set: &[usize]) -> Result<StepField> {
        if index_set.is_empty() {
            return Err(Error::invalid("product over an empty index set"));
        }
        let mut seen = vec![false; self.m];
        for &i in index_set {
            if i >= self.m {
                return Err(Error::invalid(format!("index {i} out of range (m = {})", self.m)));
            }
            if seen[i] {
                return Err(Error::invalid(format!("index {i} repeated in index set")));
            }
            seen[i] = true;
        }
        let mut values = vec![1.0; self.n_steps];
        for &i in index_set {
            let comp = self.component(i)?;
            for (v, x) in values.iter_mut().zip(comp) {
                *v *= x;
            }
        }
        Ok(StepField { m: 1, n_steps: self.n_steps, values, law: FieldLaw::Custom })
    }

    /// Integral path of one component under the diffusive rescaling:
    /// breakpoints `t_k = k eps^{2 gamma}`, values `eps^gamma sum_{j<k} X_j`.
    pub fn rescale(&self, component: usize, epsilon: f64, gamma: f64) -> Result<PiecewisePath> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        let xs = self.component(component)?;
        let dt = epsilon.powf(2.0 * gamma);
        let amp = epsilon.powf(gamma);
        let mut breakpoints = Vec::with_capacity(self.n_steps + 1);
        let mut values = Vec::with_capacity(self.n_steps + 1);
        breakpoints.push(0.0);
        values.push(0.0);
        let mut sum = 0.0;
        for (k, x) in xs.iter().enumerate() {
            sum += x;
            breakpoints.push((k + 1) as f64 * dt);
            values.push(amp * sum);
        }
        PiecewisePath::new(breakpoints, values)
    }

    /// One row per step: `step, comp_0, ..., comp_{m-1}`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        header.extend((0..self.m).map(|i| format!("comp_{i}")));
        w.write_record(&header)?;
        for k in 0..self.n_steps {
            let mut row = vec![k.to_string()];
            row.extend((0..self.m).map(|i| format!("{:.17e}", self.value(i, k))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A continuous piecewise-linear path given by breakpoints and values.
///
/// Breakpoints are strictly increasing and start at 0; the path value at 0
/// is 0. Evaluation beyond the last breakpoint is constant (the path has
/// stopped), and the path is identified with its restriction to `[0, T]`
/// where `T` is the last breakpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiecewisePath {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

/// One maximal run of same-sign slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    /// +1 for nondecreasing, -1 for decreasing.
    pub direction: i8,
    /// Total variation of the path over the segment.
    pub magnitude: f64,
}

impl PiecewisePath {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.is_empty() {
            return Err(Error::invalid("breakpoints and values must have equal nonzero length"));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::invalid("path must start at time 0"));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid("path value at time 0 must be 0"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        Ok(PiecewisePath { breakpoints, values })
    }

    /// Path from explicit values at integer-indexed times `0, dt, 2 dt, ...`.
    pub fn from_uniform(dt: f64, values: Vec<f64>) -> Result<Self> {
        let breakpoints = (0..values.len()).map(|k| k as f64 * dt).collect();
        PiecewisePath::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Final time (last breakpoint).
    pub fn t_end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Final value.
    pub fn end_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Exact linear interpolation; constant before 0 and after the end.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.t_end() {
            return self.end_value();
        }
        let idx = match self.breakpoints.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i,
        };
        let (t0, t1) = (self.breakpoints[idx - 1], self.breakpoints[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// The path `t -> -value(t)`.
    pub fn negate(&self) -> PiecewisePath {
        PiecewisePath {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// `max_t |self - other|` over `[0, max(T1, T2)]`; exact because the
    /// difference of two piecewise-linear paths attains its maximum at a
    /// breakpoint of either path.
    pub fn sup_dist(&self, other: &PiecewisePath) -> f64 {
        let mut best: f64 = 0.0;
        for &t in self.breakpoints.iter().chain(other.breakpoints.iter()) {
            best = best.max((self.value(t) - other.value(t)).abs());
        }
        best
    }

    /// Maximal same-direction runs; zero-slope runs contribute 0 to the
    /// magnitude and are merged into the preceding segment (or the following
    /// one at the start of the path). The segments tile `[0, T]`; a constant
    /// path yields a single segment with magnitude 0.
    pub fn monotone_segments(&self) -> Vec<Segment> {
        let n = self.breakpoints.len();
        if n == 1 {
            return vec![];
        }
        let mut segments: Vec<Segment> = Vec::new();
        let mut cur: Option<Segment> = None;
        for k in 0..n - 1 {
            let dv = self.values[k + 1] - self.values[k];
            let (t0, t1) = (self.breakpoints[k], self.breakpoints[k + 1]);
            let dir: i8 = if dv > 0.0 {
                1
            } else if dv < 0.0 {
                -1
            } else {
                0
            };
            match cur.as_mut() {
                None => {
                    // A leading flat run keeps direction 0 until a slope commits it.
                    cur = Some(Segment { t_start: t0, t_end: t1, direction: dir, magnitude: dv.abs() });
                }
                Some(seg) => {
                    if dir == 0 || seg.direction == 0 || dir == seg.direction {
                        seg.t_end = t1;
                        seg.magnitude += dv.abs();
                        if seg.direction == 0 && dir != 0 {
                            seg.direction = dir;
                        }
                    } else {
                        segments.push(*seg);
                        *seg = Segment { t_start: t0, t_end: t1, direction: dir, magnitude: dv.abs() };
                    }
                }
            }
        }
        if let Some(mut seg) = cur {
            // An entirely flat path gets the conventional direction +1.
            if seg.direction == 0 {
                seg.direction = 1;
            }
            segments.push(seg);
        }
        segments
    }

    /// One row per breakpoint: `t, value`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"])?;
        for (t, v) in self.breakpoints.iter().zip(&self.values) {
            w.write_record([format!("{t:.17e}"), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}
