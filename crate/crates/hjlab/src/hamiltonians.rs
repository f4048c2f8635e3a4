//! Scalar ingredient functions, Legendre transforms, and structured
//! Hamiltonian specifications of the separable multi-noise form
//! `H(p, y, xi) = sum_i coeff_i * G_i(p) * V_i(y) * xi^{noise_i}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cubic `c0 + c1 t + c2 t^2 + c3 t^3` on `t = p - left` for `p` in
/// `[left, left + width]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct CubicPiece {
    left: f64,
    width: f64,
    c: [f64; 4],
}

impl CubicPiece {
    /// Hermite data: values `f0, f1` and slopes `m0, m1` at the endpoints.
    fn hermite(left: f64, width: f64, f0: f64, f1: f64, m0: f64, m1: f64) -> Self {
        let h = width;
        let d = (f1 - f0) / h;
        CubicPiece {
            left,
            width,
            c: [f0, m0, (3.0 * d - 2.0 * m0 - m1) / h, (m0 + m1 - 2.0 * d) / (h * h)],
        }
    }

    fn eval(&self, p: f64) -> f64 {
        let t = p - self.left;
        ((self.c[3] * t + self.c[2]) * t + self.c[1]) * t + self.c[0]
    }

    fn deriv(&self, p: f64) -> f64 {
        let t = p - self.left;
        (3.0 * self.c[3] * t + 2.0 * self.c[2]) * t + self.c[1]
    }

    /// Exact integral over `[a, b]` (both inside the piece).
    fn integral(&self, a: f64, b: f64) -> f64 {
        let anti = |p: f64| {
            let t = p - self.left;
            (((self.c[3] / 4.0 * t + self.c[2] / 3.0) * t + self.c[1] / 2.0) * t + self.c[0]) * t
        };
        anti(b) - anti(a)
    }

    /// Max of |derivative| over the sub-interval `[a, b]` of the piece.
    fn max_abs_deriv(&self, a: f64, b: f64) -> f64 {
        let mut best = self.deriv(a).abs().max(self.deriv(b).abs());
        // The derivative is quadratic; check its vertex if it lies inside.
        if self.c[3] != 0.0 {
            let vertex = self.left - self.c[2] / (3.0 * self.c[3]);
            if vertex > a && vertex < b {
                best = best.max(self.deriv(vertex).abs());
            }
        }
        best
    }
}

/// Even function on the real line with a double-hump profile: zero at the
/// origin, local maximum `1/2` at `theta2`, local minimum `1/3` at `theta1`,
/// and quadratic growth past `theta1`. The rising branch passes through
/// `(theta3, 1/3)`.
///
/// Built from monotone cubic Hermite pieces on `[0, theta3]`,
/// `[theta3, theta2]`, `[theta2, theta1]` (zero slopes at `0`, `theta2`,
/// `theta1`; slope at `theta3` chosen as the harmonic mean of the adjacent
/// secants, which keeps every piece monotone) and the tail
/// `1/3 + tail_curvature (p - theta1)^2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonconvexF {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub tail_curvature: f64,
    pieces: Vec<CubicPiece>,
}

impl NonconvexF {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Result<Self> {
        if !(0.0 < theta3 && theta3 < theta2 && theta2 < theta1) {
            return Err(Error::invalid(format!(
                "need 0 < theta3 < theta2 < theta1, got ({theta1}, {theta2}, {theta3})"
            )));
        }
        let (y3, y2, y1) = (1.0 / 3.0, 0.5, 1.0 / 3.0);
        let s1 = y3 / theta3;
        let s2 = (y2 - y3) / (theta2 - theta3);
        let m3 = 2.0 * s1 * s2 / (s1 + s2);
        let pieces = vec![
            CubicPiece::hermite(0.0, theta3, 0.0, y3, 0.0, m3),
            CubicPiece::hermite(theta3, theta2 - theta3, y3, y2, m3, 0.0),
            CubicPiece::hermite(theta2, theta1 - theta2, y2, y1, 0.0, 0.0),
        ];
        Ok(NonconvexF { theta1, theta2, theta3, tail_curvature: 1.0, pieces })
    }

    pub fn eval(&self, p: f64) -> f64 {
        let r = p.abs();
        if r >= self.theta1 {
            let t = r - self.theta1;
            return 1.0 / 3.0 + self.tail_curvature * t * t;
        }
        let piece = self.pieces.iter().rev().find(|q| r >= q.left).unwrap();
        piece.eval(r)
    }

    pub fn deriv(&self, p: f64) -> f64 {
        let r = p.abs();
        let d = if r >= self.theta1 {
            2.0 * self.tail_curvature * (r - self.theta1)
        } else {
            self.pieces.iter().rev().find(|q| r >= q.left).unwrap().deriv(r)
        };
        if p < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Interior critical points (`F' = 0`): `0, +-theta2, +-theta1`.
    pub fn critical_points(&self) -> [f64; 5] {
        [-self.theta1, -self.theta2, 0.0, self.theta2, self.theta1]
    }

    /// Exact integral of `F` over `[a, b]` with `0 <= a <= b` (piecewise
    /// polynomial antiderivatives).
    pub fn integral_nonneg(&self, a: f64, b: f64) -> f64 {
        assert!(0.0 <= a && a <= b);
        let mut total = 0.0;
        // Knots of the piecewise representation on the nonnegative axis.
        let knots = [0.0, self.theta3, self.theta2, self.theta1, f64::INFINITY];
        for w in knots.windows(2) {
            let (lo, hi) = (w[0].max(a), w[1].min(b));
            if lo >= hi {
                continue;
            }
            if w[0] >= self.theta1 {
                let anti = |p: f64| {
                    let t = p - self.theta1;
                    p / 3.0 + self.tail_curvature * t * t * t / 3.0
                };
                total += anti(hi) - anti(lo);
            } else {
                let piece = self.pieces.iter().rev().find(|q| w[0] >= q.left).unwrap();
                total += piece.integral(lo, hi);
            }
        }
        total
    }

    /// Max of |F'| over `[lo, hi]`.
    pub fn max_abs_deriv_on(&self, lo: f64, hi: f64) -> f64 {
        // Evenness: reduce to the union of |p| ranges.
        let (a, b) = if lo >= 0.0 {
            (lo, hi)
        } else if hi <= 0.0 {
            (-hi, -lo)
        } else {
            (0.0, hi.max(-lo))
        };
        let mut best = 0.0f64;
        let knots = [0.0, self.theta3, self.theta2, self.theta1];
        for (k, &left) in knots.iter().enumerate() {
            let right = if k + 1 < knots.len() { knots[k + 1] } else { f64::INFINITY };
            let (lo_k, hi_k) = (left.max(a), right.min(b));
            if lo_k >= hi_k {
                continue;
            }
            if left >= self.theta1 {
                best = best.max(2.0 * self.tail_curvature * (hi_k - self.theta1));
            } else {
                best = best.max(self.pieces[k].max_abs_deriv(lo_k, hi_k));
            }
        }
        best
    }
}

/// Domain tag for a [`ScalarFunction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Torus1,
    Torus2,
    RealLine,
}

/// A scalar function of one (or two, for the torus-2d variant) real
/// variables, either in closed form or as a piecewise-linear interpolant of
/// uniform samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ScalarFunction {
    Constant { c: f64 },
    /// 1-periodic sawtooth: `x/s` on `[0, s]`, `(1-x)/(1-s)` on `(s, 1]`.
    Sawtooth { s: f64 },
    /// `(1 + cos 2 pi y) / 2` on the unit torus.
    CosineBump,
    /// Piecewise-linear 1-periodic interpolant of `values[k]` at `k/n`.
    SampledTorus { values: Vec<f64> },
    /// See [`NonconvexF`].
    NonconvexEven(NonconvexF),
    /// `p^2 / 2` on the real line.
    HalfSquare,
    /// `|p|` on the real line.
    AbsValue,
    /// Piecewise-linear interpolant of `values[k]` at `x0 + k dx`, extended
    /// past each end with the boundary slope plus curvature
    /// `tail_curvature * (distance past the end)^2`.
    SampledLine { x0: f64, dx: f64, values: Vec<f64>, tail_curvature: f64 },
    /// `base + amp cos(2 pi y1) cos(2 pi y2)` on the 2-torus.
    Cosine2 { base: f64, amp: f64 },
}

/// The sawtooth `V_s` evaluated 1-periodically.
pub fn sawtooth_vs(s: f64, x: f64) -> Result<f64> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::invalid(format!("sawtooth parameter must lie in (0,1), got {s}")));
    }
    Ok(ScalarFunction::Sawtooth { s }.eval1(x))
}

fn fract_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl ScalarFunction {
    pub fn domain(&self) -> Domain {
        match self {
            ScalarFunction::Constant { .. }
            | ScalarFunction::Sawtooth { .. }
            | ScalarFunction::CosineBump
            | ScalarFunction::SampledTorus { .. } => Domain::Torus1,
            ScalarFunction::Cosine2 { .. } => Domain::Torus2,
            _ => Domain::RealLine,
        }
    }

    /// Evaluate a one-variable function (torus variants reduce mod 1).
    pub fn eval1(&self, x: f64) -> f64 {
        match self {
            ScalarFunction::Constant { c } => *c,
            ScalarFunction::Sawtooth { s } => {
                let y = fract_unit(x);
                if y <= *s {
                    y / s
                } else {
                    (1.0 - y) / (1.0 - s)
                }
            }
            ScalarFunction::CosineBump => 0.5 * (1.0 + (2.0 * std::f64::consts::PI * x).cos()),
            ScalarFunction::SampledTorus { values } => {
                let n = values.len();
                let t = fract_unit(x) * n as f64;
                let k = (t as usize).min(n - 1);
                let frac = t - k as f64;
                let next = values[(k + 1) % n];
                values[k] + (next - values[k]) * frac
            }
            ScalarFunction::NonconvexEven(f) => f.eval(x),
            ScalarFunction::HalfSquare => 0.5 * x * x,
            ScalarFunction::AbsValue => x.abs(),
            ScalarFunction::SampledLine { x0, dx, values, tail_curvature } => {
                let n = values.len();
                let last = x0 + (n - 1) as f64 * dx;
                if x <= *x0 {
                    let slope = (values[1] - values[0]) / dx;
                    let t = x0 - x;
                    values[0] - slope * t + tail_curvature * t * t
                } else if x >= last {
                    let slope = (values[n - 1] - values[n - 2]) / dx;
                    let t = x - last;
                    values[n - 1] + slope * t + tail_curvature * t * t
                } else {
                    let t = (x - x0) / dx;
                    let k = (t as usize).min(n - 2);
                    let frac = t - k as f64;
                    values[k] + (values[k + 1] - values[k]) * frac
                }
            }
            ScalarFunction::Cosine2 { .. } => panic!("two-variable function evaluated with one argument"),
        }
    }

    /// Evaluate a torus-2d function.
    pub fn eval2(&self, y1: f64, y2: f64) -> f64 {
        match self {
            ScalarFunction::Constant { c } => *c,
            ScalarFunction::Cosine2 { base, amp } => {
                let w = 2.0 * std::f64::consts::PI;
                base + amp * (w * y1).cos() * (w * y2).cos()
            }
            _ => panic!("one-variable function evaluated with two arguments"),
        }
    }

    /// Exact (max, min, mean) over one period; errors on real-line domains.
    pub fn torus_stats(&self) -> Result<(f64, f64, f64)> {
        match self {
            ScalarFunction::Constant { c } => Ok((*c, *c, *c)),
            ScalarFunction::Sawtooth { .. } => Ok((1.0, 0.0, 0.5)),
            ScalarFunction::CosineBump => Ok((1.0, 0.0, 0.5)),
            ScalarFunction::SampledTorus { values } => {
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                // Trapezoid rule on one period of a broken line is exact and
                // equals the plain node average.
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                Ok((max, min, mean))
            }
            ScalarFunction::Cosine2 { base, amp } => Ok((base + amp.abs(), base - amp.abs(), *base)),
            _ => Err(Error::invalid("statistics are defined for periodic functions only")),
        }
    }

    /// A Lipschitz constant over the whole domain (torus variants) or the
    /// given range (line variants).
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            ScalarFunction::Constant { .. } => 0.0,
            ScalarFunction::Sawtooth { s } => (1.0 / s).max(1.0 / (1.0 - s)),
            ScalarFunction::CosineBump => std::f64::consts::PI,
            ScalarFunction::SampledTorus { values } => {
                let n = values.len();
                let dx = 1.0 / n as f64;
                (0..n)
                    .map(|k| ((values[(k + 1) % n] - values[k]) / dx).abs())
                    .fold(0.0, f64::max)
            }
            ScalarFunction::NonconvexEven(f) => f.max_abs_deriv_on(lo, hi),
            ScalarFunction::HalfSquare => lo.abs().max(hi.abs()),
            ScalarFunction::AbsValue => 1.0,
            ScalarFunction::SampledLine { x0, dx, values, tail_curvature } => {
                let n = values.len();
                let last = x0 + (n - 1) as f64 * dx;
                let mut best = values
                    .windows(2)
                    .map(|w| ((w[1] - w[0]) / dx).abs())
                    .fold(0.0, f64::max);
                if lo < *x0 {
                    let slope = (values[1] - values[0]) / dx;
                    best = best.max(slope.abs() + 2.0 * tail_curvature * (x0 - lo));
                }
                if hi > last {
                    let slope = (values[n - 1] - values[n - 2]) / dx;
                    best = best.max(slope.abs() + 2.0 * tail_curvature * (hi - last));
                }
                best
            }
            ScalarFunction::Cosine2 { amp, .. } => 2.0 * std::f64::consts::PI * amp.abs(),
        }
    }

    /// Points where the derivative can change sign, for exact interval
    /// min/max computations (Godunov flux). Sorted ascending.
    pub fn kink_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = match self {
            ScalarFunction::NonconvexEven(f) => f.critical_points().to_vec(),
            ScalarFunction::HalfSquare | ScalarFunction::AbsValue => vec![0.0],
            ScalarFunction::SampledLine { x0, dx, values, .. } => {
                (0..values.len()).map(|k| x0 + k as f64 * dx).collect()
            }
            _ => vec![],
        };
        pts.retain(|&p| p > lo && p < hi);
        pts
    }

    /// Two-column CSV `x, value` with `n` uniform samples over one period
    /// (torus) or the window `[lo, hi]` (real line).
    pub fn write_csv<W: std::io::Write>(&self, out: W, n: usize, window: (f64, f64)) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value"])?;
        let (lo, hi) = match self.domain() {
            Domain::Torus1 => (0.0, 1.0),
            _ => window,
        };
        for k in 0..n {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            w.write_record([format!("{x:.17e}"), format!("{:.17e}", self.eval1(x))])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a two-column CSV produced by [`ScalarFunction::write_csv`].
    /// Samples on a uniform grid covering `[0, 1)` give a torus function;
    /// anything else gives a line function with linear extension.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            xs.push(
                rec.get(0)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid("bad x column"))?,
            );
            vs.push(
                rec.get(1)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid("bad value column"))?,
            );
        }
        if xs.len() < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        let dx = xs[1] - xs[0];
        if dx <= 0.0 || xs.windows(2).any(|w| (w[1] - w[0] - dx).abs() > 1e-9 * dx.abs()) {
            return Err(Error::invalid("samples must be on a uniform increasing grid"));
        }
        let covers_unit = xs[0] == 0.0 && (xs.last().unwrap() + dx - 1.0).abs() < 1e-9;
        if covers_unit {
            Ok(ScalarFunction::SampledTorus { values: vs })
        } else {
            Ok(ScalarFunction::SampledLine { x0: xs[0], dx, values: vs, tail_curvature: 0.0 })
        }
    }
}

/// `sup_{|p| <= p_window} (p q - f(p))` on a scan grid with golden-section
/// polish; returns `(value, argmax)`.
pub fn legendre_fn(f: impl Fn(f64) -> f64, q: f64, p_window: f64) -> Result<(f64, f64)> {
    if !(p_window > 0.0) {
        return Err(Error::invalid("legendre window must be positive"));
    }
    let g = |p: f64| p * q - f(p);
    let n = 2000usize;
    let h = 2.0 * p_window / n as f64;
    let mut best_k = 0usize;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=n {
        let v = g(-p_window + k as f64 * h);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // Reject maxima that sit against the window and still climb outward.
    if best_k == 0 || best_k == n {
        let p_edge = if best_k == 0 { -p_window } else { p_window };
        let inward = if best_k == 0 { h } else { -h };
        if g(p_edge) - g(p_edge + inward) > 1e-12 * (1.0 + best.abs()) {
            return Err(Error::WindowTooSmall(format!(
                "legendre argmax at window edge p = {p_edge} for q = {q}"
            )));
        }
    }
    let mut lo = -p_window + best_k.saturating_sub(1) as f64 * h;
    let mut hi = (-p_window + (best_k + 1) as f64 * h).min(p_window);
    // Golden-section: unimodal refinement within the bracket around the grid
    // argmax (the scan has already isolated the basin).
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..80 {
        if hi - lo < 1e-12 {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        }
    }
    let p_hat = 0.5 * (lo + hi);
    Ok((g(p_hat).max(best), p_hat))
}

/// Legendre transform of a [`ScalarFunction`] on the real line.
pub fn legendre(f: &ScalarFunction, q: f64, p_window: f64) -> Result<(f64, f64)> {
    if f.domain() != Domain::RealLine {
        return Err(Error::invalid("legendre transform needs a real-line function"));
    }
    legendre_fn(|p| f.eval1(p), q, p_window)
}

/// Gradient-dependent factor of one Hamiltonian term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum GradPart {
    /// Constant 1 (purely spatial term).
    One,
    /// `p` (1-d only).
    Linear,
    /// `|p|` (Euclidean norm in 2-d).
    Eikonal,
    /// A scalar function of `p` (1-d only).
    Fn(ScalarFunction),
}

impl GradPart {
    pub fn eval1(&self, p: f64) -> f64 {
        match self {
            GradPart::One => 1.0,
            GradPart::Linear => p,
            GradPart::Eikonal => p.abs(),
            GradPart::Fn(f) => f.eval1(p),
        }
    }

    pub fn eval2(&self, p: [f64; 2]) -> f64 {
        match self {
            GradPart::One => 1.0,
            GradPart::Eikonal => (p[0] * p[0] + p[1] * p[1]).sqrt(),
            _ => panic!("gradient part not defined in two dimensions"),
        }
    }

    /// `sup |d/dp|` over `[lo, hi]` (per axis; the eikonal norm has
    /// per-axis derivative bounded by 1).
    pub fn slope_bound(&self, lo: f64, hi: f64) -> f64 {
        match self {
            GradPart::One => 0.0,
            GradPart::Linear => 1.0,
            GradPart::Eikonal => 1.0,
            GradPart::Fn(f) => f.lipschitz_on(lo, hi),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, GradPart::One)
    }
}

/// One separable term `coeff * grad(p) * spatial(y) * xi^{noise}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub grad: GradPart,
    /// `None` means the constant spatial factor 1.
    pub spatial: Option<ScalarFunction>,
    /// Index of the driving noise component.
    pub noise: usize,
}

/// Growth envelope `r -> coef * r^exponent + offset` (convex, increasing for
/// `coef > 0`, `exponent >= 1`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GrowthEnvelope {
    pub coef: f64,
    pub exponent: f64,
    pub offset: f64,
}

impl GrowthEnvelope {
    pub fn eval(&self, r: f64) -> f64 {
        self.coef * r.abs().powf(self.exponent) + self.offset
    }

    /// Inverse on `[offset, infinity)`.
    pub fn inverse(&self, v: f64) -> f64 {
        if v <= self.offset {
            return 0.0;
        }
        ((v - self.offset) / self.coef).powf(1.0 / self.exponent)
    }

    /// Legendre transform at `q` (numeric, window grown until interior).
    pub fn conjugate(&self, q: f64) -> f64 {
        let mut window = 8.0;
        for _ in 0..12 {
            match legendre_fn(|r| self.eval(r), q, window) {
                Ok((v, _)) => return v,
                Err(_) => window *= 2.0,
            }
        }
        f64::INFINITY
    }
}

/// Lower/upper growth envelopes `lower(|p|) <= H(p, y) <= upper(|p|)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Envelopes {
    pub lower: GrowthEnvelope,
    pub upper: GrowthEnvelope,
}

/// Shape of a frozen Hamiltonian `p -> H(p, y, xi)`, classified numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrozenShape {
    pub convex: bool,
    pub concave: bool,
    /// `H -> +infinity` uniformly in `y` as `|p| -> infinity`.
    pub coercive: bool,
    /// `H -> -infinity` uniformly in `y`.
    pub anticoercive: bool,
}

/// A Hamiltonian `H(p, y, xi) = sum_i coeff_i G_i(p) V_i(y) xi^{noise_i}` in
/// dimension 1 or 2, with optional growth envelopes for stability estimates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub dim: usize,
    /// Number of noise components.
    pub m: usize,
    pub terms: Vec<Term>,
    pub envelopes: Option<Envelopes>,
}

impl HamiltonianSpec {
    pub fn new(dim: usize, m: usize, terms: Vec<Term>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid("spatial dimension must be 1 or 2"));
        }
        if m == 0 {
            return Err(Error::invalid("need at least one noise component"));
        }
        for t in &terms {
            if t.noise >= m {
                return Err(Error::invalid(format!(
                    "term references noise component {} but m = {m}",
                    t.noise
                )));
            }
            if dim == 2 {
                if !matches!(t.grad, GradPart::One | GradPart::Eikonal) {
                    return Err(Error::invalid("2-d supports eikonal and constant gradient parts"));
                }
                if let Some(sf) = &t.spatial {
                    if sf.domain() == Domain::RealLine {
                        return Err(Error::invalid("spatial factors must be periodic"));
                    }
                }
            } else if let Some(sf) = &t.spatial {
                if sf.domain() != Domain::Torus1 {
                    return Err(Error::invalid("1-d spatial factors must live on the unit torus"));
                }
            }
        }
        Ok(HamiltonianSpec { dim, m, terms, envelopes: None })
    }

    pub fn with_envelopes(mut self, lower: GrowthEnvelope, upper: GrowthEnvelope) -> Self {
        self.envelopes = Some(Envelopes { lower, upper });
        self
    }

    /// `|p| xi^1 + f(y) xi^2` (the two-noise eikonal model).
    pub fn two_noise_eikonal(f: ScalarFunction) -> Result<Self> {
        HamiltonianSpec::new(
            1,
            2,
            vec![
                Term { coeff: 1.0, grad: GradPart::Eikonal, spatial: None, noise: 0 },
                Term { coeff: 1.0, grad: GradPart::One, spatial: Some(f), noise: 1 },
            ],
        )
    }

    /// `F(p) xi^1 + V_s(y) xi^2` (independent-noise nonconvex model).
    pub fn nonconvex_two_noise(f: NonconvexF, s: f64) -> Result<Self> {
        if !(0.0 < s && s < 1.0) {
            return Err(Error::invalid("sawtooth parameter must lie in (0,1)"));
        }
        HamiltonianSpec::new(
            1,
            2,
            vec![
                Term { coeff: 1.0, grad: GradPart::Fn(ScalarFunction::NonconvexEven(f)), spatial: None, noise: 0 },
                Term { coeff: 1.0, grad: GradPart::One, spatial: Some(ScalarFunction::Sawtooth { s }), noise: 1 },
            ],
        )
    }

    /// `(F(p) - V_s(y)) xi` (single-noise nonconvex model).
    pub fn nonconvex_single_noise(f: NonconvexF, s: f64) -> Result<Self> {
        if !(0.0 < s && s < 1.0) {
            return Err(Error::invalid("sawtooth parameter must lie in (0,1)"));
        }
        HamiltonianSpec::new(
            1,
            1,
            vec![
                Term { coeff: 1.0, grad: GradPart::Fn(ScalarFunction::NonconvexEven(f)), spatial: None, noise: 0 },
                Term { coeff: -1.0, grad: GradPart::One, spatial: Some(ScalarFunction::Sawtooth { s }), noise: 0 },
            ],
        )
    }

    /// `F(p + .) - V_s(y)` frozen cell Hamiltonian (no noise dependence).
    pub fn cell_sawtooth(f: NonconvexF, s: f64) -> Result<Self> {
        if !(0.0 < s && s < 1.0) {
            return Err(Error::invalid("sawtooth parameter must lie in (0,1)"));
        }
        HamiltonianSpec::new(
            1,
            1,
            vec![
                Term { coeff: 1.0, grad: GradPart::Fn(ScalarFunction::NonconvexEven(f)), spatial: None, noise: 0 },
                Term { coeff: -1.0, grad: GradPart::One, spatial: Some(ScalarFunction::Sawtooth { s }), noise: 0 },
            ],
        )
    }

    /// `sum_i a_i(y) |p| xi^i` (level-set model with random normal speeds).
    pub fn eikonal_speeds(dim: usize, speeds: Vec<ScalarFunction>) -> Result<Self> {
        let m = speeds.len();
        let terms = speeds
            .into_iter()
            .enumerate()
            .map(|(i, a)| Term { coeff: 1.0, grad: GradPart::Eikonal, spatial: Some(a), noise: i })
            .collect();
        HamiltonianSpec::new(dim, m, terms)
    }

    /// A single x-independent gradient function driven by one noise.
    pub fn x_independent(g: ScalarFunction) -> Result<Self> {
        HamiltonianSpec::new(1, 1, vec![Term { coeff: 1.0, grad: GradPart::Fn(g), spatial: None, noise: 0 }])
    }

    pub fn eval_1d(&self, p: f64, y: f64, xi: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let v = t.spatial.as_ref().map_or(1.0, |sf| sf.eval1(y));
            total += t.coeff * t.grad.eval1(p) * v * xi[t.noise];
        }
        total
    }

    pub fn eval_2d(&self, p: [f64; 2], y: [f64; 2], xi: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let v = t.spatial.as_ref().map_or(1.0, |sf| match sf.domain() {
                Domain::Torus2 => sf.eval2(y[0], y[1]),
                _ => sf.eval1(y[0]),
            });
            total += t.coeff * t.grad.eval2(p) * v * xi[t.noise];
        }
        total
    }

    /// Dimension-checked evaluation.
    pub fn eval(&self, p: &[f64], y: &[f64], xi: &[f64]) -> Result<f64> {
        if p.len() != self.dim || y.len() != self.dim {
            return Err(Error::invalid(format!(
                "expected {}-dimensional arguments, got p: {}, y: {}",
                self.dim,
                p.len(),
                y.len()
            )));
        }
        if xi.len() != self.m {
            return Err(Error::invalid(format!("expected {} noise components, got {}", self.m, xi.len())));
        }
        Ok(match self.dim {
            1 => self.eval_1d(p[0], y[0], xi),
            _ => self.eval_2d([p[0], p[1]], [y[0], y[1]], xi),
        })
    }

    /// True when no term has genuine spatial dependence.
    pub fn is_x_independent(&self) -> bool {
        self.terms.iter().all(|t| {
            t.spatial.as_ref().map_or(true, |sf| matches!(sf, ScalarFunction::Constant { .. }))
        })
    }

    /// Index of the unique non-constant gradient part, if there is one.
    pub fn single_grad_term(&self) -> Option<usize> {
        let mut found = None;
        for (i, t) in self.terms.iter().enumerate() {
            if !t.grad.is_constant() {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    /// Numeric shape classification of `p -> H(p, y, xi)` jointly over a
    /// sample of `y` (second differences on a p-grid; coercivity by
    /// comparing values at growing |p| against the mid-grid values).
    pub fn frozen_shape(&self, xi: &[f64]) -> FrozenShape {
        let n = 201usize;
        let p_max = 12.0;
        let ys: Vec<f64> = (0..17).map(|k| k as f64 / 17.0).collect();
        let mut convex = true;
        let mut concave = true;
        for &y in &ys {
            for k in 1..n - 1 {
                let p = -p_max + 2.0 * p_max * k as f64 / (n - 1) as f64;
                let h = 2.0 * p_max / (n - 1) as f64;
                let d2 = self.eval_1d_or_radial(p - h, y, xi) - 2.0 * self.eval_1d_or_radial(p, y, xi)
                    + self.eval_1d_or_radial(p + h, y, xi);
                if d2 < -1e-9 {
                    convex = false;
                }
                if d2 > 1e-9 {
                    concave = false;
                }
            }
        }
        let tail = |p: f64| {
            ys.iter().map(|&y| self.eval_1d_or_radial(p, y, xi)).fold(f64::INFINITY, f64::min)
        };
        let tail_max = |p: f64| {
            ys.iter().map(|&y| self.eval_1d_or_radial(p, y, xi)).fold(f64::NEG_INFINITY, f64::max)
        };
        let big = 60.0;
        let mid = tail_max(0.0).abs().max(tail(0.0).abs());
        let coercive = tail(big).min(tail(-big)) > mid + 1.0 && tail(2.0 * big).min(tail(-2.0 * big)) > tail(big).min(tail(-big));
        let anticoercive =
            tail_max(big).max(tail_max(-big)) < -mid - 1.0 && tail_max(2.0 * big).max(tail_max(-2.0 * big)) < tail_max(big).max(tail_max(-big));
        FrozenShape { convex, concave, coercive, anticoercive }
    }

    /// 1-d evaluation, or the radial section `p -> H(p e_1, y e_1)` in 2-d.
    fn eval_1d_or_radial(&self, p: f64, y: f64, xi: &[f64]) -> f64 {
        match self.dim {
            1 => self.eval_1d(p, y, xi),
            _ => self.eval_2d([p, 0.0], [y, y], xi),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: HamiltonianSpec = serde_json::from_str(text)?;
        HamiltonianSpec::new(spec.dim, spec.m, spec.terms.clone()).map(|mut ok| {
            ok.envelopes = spec.envelopes;
            ok
        })
    }
}
