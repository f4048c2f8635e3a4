//! The nonconvex flux driven by a sawtooth potential: exact inverse branches
//! of the flux, the mean-gradient thresholds where the effective nonlinearity
//! changes shape, the effective values themselves, and piecewise-branch
//! correctors with an independent admissibility checker.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{sawtooth_vs, NonconvexF};

const ONE_THIRD: f64 = 1.0 / 3.0;
/// Slack accepted outside a branch's level range before erroring.
const RANGE_TOL: f64 = 1e-9;
/// Pieces narrower than this are dropped from assembled profiles.
const EMPTY_PIECE: f64 = 1e-12;

/// Inverse branches of the even flux `F` on the nonnegative axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiBranch {
    /// Increasing outer branch: levels `>= 1/3` mapped into `[theta1, inf)`.
    Psi1,
    /// Decreasing middle branch: levels in `[1/3, 1/2]` mapped into
    /// `[theta2, theta1]`.
    Psi2,
    /// Increasing inner branch: levels in `[0, 1/2]` mapped into
    /// `[0, theta2]`.
    Psi3,
}

fn branch_range(branch: PsiBranch) -> (f64, f64) {
    match branch {
        PsiBranch::Psi1 => (ONE_THIRD, f64::INFINITY),
        PsiBranch::Psi2 => (ONE_THIRD, 0.5),
        PsiBranch::Psi3 => (0.0, 0.5),
    }
}

/// Bisection inverse of a strictly monotone function on `[lo, hi]`.
fn invert_monotone(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64, increasing: bool) -> f64 {
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Evaluate one inverse branch at level `y`.
pub fn psi(f: &NonconvexF, branch: PsiBranch, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::invalid(format!("level must be finite, got {y}")));
    }
    let (lo, hi) = branch_range(branch);
    if y < lo - RANGE_TOL || y > hi + RANGE_TOL {
        return Err(Error::invalid(format!(
            "level {y} lies outside the {branch:?} range [{lo}, {hi}]"
        )));
    }
    let y = y.clamp(lo, hi);
    Ok(match branch {
        // The flux is exactly quadratic past theta1, so the outer inverse is
        // closed form.
        PsiBranch::Psi1 => f.theta1 + ((y - ONE_THIRD) / f.tail_curvature).max(0.0).sqrt(),
        // The flux is critical at the branch ends, where function values
        // cannot locate the inverse; snap those levels exactly.
        PsiBranch::Psi2 if y == 0.5 => f.theta2,
        PsiBranch::Psi2 if y == ONE_THIRD => f.theta1,
        PsiBranch::Psi2 => invert_monotone(|x| f.eval(x), f.theta2, f.theta1, y, false),
        PsiBranch::Psi3 if y == 0.5 => f.theta2,
        PsiBranch::Psi3 if y == 0.0 => 0.0,
        PsiBranch::Psi3 => invert_monotone(|x| f.eval(x), 0.0, f.theta2, y, true),
    })
}

/// All three inverse branches at one level; defined only on the common
/// range `[1/3, 1/2]`.
pub fn psi_branches(f: &NonconvexF, y: f64) -> Result<(f64, f64, f64)> {
    if !(ONE_THIRD - RANGE_TOL..=0.5 + RANGE_TOL).contains(&y) {
        return Err(Error::invalid(format!(
            "the three inverse branches only coexist for levels in [1/3, 1/2], got {y}"
        )));
    }
    Ok((psi(f, PsiBranch::Psi1, y)?, psi(f, PsiBranch::Psi2, y)?, psi(f, PsiBranch::Psi3, y)?))
}

fn antideriv(f: &NonconvexF, x: f64) -> f64 {
    f.integral_nonneg(0.0, x.max(0.0))
}

/// Exact `int_{y0}^{y1} psi(y) dy` by parts along the inverse: with
/// `x = psi(y)` the integral equals `[y psi(y)] - int F(x) dx`, and `F` has
/// exact piecewise antiderivatives. Valid for the decreasing branch too,
/// where the `F` term enters with reversed orientation.
pub fn psi_integral(f: &NonconvexF, branch: PsiBranch, y0: f64, y1: f64) -> Result<f64> {
    if y1 < y0 - RANGE_TOL {
        return Err(Error::invalid(format!("integral bounds out of order: [{y0}, {y1}]")));
    }
    if y1 <= y0 {
        return Ok(0.0);
    }
    let x0 = psi(f, branch, y0)?;
    let x1 = psi(f, branch, y1)?;
    Ok(y1 * x1 - y0 * x0 - (antideriv(f, x1) - antideriv(f, x0)))
}

/// Mean-gradient thresholds at which the effective flux and its corrector
/// change layout, ordered `p0 < p4 < p3 < p2 < p1 < p_plus < q_minus < q1 <
/// q_plus`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SawtoothThresholds {
    /// Right edge of the zero plateau.
    pub p_plus: f64,
    /// Left edge of the 1/3 plateau.
    pub q_minus: f64,
    /// Corrector layout switch inside the 1/3 plateau.
    pub q1: f64,
    /// Right edge of the 1/3 plateau (independent of `s`).
    pub q_plus: f64,
    /// Smallest mean gradient the direct corrector family reaches; below it
    /// profiles come from the `(s, p) -> (1-s, -p)` reflection.
    pub p0: f64,
    /// Corrector layout switches inside the zero plateau, decreasing from
    /// `p1` down to `p4`.
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

/// Compute the thresholds for the sawtooth parameter `s`.
pub fn thresholds(f: &NonconvexF, s: f64) -> Result<SawtoothThresholds> {
    check_s(s)?;
    let j1 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi1, a, b);
    let j2 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi2, a, b);
    let j3 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi3, a, b);
    let j3_inner = j3(0.0, ONE_THIRD)?;
    let j1_upper = j1(0.5, 1.0)?;
    let j1_mid = j1(ONE_THIRD, 0.5)?;
    let j2_mid = j2(ONE_THIRD, 0.5)?;
    let j3_mid = j3(ONE_THIRD, 0.5)?;
    let j1_full = j1(ONE_THIRD, 1.0)?;
    let j1_wide = j1(0.5, 4.0 / 3.0)?;
    let skew = 2.0 * s - 1.0;
    Ok(SawtoothThresholds {
        p_plus: j3_inner + j1_upper + s * j1_mid + (1.0 - s) * j3_mid,
        q_minus: j1_wide + s * j1_mid + (1.0 - s) * j3_mid,
        q1: j1_wide + s * j1_mid + (1.0 - s) * j2_mid,
        q_plus: j1(ONE_THIRD, 4.0 / 3.0)?,
        p0: skew * (j3_inner + j1_full),
        p1: skew * j3_inner + j1_upper + s * j1_mid + (1.0 - s) * j3_mid,
        p2: skew * j3_inner + j1_upper + s * j1_mid - (1.0 - s) * j3_mid,
        p3: skew * j3_inner + j1_upper + s * j1_mid - (1.0 - s) * j2_mid,
        p4: skew * j3_inner + j1_upper + skew * j1_mid,
    })
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::invalid(format!("sawtooth parameter must lie in (0,1), got {s}")));
    }
    Ok(())
}

/// Mean gradient of the level-`lambda` profile that enters the 1/3 plateau
/// from below (`lambda` in `[0, 1/3]`); strictly increasing in `lambda`.
fn plateau_entry_mean(f: &NonconvexF, s: f64, lambda: f64) -> Result<f64> {
    let j1 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi1, a, b);
    let j3 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi3, a, b);
    Ok(j3(lambda, ONE_THIRD)?
        + j1(0.5, 1.0 + lambda)?
        + s * j1(ONE_THIRD, 0.5)?
        + (1.0 - s) * j3(ONE_THIRD, 0.5)?)
}

/// Mean gradient of the outer single-branch profile at level `lambda >=
/// 1/3`; strictly increasing in `lambda`.
fn outer_mean(f: &NonconvexF, lambda: f64) -> Result<f64> {
    psi_integral(f, PsiBranch::Psi1, lambda, 1.0 + lambda)
}

/// Bisection for a strictly monotone mean-vs-parameter map.
fn bisect_mean(
    mut lo: f64,
    mut hi: f64,
    increasing: bool,
    target: f64,
    mut g: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let (glo, ghi) = (g(lo)?, g(hi)?);
    let (below, above) = if increasing { (glo, ghi) } else { (ghi, glo) };
    if target < below - 1e-8 || target > above + 1e-8 {
        return Err(Error::Internal(format!(
            "bisection target {target} does not bracket in [{below}, {above}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid)? < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn solve_level_low(f: &NonconvexF, s: f64, p: f64) -> Result<f64> {
    bisect_mean(0.0, ONE_THIRD, true, p, |l| plateau_entry_mean(f, s, l))
}

fn solve_level_high(f: &NonconvexF, p: f64) -> Result<f64> {
    let mut hi = 1.0;
    let mut guard = 0;
    while outer_mean(f, hi)? < p {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Internal("outer level bracket did not close".into()));
        }
    }
    bisect_mean(ONE_THIRD, hi, true, p, |l| outer_mean(f, l))
}

/// The effective flux of `F(u_x) - V_s(x)`: zero up to `p_plus`, a solved
/// level rising to the 1/3 plateau between `q_minus` and `q_plus`, then the
/// solved outer level. Negative mean gradients reduce through the
/// `(s, p) -> (1-s, -p)` symmetry of the sawtooth.
pub fn effective_sawtooth(f: &NonconvexF, s: f64, p: f64) -> Result<f64> {
    check_s(s)?;
    if p < 0.0 {
        return effective_sawtooth(f, 1.0 - s, -p);
    }
    let th = thresholds(f, s)?;
    if p <= th.p_plus {
        Ok(0.0)
    } else if p <= th.q_minus {
        solve_level_low(f, s, p)
    } else if p <= th.q_plus {
        Ok(ONE_THIRD)
    } else {
        solve_level_high(f, p)
    }
}

/// One interval of a corrector: the gradient equals
/// `sign * psi_branch(lambda + V_s(x))` on `[x_lo, x_hi]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProfilePiece {
    pub x_lo: f64,
    pub x_hi: f64,
    pub branch: PsiBranch,
    /// `+1` or `-1`.
    pub sign: i8,
}

/// A periodic corrector gradient assembled from inverse-branch pieces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrectorProfile {
    /// Effective value the profile realizes.
    pub lambda: f64,
    /// Mean gradient the profile realizes.
    pub p: f64,
    /// Solved switch level, where the layout has one.
    pub tau: Option<f64>,
    /// Solved switch position for the plateau layouts.
    pub mu: Option<f64>,
    /// Layout index 1-9, increasing with the construction's case analysis.
    pub regime: usize,
    pub pieces: Vec<ProfilePiece>,
}

impl CorrectorProfile {
    /// Gradient value at `x` in `[0, 1]`.
    pub fn eval(&self, f: &NonconvexF, s: f64, x: f64) -> Result<f64> {
        let piece = self
            .pieces
            .iter()
            .find(|q| x <= q.x_hi + RANGE_TOL)
            .or_else(|| self.pieces.last())
            .ok_or_else(|| Error::invalid("profile has no pieces"))?;
        piece_value(piece, f, s, self.lambda, x)
    }

    /// Interior piece boundaries (the wrap point 0/1 is implicit).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().take(self.pieces.len().saturating_sub(1)).map(|q| q.x_hi).collect()
    }

    /// The mirror profile: evaluated with parameter `1 - s`, it is the
    /// corrector for mean gradient `-p` at the same level.
    pub fn reflect(&self) -> CorrectorProfile {
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|q| ProfilePiece {
                x_lo: 1.0 - q.x_hi,
                x_hi: 1.0 - q.x_lo,
                branch: q.branch,
                sign: -q.sign,
            })
            .collect();
        CorrectorProfile {
            lambda: self.lambda,
            p: -self.p,
            tau: self.tau,
            mu: self.mu,
            regime: self.regime,
            pieces,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Sampled CSV with a JSON metadata header line.
    pub fn write_csv<W: Write>(&self, f: &NonconvexF, s: f64, n: usize, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "kind": "corrector-profile",
            "s": s,
            "lambda": self.lambda,
            "p": self.p,
            "tau": self.tau,
            "mu": self.mu,
            "regime": self.regime,
            "pieces": self.pieces,
        });
        writeln!(out, "# {header}")?;
        writeln!(out, "x,gradient")?;
        for j in 0..n {
            let x = (j as f64 + 0.5) / n as f64;
            writeln!(out, "{:.12e},{:.12e}", x, self.eval(f, s, x)?)?;
        }
        Ok(())
    }
}

fn piece_value(piece: &ProfilePiece, f: &NonconvexF, s: f64, lambda: f64, x: f64) -> Result<f64> {
    let level = lambda + sawtooth_vs(s, x)?;
    Ok(piece.sign as f64 * psi(f, piece.branch, level)?)
}

fn assemble(raw: Vec<(f64, f64, PsiBranch, i8)>) -> Vec<ProfilePiece> {
    raw.into_iter()
        .filter(|(a, b, ..)| b - a > EMPTY_PIECE)
        .map(|(x_lo, x_hi, branch, sign)| ProfilePiece { x_lo, x_hi, branch, sign })
        .collect()
}

/// Build the corrector profile realizing mean gradient `p`.
///
/// Requires `p >= p0(s)`; smaller means are reached by building the profile
/// for `(1 - s, -p)` and calling [`CorrectorProfile::reflect`].
pub fn sawtooth_corrector(f: &NonconvexF, s: f64, p: f64) -> Result<CorrectorProfile> {
    check_s(s)?;
    let th = thresholds(f, s)?;
    let tol = 1e-12 * (1.0 + th.p0.abs());
    if p < th.p0 - tol {
        return Err(Error::invalid(format!(
            "mean gradient {p} lies below the direct family's reach {}; build the profile for \
             (1 - s, -p) and reflect it",
            th.p0
        )));
    }
    let p = p.max(th.p0);
    let j1 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi1, a, b);
    let j2 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi2, a, b);
    let j3 = |a: f64, b: f64| psi_integral(f, PsiBranch::Psi3, a, b);
    let j3_inner = j3(0.0, ONE_THIRD)?;
    let j1_full = j1(ONE_THIRD, 1.0)?;
    let j1_upper = j1(0.5, 1.0)?;
    // Mean of the layouts shared by regimes 1-4: the two fixed leading
    // pieces plus the tau-dependent tail.
    let lead = s * j3_inner + s * j1_full + (1.0 - s) * j1_upper;

    let regime = if p >= th.q_plus {
        9
    } else if p >= th.q1 {
        8
    } else if p >= th.q_minus {
        7
    } else if p >= th.p_plus {
        6
    } else if p >= th.p1 {
        1
    } else if p >= th.p2 {
        2
    } else if p >= th.p3 {
        3
    } else if p >= th.p4 {
        4
    } else {
        5
    };

    let (lambda, tau, mu, raw) = match regime {
        1 | 2 => {
            // Decreasing in tau from p_plus (tau = 0) to p2 (tau = 1/2).
            let tau = bisect_mean(0.0, 0.5, false, p, |t| {
                Ok(lead + (1.0 - s) * (j3(t, 0.5)? - j3(0.0, t)?))
            })?;
            let cut = 1.0 - tau * (1.0 - s);
            (
                0.0,
                Some(tau),
                None,
                vec![
                    (0.0, s / 3.0, PsiBranch::Psi3, 1),
                    (s / 3.0, (1.0 + s) / 2.0, PsiBranch::Psi1, 1),
                    ((1.0 + s) / 2.0, cut, PsiBranch::Psi3, 1),
                    (cut, 1.0, PsiBranch::Psi3, -1),
                ],
            )
        }
        3 => {
            // Increasing in tau from p3 (tau = 1/3) to p2 (tau = 1/2).
            let tau = bisect_mean(ONE_THIRD, 0.5, true, p, |t| {
                Ok(lead - (1.0 - s) * (j2(t, 0.5)? + j3(0.0, t)?))
            })?;
            let cut = 1.0 - tau * (1.0 - s);
            (
                0.0,
                Some(tau),
                None,
                vec![
                    (0.0, s / 3.0, PsiBranch::Psi3, 1),
                    (s / 3.0, (1.0 + s) / 2.0, PsiBranch::Psi1, 1),
                    ((1.0 + s) / 2.0, cut, PsiBranch::Psi2, -1),
                    (cut, 1.0, PsiBranch::Psi3, -1),
                ],
            )
        }
        4 => {
            // Decreasing in tau from p3 (tau = 1/3) to p4 (tau = 1/2).
            let tau = bisect_mean(ONE_THIRD, 0.5, false, p, |t| {
                Ok(lead - (1.0 - s) * (j2(t, 0.5)? + j1(ONE_THIRD, t)? + j3_inner))
            })?;
            let cut = 1.0 - tau * (1.0 - s);
            (
                0.0,
                Some(tau),
                None,
                vec![
                    (0.0, s / 3.0, PsiBranch::Psi3, 1),
                    (s / 3.0, (1.0 + s) / 2.0, PsiBranch::Psi1, 1),
                    ((1.0 + s) / 2.0, cut, PsiBranch::Psi2, -1),
                    (cut, (2.0 + s) / 3.0, PsiBranch::Psi1, -1),
                    ((2.0 + s) / 3.0, 1.0, PsiBranch::Psi3, -1),
                ],
            )
        }
        5 => {
            // Decreasing in tau from p4 (tau = 1/2) to p0 (tau = 1).
            let tau = bisect_mean(0.5, 1.0, false, p, |t| {
                Ok((2.0 * s - 1.0) * j3_inner + s * j1_full + (1.0 - s) * j1(t, 1.0)?
                    - (1.0 - s) * j1(ONE_THIRD, t)?)
            })?;
            let cut = 1.0 - tau * (1.0 - s);
            (
                0.0,
                Some(tau),
                None,
                vec![
                    (0.0, s / 3.0, PsiBranch::Psi3, 1),
                    (s / 3.0, cut, PsiBranch::Psi1, 1),
                    (cut, (2.0 + s) / 3.0, PsiBranch::Psi1, -1),
                    ((2.0 + s) / 3.0, 1.0, PsiBranch::Psi3, -1),
                ],
            )
        }
        6 => {
            let lambda = solve_level_low(f, s, p)?;
            (
                lambda,
                None,
                None,
                vec![
                    (0.0, (1.0 - 3.0 * lambda) * s / 3.0, PsiBranch::Psi3, 1),
                    (
                        (1.0 - 3.0 * lambda) * s / 3.0,
                        (1.0 + s) / 2.0 + lambda * (1.0 - s),
                        PsiBranch::Psi1,
                        1,
                    ),
                    ((1.0 + s) / 2.0 + lambda * (1.0 - s), 1.0, PsiBranch::Psi3, 1),
                ],
            )
        }
        7 => {
            // Increasing in tau from q_minus (tau = 1/3) to q1 (tau = 1/2).
            let wide = j1(0.5, 4.0 / 3.0)?;
            let steep = s * j1(ONE_THIRD, 4.0 / 3.0)?;
            let tau = bisect_mean(ONE_THIRD, 0.5, true, p, |t| {
                Ok(steep + (1.0 - s) * (wide + j3(t, 0.5)? + j2(ONE_THIRD, t)?))
            })?;
            let mu = plateau_switch(s, tau)?;
            (
                ONE_THIRD,
                Some(tau),
                Some(mu),
                vec![
                    (0.0, (5.0 + s) / 6.0, PsiBranch::Psi1, 1),
                    ((5.0 + s) / 6.0, mu, PsiBranch::Psi3, 1),
                    (mu, 1.0, PsiBranch::Psi2, 1),
                ],
            )
        }
        8 => {
            // Decreasing in tau from q_plus (tau = 1/3) to q1 (tau = 1/2).
            let steep = s * j1(ONE_THIRD, 4.0 / 3.0)?;
            let tau = bisect_mean(ONE_THIRD, 0.5, false, p, |t| {
                Ok(steep + (1.0 - s) * (j1(t, 4.0 / 3.0)? + j2(ONE_THIRD, t)?))
            })?;
            let mu = plateau_switch(s, tau)?;
            (
                ONE_THIRD,
                Some(tau),
                Some(mu),
                vec![(0.0, mu, PsiBranch::Psi1, 1), (mu, 1.0, PsiBranch::Psi2, 1)],
            )
        }
        _ => {
            let lambda = solve_level_high(f, p)?;
            (lambda, None, None, vec![(0.0, 1.0, PsiBranch::Psi1, 1)])
        }
    };
    Ok(CorrectorProfile { lambda, p, tau, mu, regime, pieces: assemble(raw) })
}

/// Switch position `mu = 1 - (tau - 1/3)(1 - s)`; checked against its
/// admissible window rather than assumed.
fn plateau_switch(s: f64, tau: f64) -> Result<f64> {
    let mu = 1.0 - (tau - ONE_THIRD) * (1.0 - s);
    let lo = (5.0 + s) / 6.0;
    if !(lo - RANGE_TOL..=1.0 + RANGE_TOL).contains(&mu) {
        return Err(Error::Internal(format!("switch position {mu} escaped [{lo}, 1]")));
    }
    Ok(mu)
}

/// Independent admissibility report for a corrector profile.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CorrectorReport {
    /// Worst interior defect of `F(f(x)) = level(x)` over 10^3 samples.
    pub ode_residual: f64,
    /// Every gradient jump hits the local level from the admissible side.
    pub jump_admissibility: bool,
    /// `|mean of the profile - p|` by adaptive quadrature.
    pub mean_gradient_error: f64,
    /// Which pairing of potential and level the samples satisfied.
    pub convention: &'static str,
}

/// Check a profile against the cell equation it claims to solve: interior
/// residual, jump admissibility, and the realized mean gradient.
pub fn verify_corrector(profile: &CorrectorProfile, f: &NonconvexF, s: f64) -> CorrectorReport {
    let n = 1000usize;
    let breakpoints = profile.breakpoints();
    let mut res_minus = 0.0f64;
    let mut res_plus = 0.0f64;
    for j in 0..n {
        let x = (j as f64 + 0.5) / n as f64;
        if breakpoints.iter().any(|b| (x - b).abs() < 1e-7) {
            continue;
        }
        match (profile.eval(f, s, x), sawtooth_vs(s, x)) {
            (Ok(g), Ok(v)) => {
                let fg = f.eval(g);
                res_minus = res_minus.max((fg - v - profile.lambda).abs());
                res_plus = res_plus.max((fg + v - profile.lambda).abs());
            }
            _ => {
                res_minus = f64::INFINITY;
                res_plus = f64::INFINITY;
            }
        }
    }
    let (ode_residual, potential_sign, convention) = if res_minus <= res_plus {
        (res_minus, 1.0, "level = F(f) - V_s")
    } else {
        (res_plus, -1.0, "level = F(f) + V_s")
    };

    let jump_admissibility = check_jumps(profile, f, s, potential_sign);

    // Quadrature only makes sense when the profile evaluates everywhere.
    let mut total = 0.0f64;
    if ode_residual.is_finite() {
        for piece in &profile.pieces {
            let g = |x: f64| piece_value(piece, f, s, profile.lambda, x).unwrap_or(f64::NAN);
            // Split at the sawtooth apex, the one interior kink of the level.
            if piece.x_lo < s && s < piece.x_hi {
                total += integrate(&g, piece.x_lo, s, 1e-11);
                total += integrate(&g, s, piece.x_hi, 1e-11);
            } else {
                total += integrate(&g, piece.x_lo, piece.x_hi, 1e-11);
            }
        }
    } else {
        total = f64::NAN;
    }
    let mean_err = (total - profile.p).abs();
    CorrectorReport {
        ode_residual,
        jump_admissibility,
        mean_gradient_error: if mean_err.is_finite() { mean_err } else { f64::INFINITY },
        convention,
    }
}

fn check_jumps(profile: &CorrectorProfile, f: &NonconvexF, s: f64, potential_sign: f64) -> bool {
    if profile.pieces.is_empty() {
        return false;
    }
    // (position, left piece, right piece), including the periodic wrap.
    let mut sites: Vec<(f64, &ProfilePiece, &ProfilePiece)> = Vec::new();
    for w in profile.pieces.windows(2) {
        sites.push((w[0].x_hi, &w[0], &w[1]));
    }
    let last = profile.pieces.last().unwrap();
    let first = profile.pieces.first().unwrap();
    sites.push((0.0, last, first));
    for (y0, left, right) in sites {
        // The wrap site evaluates the left piece at x = 1.
        let x_left = if y0 == 0.0 { 1.0 } else { y0 };
        let (p1, p2) = match (
            piece_value(left, f, s, profile.lambda, x_left),
            piece_value(right, f, s, profile.lambda, y0),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return false,
        };
        if (p1 - p2).abs() < 1e-9 {
            continue;
        }
        let level = match sawtooth_vs(s, y0) {
            Ok(v) => profile.lambda + potential_sign * v,
            Err(_) => return false,
        };
        if (f.eval(p1) - level).abs() > 1e-8 || (f.eval(p2) - level).abs() > 1e-8 {
            return false;
        }
        // Between the one-sided values, an upward jump must keep F at or
        // above the level, a downward jump at or below.
        let up = p2 > p1;
        let (a, b) = (p1.min(p2), p1.max(p2));
        for k in 0..=400 {
            let q = a + (b - a) * k as f64 / 400.0;
            let fq = f.eval(q);
            if up && fq < level - 1e-9 {
                return false;
            }
            if !up && fq > level + 1e-9 {
                return false;
            }
        }
    }
    true
}

fn integrate(g: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (g(a), g(m), g(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_refine(g, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine(
    g: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (g(lm), g(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    // Refinement cannot repair a non-finite sample; stop immediately.
    if !refined.is_finite() || !whole.is_finite() {
        return f64::NAN;
    }
    if depth == 0 || (refined - whole).abs() <= 15.0 * tol {
        return refined + (refined - whole) / 15.0;
    }
    simpson_refine(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_refine(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Coefficients of the limit equation for the two-driver model
/// `F(u_x) xi^1 + V_s(x) xi^2`: a vanishing constant, the two diagonal
/// averages, and the product coefficient.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NonconvexRelations {
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
    pub h12: f64,
}

pub fn nonconvex_relations(f: &NonconvexF, s: f64, p: f64) -> Result<NonconvexRelations> {
    let here = effective_sawtooth(f, s, p)?;
    let mirror = effective_sawtooth(f, 1.0 - s, p)?;
    Ok(NonconvexRelations {
        h0: 0.0,
        h1: (here + mirror + 1.0) / 2.0,
        h2: 0.5,
        h12: (mirror - here) / 2.0,
    })
}

/// Drift of the scaled solutions at mean gradient `p0`: half the gap
/// between the mirror-parameter and direct effective values.
pub fn ballistic_constant(f: &NonconvexF, s: f64, p0: f64) -> Result<f64> {
    Ok((effective_sawtooth(f, 1.0 - s, p0)? - effective_sawtooth(f, s, p0)?) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flux() -> NonconvexF {
        NonconvexF::new(1.0, 0.5, 0.25).unwrap()
    }

    #[test]
    fn inverse_branches_hit_their_anchors() {
        let f = flux();
        assert!(psi(&f, PsiBranch::Psi3, 0.0).unwrap().abs() < 1e-12);
        assert_abs_diff_eq!(psi(&f, PsiBranch::Psi2, 0.5).unwrap(), f.theta2, epsilon = 1e-12);
        assert_abs_diff_eq!(psi(&f, PsiBranch::Psi1, ONE_THIRD).unwrap(), f.theta1, epsilon = 1e-12);
        assert_abs_diff_eq!(psi(&f, PsiBranch::Psi3, ONE_THIRD).unwrap(), f.theta3, epsilon = 1e-12);
        for k in 0..100 {
            let y = ONE_THIRD + (0.5 - ONE_THIRD) * (k as f64 + 0.5) / 100.0;
            let (a, b, c) = psi_branches(&f, y).unwrap();
            assert!(c < f.theta2 && (f.theta2..=f.theta1).contains(&b) && a >= f.theta1);
            for x in [a, b, c] {
                assert_abs_diff_eq!(f.eval(x), y, epsilon = 1e-12);
            }
        }
        for k in 0..100 {
            let y = ONE_THIRD + 3.0 * k as f64 / 100.0;
            let x = psi(&f, PsiBranch::Psi1, y).unwrap();
            assert_abs_diff_eq!(f.eval(x), y, epsilon = 1e-10);
        }
        assert!(psi(&f, PsiBranch::Psi3, 0.6).is_err());
        assert!(psi(&f, PsiBranch::Psi2, 0.2).is_err());
        assert!(psi(&f, PsiBranch::Psi1, 0.1).is_err());
        assert!(psi_branches(&f, 0.2).is_err());
    }

    #[test]
    fn exact_branch_integrals_match_quadrature() {
        let f = flux();
        let cases = [
            (PsiBranch::Psi1, 0.4, 1.2),
            (PsiBranch::Psi1, ONE_THIRD, 0.5),
            (PsiBranch::Psi2, ONE_THIRD, 0.5),
            (PsiBranch::Psi2, 0.35, 0.45),
            (PsiBranch::Psi3, 0.0, 0.5),
            (PsiBranch::Psi3, 0.1, ONE_THIRD),
        ];
        for (branch, a, b) in cases {
            let exact = psi_integral(&f, branch, a, b).unwrap();
            let quad = integrate(&|y| psi(&f, branch, y).unwrap(), a, b, 1e-12);
            assert_abs_diff_eq!(exact, quad, epsilon = 1e-9);
        }
        assert!(psi_integral(&f, PsiBranch::Psi2, 0.5, ONE_THIRD).is_err());
    }

    #[test]
    fn thresholds_are_ordered_and_symmetric() {
        let f = flux();
        for &s in &[0.2, 0.5, 0.8] {
            let th = thresholds(&f, s).unwrap();
            assert!(th.p0 < th.p4 && th.p4 < th.p3 && th.p3 < th.p2);
            assert!(th.p2 < th.p1 && th.p1 < th.p_plus);
            assert!(th.p_plus < th.q_minus && th.q_minus < th.q1 && th.q1 < th.q_plus);
        }
        let mid = thresholds(&f, 0.5).unwrap();
        assert!(mid.p0.abs() < 1e-12);
        let a = thresholds(&f, 0.25).unwrap();
        let b = thresholds(&f, 0.75).unwrap();
        assert_abs_diff_eq!(a.q_plus, b.q_plus, epsilon = 1e-12);
        // Gap between the outermost zero-plateau switches.
        let j3_inner = psi_integral(&f, PsiBranch::Psi3, 0.0, ONE_THIRD).unwrap();
        assert_abs_diff_eq!(a.p_plus - a.p1, 2.0 * 0.75 * j3_inner, epsilon = 1e-10);
    }

    #[test]
    fn effective_value_has_two_plateaus_and_is_monotone() {
        let f = flux();
        let s = 0.35;
        let th = thresholds(&f, s).unwrap();
        assert_abs_diff_eq!(effective_sawtooth(&f, s, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(effective_sawtooth(&f, s, th.p_plus).unwrap(), 0.0);
        assert_abs_diff_eq!(
            effective_sawtooth(&f, s, 0.5 * (th.q_minus + th.q_plus)).unwrap(),
            ONE_THIRD
        );
        for &edge in &[th.p_plus, th.q_minus, th.q_plus] {
            let below = effective_sawtooth(&f, s, edge - 1e-7).unwrap();
            let above = effective_sawtooth(&f, s, edge + 1e-7).unwrap();
            assert!((above - below).abs() < 1e-5);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=100 {
            let p = th.p0 + (th.q_plus + 1.0 - th.p0) * k as f64 / 100.0;
            let v = effective_sawtooth(&f, s, p).unwrap();
            assert!(v >= prev - 1e-10);
            prev = v;
        }
        for &p in &[-1.3, -0.4, 0.2, 0.9] {
            assert_abs_diff_eq!(
                effective_sawtooth(&f, s, -p).unwrap(),
                effective_sawtooth(&f, 1.0 - s, p).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    fn regime_midpoints(th: &SawtoothThresholds) -> [(usize, f64); 9] {
        [
            (1, 0.5 * (th.p1 + th.p_plus)),
            (2, 0.5 * (th.p2 + th.p1)),
            (3, 0.5 * (th.p3 + th.p2)),
            (4, 0.5 * (th.p4 + th.p3)),
            (5, 0.5 * (th.p0 + th.p4)),
            (6, 0.5 * (th.p_plus + th.q_minus)),
            (7, 0.5 * (th.q_minus + th.q1)),
            (8, 0.5 * (th.q1 + th.q_plus)),
            (9, th.q_plus + 0.6),
        ]
    }

    #[test]
    fn every_regime_produces_an_admissible_corrector() {
        let f = flux();
        for &s in &[0.3, 0.62] {
            let th = thresholds(&f, s).unwrap();
            for (want, p) in regime_midpoints(&th) {
                let profile = sawtooth_corrector(&f, s, p).unwrap();
                assert_eq!(profile.regime, want, "s = {s}, p = {p}");
                assert_abs_diff_eq!(
                    profile.lambda,
                    effective_sawtooth(&f, s, p).unwrap(),
                    epsilon = 1e-9
                );
                let report = verify_corrector(&profile, &f, s);
                assert!(report.ode_residual < 1e-8, "regime {want}: {report:?}");
                assert!(report.jump_admissibility, "regime {want}: {report:?}");
                assert!(report.mean_gradient_error < 1e-8, "regime {want}: {report:?}");
                assert_eq!(report.convention, "level = F(f) - V_s");
            }
        }
    }

    #[test]
    fn profiles_agree_across_regime_boundaries() {
        let f = flux();
        let s = 0.3;
        let th = thresholds(&f, s).unwrap();
        let edges =
            [th.p4, th.p3, th.p2, th.p1, th.p_plus, th.q_minus, th.q1, th.q_plus];
        for &edge in &edges {
            let d = 1e-9 * (1.0 + edge.abs());
            let lo = sawtooth_corrector(&f, s, edge - d).unwrap();
            let hi = sawtooth_corrector(&f, s, edge + d).unwrap();
            let mut guard: Vec<f64> = lo.breakpoints();
            guard.extend(hi.breakpoints());
            for k in 1..40 {
                let x = k as f64 / 40.0;
                if guard.iter().any(|b| (x - b).abs() < 0.02) {
                    continue;
                }
                let a = lo.eval(&f, s, x).unwrap();
                let b = hi.eval(&f, s, x).unwrap();
                assert!((a - b).abs() < 1e-4, "edge {edge}, x {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn reflection_serves_means_below_the_direct_reach() {
        let f = flux();
        let s = 0.7;
        let th = thresholds(&f, s).unwrap();
        let p = th.p0 - 0.1;
        assert!(sawtooth_corrector(&f, s, p).is_err());
        let mirrored = sawtooth_corrector(&f, 1.0 - s, -p).unwrap();
        let profile = mirrored.reflect();
        assert_abs_diff_eq!(profile.p, p, epsilon = 1e-12);
        let report = verify_corrector(&profile, &f, s);
        assert!(report.ode_residual < 1e-8);
        assert!(report.jump_admissibility);
        assert!(report.mean_gradient_error < 1e-8);
    }

    #[test]
    fn corrupted_profiles_are_flagged() {
        let f = flux();
        let s = 0.4;
        let th = thresholds(&f, s).unwrap();

        // Mid-rise layout: lowering the level exits the steep branch's range.
        let base = sawtooth_corrector(&f, s, 0.5 * (th.p_plus + th.q_minus)).unwrap();
        let mut low = base.clone();
        low.lambda -= 0.01;
        assert!(verify_corrector(&low, &f, s).ode_residual > 1.0);

        // Raising it keeps every branch evaluable, but the jump geometry and
        // the realized mean both give it away.
        let mut high = base;
        high.lambda += 0.01;
        let report = verify_corrector(&high, &f, s);
        assert!(!report.jump_admissibility, "{report:?}");
        assert!(report.mean_gradient_error > 1e-3, "{report:?}");

        // The outer single-branch layout has no jumps; the mean flags it.
        let mut outer = sawtooth_corrector(&f, s, th.q_plus + 0.5).unwrap();
        outer.lambda += 0.01;
        let report = verify_corrector(&outer, &f, s);
        assert!(report.mean_gradient_error > 1e-3, "{report:?}");
    }

    #[test]
    fn limit_coefficients_resum_over_sign_patterns() {
        let f = flux();
        let (s, p) = (0.35, 0.7);
        let r = nonconvex_relations(&f, s, p).unwrap();
        assert_abs_diff_eq!(r.h0, 0.0);
        assert_abs_diff_eq!(r.h2, 0.5);
        let here = effective_sawtooth(&f, s, p).unwrap();
        let mirror = effective_sawtooth(&f, 1.0 - s, p).unwrap();
        assert_abs_diff_eq!(r.h0 + r.h1 + r.h2 + r.h12, mirror + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.h0 + r.h1 - r.h2 - r.h12, here, epsilon = 1e-12);
        assert_abs_diff_eq!(r.h0 - r.h1 + r.h2 - r.h12, -mirror, epsilon = 1e-12);
        assert_abs_diff_eq!(r.h0 - r.h1 - r.h2 + r.h12, -here - 1.0, epsilon = 1e-12);
        let balanced = nonconvex_relations(&f, 0.5, p).unwrap();
        assert_abs_diff_eq!(balanced.h12, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ballistic_constant(&f, 0.5, p).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn skewed_sawtooth_drifts_between_plateau_edges() {
        let f = flux();
        let s = 0.3;
        let th_s = thresholds(&f, s).unwrap();
        let th_m = thresholds(&f, 1.0 - s).unwrap();
        let p0 = 0.5 * (th_s.p_plus + th_m.p_plus.min(th_s.q_minus));
        let c = ballistic_constant(&f, s, p0).unwrap();
        assert!(c.abs() > 1e-4, "drift {c}");
        // Below both zero-plateau edges the drift vanishes.
        let flat = ballistic_constant(&f, s, 0.5 * th_s.p_plus.min(th_m.p_plus)).unwrap();
        assert_abs_diff_eq!(flat, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn profile_round_trips_and_exports() {
        let f = flux();
        let s = 0.45;
        let th = thresholds(&f, s).unwrap();
        let profile = sawtooth_corrector(&f, s, 0.5 * (th.p_plus + th.q_minus)).unwrap();
        let back = CorrectorProfile::from_json(&profile.to_json().unwrap()).unwrap();
        assert_eq!(back.regime, profile.regime);
        assert_abs_diff_eq!(back.lambda, profile.lambda);
        assert_eq!(back.pieces.len(), profile.pieces.len());
        let mut buf = Vec::new();
        profile.write_csv(&f, s, 16, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# {"));
        assert_eq!(text.lines().count(), 18);
    }
}
