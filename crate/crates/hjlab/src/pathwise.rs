//! Pathwise solution operator: plays piecewise-linear driving paths through
//! the forward operators by monotone-segment splitting, runs the rescaled
//! fast-oscillation problems driven by step fields, and measures
//! path-stability gaps against their growth-envelope bound.
//!
//! Convention: all solvers here advance `u_t + sum_i H^i(Du, y) dzeta^i = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{PiecewisePath, StepField};
use crate::hamiltonians::{HamiltonianSpec, Term};
use crate::hjsolver::{s_pm, solve_frozen_opts, FrozenOptions, GridFunction, Sign};

/// Noise input for a pathwise problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Drivers {
    /// Step field rescaled on the fly: component `i` drives
    /// `zeta^{i,eps}(t) = eps^gamma * zeta^i(t / eps^{2 gamma})`.
    Field { field: StepField, epsilon: f64, gamma: f64 },
    /// One explicit path per noise component.
    Paths(Vec<PiecewisePath>),
}

/// A fully specified pathwise initial-value problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathwiseProblem {
    pub spec: HamiltonianSpec,
    pub drivers: Drivers,
    pub u0: GridFunction,
    pub horizon: f64,
}

impl PathwiseProblem {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 0.0 {
            return Err(Error::invalid("negative horizon"));
        }
        match &self.drivers {
            Drivers::Field { field, epsilon, gamma } => {
                validate_scaled(*epsilon, *gamma, &self.spec, field, &self.u0, self.horizon)
            }
            Drivers::Paths(paths) => {
                if paths.len() != self.spec.m {
                    return Err(Error::invalid(format!(
                        "{} paths supplied for {} noise components",
                        paths.len(),
                        self.spec.m
                    )));
                }
                for path in paths {
                    if path.t_end() < self.horizon * (1.0 - 1e-12) {
                        return Err(Error::invalid(format!(
                            "path ends at {} before the horizon {}",
                            path.t_end(),
                            self.horizon
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn validate_scaled(
    epsilon: f64,
    gamma: f64,
    spec: &HamiltonianSpec,
    field: &StepField,
    u0: &GridFunction,
    t: f64,
) -> Result<()> {
    if !(0.0 < epsilon && epsilon <= 1.0) || !(gamma > 0.0) {
        return Err(Error::invalid("need 0 < epsilon <= 1 and gamma > 0"));
    }
    if field.m() != spec.m {
        return Err(Error::invalid(format!(
            "field has {} components, spec needs {}",
            field.m(), spec.m
        )));
    }
    let interval = epsilon.powf(2.0 * gamma);
    let needed = (t / interval).ceil() as usize;
    if field.n_steps() < needed {
        return Err(Error::invalid(format!(
            "field has {} steps but covering time {t} at epsilon {epsilon} needs {needed}",
            field.n_steps()
        )));
    }
    let dx_max = epsilon / 64.0;
    if u0.dx > dx_max * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "grid spacing {} too coarse for epsilon {epsilon}: need dx <= {dx_max}",
            u0.dx
        )));
    }
    Ok(())
}

pub(crate) fn snapshot_times(t: f64, n_snapshots: usize) -> Vec<f64> {
    let n = n_snapshots.max(1);
    (0..=n).map(|j| t * j as f64 / n as f64).collect()
}

/// Solve the problem, reporting `n_snapshots + 1` uniformly spaced states
/// (the first is the initial datum).
pub fn solve_pathwise(
    problem: &PathwiseProblem,
    n_snapshots: usize,
) -> Result<Vec<(f64, GridFunction)>> {
    problem.validate()?;
    let snaps = snapshot_times(problem.horizon, n_snapshots);
    match &problem.drivers {
        Drivers::Field { field, epsilon, gamma } => solve_field(
            &problem.spec,
            field,
            *epsilon,
            *gamma,
            &problem.u0,
            problem.horizon,
            &snaps,
            None,
        ),
        Drivers::Paths(paths) => solve_paths(&problem.spec, paths, &problem.u0, problem.horizon, &snaps),
    }
}

/// The sub-Hamiltonian of the terms driven by one noise component.
fn sub_spec(spec: &HamiltonianSpec, component: usize) -> Result<Option<HamiltonianSpec>> {
    let terms: Vec<Term> = spec
        .terms
        .iter()
        .filter(|t| t.noise == component)
        .map(|t| Term { noise: 0, ..t.clone() })
        .collect();
    if terms.is_empty() {
        return Ok(None);
    }
    Ok(Some(HamiltonianSpec::new(spec.dim, 1, terms)?))
}

fn solve_paths(
    spec: &HamiltonianSpec,
    paths: &[PiecewisePath],
    u0: &GridFunction,
    t: f64,
    snaps: &[f64],
) -> Result<Vec<(f64, GridFunction)>> {
    let tol = 1e-12 * (1.0 + t);
    let mut times: Vec<f64> = Vec::new();
    for path in paths {
        times.extend(path.breakpoints().iter().copied().filter(|&b| b > tol && b < t - tol));
    }
    times.extend(snaps.iter().copied().filter(|&b| b > tol && b < t - tol));
    times.push(0.0);
    times.push(t);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() <= tol);

    let subs: Vec<Option<HamiltonianSpec>> =
        (0..spec.m).map(|i| sub_spec(spec, i)).collect::<Result<_>>()?;

    let mut out = Vec::new();
    let mut u = u0.clone();
    let mut snap_iter = snaps.iter().peekable();
    if let Some(&&s0) = snap_iter.peek() {
        if s0 <= tol {
            out.push((s0, u.clone()));
            snap_iter.next();
        }
    }
    // A monotone run: consecutive intervals moving one component in one
    // direction merge into a single forward-operator application.
    let mut pending: Option<(usize, Sign, f64)> = None;
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mut active: Option<(usize, f64)> = None;
        for (i, path) in paths.iter().enumerate() {
            let d = path.value(t1) - path.value(t0);
            if d.abs() > tol {
                if active.is_some() {
                    return Err(Error::Unsupported(
                        "several noise components vary on the same time interval; \
                         only step-structured simultaneous noise is solvable"
                            .into(),
                    ));
                }
                active = Some((i, d));
            }
        }
        if let Some((i, d)) = active {
            if subs[i].is_some() {
                let sign = if d >= 0.0 { Sign::Plus } else { Sign::Minus };
                pending = match pending {
                    Some((pi, ps, dur)) if pi == i && ps == sign => Some((pi, ps, dur + d.abs())),
                    Some((pi, ps, dur)) => {
                        let sub = subs[pi].as_ref().unwrap();
                        u = s_pm(sub, &[1.0], ps, dur, &u)?.0;
                        Some((i, sign, d.abs()))
                    }
                    None => Some((i, sign, d.abs())),
                };
            }
        }
        // Snapshot boundaries flush the pending run so states are exact.
        let is_snap = snap_iter.peek().is_some_and(|&&s| (s - t1).abs() <= tol);
        if is_snap {
            if let Some((pi, ps, dur)) = pending.take() {
                let sub = subs[pi].as_ref().unwrap();
                u = s_pm(sub, &[1.0], ps, dur, &u)?.0;
            }
            out.push((*snap_iter.next().unwrap(), u.clone()));
        }
    }
    if let Some((pi, ps, dur)) = pending.take() {
        let sub = subs[pi].as_ref().unwrap();
        u = s_pm(sub, &[1.0], ps, dur, &u)?.0;
    }
    if out.is_empty() || (out.last().unwrap().0 - t).abs() > tol {
        out.push((t, u));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn solve_field(
    spec: &HamiltonianSpec,
    field: &StepField,
    epsilon: f64,
    gamma: f64,
    u0: &GridFunction,
    t: f64,
    snaps: &[f64],
    tilt: Option<f64>,
) -> Result<Vec<(f64, GridFunction)>> {
    let interval = epsilon.powf(2.0 * gamma);
    let scale = epsilon.powf(-gamma);
    let tol = 1e-12 * (1.0 + t);
    let mut times: Vec<f64> = Vec::new();
    let mut k = 1usize;
    while (k as f64) * interval < t - tol {
        times.push(k as f64 * interval);
        k += 1;
    }
    times.extend(snaps.iter().copied().filter(|&b| b > tol && b < t - tol));
    times.push(0.0);
    times.push(t);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() <= tol);

    let opts = FrozenOptions {
        tilt: [tilt.unwrap_or(0.0), 0.0],
        stretch: epsilon,
        ..Default::default()
    };
    let mut out = Vec::new();
    let mut u = u0.clone();
    let mut snap_iter = snaps.iter().peekable();
    if let Some(&&s0) = snap_iter.peek() {
        if s0 <= tol {
            out.push((s0, u.clone()));
            snap_iter.next();
        }
    }
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let step = ((t0 + tol) / interval) as usize;
        let xi: Vec<f64> = (0..field.m()).map(|i| field.value(i, step)).collect();
        if xi.iter().any(|v| v.abs() > 1e-300) {
            u = solve_frozen_opts(spec, &xi, scale, &u, t1 - t0, &opts)?.0;
        }
        let is_snap = snap_iter.peek().is_some_and(|&&s| (s - t1).abs() <= tol);
        if is_snap {
            out.push((*snap_iter.next().unwrap(), u.clone()));
        }
    }
    if out.is_empty() || (out.last().unwrap().0 - t).abs() > tol {
        out.push((t, u));
    }
    Ok(out)
}

/// Solve `u_t + eps^{-gamma} sum_i H^i(Du, x/eps) X^i_k = 0` over the scaled
/// unit intervals of the field.
pub fn solve_scaled(
    epsilon: f64,
    gamma: f64,
    spec: &HamiltonianSpec,
    field: &StepField,
    u0: &GridFunction,
    t: f64,
    n_snapshots: usize,
) -> Result<Vec<(f64, GridFunction)>> {
    validate_scaled(epsilon, gamma, spec, field, u0, t)?;
    let snaps = snapshot_times(t, n_snapshots);
    solve_field(spec, field, epsilon, gamma, u0, t, &snaps, None)
}

/// Rescaled solve with affine data `u0 = p0 x` for a spec whose spatial
/// factors all share the period of the torus. The solution splits as
/// `u(x, t) = p0 x + w(x, t)` with `w` periodic of period `epsilon`, so one
/// stretched cell carries the whole line.
#[derive(Clone, Debug)]
pub struct AffineScaledSolve {
    pub p0: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Snapshots of the periodic remainder `w` on `[0, epsilon)`.
    pub snapshots: Vec<(f64, GridFunction)>,
}

impl AffineScaledSolve {
    /// Full solution value at a cell node.
    pub fn value(&self, snapshot: usize, node: usize) -> f64 {
        let (_, w) = &self.snapshots[snapshot];
        self.p0 * w.x0(node) + w.values[node]
    }
}

pub fn solve_scaled_affine(
    epsilon: f64,
    gamma: f64,
    spec: &HamiltonianSpec,
    field: &StepField,
    p0: f64,
    n_cell: usize,
    t: f64,
    n_snapshots: usize,
) -> Result<AffineScaledSolve> {
    if n_cell < 64 {
        return Err(Error::invalid("cell grid needs at least 64 nodes"));
    }
    let w0 = GridFunction::line(
        0.0,
        epsilon / n_cell as f64,
        n_cell,
        crate::hjsolver::Boundary::Periodic,
        |_| 0.0,
    );
    validate_scaled(epsilon, gamma, spec, field, &w0, t)?;
    let snaps = snapshot_times(t, n_snapshots);
    let snapshots = solve_field(spec, field, epsilon, gamma, &w0, t, &snaps, Some(p0))?;
    Ok(AffineScaledSolve { p0, epsilon, gamma, snapshots })
}

/// Measured sup gap between two driven solves versus the growth-envelope
/// stability bound
/// `|u01 - u02| + upper(L) max|z1 - z2| + lower(0)_- (max|z1 - z2| - (z1(T) - z2(T)))`.
///
/// The bound belongs to the convention `u_t = H(Du, y) dzeta`, so the
/// forward solver (which advances `u_t + H dzeta = 0`) is driven by the
/// negated paths.
pub fn stability_gap(
    spec: &HamiltonianSpec,
    u0: &GridFunction,
    zeta1: &PiecewisePath,
    zeta2: &PiecewisePath,
    t: f64,
) -> Result<(f64, f64)> {
    let envelopes = spec
        .envelopes
        .as_ref()
        .ok_or_else(|| Error::invalid("stability bound needs recorded growth envelopes"))?;
    if spec.m != 1 {
        return Err(Error::invalid("stability comparison drives a single noise component"));
    }
    let snaps = snapshot_times(t, 16);
    let solve = |z: &PiecewisePath| -> Result<Vec<(f64, GridFunction)>> {
        solve_paths(spec, &[z.negate()], u0, t, &snaps)
    };
    let run1 = solve(zeta1)?;
    let run2 = solve(zeta2)?;
    let measured = run1
        .iter()
        .zip(&run2)
        .map(|((_, a), (_, b))| a.sup_dist(b))
        .fold(0.0, f64::max);

    let l = u0.max_grad();
    let m = zeta1.sup_dist(zeta2);
    let nu_upper_l = envelopes.upper.eval(l);
    let nu_lower_0_neg = (-envelopes.lower.eval(0.0)).max(0.0);
    let end_gap = zeta1.value(t) - zeta2.value(t);
    let bound = nu_upper_l * m + nu_lower_0_neg * (m - end_gap);
    Ok((measured, bound))
}

/// Post-solve Lipschitz ceiling `lower^{-1}(upper(L))` from the recorded
/// envelopes.
pub fn lipschitz_ceiling(spec: &HamiltonianSpec, l: f64) -> Result<f64> {
    let envelopes = spec
        .envelopes
        .as_ref()
        .ok_or_else(|| Error::invalid("Lipschitz ceiling needs recorded growth envelopes"))?;
    Ok(envelopes.lower.inverse(envelopes.upper.eval(l)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{GradPart, GrowthEnvelope, ScalarFunction};
    use crate::hjsolver::Boundary;
    use approx::assert_abs_diff_eq;

    fn abs_spec() -> HamiltonianSpec {
        HamiltonianSpec::x_independent(ScalarFunction::AbsValue).unwrap()
    }

    fn line_grid(n: usize, half: f64, f: impl Fn(f64) -> f64) -> GridFunction {
        let dx = 2.0 * half / (n - 1) as f64;
        GridFunction::line(-half, dx, n, Boundary::LipschitzExtend { slope_bound: 2.0 }, f)
    }

    #[test]
    fn constant_path_is_identity() {
        let u0 = line_grid(101, 1.0, |x| x.abs());
        let path = PiecewisePath::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let problem = PathwiseProblem {
            spec: abs_spec(),
            drivers: Drivers::Paths(vec![path]),
            u0: u0.clone(),
            horizon: 1.0,
        };
        let snaps = solve_pathwise(&problem, 4).unwrap();
        assert_eq!(snaps.len(), 5);
        for (_, u) in &snaps {
            assert_eq!(u.sup_dist(&u0), 0.0);
        }
    }

    #[test]
    fn affine_data_tracks_path_exactly() {
        let p = 0.6;
        let u0 = line_grid(81, 1.0, |x| p * x);
        let path =
            PiecewisePath::new(vec![0.0, 0.3, 0.7, 1.0], vec![0.0, 0.5, -0.2, 0.1]).unwrap();
        let problem = PathwiseProblem {
            spec: abs_spec(),
            drivers: Drivers::Paths(vec![path.clone()]),
            u0: u0.clone(),
            horizon: 1.0,
        };
        let snaps = solve_pathwise(&problem, 10).unwrap();
        for (t, u) in &snaps {
            for i in 0..u0.n[0] {
                let exact = p * u0.x0(i) - p.abs() * path.value(*t);
                assert_abs_diff_eq!(u.values[i], exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zigzag_path_flattens_peak_versus_straight() {
        let u0 = line_grid(201, 2.0, |x| -x.abs());
        let up_down = PiecewisePath::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.6, 0.2]).unwrap();
        let straight = PiecewisePath::new(vec![0.0, 1.0], vec![0.0, 0.2]).unwrap();
        let solve = |z: PiecewisePath| {
            let problem = PathwiseProblem {
                spec: abs_spec(),
                drivers: Drivers::Paths(vec![z]),
                u0: u0.clone(),
                horizon: 1.0,
            };
            solve_pathwise(&problem, 1).unwrap().pop().unwrap().1
        };
        let wiggled = solve(up_down);
        let direct = solve(straight);
        // Same path endpoint, different histories: the excursion clips the
        // peak irreversibly. Exact envelopes: -max(|x| - 0.4, 0) - 0.6
        // against -(|x| + 0.2).
        for i in 0..u0.n[0] {
            let x = u0.x0(i);
            assert_abs_diff_eq!(wiggled.values[i], -(x.abs() - 0.4).max(0.0) - 0.6, epsilon = 1e-10);
            assert_abs_diff_eq!(direct.values[i], -(x.abs() + 0.2), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(wiggled.sup_dist(&direct), 0.4, epsilon = 1e-10);
    }

    #[test]
    fn simultaneous_continuous_paths_rejected() {
        let spec = HamiltonianSpec::two_noise_eikonal(ScalarFunction::Sawtooth { s: 0.5 }).unwrap();
        let u0 = line_grid(101, 1.0, |x| x.abs());
        let z1 = PiecewisePath::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let z2 = PiecewisePath::new(vec![0.0, 1.0], vec![0.0, -1.0]).unwrap();
        let problem = PathwiseProblem {
            spec,
            drivers: Drivers::Paths(vec![z1, z2]),
            u0,
            horizon: 1.0,
        };
        assert!(matches!(solve_pathwise(&problem, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn staggered_components_are_solved() {
        // Two components moving on disjoint intervals: supported.
        let spec = HamiltonianSpec::two_noise_eikonal(ScalarFunction::Constant { c: 0.5 }).unwrap();
        let u0 = line_grid(101, 1.0, |x| 0.3 * x);
        let z1 = PiecewisePath::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.4, 0.4]).unwrap();
        let z2 = PiecewisePath::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 0.8]).unwrap();
        let problem = PathwiseProblem {
            spec,
            drivers: Drivers::Paths(vec![z1, z2]),
            u0: u0.clone(),
            horizon: 1.0,
        };
        let (_, end) = solve_pathwise(&problem, 1).unwrap().pop().unwrap();
        // Affine data: u = 0.3 x - |0.3| z1(t) - 0.5 z2(t).
        for i in 0..u0.n[0] {
            let exact = 0.3 * u0.x0(i) - 0.3 * 0.4 - 0.5 * 0.8;
            assert_abs_diff_eq!(end.values[i], exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaled_validation_reports_requirements() {
        let spec = abs_spec();
        let field = StepField::rademacher(1, 4, 7).unwrap();
        let u_coarse = line_grid(65, 1.0, |x| x.abs());
        let err = solve_scaled(0.25, 0.5, &spec, &field, &u_coarse, 1.0, 1).unwrap_err();
        assert!(err.to_string().contains("dx"), "unexpected: {err}");

        let dx_fine = 0.25 / 64.0;
        let n_fine = (2.0 / dx_fine) as usize + 1;
        let u_fine = GridFunction::line(-1.0, dx_fine, n_fine, Boundary::LipschitzExtend { slope_bound: 1.0 }, |x| x.abs());
        // interval = eps^{2 gamma} = 1/4; covering T = 2 needs 8 steps.
        let err = solve_scaled(0.25, 0.5, &spec, &field, &u_fine, 2.0, 1).unwrap_err();
        assert!(err.to_string().contains('8'), "unexpected: {err}");
    }

    #[test]
    fn zero_field_keeps_data() {
        let spec = abs_spec();
        let field = StepField::from_components(vec![vec![0.0; 8]]).unwrap();
        let u0 = line_grid(129, 1.0, |x| x.abs());
        let snaps = solve_scaled(1.0, 0.5, &spec, &field, &u0, 2.0, 2).unwrap();
        for (_, u) in snaps {
            assert_eq!(u.sup_dist(&u0), 0.0);
        }
    }

    #[test]
    fn scaled_affine_matches_rescaled_path() {
        let spec = abs_spec();
        let field = StepField::rademacher(1, 64, 123).unwrap();
        let (epsilon, gamma, p0, t) = (0.25, 0.5, 0.8, 2.0);
        let run = solve_scaled_affine(epsilon, gamma, &spec, &field, p0, 64, t, 8).unwrap();
        let path = field.rescale(0, epsilon, gamma).unwrap();
        for (k, (time, w)) in run.snapshots.iter().enumerate() {
            let exact_w = -p0.abs() * path.value(*time);
            for i in 0..w.n[0] {
                assert_abs_diff_eq!(w.values[i], exact_w, epsilon = 1e-10);
            }
            assert_abs_diff_eq!(run.value(k, 0), exact_w, epsilon = 1e-10);
        }
    }

    #[test]
    fn tilted_periodic_solve_reduces_to_single_cell() {
        // The periodic remainder of an affine rescaled solve repeats with the
        // fast period, so one stretched cell reproduces a four-cell window
        // node for node.
        let spec = HamiltonianSpec::two_noise_eikonal(ScalarFunction::Sawtooth { s: 0.5 }).unwrap();
        let (epsilon, p0) = (0.25, 0.7);
        let scale = 2.0;
        let opts = FrozenOptions { tilt: [p0, 0.0], stretch: epsilon, ..Default::default() };
        let dx = epsilon / 64.0;
        let mut big = GridFunction::line(0.0, dx, 256, Boundary::Periodic, |_| 0.0);
        let mut cell = GridFunction::line(0.0, dx, 64, Boundary::Periodic, |_| 0.0);
        for xi in [[1.0, -1.0], [-1.0, 1.0]] {
            big = solve_frozen_opts(&spec, &xi, scale, &big, epsilon, &opts).unwrap().0;
            cell = solve_frozen_opts(&spec, &xi, scale, &cell, epsilon, &opts).unwrap().0;
        }
        assert!(cell.max_abs() > 1e-3, "forcing should move the remainder");
        for i in 0..big.n[0] {
            assert_abs_diff_eq!(big.values[i], cell.values[i % 64], epsilon = 1e-12);
        }
    }

    #[test]
    fn stability_gap_drift_and_validation() {
        let spec = HamiltonianSpec::x_independent(ScalarFunction::HalfSquare).unwrap();
        let u0 = line_grid(161, 2.0, |x| 0.5 * x);
        let z1 = PiecewisePath::new(vec![0.0, 1.0], vec![0.0, 0.4]).unwrap();
        let z2 = PiecewisePath::new(vec![0.0, 1.0], vec![0.0, 0.6]).unwrap();
        assert!(stability_gap(&spec, &u0, &z1, &z2, 1.0).is_err());

        let spec = spec.with_envelopes(
            GrowthEnvelope { coef: 0.5, exponent: 2.0, offset: 0.0 },
            GrowthEnvelope { coef: 0.5, exponent: 2.0, offset: 0.0 },
        );
        let (measured, bound) = stability_gap(&spec, &u0, &z1, &z2, 1.0).unwrap();
        // Affine data: measured = H(0.5) * 0.2 = 0.125 * 0.2.
        assert_abs_diff_eq!(measured, 0.025, epsilon = 1e-12);
        // Bound: upper(0.5) * 0.2 = 0.125 * 0.2 (envelopes tight here).
        assert!(measured <= bound + 1e-12);
        assert_abs_diff_eq!(bound, 0.025, epsilon = 1e-12);

        let (same, bound0) = stability_gap(&spec, &u0, &z1, &z1, 1.0).unwrap();
        assert_eq!(same, 0.0);
        assert_abs_diff_eq!(bound0, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn stability_gap_spatial_spec_bound_holds() {
        let spec = HamiltonianSpec::new(
            1,
            1,
            vec![
                crate::hamiltonians::Term {
                    coeff: 1.0,
                    grad: GradPart::Fn(ScalarFunction::HalfSquare),
                    spatial: None,
                    noise: 0,
                },
                crate::hamiltonians::Term {
                    coeff: 1.0,
                    grad: GradPart::One,
                    spatial: Some(ScalarFunction::Sawtooth { s: 0.5 }),
                    noise: 0,
                },
            ],
        )
        .unwrap()
        .with_envelopes(
            GrowthEnvelope { coef: 0.5, exponent: 2.0, offset: 0.0 },
            GrowthEnvelope { coef: 0.5, exponent: 2.0, offset: 1.0 },
        );
        let u0 = GridFunction::torus_line(256, |x| 0.25 * (2.0 * std::f64::consts::PI * x).sin());
        let z1 = PiecewisePath::new(vec![0.0, 0.4, 1.0], vec![0.0, 0.3, 0.1]).unwrap();
        let z2 = PiecewisePath::new(vec![0.0, 0.6, 1.0], vec![0.0, -0.2, 0.2]).unwrap();
        let (measured, bound) = stability_gap(&spec, &u0, &z1, &z2, 1.0).unwrap();
        let scheme_slack = 8.0 * (1.0 / 256.0);
        assert!(
            measured <= bound + scheme_slack,
            "measured {measured} vs bound {bound}"
        );
    }

    #[test]
    fn lipschitz_ceiling_matches_envelopes() {
        let spec = abs_spec().with_envelopes(
            GrowthEnvelope { coef: 1.0, exponent: 1.0, offset: 0.0 },
            GrowthEnvelope { coef: 1.0, exponent: 1.0, offset: 1.0 },
        );
        // lower^{-1}(upper(L)) = L + 1 for these envelopes.
        assert_abs_diff_eq!(lipschitz_ceiling(&spec, 2.0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn problem_json_round_trip() {
        let u0 = line_grid(33, 1.0, |x| x.abs());
        let path = PiecewisePath::new(vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
        let problem = PathwiseProblem {
            spec: abs_spec(),
            drivers: Drivers::Paths(vec![path]),
            u0,
            horizon: 1.0,
        };
        let text = problem.to_json().unwrap();
        let back = PathwiseProblem::from_json(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.u0.n[0], 33);
        assert_abs_diff_eq!(back.horizon, 1.0);
    }
}
