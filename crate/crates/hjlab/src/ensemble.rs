//! Monte Carlo layer: Brownian drivers, splitting schemes for the limit
//! dynamics, the intermediate piecewise-frozen equation, and the sampling
//! statistics (Kolmogorov-Smirnov distances, rate fits) used to compare
//! scaled solves against their limits.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::effective::{ConvexityTag, EffectiveTable, WalshDecomposition};
use crate::error::{Error, Result};
use crate::fields::{FieldLaw, PiecewisePath, StepField};
use crate::hamiltonians::{HamiltonianSpec, ScalarFunction};
use crate::hjsolver::{s_pm, Boundary, GridFunction, Sign};
use crate::pathwise::{snapshot_times, solve_scaled};

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for sample `index` of a run keyed by `master`.
fn sample_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64 + 1))
}

/// Independent standard Brownian components on `[0, t]`: Gaussian increments
/// of variance `dt` on a uniform lattice (a shorter final step covers a
/// ragged end), linearly interpolated in between.
pub fn sample_bm(dims: usize, t: f64, dt: f64, seed: u64) -> Result<Vec<PiecewisePath>> {
    if dims == 0 {
        return Err(Error::invalid("need at least one component"));
    }
    if !(dt > 0.0) || !(t >= dt) {
        return Err(Error::invalid("need 0 < dt <= t"));
    }
    let n_full = (t / dt + 1e-12).floor() as usize;
    let mut breakpoints: Vec<f64> = (0..=n_full).map(|k| k as f64 * dt).collect();
    if t - n_full as f64 * dt > 1e-12 * t {
        breakpoints.push(t);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut values = Vec::with_capacity(breakpoints.len());
        values.push(0.0);
        for w in breakpoints.windows(2) {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(values.last().unwrap() + z * (w[1] - w[0]).sqrt());
        }
        paths.push(PiecewisePath::new(breakpoints.clone(), values)?);
    }
    Ok(paths)
}

/// One-term x-independent Hamiltonian interpolating the table, with linear
/// tails matching [`EffectiveTable::eval`].
fn table_spec(table: &EffectiveTable) -> Result<HamiltonianSpec> {
    HamiltonianSpec::x_independent(ScalarFunction::SampledLine {
        x0: table.p_lo,
        dx: table.dp(),
        values: table.values.clone(),
        tail_curvature: 0.0,
    })
}

/// `(slope, intercept)` when the table is affine to grid precision.
fn affine_parts(table: &EffectiveTable) -> Option<(f64, f64)> {
    let scale = table.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let affine =
        table.values.windows(3).all(|w| (w[2] - 2.0 * w[1] + w[0]).abs() <= 1e-9 * scale);
    if !affine {
        return None;
    }
    let slope = (table.values[table.n() - 1] - table.values[0]) / (table.p_hi - table.p_lo);
    Some((slope, table.values[0] - slope * table.p_lo))
}

/// Reads the grid at `x + shift` (piecewise-linear between nodes, ghost
/// extension beyond them) and adds a constant: the exact flow of an affine
/// coefficient.
fn translate(u: &GridFunction, shift: f64, add: f64) -> GridFunction {
    let offset = shift / u.dx;
    let base = offset.floor();
    let frac = offset - base;
    let base = base as i64;
    let mut out = u.clone();
    for i in 0..u.n[0] as i64 {
        let a = u.value_ext(i + base);
        let b = u.value_ext(i + base + 1);
        out.values[i as usize] = (1.0 - frac) * a + frac * b + add;
    }
    out
}

fn check_well_posed(mask: u32, table: &EffectiveTable) -> Result<()> {
    match table.convexity {
        ConvexityTag::Convex | ConvexityTag::Concave => Ok(()),
        ConvexityTag::DifferenceOfConvex if table.split.is_some() => Ok(()),
        ConvexityTag::DifferenceOfConvex => Err(Error::invalid(format!(
            "coefficient for subset mask {mask} is neither convex nor concave and carries no difference-of-convex split"
        ))),
    }
}

/// Sorted union of the splitting lattice, the snapshot lattice, and the
/// endpoint, deduplicated to relative precision.
fn cut_times(t: f64, lattice: impl Iterator<Item = f64>, snaps: &[f64]) -> Vec<f64> {
    let mut cuts: Vec<f64> = lattice.take_while(|&c| c < t).collect();
    cuts.extend_from_slice(snaps);
    cuts.push(0.0);
    cuts.push(t);
    cuts.sort_by(f64::total_cmp);
    let tol = 1e-9 * t.max(1.0);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    cuts
}

/// Runs the limit dynamics `du = sum_j c_j(Du) dB^j` driven by one
/// piecewise-linear path per odd subset of `decomp`, in mask order.
///
/// Lie splitting: time is cut at multiples of `dt_split` and at snapshot
/// times; on each window the subsets act one after another, each through the
/// exact one-path flow for its own increment `d` (the backward semigroup for
/// `d >= 0`, the forward one for `d < 0`, both for duration `|d|`). Affine
/// coefficients translate the grid directly; convex and concave ones go
/// through the Hopf-Lax route, anything else through the monotone scheme.
/// Refining `dt_split` converges by continuity of the flow in the path.
pub fn solve_effective_spde(
    decomp: &WalshDecomposition,
    paths: &[PiecewisePath],
    u0: &GridFunction,
    t: f64,
    dt_split: f64,
    n_snapshots: usize,
) -> Result<Vec<(f64, GridFunction)>> {
    if u0.dim != 1 {
        return Err(Error::Unsupported("the splitting solver is one-dimensional".into()));
    }
    if paths.len() != decomp.odd.len() {
        return Err(Error::invalid(format!(
            "need one driving path per odd subset: {} subsets, {} paths",
            decomp.odd.len(),
            paths.len()
        )));
    }
    if !(dt_split > 0.0) || !(t >= 0.0) {
        return Err(Error::invalid("need dt_split > 0 and t >= 0"));
    }
    for path in paths {
        if path.t_end() < t - 1e-12 * t.max(1.0) {
            return Err(Error::invalid("a driving path ends before the horizon"));
        }
    }
    let mut flows = Vec::with_capacity(decomp.odd.len());
    for (mask, table) in &decomp.odd {
        check_well_posed(*mask, table)?;
        flows.push(match affine_parts(table) {
            Some(parts) => (Some(parts), None),
            None => (None, Some(table_spec(table)?)),
        });
    }
    let snaps = snapshot_times(t, n_snapshots);
    let cuts = cut_times(t, (1..).map(|k| k as f64 * dt_split), &snaps);
    let tol = 1e-9 * t.max(1.0);

    let mut u = u0.clone();
    let mut out = Vec::with_capacity(snaps.len());
    let mut si = 0;
    while si < snaps.len() && snaps[si] <= tol {
        out.push((snaps[si], u.clone()));
        si += 1;
    }
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        for (k, (affine, spec)) in flows.iter().enumerate() {
            let d = paths[k].value(t1) - paths[k].value(t0);
            if d == 0.0 {
                continue;
            }
            u = match (affine, spec) {
                (Some((slope, intercept)), _) => translate(&u, slope * d, intercept * d),
                (None, Some(spec)) => {
                    let (sign, dur) = if d > 0.0 { (Sign::Minus, d) } else { (Sign::Plus, -d) };
                    s_pm(spec, &[1.0], sign, dur, &u)?.0
                }
                (None, None) => unreachable!(),
            };
        }
        while si < snaps.len() && snaps[si] <= t1 + tol {
            out.push((snaps[si], u.clone()));
            si += 1;
        }
    }
    while si < snaps.len() {
        out.push((snaps[si], u.clone()));
        si += 1;
    }
    Ok(out)
}

/// Solves `v_t + sum_j c_j(Dv) d/dt[zeta^{j,eps}] = 0` for the rescaled
/// drivers of `field`. On each scaled unit interval the driver slopes are
/// constant, so the frozen coefficient `p -> sum_j c_j(p) X^j_k` acts as an
/// x-independent Hamiltonian for duration `eps^-gamma *` (interval overlap),
/// solved exactly by Hopf-Lax when convex or concave and by the monotone
/// scheme otherwise.
pub fn solve_intermediate(
    decomp: &WalshDecomposition,
    field: &StepField,
    epsilon: f64,
    gamma: f64,
    u0: &GridFunction,
    t: f64,
    n_snapshots: usize,
) -> Result<Vec<(f64, GridFunction)>> {
    if u0.dim != 1 {
        return Err(Error::Unsupported("the splitting solver is one-dimensional".into()));
    }
    if !(0.0 < epsilon && epsilon <= 1.0) || !(gamma > 0.0) {
        return Err(Error::invalid("need 0 < epsilon <= 1 and gamma > 0"));
    }
    if field.m() != decomp.m {
        return Err(Error::invalid(format!(
            "field has {} components, decomposition needs {}",
            field.m(),
            decomp.m
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
    let grid = &decomp.odd[0].1;
    let (grad_lo, grad_hi) = u0.grad_range();
    if grad_lo < grid.p_lo - 1e-9 || grad_hi > grid.p_hi + 1e-9 {
        return Err(Error::invalid(format!(
            "decomposition window [{}, {}] does not cover the gradient range [{grad_lo}, {grad_hi}]",
            grid.p_lo, grid.p_hi
        )));
    }
    let scale = epsilon.powf(-gamma);
    let snaps = snapshot_times(t, n_snapshots);
    let cuts = cut_times(t, (1..).map(|k| k as f64 * interval), &snaps);
    let tol = 1e-9 * t.max(1.0);

    let mut u = u0.clone();
    let mut out = Vec::with_capacity(snaps.len());
    let mut si = 0;
    while si < snaps.len() && snaps[si] <= tol {
        out.push((snaps[si], u.clone()));
        si += 1;
    }
    let mut frozen: Option<(usize, Option<HamiltonianSpec>)> = None;
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let k = ((t0 + tol) / interval).floor() as usize;
        if frozen.as_ref().map(|f| f.0) != Some(k) {
            let mut values = vec![0.0; grid.n()];
            for (mask, table) in &decomp.odd {
                let x_k: f64 =
                    (0..decomp.m).filter(|i| mask & (1 << i) != 0).map(|i| field.value(i, k)).product();
                for (v, tv) in values.iter_mut().zip(&table.values) {
                    *v += x_k * tv;
                }
            }
            let spec = if values.iter().all(|v| *v == 0.0) {
                None
            } else {
                Some(HamiltonianSpec::x_independent(ScalarFunction::SampledLine {
                    x0: grid.p_lo,
                    dx: grid.dp(),
                    values,
                    tail_curvature: 0.0,
                })?)
            };
            frozen = Some((k, spec));
        }
        if let Some((_, Some(spec))) = &frozen {
            u = s_pm(spec, &[1.0], Sign::Plus, scale * (t1 - t0), &u)?.0;
        }
        while si < snaps.len() && snaps[si] <= t1 + tol {
            out.push((snaps[si], u.clone()));
            si += 1;
        }
    }
    while si < snaps.len() {
        out.push((snaps[si], u.clone()));
        si += 1;
    }
    Ok(out)
}

/// Sup over the shared snapshot lattice of the sup distance between the
/// scaled solve and the intermediate effective solve driven by the same
/// field realization.
pub fn homog_gap(
    epsilon: f64,
    gamma: f64,
    spec: &HamiltonianSpec,
    decomp: &WalshDecomposition,
    field: &StepField,
    u0: &GridFunction,
    t: f64,
    n_snapshots: usize,
) -> Result<f64> {
    let scaled = solve_scaled(epsilon, gamma, spec, field, u0, t, n_snapshots)?;
    let intermediate = solve_intermediate(decomp, field, epsilon, gamma, u0, t, n_snapshots)?;
    Ok(scaled
        .iter()
        .zip(&intermediate)
        .map(|((_, a), (_, b))| a.sup_dist(b))
        .fold(0.0, f64::max))
}

/// One Monte Carlo experiment: the scaled equation, the law its field is
/// resampled from, and the observation horizon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub spec: HamiltonianSpec,
    pub law: FieldLaw,
    pub epsilon: f64,
    pub gamma: f64,
    pub u0: GridFunction,
    pub horizon: f64,
}

/// Gathered realizations, stored by sample index so any execution order
/// produces the same result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config_hash: u64,
    pub n: usize,
    /// Probe points `(x, t)`; x is snapped to the nearest grid node.
    pub probes: Vec<(f64, f64)>,
    /// `values[sample][probe]` = solution value at the probe.
    pub values: Vec<Vec<f64>>,
    /// `paths[sample][probe][component]` = rescaled driver at the probe time.
    pub paths: Vec<Vec<Vec<f64>>>,
    pub elapsed_seconds: f64,
}

impl EnsembleResult {
    /// One row per sample and probe: `sample, probe_x, probe_t, value,
    /// zeta_0, ..., zeta_{m-1}`. The leading `# {json}` line carries the
    /// identifying data but no timings, so reruns are byte-identical.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let m = self.paths.first().and_then(|s| s.first()).map_or(0, Vec::len);
        let header = serde_json::json!({
            "kind": "ensemble",
            "config_hash": self.config_hash,
            "n": self.n,
            "probes": self.probes,
        });
        writeln!(out, "# {header}")?;
        let mut w = csv::Writer::from_writer(out);
        let mut names = vec!["sample".to_string(), "probe_x".into(), "probe_t".into(), "value".into()];
        names.extend((0..m).map(|i| format!("zeta_{i}")));
        w.write_record(&names)?;
        for (sample, (vals, zetas)) in self.values.iter().zip(&self.paths).enumerate() {
            for (probe, value) in vals.iter().enumerate() {
                let (x, t) = self.probes[probe];
                let mut row = vec![
                    sample.to_string(),
                    format!("{x:.17e}"),
                    format!("{t:.17e}"),
                    format!("{value:.17e}"),
                ];
                row.extend(zetas[probe].iter().map(|z| format!("{z:.17e}")));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Nearest grid node to `x`, wrapping on tori and clamping on lines.
fn probe_node(u: &GridFunction, x: f64) -> usize {
    let raw = ((x - u.origin[0]) / u.dx).round() as i64;
    let n = u.n[0] as i64;
    let idx = match u.boundary {
        Boundary::Periodic => raw.rem_euclid(n),
        Boundary::LipschitzExtend { .. } => raw.clamp(0, n - 1),
    };
    idx as usize
}

/// Smallest uniform snapshot lattice containing every probe time.
fn snapshot_lattice(probes: &[(f64, f64)], horizon: f64) -> Result<usize> {
    'next: for n in 1..=4096usize {
        for &(_, tp) in probes {
            let j = (tp / horizon * n as f64).round();
            if (tp - j * horizon / n as f64).abs() > 1e-9 * horizon {
                continue 'next;
            }
        }
        return Ok(n);
    }
    Err(Error::invalid(
        "probe times must sit on a shared uniform lattice of at most 4096 snapshots",
    ))
}

/// Runs `n` independent realizations of the scaled problem, gathering probe
/// values and rescaled driver summaries by sample index. Sample `i` draws
/// its field from a seed mixed out of `(master_seed, i)`, so the result is
/// reproducible and independent of scheduling.
pub fn run_ensemble(
    config: &EnsembleConfig,
    n: usize,
    master_seed: u64,
    probes: &[(f64, f64)],
) -> Result<EnsembleResult> {
    let started = std::time::Instant::now();
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if probes.is_empty() {
        return Err(Error::invalid("need at least one probe"));
    }
    let horizon = config.horizon;
    if !(horizon > 0.0) {
        return Err(Error::invalid("need a positive horizon"));
    }
    let u0 = &config.u0;
    let span = (u0.n[0] - 1) as f64 * u0.dx;
    for &(x, tp) in probes {
        if !(-1e-9 * horizon..=horizon * (1.0 + 1e-9)).contains(&tp) {
            return Err(Error::invalid(format!("probe time {tp} outside [0, {horizon}]")));
        }
        if matches!(u0.boundary, Boundary::LipschitzExtend { .. })
            && !(u0.origin[0] - 0.5 * u0.dx..=u0.origin[0] + span + 0.5 * u0.dx).contains(&x)
        {
            return Err(Error::invalid(format!("probe point {x} outside the grid")));
        }
    }
    if !(0.0 < config.epsilon && config.epsilon <= 1.0) || !(config.gamma > 0.0) {
        return Err(Error::invalid("need 0 < epsilon <= 1 and gamma > 0"));
    }
    let interval = config.epsilon.powf(2.0 * config.gamma);
    let n_steps = ((horizon / interval).ceil() as usize).max(1);
    let budget = n as f64 * u0.values.len() as f64 * n_steps as f64;
    if budget > 1e9 {
        return Err(Error::TooLarge(format!(
            "ensemble needs about {budget:.2e} node-intervals (samples x nodes x scaled intervals); the guard refuses beyond 1e9"
        )));
    }
    let n_snaps = snapshot_lattice(probes, horizon)?;
    let m = config.spec.m;

    let rows = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            let seed = sample_seed(master_seed, i);
            let field = match &config.law {
                FieldLaw::Rademacher => StepField::rademacher(m, n_steps, seed)?,
                FieldLaw::CorrelatedPair { a, b } => {
                    StepField::correlated_pair(*a, *b, n_steps, seed)?
                }
                FieldLaw::Custom => {
                    return Err(Error::invalid("custom field laws cannot be resampled"))
                }
            };
            let snaps = solve_scaled(
                config.epsilon,
                config.gamma,
                &config.spec,
                &field,
                u0,
                horizon,
                n_snaps,
            )?;
            let rescaled = (0..m)
                .map(|c| field.rescale(c, config.epsilon, config.gamma))
                .collect::<Result<Vec<_>>>()?;
            let mut vals = Vec::with_capacity(probes.len());
            let mut zetas = Vec::with_capacity(probes.len());
            for &(x, tp) in probes {
                let j = (tp / horizon * n_snaps as f64).round() as usize;
                let (_, u) = &snaps[j];
                vals.push(u.values[probe_node(u, x)]);
                zetas.push(rescaled.iter().map(|p| p.value(tp)).collect());
            }
            Ok((vals, zetas))
        })
        .collect::<Result<Vec<_>>>()?;

    let (values, paths): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Internal("a sample produced a non-finite probe value".into()));
    }
    let mut hasher = DefaultHasher::new();
    serde_json::to_string(config)?.hash(&mut hasher);
    Ok(EnsembleResult {
        config_hash: hasher.finish(),
        n,
        probes: probes.to_vec(),
        values,
        paths,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Two-sample Kolmogorov-Smirnov distance between empirical laws.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("the KS distance needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("the KS distance needs finite samples"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample Kolmogorov-Smirnov distance against a reference CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("the KS distance needs a nonempty sample"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("the KS distance needs finite samples"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Least-squares exponent of `error ~ C * epsilon^q` in log-log coordinates,
/// together with the r-squared of the fit.
pub fn rate_fit(epsilons: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if epsilons.len() != errors.len() || epsilons.len() < 3 {
        return Err(Error::invalid("the rate fit needs matching lists of at least three points"));
    }
    if epsilons.iter().chain(errors).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("the rate fit needs positive finite epsilons and errors"));
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("the rate fit needs at least two distinct epsilons"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy <= 1e-30 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, r_squared))
}
