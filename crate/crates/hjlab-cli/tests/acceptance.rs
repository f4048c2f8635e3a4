//! Acceptance battery: one test per end-to-end guarantee the laboratory
//! ships with, every tolerance pinned in the test body. Each passing test
//! prints a one-line verdict with the measured margins.

use hjlab::effective::{
    ballistic_constant, cell_closed_form, cell_numeric, effective_sawtooth, pattern_tables,
    thresholds, two_noise_effective, verify_corrector, walsh_decompose, CellOptions,
    EffectiveTable, Provenance, WalshDecomposition,
};
use hjlab::ensemble::{
    homog_gap, ks_one_sample, ks_statistic, rate_fit, sample_bm, solve_effective_spde,
};
use hjlab::fields::{PiecewisePath, StepField};
use hjlab::hamiltonians::{
    GradPart, GrowthEnvelope, HamiltonianSpec, NonconvexF, ScalarFunction, Term,
};
use hjlab::hjsolver::{Boundary, GridFunction};
use hjlab::pathwise::{lipschitz_ceiling, solve_scaled, solve_scaled_affine, stability_gap};
use hjlab_cli::commands::corrector::corrector_for;
use hjlab_cli::commands::simulate::steps_needed;
use hjlab_cli::config::VerifyConfig;
use hjlab_cli::out::RunContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(seed: u64, i: u64) -> u64 {
    seed ^ (i + 1).wrapping_mul(GOLDEN)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive, matching the node
/// layout of `EffectiveTable::from_fn`.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Symmetric line grid with `x = 0` on a node; returns the grid and the
/// center node index.
fn centered_line(
    half: f64,
    dx: f64,
    slope_bound: f64,
    f: impl Fn(f64) -> f64,
) -> (GridFunction, usize) {
    let k = (half / dx).round() as usize;
    let grid = GridFunction::line(
        -(k as f64) * dx,
        dx,
        2 * k + 1,
        Boundary::LipschitzExtend { slope_bound },
        f,
    );
    (grid, k)
}

fn eikonal_plus_potential(v: ScalarFunction) -> HamiltonianSpec {
    HamiltonianSpec::new(
        1,
        1,
        vec![
            Term { coeff: 1.0, grad: GradPart::Eikonal, spatial: None, noise: 0 },
            Term { coeff: 1.0, grad: GradPart::One, spatial: Some(v), noise: 0 },
        ],
    )
    .unwrap()
}

#[test]
fn criterion_01_cell_solver_matches_closed_forms() {
    const N_CELL: usize = 512;
    let dx = 1.0 / N_CELL as f64;
    let opts = CellOptions { n: N_CELL, ..CellOptions::default() };
    let cases = [
        ("sawtooth", ScalarFunction::Sawtooth { s: 0.5 }),
        ("cosine bump", ScalarFunction::CosineBump),
    ];
    let mut worst = 0.0f64;
    for (label, f) in &cases {
        let spec = eikonal_plus_potential(f.clone());
        for p in linspace(-3.0, 3.0, 21) {
            let closed = cell_closed_form(f, p).unwrap();
            let (numeric, estimate) = cell_numeric(&spec, &[1.0], &[p], &opts).unwrap();
            let err = (numeric - closed).abs();
            let tol = (2.0 * dx).max(estimate);
            assert!(
                err <= tol,
                "{label} at p = {p}: |{numeric:.6} - {closed:.6}| = {err:.3e} > {tol:.3e}"
            );
            worst = worst.max(err);
        }
    }
    println!(
        "criterion 01 pass: long-run cell averages match the forced-eikonal closed form \
         for both potentials, worst error {worst:.2e} within max(2/{N_CELL}, estimate)"
    );
}

#[test]
fn criterion_02_walsh_cube_reproduces_two_noise_tables() {
    const TOL: f64 = 1e-10;
    const P_LO: f64 = -3.0;
    const P_HI: f64 = 3.0;
    const N: usize = 241;
    // Piecewise-linear torus profiles with the mean above and below the
    // midrange of the values, one per branch family of the pair formula.
    let cases = [
        ("mean above midrange", vec![0.0, 0.8, 1.0, 0.8]),
        ("mean below midrange", vec![0.0, 0.2, 1.0, 0.2]),
    ];
    let mut worst = 0.0f64;
    for (label, values) in &cases {
        let f = ScalarFunction::SampledTorus { values: values.clone() };
        let neg = ScalarFunction::SampledTorus { values: values.iter().map(|v| -v).collect() };
        let tables = pattern_tables(2, P_LO, P_HI, N, Provenance::CellClosedForm, |k, p| {
            let xi1 = if k & 1 != 0 { 1.0 } else { -1.0 };
            let xi2 = if k & 2 != 0 { 1.0 } else { -1.0 };
            // xi1 |p| + xi2 f = xi1 (|p| + xi1 xi2 f), and negating a
            // Hamiltonian negates its cell constant with the same corrector.
            let g = if xi1 * xi2 > 0.0 { &f } else { &neg };
            Ok(xi1 * cell_closed_form(g, p)?)
        })
        .unwrap();
        let d = walsh_decompose(2, &tables).unwrap();
        assert_eq!(d.odd.len(), 2);
        assert_eq!((d.odd[0].0, d.odd[1].0), (1, 2));
        assert!(d.even_residual < TOL, "{label}: even residual {:.3e}", d.even_residual);
        worst = worst.max(d.even_residual);
        for (i, p) in linspace(P_LO, P_HI, N).into_iter().enumerate() {
            let (h1, h2) = two_noise_effective(&f, p).unwrap();
            let e1 = (d.odd[0].1.values[i] - h1).abs();
            let e2 = (d.odd[1].1.values[i] - h2).abs();
            assert!(
                e1 < TOL && e2 < TOL,
                "{label} at p = {p}: coefficient errors {e1:.3e}, {e2:.3e}"
            );
            worst = worst.max(e1).max(e2);
        }
    }
    println!(
        "criterion 02 pass: sign-pattern cube decomposition recovers the two-noise \
         coefficient pair on both branch families, worst deviation {worst:.2e} < {TOL:.0e}"
    );
}

#[test]
fn criterion_03_sawtooth_corrector_battery() {
    const S_VALUES: [f64; 5] = [0.2, 0.35, 0.5, 0.65, 0.8];
    const P_COUNT: usize = 50;
    const ODE_TOL: f64 = 1e-8;
    const MEAN_TOL: f64 = 1e-8;
    const CONTINUITY_TOL: f64 = 1e-6;
    const N_CELL: usize = 512;
    let dx = 1.0 / N_CELL as f64;
    let opts = CellOptions { n: N_CELL, ..CellOptions::default() };
    let f = NonconvexF::new(1.0, 0.5, 0.25).unwrap();
    let mut worst_profile = 0.0f64;
    let mut worst_cell = 0.0f64;
    let mut worst_edge = 0.0f64;
    for s in S_VALUES {
        let th = thresholds(&f, s).unwrap();
        let spec = HamiltonianSpec::cell_sawtooth(f.clone(), s).unwrap();
        for p in linspace(th.p0 - 0.4, th.q_plus + 0.5, P_COUNT) {
            let profile = corrector_for(&f, s, p, th.p0).unwrap();
            let report = verify_corrector(&profile, &f, s);
            assert!(
                report.ode_residual < ODE_TOL,
                "s = {s}, p = {p:.4}: interior residual {:.3e}",
                report.ode_residual
            );
            assert!(
                report.mean_gradient_error < MEAN_TOL,
                "s = {s}, p = {p:.4}: mean gradient off by {:.3e}",
                report.mean_gradient_error
            );
            assert!(report.jump_admissibility, "s = {s}, p = {p:.4}: inadmissible gradient jump");
            worst_profile =
                worst_profile.max(report.ode_residual).max(report.mean_gradient_error);
            let closed = effective_sawtooth(&f, s, p).unwrap();
            let (numeric, estimate) = cell_numeric(&spec, &[1.0], &[p], &opts).unwrap();
            let err = (closed - numeric).abs();
            let tol = (3.0 * dx).max(estimate);
            assert!(
                err <= tol,
                "s = {s}, p = {p:.4}: |closed - numeric| = {err:.3e} > {tol:.3e}"
            );
            worst_cell = worst_cell.max(err);
        }
        for boundary in [th.p_plus, th.q_minus, th.q1, th.q_plus] {
            for edge in [boundary, -boundary] {
                let gap = (effective_sawtooth(&f, s, edge - 1e-9).unwrap()
                    - effective_sawtooth(&f, s, edge + 1e-9).unwrap())
                .abs();
                assert!(gap < CONTINUITY_TOL, "s = {s}: gap {gap:.3e} across p = {edge:.4}");
                worst_edge = worst_edge.max(gap);
            }
        }
    }
    println!(
        "criterion 03 pass: {} corrector profiles verified (worst defect {worst_profile:.2e}) \
         and matched to cell solves (worst gap {worst_cell:.2e}); case boundaries continuous \
         to {worst_edge:.2e}",
        S_VALUES.len() * P_COUNT
    );
}

#[test]
fn criterion_04_shape_parameter_sensitivity() {
    const SEPARATION: f64 = 0.01;
    const MATCH_TOL: f64 = 1e-10;
    let f = NonconvexF::new(1.0, 0.5, 0.25).unwrap();
    let rebuilt = NonconvexF::new(1.0, 0.5, 0.25).unwrap();
    let mut separation = 0.0f64;
    let mut repeat = 0.0f64;
    for p in linspace(-3.0, 3.0, 601) {
        separation = separation.max(
            (effective_sawtooth(&f, 0.3, p).unwrap() - effective_sawtooth(&f, 0.7, p).unwrap())
                .abs(),
        );
        repeat = repeat.max(
            (effective_sawtooth(&f, 0.5, p).unwrap()
                - effective_sawtooth(&rebuilt, 0.5, p).unwrap())
            .abs(),
        );
    }
    assert!(separation > SEPARATION, "sup separation {separation:.3e} <= {SEPARATION}");
    assert!(repeat < MATCH_TOL, "repeated s = 0.5 evaluation differs by {repeat:.3e}");
    println!(
        "criterion 04 pass: sup gap between the s = 0.3 and s = 0.7 effective curves \
         is {separation:.4} > {SEPARATION}; an independently rebuilt s = 0.5 curve \
         agrees to {repeat:.1e}"
    );
}

#[test]
fn criterion_05_rescaled_walk_is_approximately_gaussian() {
    const KS_TOL: f64 = 0.03;
    const N_SAMPLES: u64 = 10_000;
    const EPSILON: f64 = 0.01;
    const GAMMA: f64 = 1.0;
    const SEED: u64 = 0x05ca_11ed;
    let steps = EPSILON.powf(-2.0 * GAMMA).ceil() as usize;
    let samples: Vec<f64> = (0..N_SAMPLES)
        .into_par_iter()
        .map(|i| {
            let field = StepField::rademacher(1, steps, mix(SEED, i)).unwrap();
            field.rescale(0, EPSILON, GAMMA).unwrap().end_value()
        })
        .collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let ks = ks_one_sample(&samples, |x| normal.cdf(x)).unwrap();
    assert!(ks < KS_TOL, "KS distance {ks:.4} >= {KS_TOL}");
    println!(
        "criterion 05 pass: KS distance of the rescaled {steps}-step walk endpoint to the \
         standard normal is {ks:.4} < {KS_TOL} over {N_SAMPLES} samples"
    );
}

fn random_torus(rng: &mut ChaCha12Rng, n: usize) -> GridFunction {
    let mut coef = [[0.0f64; 2]; 4];
    for (k, c) in coef.iter_mut().enumerate() {
        *c = [rng.gen_range(-0.5..0.5) / (k + 1) as f64, rng.gen_range(0.0..TAU)];
    }
    GridFunction::torus_line(n, |x| {
        coef.iter()
            .enumerate()
            .map(|(k, c)| c[0] * (TAU * (k + 1) as f64 * x + c[1]).sin())
            .sum()
    })
}

fn random_path(rng: &mut ChaCha12Rng, t_end: f64) -> PiecewisePath {
    let segments = rng.gen_range(3..=6);
    let gaps: Vec<f64> = (0..segments).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let mut breakpoints = vec![0.0];
    let mut acc = 0.0;
    for g in &gaps {
        acc += g / total * t_end;
        breakpoints.push(acc);
    }
    // Land exactly on the horizon, clear of cumulation error.
    *breakpoints.last_mut().unwrap() = t_end;
    let mut values = vec![0.0];
    for _ in 0..segments {
        values.push(rng.gen_range(-0.5..0.5));
    }
    PiecewisePath::new(breakpoints, values).unwrap()
}

fn variation(z: &PiecewisePath) -> f64 {
    z.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[test]
fn criterion_06_path_stability_bound_holds() {
    const TRIALS: usize = 100;
    const SCHEME_FACTOR: f64 = 5.0;
    const N_TORUS: usize = 256;
    const HORIZON: f64 = 1.0;
    const SEED: u64 = 0x57ab;
    let spec = HamiltonianSpec::new(
        1,
        1,
        vec![
            Term { coeff: 1.0, grad: GradPart::Fn(ScalarFunction::HalfSquare), spatial: None, noise: 0 },
            Term {
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
    let dx = 1.0 / N_TORUS as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(SEED);
    let mut worst_ratio = f64::NEG_INFINITY;
    for trial in 0..TRIALS {
        let u0 = random_torus(&mut rng, N_TORUS);
        let z1 = random_path(&mut rng, HORIZON);
        let z2 = random_path(&mut rng, HORIZON);
        let (measured, bound) = stability_gap(&spec, &u0, &z1, &z2, HORIZON).unwrap();
        let ceiling = lipschitz_ceiling(&spec, u0.max_grad()).unwrap();
        let estimate = dx * (1.0 + ceiling) * (1.0 + variation(&z1) + variation(&z2));
        assert!(
            measured <= bound + SCHEME_FACTOR * estimate,
            "trial {trial}: measured {measured:.5} > bound {bound:.5} \
             + {SCHEME_FACTOR} x {estimate:.5}"
        );
        worst_ratio = worst_ratio.max((measured - bound) / estimate);
    }
    println!(
        "criterion 06 pass: {TRIALS} random path pairs stay within the envelope stability \
         bound; worst scheme excess {worst_ratio:.2} x estimate (allowed {SCHEME_FACTOR})"
    );
}

#[test]
fn criterion_07_homogenization_error_rate() {
    const GAMMA: f64 = 0.1;
    const EPSILONS: [f64; 4] = [0.125, 0.0625, 0.03125, 0.015625];
    const MIN_EXPONENT: f64 = 0.5;
    const HORIZON: f64 = 0.5;
    const HALF: f64 = 1.5;
    const SEED: u64 = 0x40be;
    let v = ScalarFunction::CosineBump;
    let spec = eikonal_plus_potential(v.clone());
    let table =
        EffectiveTable::from_fn(-4.0, 4.0, 801, Provenance::CellClosedForm, |p| {
            cell_closed_form(&v, p)
        })
        .unwrap();
    let decomp = WalshDecomposition { m: 1, odd: vec![(1, table)], even_residual: 0.0 };
    // One step field serves every epsilon: a single-component walk drawn
    // once only gains steps as epsilon shrinks, so the trend runs along one
    // realization instead of resampling.
    let field = StepField::rademacher(1, steps_needed(HORIZON, EPSILONS[3], GAMMA), SEED).unwrap();
    let mut gaps = Vec::new();
    for &eps in &EPSILONS {
        let (u0, _) = centered_line(HALF, eps / 64.0, 2.0 * HALF, |x| -0.5 * x * x);
        let gap = homog_gap(eps, GAMMA, &spec, &decomp, &field, &u0, HORIZON, 8).unwrap();
        println!("  epsilon {eps:.6}: oscillatory-to-effective gap {gap:.5}");
        gaps.push(gap);
    }
    let (exponent, r2) = rate_fit(&EPSILONS, &gaps).unwrap();
    assert!(
        exponent >= MIN_EXPONENT,
        "fitted exponent {exponent:.3} < {MIN_EXPONENT} (gaps {gaps:?})"
    );
    println!(
        "criterion 07 pass: oscillatory-to-effective gap shrinks like eps^{exponent:.2} \
         (r^2 {r2:.3}), at least the required eps^{MIN_EXPONENT}"
    );
}

#[test]
fn criterion_08_ballistic_drift_convergence() {
    const S: f64 = 0.3;
    const GAMMA: f64 = 0.25;
    const HORIZON: f64 = 1.0;
    const EPSILONS: [f64; 3] = [0.125, 0.0625, 0.03125];
    const N_CELL: usize = 128;
    const SEED: u64 = 0xba11;
    let f = NonconvexF::new(1.0, 0.5, 0.25).unwrap();
    let th = thresholds(&f, S).unwrap();
    let mirrored = thresholds(&f, 1.0 - S).unwrap();
    // Midpoint of the window where the two one-sided effective values
    // disagree, so the drift constant is genuinely nonzero.
    let p0 = 0.5 * (th.p_plus + mirrored.p_plus.min(th.q_minus));
    let cbar = ballistic_constant(&f, S, p0).unwrap();
    assert!(cbar.abs() > 1e-4, "drift constant {cbar:.2e} too small to observe");
    let spec = HamiltonianSpec::nonconvex_single_noise(f, S).unwrap();
    let field = StepField::rademacher(1, steps_needed(HORIZON, EPSILONS[2], GAMMA), SEED).unwrap();
    let mut errs: Vec<f64> = Vec::new();
    for &eps in &EPSILONS {
        let solve = solve_scaled_affine(eps, GAMMA, &spec, &field, p0, N_CELL, HORIZON, 16).unwrap();
        let err = solve
            .snapshots
            .iter()
            .enumerate()
            .map(|(k, (t, _))| (eps.powf(GAMMA) * solve.value(k, 0) - cbar * t).abs())
            .fold(0.0f64, f64::max);
        println!("  epsilon {eps:.5}: sup_t |rescaled u(0, t) - cbar t| = {err:.5}");
        errs.push(err);
    }
    assert!(
        errs.windows(2).all(|w| w[1] < w[0]),
        "rescaled growth errors are not strictly decreasing: {errs:?}"
    );
    println!(
        "criterion 08 pass: drift constant {cbar:.5} at p0 = {p0:.4}; rescaled growth \
         error decreases strictly across epsilon = {EPSILONS:?}"
    );
}

#[test]
fn criterion_09_value_law_converges_to_effective_spde() {
    const GAMMA: f64 = 0.2;
    const EPSILONS: [f64; 3] = [0.25, 0.125, 0.0625];
    const N_SAMPLES: u64 = 500;
    const HORIZON: f64 = 1.0;
    const DT_SPLIT: f64 = 2e-3;
    const HALF: f64 = 3.0;
    const SEED: u64 = 0xd157;
    const REF_SEED: u64 = 0x4efe;
    let f = ScalarFunction::Sawtooth { s: 0.5 };
    let spec = HamiltonianSpec::two_noise_eikonal(f.clone()).unwrap();
    let coeff1 = EffectiveTable::from_fn(-3.0, 3.0, 601, Provenance::TwoNoise, |p| {
        Ok(two_noise_effective(&f, p)?.0)
    })
    .unwrap();
    let coeff2 = EffectiveTable::from_fn(-3.0, 3.0, 601, Provenance::TwoNoise, |p| {
        Ok(two_noise_effective(&f, p)?.1)
    })
    .unwrap();
    let decomp = WalshDecomposition { m: 2, odd: vec![(1, coeff1), (2, coeff2)], even_residual: 0.0 };
    let clipped_cone = |x: f64| x.abs().min(1.0);

    let (ref_grid, ref_center) = centered_line(HALF, 1.0 / 128.0, 1.0, clipped_cone);
    let reference: Vec<f64> = (0..N_SAMPLES)
        .into_par_iter()
        .map(|i| {
            let paths = sample_bm(2, HORIZON, DT_SPLIT, mix(REF_SEED, i)).unwrap();
            let snaps =
                solve_effective_spde(&decomp, &paths, &ref_grid, HORIZON, DT_SPLIT, 1).unwrap();
            snaps.last().unwrap().1.values[ref_center]
        })
        .collect();

    let mut last = f64::INFINITY;
    let mut distances = Vec::new();
    for &eps in &EPSILONS {
        let (grid, center) = centered_line(HALF, eps / 64.0, 1.0, clipped_cone);
        let steps = steps_needed(HORIZON, eps, GAMMA);
        let values: Vec<f64> = (0..N_SAMPLES)
            .into_par_iter()
            .map(|i| {
                // Per-sample seeds shared across epsilon, so only the scale
                // varies between the three runs.
                let field = StepField::rademacher(2, steps, mix(SEED, i)).unwrap();
                let snaps = solve_scaled(eps, GAMMA, &spec, &field, &grid, HORIZON, 1).unwrap();
                snaps.last().unwrap().1.values[center]
            })
            .collect();
        let ks = ks_statistic(&values, &reference).unwrap();
        println!("  epsilon {eps:.4}: KS distance to the effective law {ks:.4}");
        assert!(
            ks < last,
            "KS distance stopped decreasing at epsilon = {eps}: {ks:.4} >= {last:.4}"
        );
        last = ks;
        distances.push(ks);
    }
    println!(
        "criterion 09 pass: value-at-origin law approaches the effective one, KS distances \
         {distances:?} decreasing over epsilon = {EPSILONS:?} with {N_SAMPLES} samples"
    );
}

#[test]
fn criterion_10_spde_solver_matches_explicit_formula() {
    const N_PATHS: u64 = 20;
    const HORIZON: f64 = 1.0;
    const DT_SPLIT: f64 = 1e-3;
    const DX: f64 = 1.0 / 128.0;
    const HALF: f64 = 4.0;
    const TOL_FACTOR: f64 = 4.0;
    const SEED: u64 = 0x8a17;
    let table = EffectiveTable::from_fn(-2.0, 2.0, 401, Provenance::Numeric, |p| Ok(p.abs()))
        .unwrap();
    let decomp = WalshDecomposition { m: 1, odd: vec![(1, table)], even_residual: 0.0 };
    let (u0, _) = centered_line(HALF, DX, 1.0, f64::abs);
    let tol = TOL_FACTOR * (DX + DT_SPLIT);
    let mut worst = 0.0f64;
    for i in 0..N_PATHS {
        let b = sample_bm(1, HORIZON, DT_SPLIT, mix(SEED, i)).unwrap().pop().unwrap();
        let snaps =
            solve_effective_spde(&decomp, std::slice::from_ref(&b), &u0, HORIZON, DT_SPLIT, 8)
                .unwrap();
        for (t, u) in &snaps {
            let level = b.value(*t);
            let running_max = b
                .breakpoints()
                .iter()
                .zip(b.values())
                .filter(|(bp, _)| **bp <= *t + 1e-12)
                .map(|(_, v)| *v)
                .fold(level, f64::max);
            for (j, val) in u.values.iter().enumerate() {
                let exact = (u.x0(j).abs() + level).max(running_max);
                let err = (val - exact).abs();
                assert!(
                    err <= tol,
                    "path {i}, t = {t:.3}, x = {:.3}: |{val:.5} - {exact:.5}| = {err:.2e} \
                     > {tol:.2e}",
                    u.x0(j)
                );
                worst = worst.max(err);
            }
        }
    }
    println!(
        "criterion 10 pass: splitting solver reproduces the cone/running-maximum formula \
         on {N_PATHS} sampled Brownian paths, worst node error {worst:.2e} within \
         {TOL_FACTOR} x (dx + dt)"
    );
}

#[test]
fn criterion_11_randomized_property_suites() {
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_verify");
    if out.exists() {
        std::fs::remove_dir_all(&out).unwrap();
    }
    let config = VerifyConfig::default();
    assert_eq!(config.trials, 200);
    let ctx = RunContext { out: out.clone(), seed: None, jobs: None, check: false, suite: None };
    let pass = hjlab_cli::commands::verify::run(&config, &ctx).unwrap();
    assert!(pass, "a property suite reported failures; see {}", out.display());
    println!(
        "criterion 11 pass: contraction, monotonicity, Lipschitz ceiling, semigroup \
         composition, action bounds, and corrector suites all green at {} randomized trials",
        config.trials
    );
}
