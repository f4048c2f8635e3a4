//! The `verify` command: randomized batteries for the structural properties
//! the solvers are built on. Each suite draws its own deterministic RNG
//! stream from the run seed, so a failure replays exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use hjlab::effective::{effective_sawtooth, thresholds, verify_corrector};
use hjlab::hamiltonians::{
    GradPart, GrowthEnvelope, HamiltonianSpec, NonconvexF, ScalarFunction, Term,
};
use hjlab::hjsolver::{action_l, hopf_lax, s_pm, GridFunction, Sign};
use hjlab::pathwise::lipschitz_ceiling;

use crate::config::VerifyConfig;
use crate::out::RunContext;
use crate::{CResult, CliError};

pub const SUITES: [&str; 6] =
    ["contraction", "monotonicity", "lipschitz", "hopflax", "action", "appendixB"];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub suite: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest margin by which a trial approached (or crossed) its bound;
    /// negative means everything stayed clear.
    pub worst: f64,
    pub pass: bool,
}

pub fn run(config: &VerifyConfig, ctx: &RunContext) -> CResult<bool> {
    let seed = ctx.effective_seed(config.seed);
    ctx.echo_config("verify", Some(seed), config)?;

    let selected: Vec<&'static str> = match &ctx.suite {
        Some(name) => {
            let found = SUITES.iter().find(|s| s.eq_ignore_ascii_case(name));
            match found {
                Some(s) => vec![s],
                None => {
                    return Err(CliError::Config(format!(
                        "unknown suite {name:?}; valid suites: {}",
                        SUITES.join(", ")
                    )))
                }
            }
        }
        None => SUITES.to_vec(),
    };

    let mut outcomes = Vec::new();
    let mut aborted: Option<CliError> = None;
    for (index, name) in selected.iter().enumerate() {
        // Suites get disjoint streams so adding one never reshuffles another.
        let suite_seed = seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        match run_suite(name, config, suite_seed) {
            Ok(outcome) => {
                println!(
                    "suite {:<13} {:>4} trials, {:>3} failures, worst margin {:+.3e} -> {}",
                    outcome.suite,
                    outcome.trials,
                    outcome.failures,
                    outcome.worst,
                    if outcome.pass { "ok" } else { "FAIL" }
                );
                outcomes.push(outcome);
            }
            Err(e) => {
                println!("suite {name} aborted: {e}");
                aborted = Some(e);
                break;
            }
        }
    }

    let pass = aborted.is_none() && outcomes.iter().all(|o| o.pass);
    let summary = serde_json::json!({
        "kind": "verify-summary",
        "seed": seed,
        "suites": outcomes,
        "aborted": aborted.as_ref().map(|e| e.to_string()),
        "pass": pass,
    });
    ctx.write_json("verify_summary.json", &summary)?;

    match aborted {
        Some(e) => Err(e),
        None => Ok(pass),
    }
}

fn run_suite(name: &str, config: &VerifyConfig, seed: u64) -> CResult<SuiteOutcome> {
    match name {
        "contraction" => forward_suite(config, seed, Property::Contraction),
        "monotonicity" => forward_suite(config, seed, Property::Monotonicity),
        "lipschitz" => lipschitz_suite(config, seed),
        "hopflax" => hopflax_suite(config, seed),
        "action" => action_suite(config, seed),
        "appendixB" => corrector_suite(config),
        other => Err(CliError::Config(format!("unknown suite {other:?}"))),
    }
}

/// Exact-arithmetic slack: both routes below are stepwise identities, so
/// only floating-point roundoff separates the two sides.
const EXACT_TOL: f64 = 1e-9;

/// Random trigonometric polynomial on the unit torus, Lipschitz constant a
/// few units at most.
fn random_torus(rng: &mut ChaCha12Rng, n: usize) -> GridFunction {
    let modes: Vec<(f64, f64)> = (1..=4)
        .map(|k| (rng.gen_range(-0.5..0.5) / k as f64, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    GridFunction::torus_line(n, |x| {
        modes
            .iter()
            .enumerate()
            .map(|(i, (amp, phase))| {
                amp * (std::f64::consts::TAU * (i as f64 + 1.0) * x + phase).sin()
            })
            .sum()
    })
}

/// Trial Hamiltonians. The x-independent pair dispatches to the exact
/// Hopf-Lax route; the spatial one runs the monotone scheme, and its
/// eikonal gradient part keeps the CFL step size independent of the data,
/// so two solves share their time grids and stepwise comparisons stay
/// exact.
fn forward_spec(kind: usize) -> CResult<HamiltonianSpec> {
    let spec = match kind {
        0 => HamiltonianSpec::x_independent(ScalarFunction::AbsValue)?,
        1 => HamiltonianSpec::x_independent(ScalarFunction::HalfSquare)?,
        _ => HamiltonianSpec::new(
            1,
            1,
            vec![
                Term { coeff: 1.0, grad: GradPart::Eikonal, spatial: None, noise: 0 },
                Term {
                    coeff: 1.0,
                    grad: GradPart::One,
                    spatial: Some(ScalarFunction::CosineBump),
                    noise: 0,
                },
            ],
        )?,
    };
    Ok(spec)
}

enum Property {
    Contraction,
    Monotonicity,
}

fn forward_suite(config: &VerifyConfig, seed: u64, property: Property) -> CResult<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..config.trials {
        let n = 96 + 32 * (trial % 3);
        let spec = forward_spec(trial % 3)?;
        let sign = if trial % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let tau = rng.gen_range(0.05..0.35);
        let u = random_torus(&mut rng, n);
        let w = random_torus(&mut rng, n);
        let mut v = u.clone();
        match property {
            Property::Contraction => {
                for (slot, extra) in v.values.iter_mut().zip(&w.values) {
                    *slot += 0.4 * extra;
                }
            }
            Property::Monotonicity => {
                for (slot, other) in v.values.iter_mut().zip(&w.values) {
                    *slot = slot.max(*other);
                }
            }
        }
        let (su, _) = s_pm(&spec, &[1.0], sign, tau, &u)?;
        let (sv, _) = s_pm(&spec, &[1.0], sign, tau, &v)?;
        let margin = match property {
            // sup |S(u) - S(v)| <= sup |u - v|.
            Property::Contraction => su.sup_dist(&sv) - u.sup_dist(&v),
            // u <= v pointwise, so S(u) <= S(v) pointwise.
            Property::Monotonicity => su
                .values
                .iter()
                .zip(&sv.values)
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max),
        };
        worst = worst.max(margin);
        if margin > EXACT_TOL {
            failures += 1;
        }
    }
    Ok(SuiteOutcome {
        suite: match property {
            Property::Contraction => "contraction",
            Property::Monotonicity => "monotonicity",
        },
        trials: config.trials,
        failures,
        worst,
        pass: failures == 0,
    })
}

fn lipschitz_suite(config: &VerifyConfig, seed: u64) -> CResult<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..config.trials {
        let n = 96 + 32 * (trial % 3);
        let kind = trial % 3;
        let spec = match kind {
            0 => forward_spec(0)?.with_envelopes(
                GrowthEnvelope { coef: 1.0, exponent: 1.0, offset: 0.0 },
                GrowthEnvelope { coef: 1.0, exponent: 1.0, offset: 0.0 },
            ),
            1 => forward_spec(1)?.with_envelopes(
                GrowthEnvelope { coef: 0.5, exponent: 2.0, offset: 0.0 },
                GrowthEnvelope { coef: 0.5, exponent: 2.0, offset: 0.0 },
            ),
            _ => forward_spec(2)?.with_envelopes(
                GrowthEnvelope { coef: 1.0, exponent: 1.0, offset: 0.0 },
                GrowthEnvelope { coef: 1.0, exponent: 1.0, offset: 1.0 },
            ),
        };
        // The exact routes realize the ceiling to roundoff; the monotone
        // scheme earns a discretization allowance.
        let slack = if kind == 2 { 0.05 } else { EXACT_TOL };
        let sign = if trial % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let tau = rng.gen_range(0.05..0.35);
        let u = random_torus(&mut rng, n);
        let ceiling = lipschitz_ceiling(&spec, u.max_grad())?;
        let (su, _) = s_pm(&spec, &[1.0], sign, tau, &u)?;
        let margin = su.max_grad() - ceiling - slack;
        worst = worst.max(margin);
        if margin > 0.0 {
            failures += 1;
        }
    }
    Ok(SuiteOutcome { suite: "lipschitz", trials: config.trials, failures, worst, pass: failures == 0 })
}

fn hopflax_suite(config: &VerifyConfig, seed: u64) -> CResult<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..config.trials {
        let n = 96 + 32 * (trial % 3);
        let f = if trial % 2 == 0 { ScalarFunction::AbsValue } else { ScalarFunction::HalfSquare };
        let sign = if (trial / 2) % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let u = random_torus(&mut rng, n);
        let t1 = rng.gen_range(0.05..0.2);
        let t2 = rng.gen_range(0.05..0.2);
        let direct = hopf_lax(&f, &u, t1 + t2, sign)?;
        let first = hopf_lax(&f, &u, t1, sign)?;
        let composed = hopf_lax(&f, &first, t2, sign)?;
        // Splitting the time re-rounds the discrete minimizer once per leg.
        let tol = 5.0 * u.dx * (1.0 + u.max_grad()) + EXACT_TOL;
        let margin = direct.sup_dist(&composed) - tol;
        worst = worst.max(margin);
        if margin > 0.0 {
            failures += 1;
        }
    }
    Ok(SuiteOutcome { suite: "hopflax", trials: config.trials, failures, worst, pass: failures == 0 })
}

fn action_suite(config: &VerifyConfig, seed: u64) -> CResult<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let quadratic = HamiltonianSpec::x_independent(ScalarFunction::HalfSquare)?;
    // Kinetic term minus a unit-size sawtooth potential: the running cost is
    // squeezed between q^2/2 and q^2/2 + 1.
    let potential = HamiltonianSpec::new(
        1,
        1,
        vec![
            Term { coeff: 1.0, grad: GradPart::Fn(ScalarFunction::HalfSquare), spatial: None, noise: 0 },
            Term {
                coeff: -1.0,
                grad: GradPart::One,
                spatial: Some(ScalarFunction::Sawtooth { s: 0.5 }),
                noise: 0,
            },
        ],
    )?;
    let mut failures = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..config.trials {
        let x = rng.gen_range(-0.9..0.9);
        let y = rng.gen_range(-0.9..0.9);
        let tau = rng.gen_range(0.5..1.0);
        let margin = if trial % 2 == 0 {
            let l = action_l(&quadratic, &[1.0], x, y, tau, 24)?;
            (l - (x - y) * (x - y) / (2.0 * tau)).abs() - 0.1
        } else {
            let l = action_l(&potential, &[1.0], x, y, tau, 24)?;
            let kinetic = tau * (x - y) * (x - y) / (2.0 * tau * tau);
            // kinetic - slack <= L <= kinetic + tau * osc(V) + slack.
            (kinetic - l).max(l - kinetic - tau) - 0.12
        };
        worst = worst.max(margin);
        if margin > 0.0 {
            failures += 1;
        }
    }
    Ok(SuiteOutcome { suite: "action", trials: config.trials, failures, worst, pass: failures == 0 })
}

/// Corrector battery: every profile over a grid of mean gradients must
/// satisfy its cell equation to quadrature accuracy, and the effective
/// value must be continuous across the layout thresholds.
fn corrector_suite(config: &VerifyConfig) -> CResult<SuiteOutcome> {
    const ODE_TOL: f64 = 1e-8;
    const MEAN_TOL: f64 = 1e-8;
    const CONTINUITY_TOL: f64 = 1e-6;
    let f: NonconvexF = config.flux.build()?;
    let mut trials = 0usize;
    let mut failures = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for &s in &config.s_values {
        let th = thresholds(&f, s)?;
        let count = config.p_count.max(2);
        let (lo, hi) = (th.p0 - 0.4, th.q_plus + 0.5);
        for j in 0..count {
            let p = lo + (hi - lo) * j as f64 / (count - 1) as f64;
            let profile = crate::commands::corrector::corrector_for(&f, s, p, th.p0)?;
            let report = verify_corrector(&profile, &f, s);
            let margin = (report.ode_residual - ODE_TOL)
                .max(report.mean_gradient_error - MEAN_TOL)
                .max(if report.jump_admissibility { f64::NEG_INFINITY } else { 1.0 });
            trials += 1;
            worst = worst.max(margin);
            if margin > 0.0 {
                failures += 1;
            }
        }
        for edge in [th.p_plus, th.q_minus, th.q1, th.q_plus] {
            for theta in [edge, -edge] {
                let below = effective_sawtooth(&f, s, theta - 1e-9)?;
                let above = effective_sawtooth(&f, s, theta + 1e-9)?;
                let margin = (below - above).abs() - CONTINUITY_TOL;
                trials += 1;
                worst = worst.max(margin);
                if margin > 0.0 {
                    failures += 1;
                }
            }
        }
    }
    Ok(SuiteOutcome { suite: "appendixB", trials, failures, worst, pass: failures == 0 })
}
