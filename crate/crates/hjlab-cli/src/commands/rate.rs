//! The `rate` command: measure an error across a list of epsilons, fit a
//! log-log slope, and optionally gate on the exponent or on monotone decay.

use std::io::Write;

use hjlab::ensemble::{homog_gap, rate_fit};
use hjlab::effective::{ballistic_constant, thresholds};
use hjlab::fields::StepField;
use hjlab::hamiltonians::HamiltonianSpec;
use hjlab::hjsolver::{Boundary, GridFunction};
use hjlab::pathwise::solve_scaled_affine;

use crate::commands::simulate::steps_needed;
use crate::config::{RateConfig, RateExperiment};
use crate::out::{finish, RunContext};
use crate::{CResult, CliError};

pub fn run(config: &RateConfig, ctx: &RunContext) -> CResult<bool> {
    let seed = ctx.effective_seed(config.seed);
    ctx.echo_config("rate", Some(seed), config)?;

    let (mut rows, extra) = match &config.experiment {
        RateExperiment::HomogGap {
            model,
            gamma,
            epsilons,
            data,
            half_width,
            slope_bound,
            horizon,
            n_snapshots,
            table_n,
            margin,
        } => {
            if epsilons.is_empty() {
                return Err(CliError::Config("the epsilon list is empty".into()));
            }
            let spec = model.build()?;
            let f = data.closure()?;
            let mut rows = Vec::new();
            let mut decomp = None;
            for &eps in epsilons {
                let span = 2.0 * half_width;
                let nodes = (span * 64.0 / eps).ceil() as usize;
                let dx = span / nodes as f64;
                let u0 = GridFunction::line(
                    -half_width,
                    dx,
                    nodes + 1,
                    Boundary::LipschitzExtend { slope_bound: *slope_bound },
                    |x| f(x),
                );
                // One decomposition serves every epsilon: the data's
                // gradient range does not depend on the grid refinement
                // beyond discretization.
                if decomp.is_none() {
                    let (glo, ghi) = u0.grad_range();
                    decomp =
                        Some(model.decomposition(glo - margin, ghi + margin, *table_n)?);
                }
                // One seed for every epsilon: a single-component field at a
                // finer scale extends the coarser one, so the trend is
                // measured along one realization where possible.
                let field =
                    StepField::rademacher(spec.m, steps_needed(*horizon, eps, *gamma), seed)?;
                let gap = homog_gap(
                    eps,
                    *gamma,
                    &spec,
                    decomp.as_ref().expect("decomposition was just built"),
                    &field,
                    &u0,
                    *horizon,
                    *n_snapshots,
                )?;
                println!("epsilon {eps:.5}: homogenization gap {gap:.6}");
                rows.push((eps, gap));
            }
            (rows, serde_json::json!({}))
        }
        RateExperiment::Ballistic {
            s,
            flux,
            p0,
            gamma,
            epsilons,
            n_cell,
            horizon,
            n_snapshots,
        } => {
            if epsilons.is_empty() {
                return Err(CliError::Config("the epsilon list is empty".into()));
            }
            let f = flux.build()?;
            let th = thresholds(&f, *s)?;
            let th_mirror = thresholds(&f, 1.0 - *s)?;
            // Default gradient: the midpoint of the window where this s
            // drifts but the mirror parameter does not, so cbar != 0.
            let p0 = p0.unwrap_or_else(|| {
                0.5 * (th.p_plus + th_mirror.p_plus.min(th.q_minus))
            });
            let cbar = ballistic_constant(&f, *s, p0)?;
            let spec = HamiltonianSpec::nonconvex_single_noise(f.clone(), *s)?;
            let mut rows = Vec::new();
            for &eps in epsilons {
                let field =
                    StepField::rademacher(1, steps_needed(*horizon, eps, *gamma), seed)?;
                let solve = solve_scaled_affine(
                    eps,
                    *gamma,
                    &spec,
                    &field,
                    p0,
                    *n_cell,
                    *horizon,
                    *n_snapshots,
                )?;
                let amp = eps.powf(*gamma);
                let err = solve
                    .snapshots
                    .iter()
                    .enumerate()
                    .map(|(k, (t, _))| (amp * solve.value(k, 0) - cbar * t).abs())
                    .fold(0.0f64, f64::max);
                println!("epsilon {eps:.5}: drift deviation {err:.6}");
                rows.push((eps, err));
            }
            (rows, serde_json::json!({ "p0": p0, "cbar": cbar }))
        }
    };

    // Coarse to fine.
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let epsilons: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = if rows.len() >= 3 {
        let (exponent, r_squared) = rate_fit(&epsilons, &errors)?;
        println!("fitted exponent {exponent:.4} (r^2 = {r_squared:.4})");
        Some((exponent, r_squared))
    } else {
        None
    };
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);

    let mut pass = true;
    if let Some(min) = config.require.min_exponent {
        let Some((exponent, _)) = fit else {
            return Err(CliError::Config(
                "an exponent requirement needs at least 3 epsilons".into(),
            ));
        };
        if exponent < min {
            println!("exponent {exponent:.4} below the required {min:.4}");
            pass = false;
        }
    }
    if config.require.monotone && !monotone {
        println!("errors do not decrease monotonically");
        pass = false;
    }

    let (csv_path, mut csv) = ctx.create("rate.csv")?;
    writeln!(csv, "# {}", serde_json::json!({ "kind": "rate", "extra": extra }))?;
    writeln!(csv, "epsilon,error")?;
    for (eps, err) in &rows {
        writeln!(csv, "{eps:.17e},{err:.17e}")?;
    }
    finish(csv)?;

    let report = serde_json::json!({
        "kind": "rate",
        "rows": rows.iter().map(|(e, v)| serde_json::json!({ "epsilon": e, "error": v })).collect::<Vec<_>>(),
        "exponent": fit.map(|f| f.0),
        "r_squared": fit.map(|f| f.1),
        "monotone": monotone,
        "extra": extra,
        "pass": pass,
    });
    ctx.write_json("rate.json", &report)?;
    println!("wrote {}", csv_path.display());
    Ok(pass)
}
