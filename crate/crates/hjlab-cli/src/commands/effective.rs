//! The `effective` command: tabulate effective Hamiltonians from their
//! closed forms and, with --check, re-derive a sample of values from
//! long-time cell solves and compare.

use hjlab::effective::{
    cell_closed_form, cell_numeric, effective_sawtooth, thresholds, two_noise_effective,
    CellOptions, EffectiveTable, Provenance,
};
use hjlab::hamiltonians::HamiltonianSpec;
use hjlab::hjsolver::Flux;

use crate::config::{CheckConfig, EffectiveConfig, EffectiveFamily, ModelConfig};
use crate::out::{finish, RunContext};
use crate::CResult;

pub fn run(config: &EffectiveConfig, ctx: &RunContext) -> CResult<bool> {
    ctx.echo_config("effective", None, config)?;
    let mut checks: Vec<serde_json::Value> = Vec::new();
    let mut all_ok = true;

    match &config.family {
        EffectiveFamily::EikonalCell { potential } => {
            let f = potential.build()?;
            let table = EffectiveTable::from_fn(
                config.p_lo,
                config.p_hi,
                config.n,
                Provenance::CellClosedForm,
                |p| cell_closed_form(&f, p),
            )?;
            let header = serde_json::json!({ "kind": "eikonal-cell", "potential": potential });
            write_table(ctx, "effective_table.csv", &table, &header)?;
            if ctx.check {
                let spec =
                    ModelConfig::EikonalPotential { potential: potential.clone() }.build()?;
                for p in check_grid(config) {
                    let closed = cell_closed_form(&f, p)?;
                    all_ok &= push_check(
                        &mut checks,
                        &config.check,
                        &spec,
                        &[1.0],
                        p,
                        closed,
                        2.0,
                        "eikonal-cell",
                    )?;
                }
            }
        }
        EffectiveFamily::TwoNoise { potential } => {
            let f = potential.build()?;
            for component in 1..=2usize {
                let table = EffectiveTable::from_fn(
                    config.p_lo,
                    config.p_hi,
                    config.n,
                    Provenance::TwoNoise,
                    |p| {
                        two_noise_effective(&f, p)
                            .map(|pair| if component == 1 { pair.0 } else { pair.1 })
                    },
                )?;
                let header = serde_json::json!({
                    "kind": "two-noise",
                    "component": component,
                    "potential": potential,
                });
                write_table(ctx, &format!("effective_table_{component}.csv"), &table, &header)?;
            }
            if ctx.check {
                // The pair is identified from two sign patterns:
                // H(.,.,(1,1)) = H1 + H2 and H(.,.,(1,-1)) = H1 - H2.
                let spec =
                    ModelConfig::TwoNoiseEikonal { potential: potential.clone() }.build()?;
                for p in check_grid(config) {
                    let (h1, h2) = two_noise_effective(&f, p)?;
                    all_ok &= push_check(
                        &mut checks,
                        &config.check,
                        &spec,
                        &[1.0, 1.0],
                        p,
                        h1 + h2,
                        2.0,
                        "two-noise sum",
                    )?;
                    all_ok &= push_check(
                        &mut checks,
                        &config.check,
                        &spec,
                        &[1.0, -1.0],
                        p,
                        h1 - h2,
                        2.0,
                        "two-noise difference",
                    )?;
                }
            }
        }
        EffectiveFamily::Sawtooth { s_values, flux } => {
            let f = flux.build()?;
            for (i, &s) in s_values.iter().enumerate() {
                let table = EffectiveTable::from_fn(
                    config.p_lo,
                    config.p_hi,
                    config.n,
                    Provenance::SawtoothFamily,
                    |p| effective_sawtooth(&f, s, p),
                )?;
                let header = serde_json::json!({
                    "kind": "sawtooth",
                    "s": s,
                    "flux": flux,
                    "thresholds": thresholds(&f, s)?,
                });
                write_table(ctx, &format!("effective_s{i}.csv"), &table, &header)?;
                if ctx.check {
                    let spec = HamiltonianSpec::cell_sawtooth(f.clone(), s)?;
                    for p in check_grid(config) {
                        let closed = effective_sawtooth(&f, s, p)?;
                        all_ok &= push_check(
                            &mut checks,
                            &config.check,
                            &spec,
                            &[1.0],
                            p,
                            closed,
                            3.0,
                            &format!("sawtooth s={s}"),
                        )?;
                    }
                }
            }
        }
    }

    if ctx.check {
        let report = serde_json::json!({
            "kind": "effective-check",
            "rows": checks,
            "pass": all_ok,
        });
        ctx.write_json("check_report.json", &report)?;
        println!("check report: {}", if all_ok { "pass" } else { "FAIL" });
    }
    Ok(all_ok)
}

fn write_table(
    ctx: &RunContext,
    name: &str,
    table: &EffectiveTable,
    header: &serde_json::Value,
) -> CResult<()> {
    let (path, mut file) = ctx.create(name)?;
    table.write_csv(&mut file, header)?;
    finish(file)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn check_grid(config: &EffectiveConfig) -> Vec<f64> {
    let k = config.check.points.max(2);
    (0..k)
        .map(|i| config.p_lo + (config.p_hi - config.p_lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// One closed-form vs cell-solve comparison. The tolerance is the larger of
/// the grid resolution (times `dx_factor` and the configured scale) and the
/// solver's own settling estimate.
#[allow(clippy::too_many_arguments)]
fn push_check(
    rows: &mut Vec<serde_json::Value>,
    check: &CheckConfig,
    spec: &HamiltonianSpec,
    xi: &[f64],
    p: f64,
    closed: f64,
    dx_factor: f64,
    label: &str,
) -> CResult<bool> {
    let opts = CellOptions {
        n: check.n_cell,
        t1: check.t1,
        t2: check.t2,
        settle_tol: None,
        flux: Flux::Auto,
    };
    let (numeric, estimate) = cell_numeric(spec, xi, &[p], &opts)?;
    let dx = 1.0 / check.n_cell as f64;
    let tolerance = (dx_factor * dx * check.tol_scale).max(estimate);
    let pass = (numeric - closed).abs() <= tolerance;
    println!(
        "check {label} p={p:+.3}: table {closed:.6} cell {numeric:.6} (tol {tolerance:.2e}) {}",
        if pass { "ok" } else { "FAIL" }
    );
    rows.push(serde_json::json!({
        "label": label,
        "p": p,
        "closed_form": closed,
        "cell_numeric": numeric,
        "estimate": estimate,
        "tolerance": tolerance,
        "pass": pass,
    }));
    Ok(pass)
}
