//! The `corrector` command: build explicit corrector profiles for the
//! sawtooth family, export their gradients, and verify each one against the
//! cell equation it claims to solve.

use hjlab::effective::{sawtooth_corrector, thresholds, CorrectorProfile, verify_corrector};
use hjlab::hamiltonians::NonconvexF;

use crate::config::CorrectorConfig;
use crate::out::{finish, RunContext};
use crate::CResult;

/// Profile for any mean gradient: direct construction where the family
/// reaches it, the `(s, p) -> (1 - s, -p)` reflection below that.
pub fn corrector_for(
    f: &NonconvexF,
    s: f64,
    p: f64,
    direct_reach: f64,
) -> CResult<CorrectorProfile> {
    if p >= direct_reach {
        Ok(sawtooth_corrector(f, s, p)?)
    } else {
        Ok(sawtooth_corrector(f, 1.0 - s, -p)?.reflect())
    }
}

pub fn run(config: &CorrectorConfig, ctx: &RunContext) -> CResult<bool> {
    ctx.echo_config("corrector", None, config)?;
    let f = config.flux.build()?;
    let mut rows: Vec<serde_json::Value> = Vec::new();
    let mut all_ok = true;

    for (i, &s) in config.s_values.iter().enumerate() {
        let th = thresholds(&f, s)?;
        let ps = match &config.p_values {
            Some(ps) => ps.clone(),
            // Default span: from below the reflection threshold to past the
            // outer plateau, hitting every layout on the way.
            None => {
                let (lo, hi) = (th.p0 - 0.5, th.q_plus + 0.5);
                let k = config.p_count.max(2);
                (0..k)
                    .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
                    .collect()
            }
        };
        for (j, &p) in ps.iter().enumerate() {
            let profile = corrector_for(&f, s, p, th.p0)?;
            let (path, mut file) = ctx.create(&format!("corrector_s{i}_p{j}.csv"))?;
            profile.write_csv(&f, s, config.samples, &mut file)?;
            finish(file)?;

            let report = verify_corrector(&profile, &f, s);
            let ok = report.ode_residual < config.tolerances.ode_residual
                && report.mean_gradient_error < config.tolerances.mean_gradient
                && report.jump_admissibility;
            all_ok &= ok;
            println!(
                "s={s:.3} p={p:+.4} regime {}: ode {:.2e} mean {:.2e} jumps {} -> {} ({})",
                profile.regime,
                report.ode_residual,
                report.mean_gradient_error,
                report.jump_admissibility,
                if ok { "ok" } else { "FAIL" },
                path.display(),
            );
            rows.push(serde_json::json!({
                "s": s,
                "p": p,
                "lambda": profile.lambda,
                "regime": profile.regime,
                "ode_residual": report.ode_residual,
                "mean_gradient_error": report.mean_gradient_error,
                "jump_admissibility": report.jump_admissibility,
                "convention": report.convention,
                "pass": ok,
            }));
        }
    }

    let report = serde_json::json!({
        "kind": "corrector-report",
        "tolerances": config.tolerances,
        "rows": rows,
        "pass": all_ok,
    });
    ctx.write_json("corrector_report.json", &report)?;
    Ok(all_ok)
}
