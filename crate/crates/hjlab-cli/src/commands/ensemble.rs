//! The `ensemble` command: sample many rescaled realizations, export the
//! probe values, and optionally sample the limiting equation for a
//! Kolmogorov-Smirnov comparison at each probe.

use std::io::Write;

use rayon::prelude::*;

use hjlab::ensemble::{
    ks_statistic, run_ensemble, sample_bm, solve_effective_spde, EnsembleConfig,
};
use hjlab::hjsolver::{Boundary, GridFunction};

use crate::config::EnsembleRunConfig;
use crate::out::{finish, with_pool, RunContext};
use crate::{CResult, CliError};

pub fn run(config: &EnsembleRunConfig, ctx: &RunContext) -> CResult<bool> {
    let seed = ctx.effective_seed(config.seed);
    ctx.echo_config("ensemble", Some(seed), config)?;
    let spec = config.model.build()?;
    let u0 = config.grid.build(&config.data)?;
    let probes: Vec<(f64, f64)> = config.probes.iter().map(|p| (p.x, p.t)).collect();

    let ens = EnsembleConfig {
        spec,
        law: config.law.law(),
        epsilon: config.epsilon,
        gamma: config.gamma,
        u0: u0.clone(),
        horizon: config.horizon,
    };
    let n_samples = config.n_samples;
    let result = with_pool(ctx.jobs, || run_ensemble(&ens, n_samples, seed, &probes))??;

    let (csv_path, mut csv) = ctx.create("ensemble.csv")?;
    result.write_csv(&mut csv)?;
    finish(csv)?;
    println!(
        "wrote {} samples x {} probes to {} ({:.1}s sampling)",
        result.n,
        probes.len(),
        csv_path.display(),
        result.elapsed_seconds
    );

    let probe_stats: Vec<serde_json::Value> = probes
        .iter()
        .enumerate()
        .map(|(j, &(x, t))| {
            let vals: Vec<f64> = result.values.iter().map(|row| row[j]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / vals.len() as f64;
            serde_json::json!({ "x": x, "t": t, "mean": mean, "stddev": var.sqrt() })
        })
        .collect();

    let mut summary = serde_json::json!({
        "kind": "ensemble-summary",
        "config_hash": result.config_hash,
        "n_samples": result.n,
        "probes": probe_stats,
    });

    if let Some(ref_cfg) = &config.reference {
        let decomp = {
            let (glo, ghi) = u0.grad_range();
            config.model.decomposition(
                glo - ref_cfg.margin,
                ghi + ref_cfg.margin,
                ref_cfg.table_n,
            )?
        };
        let n_ref = ref_cfg.n_samples.unwrap_or(config.n_samples);
        let lattice = probe_lattice(&probes, config.horizon)?;
        let dims = decomp.odd.len();
        let (dt_split, bm_dt, horizon) = (ref_cfg.dt_split, ref_cfg.bm_dt, config.horizon);
        // A fixed offset keeps the reference streams disjoint from the
        // ensemble's per-sample seeds.
        let base = seed ^ 0x7265_6665_7265_6e63;
        let ref_values: Vec<Vec<f64>> = with_pool(ctx.jobs, || {
            (0..n_ref)
                .into_par_iter()
                .map(|i| {
                    let paths =
                        sample_bm(dims, horizon, bm_dt, base.wrapping_add(i as u64))?;
                    let snaps = solve_effective_spde(
                        &decomp, &paths, &u0, horizon, dt_split, lattice,
                    )?;
                    probes
                        .iter()
                        .map(|&(x, t)| {
                            let k = snapshot_index(t, horizon, lattice);
                            let (_, u) = &snaps[k];
                            Ok(u.values[probe_node(u, x)?])
                        })
                        .collect::<CResult<Vec<f64>>>()
                })
                .collect::<CResult<Vec<Vec<f64>>>>()
        })??;

        let (ref_path, mut ref_csv) = ctx.create("reference.csv")?;
        writeln!(ref_csv, "sample,probe_x,probe_t,value")?;
        for (i, row) in ref_values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let (x, t) = probes[j];
                writeln!(ref_csv, "{i},{x:.17e},{t:.17e},{v:.17e}")?;
            }
        }
        finish(ref_csv)?;

        let ks_rows: Vec<serde_json::Value> = probes
            .iter()
            .enumerate()
            .map(|(j, &(x, t))| {
                let a: Vec<f64> = result.values.iter().map(|row| row[j]).collect();
                let b: Vec<f64> = ref_values.iter().map(|row| row[j]).collect();
                let ks = ks_statistic(&a, &b)?;
                println!("probe (x={x:+.3}, t={t:.3}): ks distance {ks:.4}");
                Ok(serde_json::json!({ "x": x, "t": t, "ks": ks }))
            })
            .collect::<CResult<Vec<_>>>()?;
        summary["reference"] = serde_json::json!({
            "n_samples": n_ref,
            "dt_split": ref_cfg.dt_split,
            "bm_dt": ref_cfg.bm_dt,
            "ks": ks_rows,
        });
        println!("wrote limit-equation samples to {}", ref_path.display());
    }

    ctx.write_json("summary.json", &summary)?;
    Ok(true)
}

/// Smallest snapshot count whose lattice contains every probe time.
pub fn probe_lattice(probes: &[(f64, f64)], horizon: f64) -> CResult<usize> {
    let tol = 1e-9 * horizon.max(1.0);
    'outer: for n in 1..=4096usize {
        for &(_, t) in probes {
            let k = (t / horizon * n as f64).round();
            if (t - k * horizon / n as f64).abs() > tol {
                continue 'outer;
            }
        }
        return Ok(n);
    }
    Err(CliError::Config(
        "probe times do not fit a snapshot lattice of at most 4096 intervals".into(),
    ))
}

fn snapshot_index(t: f64, horizon: f64, lattice: usize) -> usize {
    ((t / horizon * lattice as f64).round() as usize).min(lattice)
}

/// Nearest grid node, wrapping on the torus and clamping on a line.
pub fn probe_node(u: &GridFunction, x: f64) -> CResult<usize> {
    let raw = ((x - u.origin[0]) / u.dx).round() as i64;
    let n = u.n[0] as i64;
    let i = match u.boundary {
        Boundary::Periodic => raw.rem_euclid(n),
        Boundary::LipschitzExtend { .. } => {
            if raw < -1 || raw > n {
                return Err(CliError::Config(format!(
                    "probe x = {x} lies outside the solution grid"
                )));
            }
            raw.clamp(0, n - 1)
        }
    };
    Ok(i as usize)
}
