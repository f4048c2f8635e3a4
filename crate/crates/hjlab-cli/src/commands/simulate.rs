//! The `simulate` command: one realization of the rescaled problem, either
//! as full snapshot profiles (CSV plus a gnuplot-ready .dat) or as
//! ballistic-scaling probes from a single stretched cell.

use std::io::Write;

use hjlab::effective::ballistic_constant;
use hjlab::pathwise::{solve_scaled, solve_scaled_affine};

use crate::config::{ModelConfig, SimulateConfig, SimulateMode};
use crate::out::{finish, RunContext};
use crate::{CResult, CliError};

pub fn run(config: &SimulateConfig, ctx: &RunContext) -> CResult<bool> {
    let seed = ctx.effective_seed(config.seed);
    ctx.echo_config("simulate", Some(seed), config)?;
    let spec = config.model.build()?;
    let n_steps = steps_needed(config.horizon, config.epsilon, config.gamma);
    let field = config.law.field(spec.m, n_steps, seed)?;

    match config.mode {
        SimulateMode::Snapshots => {
            let (grid, data) = match (&config.grid, &config.data) {
                (Some(grid), Some(data)) => (grid, data),
                _ => {
                    return Err(CliError::Config(
                        "snapshot simulation needs grid and data blocks".into(),
                    ))
                }
            };
            let u0 = grid.build(data)?;
            let snaps = solve_scaled(
                config.epsilon,
                config.gamma,
                &spec,
                &field,
                &u0,
                config.horizon,
                config.n_snapshots,
            )?;

            let header = serde_json::json!({
                "kind": "snapshots",
                "epsilon": config.epsilon,
                "gamma": config.gamma,
                "horizon": config.horizon,
                "seed": seed,
            });
            let (csv_path, mut csv) = ctx.create("snapshots.csv")?;
            writeln!(csv, "# {header}")?;
            writeln!(csv, "t,x,value")?;
            for (t, u) in &snaps {
                for i in 0..u.n[0] {
                    writeln!(csv, "{t:.17e},{:.17e},{:.17e}", u.x0(i), u.values[i])?;
                }
            }
            finish(csv)?;

            // Gnuplot blocks: two blank lines between snapshots, so
            // `plot 'snapshots.dat' index k` picks time k.
            let (dat_path, mut dat) = ctx.create("snapshots.dat")?;
            writeln!(dat, "# {header}")?;
            for (t, u) in &snaps {
                writeln!(dat, "# t = {t:.17e}")?;
                for i in 0..u.n[0] {
                    writeln!(dat, "{:.17e} {:.17e}", u.x0(i), u.values[i])?;
                }
                writeln!(dat)?;
                writeln!(dat)?;
            }
            finish(dat)?;

            for i in 0..spec.m {
                let path = field.rescale(i, config.epsilon, config.gamma)?;
                let (_, mut file) = ctx.create(&format!("driver_path_{i}.csv"))?;
                path.write_csv(&mut file)?;
                finish(file)?;
            }
            println!(
                "wrote {} snapshots to {} and {}",
                snaps.len(),
                csv_path.display(),
                dat_path.display()
            );
        }
        SimulateMode::Ballistic { p0, n_cell } => {
            let ModelConfig::NonconvexSingleNoise { s, flux } = &config.model else {
                return Err(CliError::Config(
                    "ballistic mode needs the nonconvex single-noise model".into(),
                ));
            };
            let cbar = ballistic_constant(&flux.build()?, *s, p0)?;
            let solve = solve_scaled_affine(
                config.epsilon,
                config.gamma,
                &spec,
                &field,
                p0,
                n_cell,
                config.horizon,
                config.n_snapshots,
            )?;
            let amp = config.epsilon.powf(config.gamma);
            let header = serde_json::json!({
                "kind": "ballistic",
                "epsilon": config.epsilon,
                "gamma": config.gamma,
                "p0": p0,
                "cbar": cbar,
                "seed": seed,
            });
            let (path, mut file) = ctx.create("ballistic.csv")?;
            writeln!(file, "# {header}")?;
            writeln!(file, "t,scaled_value,drift")?;
            for (k, (t, _)) in solve.snapshots.iter().enumerate() {
                let value = amp * solve.value(k, 0);
                writeln!(file, "{t:.17e},{value:.17e},{:.17e}", cbar * t)?;
            }
            finish(file)?;
            println!("wrote ballistic probes to {} (cbar = {cbar:.6})", path.display());
        }
    }
    Ok(true)
}

/// Steps the field must cover, with one extra for the rounding boundary.
pub fn steps_needed(horizon: f64, epsilon: f64, gamma: f64) -> usize {
    let interval = epsilon.powf(2.0 * gamma);
    (horizon / interval).ceil() as usize + 1
}
