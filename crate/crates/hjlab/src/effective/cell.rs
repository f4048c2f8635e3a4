//! Effective values by long-time solves of the periodic cell problem.

use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSpec, ScalarFunction};
use crate::hjsolver::{solve_frozen_opts, Flux, FrozenOptions, GridFunction};

/// Controls for the long-time cell solve.
#[derive(Clone, Copy, Debug)]
pub struct CellOptions {
    /// Grid points per unit period.
    pub n: usize,
    /// First averaging horizon.
    pub t1: f64,
    /// Second averaging horizon; the move between the two averages is the
    /// reported error estimate.
    pub t2: f64,
    /// If set, require the two averages to agree within this.
    pub settle_tol: Option<f64>,
    pub flux: Flux,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions { n: 256, t1: 20.0, t2: 40.0, settle_tol: None, flux: Flux::Auto }
    }
}

/// Long-time average `lambda = -w(T) / T` for the periodic solve
/// `w_t + H(p + Dw, y, xi) = 0`, `w(0) = 0`, returned with the estimate
/// `|lambda(t2) - lambda(t1)|`.
///
/// The frozen Hamiltonian must escape to `+inf` or `-inf` uniformly in `y`
/// as `|p|` grows; without that the average need not settle, so the call
/// rejects such input.
pub fn cell_numeric(
    spec: &HamiltonianSpec,
    xi: &[f64],
    p: &[f64],
    opts: &CellOptions,
) -> Result<(f64, f64)> {
    if p.len() != spec.dim {
        return Err(Error::invalid(format!(
            "mean gradient has {} components, expected {}",
            p.len(),
            spec.dim
        )));
    }
    if xi.len() != spec.m {
        return Err(Error::invalid(format!(
            "driver vector has {} components, expected {}",
            xi.len(),
            spec.m
        )));
    }
    if !(opts.t1 > 0.0 && opts.t2 > opts.t1) {
        return Err(Error::invalid(format!(
            "horizons must satisfy 0 < t1 < t2, got {} and {}",
            opts.t1, opts.t2
        )));
    }
    let shape = spec.frozen_shape(xi);
    if !(shape.coercive || shape.anticoercive) {
        return Err(Error::invalid(
            "frozen Hamiltonian is neither coercive nor anti-coercive in the gradient; \
             the long-time cell average is not guaranteed to settle",
        ));
    }
    let w0 = match spec.dim {
        1 => GridFunction::torus_line(opts.n, |_| 0.0),
        2 => GridFunction::torus_plane(opts.n, |_, _| 0.0),
        d => return Err(Error::Unsupported(format!("cell solves cover dimensions 1 and 2, got {d}"))),
    };
    let fopts = FrozenOptions {
        tilt: [p[0], if spec.dim == 2 { p[1] } else { 0.0 }],
        stretch: 1.0,
        flux: opts.flux,
        safety: 0.9,
    };
    let (w1, _) = solve_frozen_opts(spec, xi, 1.0, &w0, opts.t1, &fopts)?;
    let lambda1 = -w1.mean() / opts.t1;
    let (w2, _) = solve_frozen_opts(spec, xi, 1.0, &w1, opts.t2 - opts.t1, &fopts)?;
    let lambda2 = -w2.mean() / opts.t2;
    let estimate = (lambda2 - lambda1).abs();
    if let Some(tol) = opts.settle_tol {
        if estimate > tol {
            return Err(Error::NotConverged(format!(
                "cell averages moved by {estimate:.3e} between horizons, above {tol:.3e}"
            )));
        }
    }
    Ok((lambda2, estimate))
}

/// Effective normal speed of the front equation
/// `u_t = sum_i a_i(y) |Du| xi^i` in a unit direction.
///
/// The combined speed `sum_i a_i xi^i` must keep a strict sign over the
/// period; otherwise the frozen problem degenerates and the call rejects.
pub fn effective_eikonal(
    speeds: &[ScalarFunction],
    xi: &[f64],
    direction: &[f64],
    opts: &CellOptions,
) -> Result<f64> {
    if speeds.is_empty() || speeds.len() != xi.len() {
        return Err(Error::invalid(format!(
            "{} speeds against {} driver components",
            speeds.len(),
            xi.len()
        )));
    }
    let dim = direction.len();
    if !(1..=2).contains(&dim) {
        return Err(Error::invalid(format!("direction must have 1 or 2 components, got {dim}")));
    }
    let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("direction must be a unit vector, got length {norm}")));
    }
    let spec = HamiltonianSpec::eikonal_speeds(dim, speeds.to_vec())?;
    // At a unit gradient the Hamiltonian equals the combined speed.
    let samples = 8 * opts.n.max(64);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..samples {
        let y0 = i as f64 / samples as f64;
        if dim == 1 {
            let c = spec.eval_1d(1.0, y0, xi);
            lo = lo.min(c);
            hi = hi.max(c);
        } else {
            // The 2-d speeds vary per axis; sweep a coarse transverse grid.
            for j in 0..64 {
                let y1 = j as f64 / 64.0;
                let c = spec.eval_2d([direction[0], direction[1]], [y0, y1], xi);
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
    }
    if !(lo > 0.0 || hi < 0.0) {
        return Err(Error::invalid(format!(
            "combined speed changes sign or vanishes (range [{lo}, {hi}]); \
             the front problem does not average in a fixed direction"
        )));
    }
    Ok(cell_numeric(&spec, xi, direction, opts)?.0)
}
