//! Closed-form effective Hamiltonians for the eikonal-plus-potential cell
//! problem and the sign-driven families assembled from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::ScalarFunction;

/// Effective Hamiltonian of `|p + w'| + f(y)`: the smallest level at which
/// the cell problem admits a periodic solution.
///
/// The level must clear `max f` pointwise and leave enough room for the
/// gradient to average to `p`, which forces `max{ max f, |p| + <f> }`.
pub fn cell_closed_form(f: &ScalarFunction, p: f64) -> Result<f64> {
    let (max, _, mean) = f.torus_stats()?;
    Ok(max.max(p.abs() + mean))
}

/// `max(c_max, |p| + c_mean)`: the closed form for the frozen speed-`c`
/// pattern `c (|p| + f)` when `c >= 0`, and `c (|p| - f)` reached through
/// the stats of `-f` when the driver sign is negative.
fn pattern_value(p: f64, c_max: f64, c_mean: f64) -> f64 {
    c_max.max(p.abs() + c_mean)
}

/// Effective coefficients `(H1, H2)` of the two-driver model `|Du| dB^1 +
/// f(x) dB^2`: the averages of the four sign-pattern cell values that
/// survive in the limit equation.
///
/// The piecewise form depends on which excursion of `f` around its mean is
/// larger; the two branches agree when the excursions balance.
pub fn two_noise_effective(f: &ScalarFunction, p: f64) -> Result<(f64, f64)> {
    let (max, min, mean) = f.torus_stats()?;
    let r = p.abs();
    let up = max - mean <= mean - min;
    let (h1, h2) = if up {
        if r <= max - mean {
            ((max - min) / 2.0, (max + min) / 2.0)
        } else if r <= mean - min {
            ((r + mean - min) / 2.0, (r + mean + min) / 2.0)
        } else {
            (r, mean)
        }
    } else if r <= mean - min {
        ((max - min) / 2.0, (max + min) / 2.0)
    } else if r <= max - mean {
        ((max + r - mean) / 2.0, (max - r + mean) / 2.0)
    } else {
        (r, mean)
    };
    debug_assert!({
        let m_plus = pattern_value(p, max, mean);
        let m_minus = pattern_value(p, -min, -mean);
        (h1 - (m_plus + m_minus) / 2.0).abs() < 1e-12
            && (h2 - (m_plus - m_minus) / 2.0).abs() < 1e-12
    });
    Ok((h1, h2))
}

/// Effective coefficients of the correlated four-driver model: two
/// independent sources enter through the combinations `a B + b B'` and
/// `a B - b B'`, leaving four odd coefficients in the limit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CorrelatedEffective {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h123: f64,
}

/// Evaluate the four correlated coefficients at gradient `p`.
///
/// Requires weights `0 < b <= a` normalized by `a^2 + b^2 = 2` and a
/// potential whose upper excursion is small enough that
/// `a (max f - <f>) <= b (<f> - min f)`; the five `|p|` regimes below are
/// then ordered and exhaustive.
pub fn correlated_effective(
    f: &ScalarFunction,
    a: f64,
    b: f64,
    p: f64,
) -> Result<CorrelatedEffective> {
    if !(0.0 < b && b <= a) {
        return Err(Error::invalid(format!("need weights 0 < b <= a, got a = {a}, b = {b}")));
    }
    if (a * a + b * b - 2.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "weights must satisfy a^2 + b^2 = 2, got {}",
            a * a + b * b
        )));
    }
    let (max, min, mean) = f.torus_stats()?;
    let (hi, lo) = (max - mean, mean - min);
    if a * hi > b * lo + 1e-12 {
        return Err(Error::invalid(format!(
            "upper excursion too large: a (max f - <f>) = {} exceeds b (<f> - min f) = {}",
            a * hi,
            b * lo
        )));
    }
    let r = p.abs();
    let out = if r <= b * hi {
        CorrelatedEffective {
            h1: (a + b) * (max - min) / 4.0,
            h2: (a + b) * (max + min) / 4.0,
            h3: (a - b) * (max + min) / 4.0,
            h123: (a - b) * (max - min) / 4.0,
        }
    } else if r <= a * hi {
        CorrelatedEffective {
            h1: (a * max - a * min + r + b * mean - b * min) / 4.0,
            h2: (a * max + a * min + r + b * mean + b * min) / 4.0,
            h3: (a * max + a * min - r - b * mean - b * min) / 4.0,
            h123: (a * max - a * min - r - b * mean + b * min) / 4.0,
        }
    } else if r <= b * lo {
        CorrelatedEffective {
            h1: (2.0 * r + (a + b) * lo) / 4.0,
            h2: (2.0 * r + (a + b) * (mean + min)) / 4.0,
            h3: (a - b) * (mean + min) / 4.0,
            h123: (a - b) * lo / 4.0,
        }
    } else if r <= a * lo {
        CorrelatedEffective {
            h1: (3.0 * r + a * lo) / 4.0,
            h2: (r + a * (mean + min) + 2.0 * b * mean) / 4.0,
            h3: (r + a * (mean + min) - 2.0 * b * mean) / 4.0,
            h123: (-r + a * lo) / 4.0,
        }
    } else {
        CorrelatedEffective {
            h1: r,
            h2: (a + b) * mean / 2.0,
            h3: (a - b) * mean / 2.0,
            h123: 0.0,
        }
    };
    debug_assert!({
        let g = |c: f64| pattern_value(p, c * max, c * mean);
        let gm = |c: f64| pattern_value(p, -c * min, -c * mean);
        let want = CorrelatedEffective {
            h1: (g(a) + gm(a) + g(b) + gm(b)) / 4.0,
            h2: (g(a) - gm(a) + g(b) - gm(b)) / 4.0,
            h3: (g(a) - gm(a) - g(b) + gm(b)) / 4.0,
            h123: (g(a) + gm(a) - g(b) - gm(b)) / 4.0,
        };
        (out.h1 - want.h1).abs() < 1e-12
            && (out.h2 - want.h2).abs() < 1e-12
            && (out.h3 - want.h3).abs() < 1e-12
            && (out.h123 - want.h123).abs() < 1e-12
    });
    Ok(out)
}
