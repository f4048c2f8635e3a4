//! Decomposition of a sign-pattern family of effective Hamiltonians into
//! product-of-signs coordinates: the odd-cardinality coefficients drive the
//! limiting equation, the even part is reported as a residual norm.

use crate::error::{Error, Result};

use super::table::{EffectiveTable, Provenance};

/// Coefficient tables indexed by subsets of the sign components.
///
/// Subsets are bitmasks over `m` components; a pattern index `k` encodes
/// `xi_i = +1` when bit `i` of `k` is set, `-1` otherwise.
#[derive(Clone, Debug)]
pub struct WalshDecomposition {
    pub m: usize,
    /// `(subset mask, coefficient table)` for every odd-cardinality subset,
    /// ascending by mask; there are `2^{m-1}` of them.
    pub odd: Vec<(u32, EffectiveTable)>,
    /// Sup norm of the even-cardinality part (the empty subset included).
    pub even_residual: f64,
}

impl WalshDecomposition {
    /// `sum_j coeff_j(p) * prod_{i in j} xi_i` over the odd subsets.
    pub fn reconstruct(&self, p: f64, xi: &[f64]) -> f64 {
        self.odd.iter().map(|(mask, table)| table.eval(p) * sign_product(*mask, xi)).sum()
    }

    pub fn table_for(&self, mask: u32) -> Option<&EffectiveTable> {
        self.odd.iter().find(|(m, _)| *m == mask).map(|(_, t)| t)
    }
}

fn sign_product(mask: u32, xi: &[f64]) -> f64 {
    (0..xi.len()).filter(|i| mask & (1 << i) != 0).map(|i| xi[i]).product()
}

/// Sign of `xi^j` for the pattern with index `k` (bit set = +1).
fn pattern_sign(mask: u32, k: u32) -> f64 {
    // Components in the subset that are -1 in this pattern.
    let minus_count = (mask & !k).count_ones();
    if minus_count % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Project a family `pattern -> table` onto products of signs.
///
/// `tables[k]` is the table for the pattern encoded by `k` (bit `i` set
/// means component `i` equals +1); all `2^m` patterns must be present on a
/// shared grid.
pub fn walsh_decompose(m: usize, tables: &[EffectiveTable]) -> Result<WalshDecomposition> {
    if m == 0 || m > 20 {
        return Err(Error::invalid("need 1 <= m <= 20 sign components"));
    }
    let count = 1usize << m;
    if tables.len() != count {
        return Err(Error::invalid(format!(
            "need {count} tables for {m} components, got {}",
            tables.len()
        )));
    }
    for t in &tables[1..] {
        if !t.same_grid(&tables[0]) {
            return Err(Error::invalid("pattern tables must share one gradient grid"));
        }
    }
    let n = tables[0].n();
    let norm = 1.0 / count as f64;
    let mut odd = Vec::with_capacity(count / 2);
    let mut even_residual = 0.0f64;
    for mask in 0..count as u32 {
        let mut values = vec![0.0f64; n];
        for (k, table) in tables.iter().enumerate() {
            let sign = pattern_sign(mask, k as u32);
            for (v, t) in values.iter_mut().zip(&table.values) {
                *v += sign * t * norm;
            }
        }
        if mask.count_ones() % 2 == 1 {
            let coeff = EffectiveTable::from_values(
                tables[0].p_lo,
                tables[0].p_hi,
                values,
                tables[0].provenance,
            );
            odd.push((mask, coeff));
        } else {
            let part = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            even_residual = even_residual.max(part);
        }
    }
    Ok(WalshDecomposition { m, odd, even_residual })
}

/// Tabulate one pattern family from a closure over (pattern index, p).
pub fn pattern_tables(
    m: usize,
    p_lo: f64,
    p_hi: f64,
    n: usize,
    provenance: Provenance,
    mut f: impl FnMut(u32, f64) -> Result<f64>,
) -> Result<Vec<EffectiveTable>> {
    (0..1u32 << m)
        .map(|k| EffectiveTable::from_fn(p_lo, p_hi, n, provenance, |p| f(k, p)))
        .collect()
}
