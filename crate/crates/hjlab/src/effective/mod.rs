//! Effective Hamiltonians: the numeric cell-problem solver, closed forms for
//! the forced eikonal and nonconvex sawtooth families, Walsh decomposition
//! over sign patterns, correctors, and their independent verification.

mod cell;
mod closed;
mod sawtooth;
mod table;
mod walsh;

pub use cell::{cell_numeric, effective_eikonal, CellOptions};
pub use closed::{
    cell_closed_form, correlated_effective, two_noise_effective, CorrelatedEffective,
};
pub use sawtooth::{
    ballistic_constant, effective_sawtooth, nonconvex_relations, psi, psi_branches,
    psi_integral, sawtooth_corrector, thresholds, verify_corrector, CorrectorProfile,
    CorrectorReport, NonconvexRelations, ProfilePiece, PsiBranch, SawtoothThresholds,
};
pub use table::{ConvexityTag, EffectiveTable, Provenance};
pub use walsh::{pattern_tables, walsh_decompose, WalshDecomposition};
