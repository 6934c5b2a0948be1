//! Shared fixtures for the benchmarks.

use trilinear_core::fock::product_coherent_state;
use trilinear_core::perturbation::SeedTriple;
use trilinear_core::{Result, ThreeModeState, TruncationSpec};

/// Coherent product with equal signal/idler intensity `a2`, pump intensity `g2` and phase `phi`.
pub fn seeded_state(a2: f64, g2: f64, phi: f64, trunc: TruncationSpec) -> Result<ThreeModeState> {
    let s = SeedTriple::from_intensities(a2, a2, g2, phi)?;
    product_coherent_state(s.alpha_s(), s.alpha_i(), s.gamma(), trunc)
}
