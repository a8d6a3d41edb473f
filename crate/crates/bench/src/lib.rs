//! Fixtures shared by the benchmarks.

use ldscope::{compute_ld_field, EscapeRegion, GridSpec2D, IntegratorConfig, LDConfig, LDField, SystemId, SystemSpec};

/// Van der Pol field on an `n`×`n` grid with short horizons.
pub fn vanderpol_field(n: usize, tau: f64) -> LDField {
    let spec = SystemSpec::builtin(SystemId::Vanderpol);
    let grid = GridSpec2D::planar(&spec, [-3.0, 3.0], [-4.0, 4.0], n);
    let ld = LDConfig::new(0.5, tau, tau).with_escape(EscapeRegion::circle(20.0));
    compute_ld_field(&spec, &grid, &ld, &IntegratorConfig::default()).expect("valid benchmark setup")
}
