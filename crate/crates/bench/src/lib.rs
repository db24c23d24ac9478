//! Shared fixtures for the benchmarks.

use fishbone_core::experiments::concentrated_state;
use fishbone_core::{ModalState, ModelSpec};

/// A deterministic state with every coordinate nonzero, decaying with the
/// mode index so the energy stays moderate for large `m`.
pub fn spread_state(modes: usize) -> ModalState {
    let decay = |j: usize, scale: f64| scale / (j * j) as f64;
    let coords = |scale: f64| (1..=modes).map(|j| decay(j, scale)).collect::<Vec<_>>();
    ModalState::new(0.0, coords(1.0), coords(0.3), coords(0.1), coords(0.05)).expect("valid state")
}

/// The one-mode state just above the torsional instability threshold.
pub fn threshold_state() -> (ModelSpec, ModalState) {
    let spec = ModelSpec::standard(1).expect("valid spec");
    let state = concentrated_state(&spec, 1, 1.47, 1e-4, false).expect("valid state");
    (spec, state)
}
