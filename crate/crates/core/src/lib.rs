//! Galerkin reduction of the fish-bone suspension-bridge model and the tools
//! used to study energy transfer from vertical to torsional oscillations.

pub mod error;
pub mod experiments;
pub mod galerkin;
pub mod hill;
pub mod integrator;
pub mod model;
pub mod negligibility;

pub use error::{Error, Result};
pub use galerkin::{build_system, linearize_about_vertical_mode, LinearizedTorsion, OdeSystem};
pub use hill::{HillProblem, PeriodModel, StabilityVerdict, VerticalMode};
pub use integrator::{
    integrate, max_component_amplitude, Component, IntegratorConfig, Sample, Trajectory,
    TrajectoryStatus,
};
pub use model::{
    coupling_coefficient, rescale_gamma, restoring_force, total_energy, CouplingTable,
    EnergyBreakdown, ModalState, ModelSpec, TorsionVariant,
};
