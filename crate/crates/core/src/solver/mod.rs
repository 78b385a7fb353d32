//! Quasi-static loading with alternate minimization of the displacement
//! and damage fields.

mod problem;
mod settings;
mod staggered;

pub use problem::Problem;
pub use settings::{LoadSchedule, SolverSettings};
pub use staggered::{
    run_simulation, DamageReport, DisplacementReport, PhaseFieldState, Simulation, SimulationOutput, StepResult,
};
