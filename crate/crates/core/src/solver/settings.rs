use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SolveStrategy;

/// Prescribed load-line displacements ū, mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSchedule(Vec<f64>);

impl LoadSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("load schedule is empty".into()));
        }
        if values[0] < 0.0 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("load schedule must start at or above 0".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("load schedule must be strictly increasing".into()));
        }
        Ok(Self(values))
    }

    /// `steps` equal increments up to `max`.
    pub fn uniform(max: f64, steps: usize) -> Result<Self> {
        if !(max > 0.0) || steps == 0 {
            return Err(Error::Parameter(format!("invalid uniform schedule ({max}, {steps})")));
        }
        Self::new((1..=steps).map(|k| max * k as f64 / steps as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Relative residual reduction of each displacement solve, and the
    /// projected residual bound (in damage units) of each damage solve.
    pub newton_tol: f64,
    /// Relative displacement residual at which alternation stops.
    pub stagger_tol: f64,
    pub max_newton_iters: usize,
    pub max_stagger_iters: usize,
    /// Budget of active-set iterations per damage solve.
    pub max_active_set_iters: usize,
    pub schedule: LoadSchedule,
    /// Stop once the force stays below this fraction of the running peak.
    pub stop_fraction: f64,
    /// ... for this many consecutive steps.
    pub stop_count: usize,
    /// Halvings of a load increment allowed when alternation fails.
    pub max_bisections: usize,
    pub displacement_solver: SolveStrategy,
    pub damage_solver: SolveStrategy,
    /// Schedule indices at which fields are recorded.
    pub snapshot_steps: Vec<usize>,
}

impl SolverSettings {
    pub fn new(schedule: LoadSchedule) -> Self {
        Self {
            newton_tol: 1e-6,
            stagger_tol: 1e-3,
            max_newton_iters: 1,
            max_stagger_iters: 2000,
            max_active_set_iters: 100,
            schedule,
            stop_fraction: 0.05,
            stop_count: 3,
            max_bisections: 4,
            displacement_solver: SolveStrategy::Direct,
            damage_solver: SolveStrategy::Direct,
            snapshot_steps: Vec::new(),
        }
    }

    /// Factor reuse suited to large three-dimensional meshes.
    pub fn with_iterative_solvers(mut self) -> Self {
        self.displacement_solver = SolveStrategy::StaleFactor { refactor_after: 60 };
        self.damage_solver = SolveStrategy::StaleFactor { refactor_after: 40 };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.stagger_tol > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        if self.max_stagger_iters == 0 || self.max_active_set_iters == 0 || self.max_newton_iters == 0 {
            return Err(Error::Parameter("iteration budgets must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.stop_fraction) {
            return Err(Error::Parameter("stop fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}
