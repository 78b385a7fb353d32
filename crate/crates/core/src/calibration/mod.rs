//! Identification of the stiffness scale C_VVVV and the toughness G_c from
//! notched-beam load–deflection curves by quadratic response surfaces on
//! successively refined parameter grids.

mod cost;
mod curves;
mod optimize;
mod surface;

pub use cost::cost;
pub use curves::{
    average_repetitions, envelope, experimental_average, normalize_and_shift, normalize_repetitions, smooth, AveragedCurve, Envelope,
    NormalizedCurve, DEFAULT_GRID_STEP, DEFAULT_SMOOTHING_WINDOW,
};
pub use optimize::{
    average_optima, calibrate, calibrate_test, CalibrationOptions, CalibrationResult, CostEvaluator,
    ParameterRange, RoundReport, TestCalibration,
};
pub use surface::{argmin, fit_quadratic, CostSample, QuadraticSurface};

use crate::curve::LoadDeflectionCurve;
use crate::error::{Error, Result};
use crate::fem::SpecimenMesh;
use crate::material::{scale_ratios, DissipationModel, ElasticityTensor, PhaseFieldLaw};
use crate::solver::{run_simulation, Problem, SolverSettings};

/// A specimen together with the curve it has to reproduce.
#[derive(Debug, Clone)]
pub struct CalibrationTarget {
    pub test: String,
    pub mesh: SpecimenMesh,
    pub experiment: LoadDeflectionCurve,
}

/// Runs the phase-field simulation for each evaluation.
#[derive(Debug, Clone)]
pub struct SimulationCost {
    pub targets: Vec<CalibrationTarget>,
    /// Stiffness ratios with unit C_VVVV.
    pub ratios: ElasticityTensor,
    pub model: DissipationModel,
    pub ell: f64,
    pub settings: SolverSettings,
}

impl CostEvaluator for SimulationCost {
    fn evaluate(&self, test: &str, c: f64, g: f64) -> Result<f64> {
        let target = self
            .targets
            .iter()
            .find(|t| t.test == test)
            .ok_or_else(|| Error::Configuration(format!("no specimen configured for test '{test}'")))?;
        let law = PhaseFieldLaw::new(self.model, self.ell, g)?;
        let problem = Problem::specimen(&target.mesh, scale_ratios(&self.ratios, c)?, law)?;
        let out = run_simulation(problem, self.settings.clone())?;
        cost(&out.curve, &target.experiment)
    }
}
