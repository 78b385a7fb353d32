use std::collections::HashSet;
use std::sync::Mutex;

use orthofrac::calibration::{
    calibrate, cost, experimental_average, CalibrationOptions, CalibrationResult, CostEvaluator, ParameterRange,
};
use orthofrac::fem::{build_specimen_mesh, SpecimenMesh};
use orthofrac::io::{curve_to_csv, read_curve_csv, read_manifest};
use orthofrac::material::{scale_ratios, DissipationModel, ElasticityTensor, PhaseFieldLaw};
use orthofrac::solver::{run_simulation, Problem, SolverSettings};
use orthofrac::{Error, LoadDeflectionCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{apply_overrides, csv_table, overrides_json, Context};
use crate::config::MockCost;
use crate::manifest::Recorder;
use crate::{CliError, Overrides};

pub const COMMAND: &str = "calibrate";
pub const REPORT_FILE: &str = "report.json";

/// Analytic cost with optional seeded noise and forced failures.
struct Mock {
    cost: MockCost,
    seed: u64,
    fail: Vec<(f64, f64)>,
    failed: Mutex<HashSet<(String, u64, u64)>>,
}

impl CostEvaluator for Mock {
    fn evaluate(&self, test: &str, c: f64, g: f64) -> orthofrac::Result<f64> {
        let key = (c.to_bits(), g.to_bits());
        if self.fail.iter().any(|p| (p.0.to_bits(), p.1.to_bits()) == key) {
            let mut failed = self.failed.lock().expect("poisoned");
            if failed.insert((test.to_string(), key.0, key.1)) {
                return Err(Error::Convergence(format!("forced failure at ({c}, {g})")));
            }
        }
        let m = &self.cost;
        let (dc, dg) = (c - m.c0, g - m.g0);
        let value = m.alpha * dc * dc + m.beta * dg * dg + m.gamma * dc * dg + m.delta;
        if m.noise == 0.0 {
            return Ok(value);
        }
        // Keyed by the point, so the value does not depend on evaluation order.
        let test_key = test.bytes().fold(0u64, |h, b| h.rotate_left(5) ^ b as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ test_key ^ key.0.rotate_left(17) ^ key.1);
        Ok(value * (1.0 + m.noise * rng.random_range(-1.0..=1.0)))
    }
}

struct Target {
    test: String,
    mesh: SpecimenMesh,
    experiment: LoadDeflectionCurve,
}

/// Runs the simulator and keeps each sample's curve in its own directory.
struct Simulator<'a> {
    targets: Vec<Target>,
    ratios: ElasticityTensor,
    model: DissipationModel,
    ell: f64,
    g0: f64,
    settings: SolverSettings,
    rec: &'a Recorder,
}

impl CostEvaluator for Simulator<'_> {
    fn evaluate(&self, test: &str, c: f64, g: f64) -> orthofrac::Result<f64> {
        let t = self
            .targets
            .iter()
            .find(|t| t.test == test)
            .ok_or_else(|| Error::Configuration(format!("no specimen for test '{test}'")))?;
        let law = PhaseFieldLaw::with_residual(self.model, self.ell, g, self.g0)?;
        let problem = Problem::specimen(&t.mesh, scale_ratios(&self.ratios, c)?, law)?;
        let out = run_simulation(problem, self.settings.clone())?;
        let name = format!("samples/{test}/c{c:.6}_g{g:.8}/curve.csv");
        self.rec.write(&name, curve_to_csv(&out.curve)).map_err(|e| Error::Data(e.message))?;
        cost(&out.curve, &t.experiment)
    }
}

#[derive(Serialize)]
struct Pair {
    c_vvvv: f64,
    gc: f64,
}

impl From<(f64, f64)> for Pair {
    fn from((c_vvvv, gc): (f64, f64)) -> Self {
        Self { c_vvvv, gc }
    }
}

#[derive(Serialize)]
struct Sample {
    c_vvvv: f64,
    gc: f64,
    cost: f64,
}

#[derive(Serialize)]
struct Failure {
    c_vvvv: f64,
    gc: f64,
    reason: String,
}

#[derive(Serialize)]
struct Surface {
    coefficients: [f64; 6],
    residual: f64,
    positive_definite: bool,
}

#[derive(Serialize)]
struct Round {
    c_range: [f64; 2],
    g_range: [f64; 2],
    samples: Vec<Sample>,
    failures: Vec<Failure>,
    surface: Surface,
    optimum: Pair,
    from_surface: bool,
}

#[derive(Serialize)]
struct TestReport {
    test: String,
    rounds: Vec<Round>,
    optimum: Pair,
    boundary_warning: bool,
}

/// Layout fixed by `schema/calibration_report.schema.json`.
#[derive(Serialize)]
struct Report {
    mode: &'static str,
    grids: Vec<usize>,
    shrink: f64,
    tests: Vec<TestReport>,
    optimum: Pair,
    flagged: bool,
    warnings: Vec<String>,
}

fn report(result: &CalibrationResult, mode: &'static str, options: &CalibrationOptions, warnings: Vec<String>) -> Report {
    Report {
        mode,
        grids: options.grids.clone(),
        shrink: options.shrink,
        tests: result
            .tests
            .iter()
            .map(|t| TestReport {
                test: t.test.clone(),
                rounds: t
                    .rounds
                    .iter()
                    .map(|r| Round {
                        c_range: [r.range.c.0, r.range.c.1],
                        g_range: [r.range.g.0, r.range.g.1],
                        samples: r.samples.iter().map(|s| Sample { c_vvvv: s.c, gc: s.g, cost: s.cost }).collect(),
                        failures: r
                            .failures
                            .iter()
                            .map(|f| Failure { c_vvvv: f.0, gc: f.1, reason: f.2.clone() })
                            .collect(),
                        surface: Surface {
                            coefficients: r.surface.coefficients,
                            residual: r.surface.residual,
                            positive_definite: r.surface.positive_definite,
                        },
                        optimum: r.optimum.into(),
                        from_surface: r.from_surface,
                    })
                    .collect(),
                optimum: t.optimum.into(),
                boundary_warning: t.boundary_warning,
            })
            .collect(),
        optimum: result.optimum.into(),
        flagged: result.flagged,
        warnings,
    }
}

pub fn run(ctx: &Context, overrides: &Overrides) -> Result<(), CliError> {
    let mut rec = ctx.recorder(COMMAND, overrides_json(overrides))?;
    let cfg = &ctx.loaded.config;
    let cal = cfg.calibration.as_ref().ok_or_else(|| CliError::config("calibrate needs a [calibration] section"))?;
    let initial = ParameterRange::new((cal.c_range[0], cal.c_range[1]), (cal.g_range[0], cal.g_range[1]))?;
    let options = CalibrationOptions { grids: cal.grids.clone(), shrink: cal.shrink, workers: ctx.cli.workers };
    options.validate()?;

    let groups = match &cal.experiments {
        Some(p) => {
            rec.input(p)?;
            read_manifest(p)?
        }
        None => Default::default(),
    };
    let tests: Vec<String> = if cal.tests.is_empty() { groups.keys().cloned().collect() } else { cal.tests.clone() };
    if tests.is_empty() {
        return Err(CliError::config("no calibration tests: list calibration.tests or give an experiments manifest"));
    }
    let names: Vec<&str> = tests.iter().map(String::as_str).collect();

    let (result, mode) = match &cal.mock {
        Some(m) => {
            let first = initial.grid(options.grids[0]);
            let fail = m
                .fail
                .iter()
                .map(|&i| first.get(i).copied().ok_or_else(|| CliError::config(format!("mock.fail index {i} outside the first grid"))))
                .collect::<Result<Vec<_>, _>>()?;
            let mock = Mock { cost: m.clone(), seed: ctx.cli.seed, fail, failed: Mutex::new(HashSet::new()) };
            (calibrate(&names, &mock, initial, &options)?, "mock")
        }
        None => {
            let spec = cfg.specimen.as_ref().ok_or_else(|| CliError::config("calibrate needs a [specimen] section"))?;
            let solver = apply_overrides(&cfg.solver, overrides)?;
            let ratios = ctx.ratios(&mut rec)?;
            let mut targets = Vec::new();
            for test in &tests {
                let files = groups
                    .get(test)
                    .ok_or_else(|| CliError::config(format!("no experimental curves for test '{test}'")))?;
                let mut raw = Vec::new();
                for f in files {
                    rec.input(f)?;
                    raw.push(read_curve_csv(f)?);
                }
                let avg = experimental_average(&raw, cal.smoothing_window, cal.grid_step)?;
                rec.write(&format!("experiments/{test}.csv"), curve_to_csv(&avg.curve))?;
                let mesh = build_specimen_mesh(&spec.geometry_for(Some(test))?, &spec.mesh)?;
                targets.push(Target { test: test.clone(), mesh, experiment: avg.curve });
            }
            let sim = Simulator {
                targets,
                ratios,
                model: solver.model,
                ell: solver.ell,
                g0: solver.residual_stiffness,
                settings: solver.settings()?,
                rec: &rec,
            };
            (calibrate(&names, &sim, initial, &options)?, "simulator")
        }
    };

    for t in &result.tests {
        for (k, r) in t.rounds.iter().enumerate() {
            for f in &r.failures {
                rec.warn(format!("{} round {}: sample ({}, {}) failed: {}", t.test, k + 1, f.0, f.1, f.2));
            }
            if !r.from_surface {
                rec.warn(format!("{} round {}: surface has no minimum, best sample used", t.test, k + 1));
            }
        }
        if t.boundary_warning {
            rec.warn(format!("{}: optimum on or beyond the sampled box", t.test));
        }
    }
    let mut rows = Vec::new();
    for t in &result.tests {
        for (k, r) in t.rounds.iter().enumerate() {
            for s in &r.samples {
                rows.push(vec![t.test.clone(), (k + 1).to_string(), s.c.to_string(), s.g.to_string(), s.cost.to_string(), "ok".into()]);
            }
            for f in &r.failures {
                rows.push(vec![t.test.clone(), (k + 1).to_string(), f.0.to_string(), f.1.to_string(), String::new(), "failed".into()]);
            }
        }
    }
    rec.write("rounds.csv", csv_table(&["test", "round", "c_vvvv_MPa", "gc_MPa_mm", "cost_N_mm", "status"], rows))?;
    let warnings = rec.warnings().to_vec();
    rec.write_json(REPORT_FILE, &report(&result, mode, &options, warnings))?;
    rec.finish(false)?;
    Ok(())
}
