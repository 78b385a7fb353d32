use orthofrac::fem::{build_specimen_mesh, vtk};
use orthofrac::io::curve_to_csv;
use orthofrac::material::{scale_ratios, PhaseFieldLaw};
use orthofrac::solver::{Problem, Simulation};
use serde::Serialize;

use super::{apply_overrides, csv_table, overrides_json, Context};
use crate::{CliError, Overrides};

pub const COMMAND: &str = "simulate";
pub const CURVE_FILE: &str = "curve.csv";
pub const FINAL_FIELDS: &str = "final.vtk";

#[derive(Serialize)]
struct Summary {
    specimen: String,
    elements: usize,
    nodes: usize,
    model: orthofrac::material::DissipationModel,
    ell: f64,
    gc: f64,
    c_vvvv: f64,
    steps: usize,
    peak_deflection: f64,
    peak_force: f64,
    stopped_early: bool,
    max_equilibrium_error: f64,
    completed: bool,
    error: Option<String>,
}

pub fn run(ctx: &Context, overrides: &Overrides) -> Result<(), CliError> {
    let mut rec = ctx.recorder(COMMAND, overrides_json(overrides))?;
    let cfg = &ctx.loaded.config;
    let spec = cfg.specimen.as_ref().ok_or_else(|| CliError::config("simulate needs a [specimen] section"))?;
    let solver = apply_overrides(&cfg.solver, overrides)?;
    let ratios = ctx.ratios(&mut rec)?;
    let geom = spec.geometry_for(None)?;
    let sm = build_specimen_mesh(&geom, &spec.mesh)?;
    let law = PhaseFieldLaw::with_residual(solver.model, solver.ell, solver.gc, solver.residual_stiffness)?;
    let problem = Problem::specimen(&sm, scale_ratios(&ratios, solver.c_vvvv)?, law)?;
    let mut sim = Simulation::new(problem, solver.settings()?)?;
    log::info!("simulating {} elements", sm.mesh.num_elements());
    let (out, err) = sim.run_partial();

    rec.write(CURVE_FILE, curve_to_csv(&out.curve))?;
    let rows = out.steps.iter().map(|s| {
        vec![
            s.step.to_string(),
            s.ubar.to_string(),
            s.force.to_string(),
            s.iterations.to_string(),
            s.elastic.to_string(),
            s.dissipated.to_string(),
            s.max_damage.to_string(),
            s.equilibrium_error().to_string(),
        ]
    });
    rec.write(
        "steps.csv",
        csv_table(
            &["step", "displacement_mm", "force_N", "damage_solves", "elastic_mJ", "dissipated_mJ", "max_damage", "equilibrium_error"],
            rows,
        ),
    )?;
    let mesh = &sim.problem().mesh;
    for (index, fields) in &out.snapshots {
        rec.write(&format!("fields/step_{index:04}.vtk"), vtk::to_string(mesh, fields, &format!("step {index}")))?;
    }
    rec.write(FINAL_FIELDS, vtk::to_string(mesh, &sim.snapshot(), "final"))?;

    let (peak_deflection, peak_force) = out.curve.peak();
    let summary = Summary {
        specimen: spec.preset.clone().unwrap_or_else(|| "custom".into()),
        elements: mesh.num_elements(),
        nodes: mesh.num_nodes(),
        model: solver.model,
        ell: solver.ell,
        gc: solver.gc,
        c_vvvv: solver.c_vvvv,
        steps: out.steps.len(),
        peak_deflection,
        peak_force,
        stopped_early: out.stopped_early,
        max_equilibrium_error: out.steps.iter().map(|s| s.equilibrium_error()).fold(0.0, f64::max),
        completed: err.is_none(),
        error: err.as_ref().map(|e| e.to_string()),
    };
    rec.write_json("summary.json", &summary)?;
    match err {
        None => {
            rec.finish(false)?;
            Ok(())
        }
        Some(e) => {
            rec.warn(format!("solver failed, outputs hold the converged steps only: {e}"));
            rec.finish(true)?;
            Err(e.into())
        }
    }
}
