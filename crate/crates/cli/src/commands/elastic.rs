use std::fmt::Write as _;
use std::fs;

use orthofrac::io::{parse_velocity_csv, read_curve_csv, read_manifest};
use orthofrac::material::stage1::DIRECTIONS;
use orthofrac::material::{estimate_elastic, youngs_from_compression, WaveVelocitySet, VOIGT_LABELS};
use serde::Serialize;

use super::Context;
use crate::config::RatioSection;
use crate::CliError;

pub const COMMAND: &str = "estimate-elastic";
pub const RATIOS_FILE: &str = "ratios.json";

#[derive(Serialize)]
struct Report {
    density: f64,
    youngs: [f64; 3],
    youngs_source: &'static str,
    estimate: orthofrac::material::ElasticEstimate,
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let mut rec = ctx.recorder(COMMAND, serde_json::Value::Null)?;
    let m = ctx
        .loaded
        .config
        .material
        .as_ref()
        .ok_or_else(|| CliError::config("estimate-elastic needs a [material] section"))?;
    let rho = m.density.ok_or_else(|| CliError::config("material.density is required"))?;
    let vpath = m.velocities.as_ref().ok_or_else(|| CliError::config("material.velocities is required"))?;
    rec.input(vpath)?;
    let entries = parse_velocity_csv(&fs::read_to_string(vpath)?, &vpath.display().to_string())?;
    let waves = WaveVelocitySet::from_entries(rho, &entries)
        .map_err(|e| CliError::config(format!("{}: {e}", vpath.display())))?;

    let (youngs, youngs_source) = match (&m.youngs, &m.compression) {
        (Some(e), _) => (*e, "configured"),
        (None, Some(manifest)) => {
            rec.input(manifest)?;
            let [length, radius] =
                m.cylinder.ok_or_else(|| CliError::config("material.cylinder = [length, radius] is required"))?;
            let groups = read_manifest(manifest)?;
            let mut curves: [Vec<_>; 3] = Default::default();
            for (i, d) in DIRECTIONS.iter().enumerate() {
                for p in groups.get(&d.to_string()).into_iter().flatten() {
                    rec.input(p)?;
                    curves[i].push(read_curve_csv(p)?);
                }
            }
            (youngs_from_compression(&curves, length, radius)?, "compression")
        }
        (None, None) => return Err(CliError::config("material needs youngs or a compression manifest")),
    };
    let estimate = estimate_elastic(&waves, youngs)?;

    let r = estimate.ratios.matrix();
    let ratios = RatioSection {
        normal: [r[0][0], r[1][1], r[2][2]],
        coupling: [r[0][1], r[1][2], r[0][2]],
        shear: [r[3][3], r[4][4], r[5][5]],
    };
    rec.write_json(RATIOS_FILE, &ratios)?;
    rec.write_json("report.json", &Report { density: rho, youngs, youngs_source, estimate: estimate.clone() })?;
    rec.write("report.txt", text_report(&estimate, youngs))?;
    let mut csv = format!(",{}\n", VOIGT_LABELS.join(","));
    for (i, row) in r.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(csv, "{},{}", VOIGT_LABELS[i], cells.join(","));
    }
    rec.write("ratios.csv", csv)?;
    rec.finish(false)?;
    Ok(())
}

fn text_report(e: &orthofrac::material::ElasticEstimate, youngs: [f64; 3]) -> String {
    let c = &e.constants;
    let mut s = String::new();
    let _ = writeln!(s, "normal stiffness VVVV TTTT HHHH [MPa]: {:.1} {:.1} {:.1}", e.normal[0], e.normal[1], e.normal[2]);
    let _ = writeln!(s, "shear stiffness THTH HVHV VTVT [MPa]: {:.1} {:.1} {:.1}", e.shear[0], e.shear[1], e.shear[2]);
    let _ = writeln!(s, "Young's moduli V T H [MPa]: {:.1} {:.1} {:.1}", youngs[0], youngs[1], youngs[2]);
    let _ = writeln!(s, "Poisson's ratios VT TH VH: {:.4} {:.4} {:.4}", c.nu_vt, c.nu_th, c.nu_vh);
    let _ = writeln!(
        s,
        "coupling stiffness VVTT TTHH HHVV [MPa]: {:.1} {:.1} {:.1}",
        e.coupling[0], e.coupling[1], e.coupling[2]
    );
    let _ = writeln!(s, "ratios (C / C_VVVV):");
    for row in e.ratios.matrix() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:8.4}")).collect();
        let _ = writeln!(s, "  {}", cells.join(" "));
    }
    s
}
