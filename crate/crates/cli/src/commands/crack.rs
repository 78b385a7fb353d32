use orthofrac::crack::io::{points_to_vtk, read_surface_csv, surface_to_csv, surface_to_vtk};
use orthofrac::crack::scan::{align_and_average_scans, clean_scan, AnchoredScan};
use orthofrac::crack::{deviation, extract_crack, sections, thickness_spread, CrackSurface, Section, SurfaceKind};
use orthofrac::fem::vtk;
use orthofrac::Error;
use serde::Serialize;

use super::{csv_table, simulate, Context};
use crate::config::CrackSection;
use crate::CliError;

pub const EXTRACT: &str = "extract-crack";
pub const COMPARE: &str = "compare-crack";
pub const AVERAGE_FILE: &str = "average.csv";
pub const SECTIONS_FILE: &str = "sections.csv";
pub const DEVIATION_FILE: &str = "deviation.csv";

fn section<'a>(ctx: &'a Context) -> Result<&'a CrackSection, CliError> {
    ctx.loaded.config.crack.as_ref().ok_or_else(|| CliError::config("crack commands need a [crack] section"))
}

fn cuts(c: &CrackSection) -> Vec<(String, f64)> {
    c.sections.iter().map(|(n, z)| (n.clone(), *z)).collect()
}

fn sections_csv(named: &[(&str, Vec<Section>)]) -> String {
    let rows = named.iter().flat_map(|(surface, secs)| {
        secs.iter().flat_map(move |s| {
            s.polyline
                .iter()
                .map(move |(y, x)| vec![surface.to_string(), s.name.clone(), s.z.to_string(), y.to_string(), x.to_string()])
        })
    });
    csv_table(&["surface", "section", "z_mm", "y_mm", "x_mm"], rows)
}

#[derive(Serialize)]
struct ExtractSummary {
    threshold: f64,
    step: f64,
    broken_points: usize,
    defined_nodes: usize,
    /// Largest spread of the crack position across the thickness, mm.
    thickness_spread: f64,
}

pub fn extract(ctx: &Context) -> Result<(), CliError> {
    let mut rec = ctx.recorder(EXTRACT, serde_json::Value::Null)?;
    let c = section(ctx)?;
    let field = c.field.clone().unwrap_or_else(|| ctx.dir(simulate::COMMAND).join(simulate::FINAL_FIELDS));
    rec.input(&field)?;
    let (mesh, fields) = vtk::read(&field)?;
    let ex = extract_crack(&mesh, &fields.damage, c.threshold, c.step)?;
    rec.write("min.csv", surface_to_csv(&ex.min)?)?;
    rec.write("max.csv", surface_to_csv(&ex.max)?)?;
    rec.write(AVERAGE_FILE, surface_to_csv(&ex.average)?)?;
    rec.write("average.vtk", surface_to_vtk(&ex.average, None, "average crack surface"))?;
    let points: Vec<[f64; 3]> = ex.region.points.iter().map(|p| ex.region.coords(*p)).collect();
    rec.write("broken.vtk", points_to_vtk(&points, "broken region"))?;
    rec.write(SECTIONS_FILE, sections_csv(&[("numerical", sections(&ex.average, &cuts(c)))]))?;
    rec.write_json(
        "summary.json",
        &ExtractSummary {
            threshold: c.threshold,
            step: c.step,
            broken_points: points.len(),
            defined_nodes: ex.average.defined_count(),
            thickness_spread: thickness_spread(&ex.average),
        },
    )?;
    rec.finish(false)?;
    Ok(())
}

/// Whether the (z, y) extents of the defined nodes intersect.
fn overlaps(a: &CrackSurface, b: &CrackSurface) -> bool {
    let extent = |s: &CrackSurface| {
        s.nodes().fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |e, (_, [_, y, z])| {
            [e[0].min(z), e[1].max(z), e[2].min(y), e[3].max(y)]
        })
    };
    let (p, q) = (extent(a), extent(b));
    p[0] <= q[1] && q[0] <= p[1] && p[2] <= q[3] && q[2] <= p[3]
}

#[derive(Serialize)]
struct CompareReport {
    scans: usize,
    /// Largest distance from the numerical surface to the scans, mm.
    max_deviation: f64,
    mean_deviation: f64,
    compared_nodes: usize,
}

pub fn compare(ctx: &Context) -> Result<(), CliError> {
    let mut rec = ctx.recorder(COMPARE, serde_json::Value::Null)?;
    let c = section(ctx)?;
    if c.scans.is_empty() {
        return Err(CliError::config("compare-crack needs at least one crack.scans entry"));
    }
    let num_path = c.numerical.clone().unwrap_or_else(|| ctx.dir(EXTRACT).join(AVERAGE_FILE));
    rec.input(&num_path)?;
    let numerical = read_surface_csv(&num_path, Some(c.step), SurfaceKind::Average)?;
    let mut scans = Vec::new();
    for s in &c.scans {
        rec.input(&s.file)?;
        let raw = read_surface_csv(&s.file, None, SurfaceKind::Scan)?;
        scans.push(AnchoredScan { surface: clean_scan(&raw, &c.clean)?, anchor: s.anchor });
    }
    let anchor = c.anchor.unwrap_or(scans[0].anchor);
    let experimental: CrackSurface = align_and_average_scans(&scans, anchor)?;
    if !overlaps(&numerical, &experimental) {
        return Err(Error::Alignment("numerical and scanned surfaces do not overlap in the specimen frame".into()).into());
    }
    let dev = deviation(&numerical, &experimental)?;

    rec.write("experimental.csv", surface_to_csv(&experimental)?)?;
    let rows = numerical.nodes().filter_map(|(k, [x, y, z])| {
        dev.values[k].map(|d| vec![y.to_string(), z.to_string(), x.to_string(), d.to_string()])
    });
    rec.write(DEVIATION_FILE, csv_table(&["y_mm", "z_mm", "x_mm", "deviation_mm"], rows))?;
    rec.write("deviation.vtk", surface_to_vtk(&numerical, Some(&dev), "deviation from scans"))?;
    let cuts = cuts(c);
    rec.write(
        SECTIONS_FILE,
        sections_csv(&[("numerical", sections(&numerical, &cuts)), ("experimental", sections(&experimental, &cuts))]),
    )?;
    rec.write_json(
        "report.json",
        &CompareReport {
            scans: scans.len(),
            max_deviation: dev.max,
            mean_deviation: dev.mean,
            compared_nodes: dev.values.iter().flatten().count(),
        },
    )?;
    rec.finish(false)?;
    Ok(())
}
