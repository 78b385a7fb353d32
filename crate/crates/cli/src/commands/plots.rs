use std::fs;
use std::path::Path;

use orthofrac::calibration::{average_repetitions, envelope, normalize_repetitions, DEFAULT_GRID_STEP, DEFAULT_SMOOTHING_WINDOW};
use orthofrac::io::{read_curve_csv, read_manifest};

use super::{crack, csv_table, simulate, Context};
use crate::manifest::Recorder;
use crate::CliError;

pub const COMMAND: &str = "export-plots";

/// Numerical curve overlaid on the mean of the repetitions and their
/// pointwise min/max. Without repetitions only the numerical columns are
/// written.
fn curves(ctx: &Context, rec: &mut Recorder) -> Result<(), CliError> {
    let cfg = &ctx.loaded.config;
    let path = ctx.dir(simulate::COMMAND).join(simulate::CURVE_FILE);
    if !path.exists() {
        return Err(CliError::config(format!("missing artifact {}: run simulate first", path.display())));
    }
    rec.input(&path)?;
    let num = read_curve_csv(&path)?;
    let test = cfg.plots.test.clone().or_else(|| cfg.specimen.as_ref().and_then(|s| s.preset.clone()));
    let (window, step) = cfg
        .calibration
        .as_ref()
        .map_or((DEFAULT_SMOOTHING_WINDOW, DEFAULT_GRID_STEP), |c| (c.smoothing_window, c.grid_step));
    let mut raw = Vec::new();
    if let (Some(test), Some(manifest)) = (&test, cfg.calibration.as_ref().and_then(|c| c.experiments.as_ref())) {
        rec.input(manifest)?;
        for f in read_manifest(manifest)?.get(test).into_iter().flatten() {
            rec.input(f)?;
            raw.push(read_curve_csv(f)?);
        }
    }
    let table = if raw.is_empty() {
        rec.warn("no experimental repetitions, envelope columns omitted");
        csv_table(&["deflection_mm", "numerical_N"], num.iter().map(|(u, f)| vec![u.to_string(), f.to_string()]))
    } else {
        let normalized = normalize_repetitions(&raw, window)?;
        let avg = average_repetitions(&normalized, step)?;
        let env = envelope(&normalized, step)?;
        let rows = avg.curve.iter().zip(env.lower.iter().zip(&env.upper)).map(|((u, mean), (lo, hi))| {
            let n = num.interpolate(u).map_or(String::new(), |v| v.to_string());
            vec![u.to_string(), n, mean.to_string(), lo.to_string(), hi.to_string()]
        });
        csv_table(&["deflection_mm", "numerical_N", "experimental_mean_N", "experimental_min_N", "experimental_max_N"], rows)
    };
    rec.write("curves.csv", table)?;
    Ok(())
}

fn copy_sections(ctx: &Context, rec: &mut Recorder) -> Result<bool, CliError> {
    for command in [crack::COMPARE, crack::EXTRACT] {
        let p = ctx.dir(command).join(crack::SECTIONS_FILE);
        if p.exists() {
            rec.input(&p)?;
            rec.write("sections.csv", fs::read(&p)?)?;
            return Ok(true);
        }
    }
    Ok(false)
}

fn histogram(ctx: &Context, rec: &mut Recorder) -> Result<bool, CliError> {
    let p = ctx.dir(crack::COMPARE).join(crack::DEVIATION_FILE);
    if !p.exists() {
        return Ok(false);
    }
    rec.input(&p)?;
    let values = deviation_column(&p)?;
    let width = ctx.loaded.config.plots.bin_width;
    let bins = values.iter().map(|v| (v / width).floor() as usize).max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; bins];
    for v in &values {
        counts[(v / width).floor() as usize] += 1;
    }
    let rows = counts.iter().enumerate().map(|(i, n)| {
        vec![(i as f64 * width).to_string(), ((i + 1) as f64 * width).to_string(), n.to_string()]
    });
    rec.write("deviation_histogram.csv", csv_table(&["lower_mm", "upper_mm", "count"], rows))?;
    Ok(true)
}

fn deviation_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let v = line
            .rsplit(',')
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| *v >= 0.0 && v.is_finite())
            .ok_or_else(|| CliError::config(format!("{}:{}: bad deviation value", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let mut rec = ctx.recorder(COMMAND, serde_json::Value::Null)?;
    curves(ctx, &mut rec)?;
    if !copy_sections(ctx, &mut rec)? {
        rec.warn("no crack sections found, run extract-crack or compare-crack");
    }
    if !histogram(ctx, &mut rec)? {
        rec.warn("no deviation field found, run compare-crack");
    }
    rec.finish(false)?;
    Ok(())
}
