//! Cleaning, normalization and averaging of repeated experimental curves.

use serde::{Deserialize, Serialize};

use crate::curve::{interpolate, LoadDeflectionCurve};
use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING_WINDOW: usize = 11;
pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Centered moving average of the force with `window` samples. Near the
/// ends the window shrinks symmetrically, so the first and last samples
/// are kept as they are. Deflections are untouched.
pub fn smooth(curve: &LoadDeflectionCurve, window: usize) -> Result<LoadDeflectionCurve> {
    let n = curve.len();
    if window == 0 || window % 2 == 0 || window > n {
        return Err(Error::Parameter(format!(
            "smoothing window must be odd and within 1..={n}, got {window}"
        )));
    }
    let f = curve.forces();
    let half = window / 2;
    let smoothed = (0..n)
        .map(|i| {
            let k = half.min(i).min(n - 1 - i);
            f[i - k..=i + k].iter().sum::<f64>() / (2 * k + 1) as f64
        })
        .collect();
    LoadDeflectionCurve::new(curve.tag(), curve.deflections().to_vec(), smoothed)
}

/// A curve expressed in units of its own peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCurve {
    /// Peak at (1, 1), origin at (0, ·).
    pub curve: LoadDeflectionCurve,
    /// Deflection at the peak measured from the shifted origin, mm.
    pub peak_deflection: f64,
    pub peak_force: f64,
}

/// Moves the origin to the last sample before the force becomes and stays
/// positive up to the peak, drops earlier samples, and divides by the peak
/// deflection (from the new origin) and force.
pub fn normalize_and_shift(curve: &LoadDeflectionCurve) -> Result<NormalizedCurve> {
    let (_, f_peak) = curve.peak();
    let ip = curve.peak_index();
    if !(f_peak > 0.0) {
        return Err(Error::DegenerateCurve(format!("curve '{}' has no positive peak", curve.tag())));
    }
    let f = curve.forces();
    let u = curve.deflections();
    let start = f[..ip].iter().rposition(|v| *v <= 0.0).unwrap_or(0);
    let u0 = u[start];
    let u_peak = u[ip] - u0;
    if !(u_peak > 0.0) {
        return Err(Error::DegenerateCurve(format!(
            "curve '{}' peaks at its own origin",
            curve.tag()
        )));
    }
    let un = u[start..].iter().map(|v| (v - u0) / u_peak).collect();
    let fnorm = f[start..].iter().map(|v| v / f_peak).collect();
    Ok(NormalizedCurve {
        curve: LoadDeflectionCurve::new(curve.tag(), un, fnorm)?,
        peak_deflection: u_peak,
        peak_force: f_peak,
    })
}

/// Mean of normalized repetitions on a common grid, rescaled by the mean
/// peak deflection and force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedCurve {
    /// Equidistant normalized deflections starting at 0.
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub peak_deflection: f64,
    pub peak_force: f64,
    /// The average in physical units.
    pub curve: LoadDeflectionCurve,
}

/// Common grid k·step up to the shortest normalized extent.
fn common_grid(curves: &[NormalizedCurve], step: f64) -> Result<Vec<f64>> {
    if curves.is_empty() {
        return Err(Error::Parameter("no curves to average".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Parameter(format!("grid step must be positive, got {step}")));
    }
    let end = curves.iter().map(|c| c.curve.domain().1).fold(f64::INFINITY, f64::min);
    let n = (end / step * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * step).filter(|x| *x <= end).collect())
}

fn resample(c: &NormalizedCurve, grid: &[f64]) -> Vec<f64> {
    let (u, f) = (c.curve.deflections(), c.curve.forces());
    grid.iter().map(|x| interpolate(u, f, *x).unwrap_or(f[f.len() - 1])).collect()
}

pub fn average_repetitions(curves: &[NormalizedCurve], step: f64) -> Result<AveragedCurve> {
    let grid = common_grid(curves, step)?;
    let n = curves.len() as f64;
    let mut mean = vec![0.0; grid.len()];
    for c in curves {
        for (m, v) in mean.iter_mut().zip(resample(c, &grid)) {
            *m += v / n;
        }
    }
    let peak_deflection = curves.iter().map(|c| c.peak_deflection).sum::<f64>() / n;
    let peak_force = curves.iter().map(|c| c.peak_force).sum::<f64>() / n;
    let tag = curves.iter().map(|c| c.curve.tag()).collect::<Vec<_>>().join("+");
    let curve = LoadDeflectionCurve::new(
        format!("average({tag})"),
        grid.iter().map(|x| x * peak_deflection).collect(),
        mean.iter().map(|y| y * peak_force).collect(),
    )?;
    Ok(AveragedCurve { grid, mean, peak_deflection, peak_force, curve })
}

/// Pointwise min and max of the rescaled repetitions on the averaging grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub deflection: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn envelope(curves: &[NormalizedCurve], step: f64) -> Result<Envelope> {
    let avg = average_repetitions(curves, step)?;
    let mut lower = vec![f64::INFINITY; avg.grid.len()];
    let mut upper = vec![f64::NEG_INFINITY; avg.grid.len()];
    for c in curves {
        for (i, v) in resample(c, &avg.grid).into_iter().enumerate() {
            let f = v * avg.peak_force;
            lower[i] = lower[i].min(f);
            upper[i] = upper[i].max(f);
        }
    }
    Ok(Envelope { deflection: avg.curve.deflections().to_vec(), lower, upper })
}

/// Smooths and normalizes raw repetitions; the window shrinks for curves
/// shorter than it.
pub fn normalize_repetitions(raw: &[LoadDeflectionCurve], window: usize) -> Result<Vec<NormalizedCurve>> {
    raw.iter()
        .map(|c| normalize_and_shift(&smooth(c, window.min(odd_floor(c.len())))?))
        .collect()
}

/// Smooths, normalizes and averages raw repetitions of one test.
pub fn experimental_average(raw: &[LoadDeflectionCurve], window: usize, step: f64) -> Result<AveragedCurve> {
    average_repetitions(&normalize_repetitions(raw, window)?, step)
}

fn odd_floor(n: usize) -> usize {
    if n % 2 == 1 { n } else { n.saturating_sub(1).max(1) }
}
