use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CrackSurface, SurfaceKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanParams {
    /// Outlier threshold in multiples of the local median absolute deviation.
    pub k: f64,
    /// Odd side length of the square median window, in nodes.
    pub window: usize,
    /// Node ranges [iz0, iz1) × [iy0, iy1) of a region known to be flat;
    /// its least-squares plane is subtracted. `None` skips plane removal.
    pub reference: Option<[usize; 4]>,
}

impl Default for CleanParams {
    fn default() -> Self {
        Self { k: 5.0, window: 5, reference: None }
    }
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    v.sort_by(f64::total_cmp);
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn window_values(s: &CrackSurface, iz: usize, iy: usize, half: usize, skip: &[bool]) -> Vec<f64> {
    let [nz, ny] = s.shape;
    let mut out = Vec::new();
    for z in iz.saturating_sub(half)..=(iz + half).min(nz - 1) {
        for y in iy.saturating_sub(half)..=(iy + half).min(ny - 1) {
            let k = z * ny + y;
            if let (Some(v), false) = (s.values[k], skip.get(k).copied().unwrap_or(false)) {
                out.push(v);
            }
        }
    }
    out
}

/// Indices of nodes further than k·MAD from the median of their window.
pub fn find_outliers(scan: &CrackSurface, params: &CleanParams) -> Result<Vec<usize>> {
    if params.window == 0 || params.window % 2 == 0 {
        return Err(Error::Parameter(format!("median window must be odd, got {}", params.window)));
    }
    if !(params.k > 0.0) {
        return Err(Error::Parameter(format!("outlier factor must be positive, got {}", params.k)));
    }
    let half = params.window / 2;
    let ny = scan.shape[1];
    let mut out = Vec::new();
    for (k, v) in scan.values.iter().enumerate() {
        let Some(v) = v else { continue };
        let mut w = window_values(scan, k / ny, k % ny, half, &[]);
        let med = median(&mut w);
        let mut dev: Vec<f64> = w.iter().map(|x| (x - med).abs()).collect();
        let mad = median(&mut dev);
        let tol = 1e-12 * (1.0 + med.abs());
        if (v - med).abs() > params.k * mad + tol {
            out.push(k);
        }
    }
    Ok(out)
}

/// Replaces outliers by their local median and removes the plane of the
/// reference region.
pub fn clean_scan(raw: &CrackSurface, params: &CleanParams) -> Result<CrackSurface> {
    let defined = raw.defined_count();
    if defined == 0 {
        return Err(Error::Data("scan has no data".into()));
    }
    let outliers = find_outliers(raw, params)?;
    if outliers.len() == defined {
        return Err(Error::Data("every scan point is an outlier".into()));
    }
    let mut flagged = vec![false; raw.values.len()];
    for &k in &outliers {
        flagged[k] = true;
    }
    let ny = raw.shape[1];
    let half = params.window / 2;
    let mut out = raw.clone();
    for &k in &outliers {
        let mut good = window_values(raw, k / ny, k % ny, half, &flagged);
        if good.is_empty() {
            good = window_values(raw, k / ny, k % ny, half, &[]);
        }
        out.values[k] = Some(median(&mut good));
    }
    if let Some([z0, z1, y0, y1]) = params.reference {
        let mut rows = Vec::new();
        for iz in z0..z1.min(raw.shape[0]) {
            for iy in y0..y1.min(ny) {
                if let Some(x) = out.get(iz, iy) {
                    rows.push((out.z(iz), out.y(iy), x));
                }
            }
        }
        if rows.len() < 3 {
            return Err(Error::Data("reference region holds fewer than 3 points".into()));
        }
        let a = DMatrix::from_fn(rows.len(), 3, |i, j| [1.0, rows[i].0, rows[i].1][j]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2));
        let p = a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::Data(e.to_string()))?;
        for k in 0..out.values.len() {
            if let Some(x) = out.values[k] {
                let (z, y) = (out.z(k / ny), out.y(k % ny));
                out.values[k] = Some(x - (p[0] + p[1] * z + p[2] * y));
            }
        }
    }
    out.kind = SurfaceKind::Scan;
    Ok(out)
}

/// A measured surface with the position of its reference notch-edge point
/// in the scanner frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredScan {
    pub surface: CrackSurface,
    /// (x, y, z), mm.
    pub anchor: [f64; 3],
}

/// Moves every scan so that its anchor lands on `anchor` and averages them
/// on the lattice of the first, wherever all are defined.
pub fn align_and_average_scans(scans: &[AnchoredScan], anchor: [f64; 3]) -> Result<CrackSurface> {
    let Some(first) = scans.first() else {
        return Err(Error::Parameter("no scans to average".into()));
    };
    let moved: Vec<CrackSurface> = scans
        .iter()
        .map(|s| s.surface.translated([0, 1, 2].map(|a| anchor[a] - s.anchor[a])))
        .collect();
    let base = &moved[0];
    let n = moved.len() as f64;
    let mut values = Vec::with_capacity(base.values.len());
    for iz in 0..base.shape[0] {
        for iy in 0..base.shape[1] {
            let (z, y) = (base.z(iz), base.y(iy));
            let sum: Option<f64> = moved.iter().map(|s| s.sample(z, y)).sum();
            values.push(sum.map(|v| v / n));
        }
    }
    if values.iter().all(Option::is_none) {
        return Err(Error::Alignment("aligned scans have no common domain".into()));
    }
    CrackSurface::new(SurfaceKind::Average, first.surface.step, base.origin, base.shape, values)
}
