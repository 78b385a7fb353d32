//! Surface files: CSV rows (y_mm, z_mm, x_mm) for defined nodes, and legacy
//! VTK structured points for viewing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CrackSurface, DeviationField, SurfaceKind};
use crate::error::{Error, Result};

pub fn surface_to_csv(surface: &CrackSurface) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["y_mm", "z_mm", "x_mm"]).map_err(csv_err)?;
    for (_, [x, y, z]) in surface.nodes() {
        w.write_record([y.to_string(), z.to_string(), x.to_string()]).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?).map_err(|e| Error::Data(e.to_string()))
}

pub fn write_surface_csv(path: &Path, surface: &CrackSurface) -> Result<()> {
    fs::write(path, surface_to_csv(surface)?)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

/// Reads (y, z, x) rows and rebuilds the lattice. The step is the smallest
/// spacing between distinct coordinates unless given.
pub fn parse_surface_csv(text: &str, origin: &str, step: Option<f64>, kind: SurfaceKind) -> Result<CrackSurface> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { path: origin.into(), line, message: e.to_string() })?;
        if rec.len() < 3 {
            return Err(Error::Parse { path: origin.into(), line, message: "expected y_mm, z_mm, x_mm".into() });
        }
        let mut v = [0.0; 3];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = rec[k].parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                path: origin.into(),
                line,
                message: format!("'{}' is not a finite number", &rec[k]),
            })?;
        }
        rows.push((line, v));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{origin}: no surface points")));
    }
    let spacing = |vals: &mut Vec<f64>| -> Option<f64> {
        vals.sort_by(f64::total_cmp);
        vals.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        vals.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp)
    };
    let mut ys: Vec<f64> = rows.iter().map(|r| r.1[0]).collect();
    let mut zs: Vec<f64> = rows.iter().map(|r| r.1[1]).collect();
    let (dy, dz) = (spacing(&mut ys), spacing(&mut zs));
    let step = step
        .or(match (dy, dz) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        })
        .ok_or_else(|| Error::Data(format!("{origin}: cannot infer the lattice step from one point")))?;
    let (y0, z0) = (ys[0], zs[0]);
    let index = |t: f64, t0: f64, line: usize| -> Result<usize> {
        let s = (t - t0) / step;
        if (s - s.round()).abs() > 1e-6 {
            return Err(Error::Parse { path: origin.into(), line, message: format!("{t} is off the {step} mm lattice") });
        }
        Ok(s.round() as usize)
    };
    let mut indexed = Vec::with_capacity(rows.len());
    for (line, [y, z, x]) in rows {
        indexed.push((line, index(z, z0, line)?, index(y, y0, line)?, x));
    }
    let shape = [
        indexed.iter().map(|r| r.1).max().unwrap() + 1,
        indexed.iter().map(|r| r.2).max().unwrap() + 1,
    ];
    let mut values = vec![None; shape[0] * shape[1]];
    for (line, iz, iy, x) in indexed {
        if values[iz * shape[1] + iy].replace(x).is_some() {
            return Err(Error::Parse { path: origin.into(), line, message: "duplicate lattice node".into() });
        }
    }
    CrackSurface::new(kind, step, [z0, y0], shape, values)
}

pub fn read_surface_csv(path: &Path, step: Option<f64>, kind: SurfaceKind) -> Result<CrackSurface> {
    parse_surface_csv(&fs::read_to_string(path)?, &path.display().to_string(), step, kind)
}

/// Structured points with axes (x, y, z) = (crack-normal, thickness,
/// height); the crack-normal axis has a single layer and the surface value
/// is stored as a scalar, NaN where undefined.
pub fn surface_to_vtk(surface: &CrackSurface, deviation: Option<&DeviationField>, title: &str) -> String {
    let [nz, ny] = surface.shape;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS 1 {ny} {nz}");
    let _ = writeln!(s, "ORIGIN 0 {} {}", surface.origin[1], surface.origin[0]);
    let _ = writeln!(s, "SPACING 1 {} {}", surface.step, surface.step);
    let _ = writeln!(s, "POINT_DATA {}", nz * ny);
    let mut scalars = |name: &str, vals: &[Option<f64>]| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in vals {
            let _ = writeln!(s, "{}", v.unwrap_or(f64::NAN));
        }
    };
    scalars("crack_x", &surface.values);
    if let Some(dev) = deviation {
        scalars("deviation", &dev.values);
    }
    s
}

pub fn write_surface_vtk(path: &Path, surface: &CrackSurface, deviation: Option<&DeviationField>, title: &str) -> Result<()> {
    fs::write(path, surface_to_vtk(surface, deviation, title))?;
    Ok(())
}

/// Lattice points as a VTK point cloud.
pub fn points_to_vtk(points: &[[f64; 3]], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA\nPOINTS {} double", points.len());
    for p in points {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "VERTICES {} {}", points.len(), 2 * points.len());
    for i in 0..points.len() {
        let _ = writeln!(s, "1 {i}");
    }
    s
}
