//! Crack-surface metrology: broken-region extraction from a damage field,
//! limit and average surfaces on a regular lattice, cleaning and alignment
//! of measured scans, and nearest-point deviation between surfaces.

mod deviation;
pub mod io;
pub mod scan;

pub use deviation::{deviation, DeviationField, PointIndex, HASH_CELL};
pub use scan::{align_and_average_scans, clean_scan, AnchoredScan, CleanParams};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Mesh;

/// Lattice spacing used for all extracted surfaces, mm.
pub const LATTICE_STEP: f64 = 0.1;
/// Damage level regarded as broken.
pub const BROKEN_THRESHOLD: f64 = 0.95;
/// Damage level below which points are hidden in visual exports.
pub const DISPLAY_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    MinLimit,
    MaxLimit,
    Average,
    Scan,
}

/// Crack-normal coordinate x over a regular (z, y) lattice. Nodes without a
/// crack are undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackSurface {
    pub kind: SurfaceKind,
    pub step: f64,
    /// Coordinates (z, y) of node (0, 0).
    pub origin: [f64; 2],
    /// Node counts along z and y.
    pub shape: [usize; 2],
    /// Row-major in z: index iz * ny + iy.
    pub values: Vec<Option<f64>>,
}

impl CrackSurface {
    pub fn new(
        kind: SurfaceKind,
        step: f64,
        origin: [f64; 2],
        shape: [usize; 2],
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Parameter(format!("lattice step must be positive, got {step}")));
        }
        if shape[0] * shape[1] != values.len() {
            return Err(Error::Data(format!(
                "lattice {}×{} does not match {} values",
                shape[0],
                shape[1],
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("surface values must be finite".into()));
        }
        Ok(Self { kind, step, origin, shape, values })
    }

    /// Surface sampled from a function on the lattice.
    pub fn from_fn(
        kind: SurfaceKind,
        step: f64,
        origin: [f64; 2],
        shape: [usize; 2],
        f: impl Fn(f64, f64) -> Option<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(shape[0] * shape[1]);
        for iz in 0..shape[0] {
            for iy in 0..shape[1] {
                values.push(f(origin[0] + iz as f64 * step, origin[1] + iy as f64 * step));
            }
        }
        Self::new(kind, step, origin, shape, values)
    }

    pub fn z(&self, iz: usize) -> f64 {
        self.origin[0] + iz as f64 * self.step
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.origin[1] + iy as f64 * self.step
    }

    pub fn get(&self, iz: usize, iy: usize) -> Option<f64> {
        self.values[iz * self.shape[1] + iy]
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().flatten().count()
    }

    /// Defined nodes as (x, y, z) points.
    pub fn points(&self) -> Vec<[f64; 3]> {
        self.nodes().map(|(_, p)| p).collect()
    }

    /// Defined nodes with their value index.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, [f64; 3])> + '_ {
        self.values.iter().enumerate().filter_map(move |(k, v)| {
            v.map(|x| (k, [x, self.y(k % self.shape[1]), self.z(k / self.shape[1])]))
        })
    }

    pub fn same_lattice(&self, other: &CrackSurface) -> bool {
        let tol = 1e-9 * self.step;
        self.shape == other.shape
            && (self.step - other.step).abs() <= tol
            && (self.origin[0] - other.origin[0]).abs() <= tol
            && (self.origin[1] - other.origin[1]).abs() <= tol
    }

    /// Rigid translation by (dx, dy, dz).
    pub fn translated(&self, shift: [f64; 3]) -> CrackSurface {
        CrackSurface {
            origin: [self.origin[0] + shift[2], self.origin[1] + shift[1]],
            values: self.values.iter().map(|v| v.map(|x| x + shift[0])).collect(),
            ..self.clone()
        }
    }

    /// Bilinear interpolation at (z, y); undefined unless every node that
    /// contributes is defined. A single-node axis accepts any coordinate.
    pub fn sample(&self, z: f64, y: f64) -> Option<f64> {
        let axis = |t: f64, t0: f64, n: usize| -> Option<(usize, f64)> {
            if n == 1 {
                return Some((0, 0.0));
            }
            let mut s = (t - t0) / self.step;
            if (s - s.round()).abs() < 1e-9 {
                s = s.round();
            }
            if s < 0.0 || s > (n - 1) as f64 {
                return None;
            }
            let i = (s.floor() as usize).min(n - 2);
            Some((i, s - i as f64))
        };
        let (iz, fz) = axis(z, self.origin[0], self.shape[0])?;
        let (iy, fy) = axis(y, self.origin[1], self.shape[1])?;
        let mut acc = 0.0;
        for (dz, wz) in [(0, 1.0 - fz), (1, fz)] {
            for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                let w = wz * wy;
                if w == 0.0 {
                    continue;
                }
                acc += w * self.get(iz + dz, iy + dy)?;
            }
        }
        Some(acc)
    }
}

/// Lattice points, as integer multiples of the step, where the damage is
/// at or above a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokenRegion {
    pub step: f64,
    /// Coordinates of index (0, 0, 0); y carries the section position in 2D.
    pub origin: [f64; 3],
    /// Sorted (ix, iy, iz).
    pub points: Vec<[i64; 3]>,
}

impl BrokenRegion {
    pub fn coords(&self, p: [i64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.origin[a] + p[a] as f64 * self.step)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Samples the nodal damage field with the element shape functions at every
/// lattice point inside the mesh and keeps those with d ≥ `threshold`.
pub fn broken_region(mesh: &Mesh, d: &[f64], threshold: f64, step: f64) -> Result<BrokenRegion> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Parameter(format!("damage threshold must lie in (0, 1), got {threshold}")));
    }
    if !(step > 0.0) {
        return Err(Error::Parameter(format!("lattice step must be positive, got {step}")));
    }
    if d.len() != mesh.num_nodes() {
        return Err(Error::Data(format!("damage field has {} values for {} nodes", d.len(), mesh.num_nodes())));
    }
    if mesh.grid().is_none() {
        return Err(Error::Geometry("broken-region sampling needs a tensor-product mesh".into()));
    }
    let dim = mesh.dim();
    let section = mesh.bounding_box().0[1];
    let origin = if dim == 2 { [0.0, section, 0.0] } else { [0.0; 3] };
    let mut found = std::collections::BTreeSet::new();
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element(e);
        // Shape functions are a partition of unity with values in [0, 1].
        if nodes.iter().all(|&n| d[n] < threshold) {
            continue;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &n in nodes {
            let c = mesh.node(n);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let range = |a: usize| -> (i64, i64) {
            if dim == 2 && a == 1 {
                return (0, 0);
            }
            let eps = 1e-9;
            (((lo[a] - origin[a]) / step - eps).ceil() as i64, ((hi[a] - origin[a]) / step + eps).floor() as i64)
        };
        let (rx, ry, rz) = (range(0), range(1), range(2));
        for ix in rx.0..=rx.1 {
            for iy in ry.0..=ry.1 {
                for iz in rz.0..=rz.1 {
                    let idx = [ix, iy, iz];
                    if found.contains(&idx) {
                        continue;
                    }
                    let p = [0, 1, 2].map(|a| origin[a] + idx[a] as f64 * step);
                    if mesh.interpolate(d, p).is_some_and(|v| v >= threshold) {
                        found.insert(idx);
                    }
                }
            }
        }
    }
    Ok(BrokenRegion { step, origin, points: found.into_iter().collect() })
}

/// Smallest and largest crack-normal coordinate of the broken points in
/// each (z, y) column, on the bounding lattice of the region.
pub fn limit_surfaces(region: &BrokenRegion) -> Result<(CrackSurface, CrackSurface)> {
    if region.is_empty() {
        return Err(Error::Data("broken region is empty".into()));
    }
    let mut columns: BTreeMap<(i64, i64), (i64, i64)> = BTreeMap::new();
    for &[ix, iy, iz] in &region.points {
        let e = columns.entry((iz, iy)).or_insert((ix, ix));
        e.0 = e.0.min(ix);
        e.1 = e.1.max(ix);
    }
    let z0 = columns.keys().map(|k| k.0).min().unwrap();
    let z1 = columns.keys().map(|k| k.0).max().unwrap();
    let y0 = columns.keys().map(|k| k.1).min().unwrap();
    let y1 = columns.keys().map(|k| k.1).max().unwrap();
    let shape = [(z1 - z0 + 1) as usize, (y1 - y0 + 1) as usize];
    let origin = [
        region.origin[2] + z0 as f64 * region.step,
        region.origin[1] + y0 as f64 * region.step,
    ];
    let mut lo = vec![None; shape[0] * shape[1]];
    let mut hi = vec![None; shape[0] * shape[1]];
    for (&(iz, iy), &(a, b)) in &columns {
        let k = (iz - z0) as usize * shape[1] + (iy - y0) as usize;
        lo[k] = Some(region.origin[0] + a as f64 * region.step);
        hi[k] = Some(region.origin[0] + b as f64 * region.step);
    }
    Ok((
        CrackSurface::new(SurfaceKind::MinLimit, region.step, origin, shape, lo)?,
        CrackSurface::new(SurfaceKind::MaxLimit, region.step, origin, shape, hi)?,
    ))
}

/// Pointwise midpoint of two limit surfaces.
pub fn average_surface(min: &CrackSurface, max: &CrackSurface) -> Result<CrackSurface> {
    if !min.same_lattice(max) {
        return Err(Error::Alignment("limit surfaces live on different lattices".into()));
    }
    let values = min
        .values
        .iter()
        .zip(&max.values)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Ok(Some(0.5 * (a + b))),
            (None, None) => Ok(None),
            _ => Err(Error::Alignment("limit surfaces are defined on different nodes".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    CrackSurface::new(SurfaceKind::Average, min.step, min.origin, min.shape, values)
}

/// Broken region and the three surfaces derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackExtraction {
    pub region: BrokenRegion,
    pub min: CrackSurface,
    pub max: CrackSurface,
    pub average: CrackSurface,
}

pub fn extract_crack(mesh: &Mesh, d: &[f64], threshold: f64, step: f64) -> Result<CrackExtraction> {
    let region = broken_region(mesh, d, threshold, step)?;
    let (min, max) = limit_surfaces(&region)?;
    let average = average_surface(&min, &max)?;
    Ok(CrackExtraction { region, min, max, average })
}

/// Largest variation of the crack position across the thickness over all
/// heights: max over z of (max_y x − min_y x).
pub fn thickness_spread(surface: &CrackSurface) -> f64 {
    (0..surface.shape[0])
        .filter_map(|iz| {
            let row: Vec<f64> = (0..surface.shape[1]).filter_map(|iy| surface.get(iz, iy)).collect();
            (row.len() >= 2).then(|| {
                row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - row.iter().cloned().fold(f64::INFINITY, f64::min)
            })
        })
        .fold(0.0, f64::max)
}

/// Horizontal cut of a surface: (y, x) pairs at height z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub z: f64,
    pub polyline: Vec<(f64, f64)>,
}

pub fn sections(surface: &CrackSurface, cuts: &[(String, f64)]) -> Vec<Section> {
    cuts.iter()
        .map(|(name, z)| Section {
            name: name.clone(),
            z: *z,
            polyline: (0..surface.shape[1])
                .filter_map(|iy| {
                    let y = surface.y(iy);
                    surface.sample(*z, y).map(|x| (y, x))
                })
                .collect(),
        })
        .collect()
}
