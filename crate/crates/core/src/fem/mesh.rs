//! Graded tensor-product meshes of quadrilaterals (2D) and hexahedra (3D).

use serde::{Deserialize, Serialize};

use super::geometry::SpecimenGeometry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    /// Plane strain in the x–z plane.
    #[serde(rename = "2d")]
    Two,
    #[serde(rename = "3d")]
    Three,
}

impl Dimension {
    pub fn value(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

/// Box in which the element size is capped at `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementZone {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub h: f64,
}

/// Element size along one axis: the coarse size, reduced near each
/// refined interval and growing linearly with distance from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeField {
    pub coarse: f64,
    pub growth: f64,
    pub intervals: Vec<([f64; 2], f64)>,
}

impl SizeField {
    pub fn at(&self, t: f64) -> f64 {
        self.intervals.iter().fold(self.coarse, |s, ([a, b], h)| {
            let dist = (a - t).max(t - b).max(0.0);
            s.min(h + (self.growth - 1.0) * dist)
        })
    }
}

/// Node positions along [lo, hi] such that every breakpoint is a node and
/// the spacing follows `size` between breakpoints.
pub fn graded_axis(lo: f64, hi: f64, breakpoints: &[f64], size: &SizeField) -> Vec<f64> {
    let tol = 1e-9 * (hi - lo).abs().max(1.0);
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|t| *t > lo + tol && *t < hi - tol)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let mut nodes = vec![lo];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Cumulative ∫ 1/s on a fine sampling of the segment.
        let samples = 400;
        let mut cum = vec![0.0];
        for k in 0..samples {
            let t0 = a + (b - a) * k as f64 / samples as f64;
            let t1 = a + (b - a) * (k + 1) as f64 / samples as f64;
            let mid = 0.5 * (t0 + t1);
            cum.push(cum[k] + (t1 - t0) / size.at(mid));
        }
        let total = cum[samples];
        let n = (total - 1e-9).ceil().max(1.0) as usize;
        for e in 1..n {
            let target = total * e as f64 / n as f64;
            let k = cum.partition_point(|c| *c < target).clamp(1, samples);
            let frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
            nodes.push(a + (b - a) * (k as f64 - 1.0 + frac) / samples as f64);
        }
        nodes.push(b);
    }
    nodes
}

/// Tensor-product grid from which a mesh was cut.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    /// Node coordinates per axis; the y axis holds a single value in 2D.
    pub axes: [Vec<f64>; 3],
    /// Element index of every grid cell, `None` for removed cells.
    pub cells: Vec<Option<usize>>,
}

impl StructuredGrid {
    fn cell_counts(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.axes[a].len().saturating_sub(1).max(1))
    }

    fn interval(axis: &[f64], t: f64) -> Option<(usize, f64)> {
        let n = axis.len();
        if n == 1 {
            return Some((0, 0.0));
        }
        let tol = 1e-9 * (axis[n - 1] - axis[0]);
        if t < axis[0] - tol || t > axis[n - 1] + tol {
            return None;
        }
        let i = axis.partition_point(|v| *v <= t).clamp(1, n - 1) - 1;
        let xi = 2.0 * (t - axis[i]) / (axis[i + 1] - axis[i]) - 1.0;
        Some((i, xi.clamp(-1.0, 1.0)))
    }

    /// Element containing `p` with its local coordinates in [−1, 1]^d.
    /// Points on a shared face are assigned to an existing neighbour.
    pub fn locate(&self, p: [f64; 3], dim: usize) -> Option<(usize, [f64; 3])> {
        let [nx, ny, _] = self.cell_counts();
        let (i, xi) = Self::interval(&self.axes[0], p[0])?;
        let (j, eta) = Self::interval(&self.axes[1], p[1])?;
        let (k, zeta) = Self::interval(&self.axes[2], p[2])?;
        let lookup = |i: usize, j: usize, k: usize| self.cells[(k * ny + j) * nx + i];
        if let Some(e) = lookup(i, j, k) {
            return Some((e, if dim == 2 { [xi, zeta, 0.0] } else { [xi, eta, zeta] }));
        }
        // Try neighbours sharing a face when the point sits on a cell boundary.
        let alts = |idx: usize, loc: f64, n: usize| -> Vec<(usize, f64)> {
            let mut v = vec![(idx, loc)];
            if loc <= -1.0 + 1e-9 && idx > 0 {
                v.push((idx - 1, 1.0));
            }
            if loc >= 1.0 - 1e-9 && idx + 1 < n {
                v.push((idx + 1, -1.0));
            }
            v
        };
        let nz = self.cell_counts()[2];
        for (ii, a) in alts(i, xi, nx) {
            for (jj, b) in alts(j, eta, ny) {
                for (kk, c) in alts(k, zeta, nz) {
                    if let Some(e) = lookup(ii, jj, kk) {
                        return Some((e, if dim == 2 { [a, c, 0.0] } else { [a, b, c] }));
                    }
                }
            }
        }
        None
    }
}

/// Conforming mesh of bilinear quadrilaterals or trilinear hexahedra.
///
/// Coordinates are always stored as (x, y, z); in 2D every node has y equal
/// to the section position and the element plane is x–z.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    coords: Vec<[f64; 3]>,
    conn: Vec<usize>,
    grid: Option<StructuredGrid>,
}

pub const QUAD_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
pub const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

impl Mesh {
    pub fn new(dim: usize, coords: Vec<[f64; 3]>, conn: Vec<usize>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Geometry(format!("unsupported dimension {dim}")));
        }
        let npe = 1 << dim;
        if conn.len() % npe != 0 || conn.iter().any(|&n| n >= coords.len()) {
            return Err(Error::Geometry("connectivity does not match node count".into()));
        }
        let mut mesh = Self { dim, coords, conn, grid: None };
        mesh.grid = mesh.detect_grid();
        Ok(mesh)
    }

    /// Full tensor-product grid over the given axes, keeping only cells whose
    /// centroid satisfies `keep`. Unused nodes are dropped. In 2D, `ys` must
    /// hold exactly one value.
    pub fn structured(
        dim: usize,
        xs: &[f64],
        ys: &[f64],
        zs: &[f64],
        keep: impl Fn([f64; 3]) -> bool,
    ) -> Result<Self> {
        Self::structured_boxes(dim, xs, ys, zs, |lo, hi| keep([0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a]))))
    }

    /// Like [`Mesh::structured`] with `keep` seeing the cell bounds. In 2D
    /// the y bounds both equal the single section position.
    pub fn structured_boxes(
        dim: usize,
        xs: &[f64],
        ys: &[f64],
        zs: &[f64],
        keep: impl Fn([f64; 3], [f64; 3]) -> bool,
    ) -> Result<Self> {
        if (dim == 2 && ys.len() != 1) || (dim == 3 && ys.len() < 2) || xs.len() < 2 || zs.len() < 2 {
            return Err(Error::Geometry("axis sizes incompatible with dimension".into()));
        }
        for axis in [xs, ys, zs] {
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Geometry("axis coordinates must increase".into()));
            }
        }
        let (nx, ny, nz) = (xs.len(), ys.len(), zs.len());
        let grid_node = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
        let (cx, cy, cz) = (nx - 1, if dim == 2 { 1 } else { ny - 1 }, nz - 1);
        let mut cells = vec![None; cx * cy * cz];
        let mut used = vec![usize::MAX; nx * ny * nz];
        let mut coords = Vec::new();
        let mut conn = Vec::new();
        let mut n_elem = 0;
        for k in 0..cz {
            for j in 0..cy {
                for i in 0..cx {
                    let (y0, y1) = if dim == 2 { (ys[0], ys[0]) } else { (ys[j], ys[j + 1]) };
                    if !keep([xs[i], y0, zs[k]], [xs[i + 1], y1, zs[k + 1]]) {
                        continue;
                    }
                    let corners: Vec<usize> = if dim == 2 {
                        vec![grid_node(i, 0, k), grid_node(i + 1, 0, k), grid_node(i + 1, 0, k + 1), grid_node(i, 0, k + 1)]
                    } else {
                        HEX_CORNERS
                            .iter()
                            .map(|l| {
                                let o = |v: f64| if v > 0.0 { 1 } else { 0 };
                                grid_node(i + o(l[0]), j + o(l[1]), k + o(l[2]))
                            })
                            .collect()
                    };
                    for g in corners {
                        if used[g] == usize::MAX {
                            used[g] = coords.len();
                            let gi = g % nx;
                            let gj = (g / nx) % ny;
                            let gk = g / (nx * ny);
                            coords.push([xs[gi], ys[gj], zs[gk]]);
                        }
                        conn.push(used[g]);
                    }
                    cells[(k * cy + j) * cx + i] = Some(n_elem);
                    n_elem += 1;
                }
            }
        }
        if n_elem == 0 {
            return Err(Error::Geometry("mesh has no elements".into()));
        }
        let grid = StructuredGrid { axes: [xs.to_vec(), ys.to_vec(), zs.to_vec()], cells };
        Ok(Self { dim, coords, conn, grid: Some(grid) })
    }

    /// Recovers the tensor-product structure of axis-aligned meshes, e.g.
    /// after reading one back from disk.
    fn detect_grid(&self) -> Option<StructuredGrid> {
        let axis_values = |a: usize| {
            let mut v: Vec<f64> = self.coords.iter().map(|c| c[a]).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
            v
        };
        let axes = [axis_values(0), axis_values(1), axis_values(2)];
        if (self.dim == 2 && axes[1].len() != 1) || (self.dim == 3 && axes[1].len() < 2) {
            return None;
        }
        let counts = [0, 1, 2].map(|a| axes[a].len().saturating_sub(1).max(1));
        let mut cells = vec![None; counts.iter().product()];
        let find = |a: usize, v: f64| axes[a].binary_search_by(|x| x.total_cmp(&v)).ok();
        let corners: Vec<[f64; 3]> = if self.dim == 2 {
            QUAD_CORNERS.iter().map(|c| [c[0], 0.0, c[1]]).collect()
        } else {
            HEX_CORNERS.to_vec()
        };
        for e in 0..self.num_elements() {
            let nodes = self.element(e);
            let first = self.coords[nodes[0]];
            let mut idx = [0usize; 3];
            for a in 0..3 {
                idx[a] = find(a, first[a])?;
            }
            // Every corner must sit on the matching neighbouring grid line.
            for (n, c) in nodes.iter().zip(&corners) {
                for a in 0..3 {
                    if self.dim == 2 && a == 1 {
                        continue;
                    }
                    let want = idx[a] + usize::from(c[a] > 0.0);
                    if find(a, self.coords[*n][a])? != want {
                        return None;
                    }
                }
            }
            let j = if self.dim == 2 { 0 } else { idx[1] };
            let slot = (idx[2] * counts[1] + j) * counts[0] + idx[0];
            if cells[slot].replace(e).is_some() {
                return None;
            }
        }
        Some(StructuredGrid { axes, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_element(&self) -> usize {
        1 << self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_elements(&self) -> usize {
        self.conn.len() / self.nodes_per_element()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn node(&self, n: usize) -> [f64; 3] {
        self.coords[n]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let npe = self.nodes_per_element();
        &self.conn[e * npe..(e + 1) * npe]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.conn.chunks(self.nodes_per_element())
    }

    pub fn connectivity(&self) -> &[usize] {
        &self.conn
    }

    pub fn grid(&self) -> Option<&StructuredGrid> {
        self.grid.as_ref()
    }

    /// In-plane (2D) or spatial (3D) coordinates of an element's nodes.
    pub fn element_coords(&self, e: usize) -> Vec<[f64; 3]> {
        self.element(e)
            .iter()
            .map(|&n| {
                let c = self.coords[n];
                if self.dim == 2 { [c[0], c[2], 0.0] } else { c }
            })
            .collect()
    }

    /// Largest distance between two nodes of the element.
    pub fn element_diameter(&self, e: usize) -> f64 {
        let pts = self.element(e);
        let mut d: f64 = 0.0;
        for (a, &p) in pts.iter().enumerate() {
            for &q in &pts[a + 1..] {
                let (p, q) = (self.coords[p], self.coords[q]);
                d = d.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt());
            }
        }
        d
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        let nodes = self.element(e);
        let mut c = [0.0; 3];
        for &n in nodes {
            for a in 0..3 {
                c[a] += self.coords[n][a];
            }
        }
        c.map(|v| v / nodes.len() as f64)
    }

    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in &self.coords {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        (lo, hi)
    }

    /// Nodes satisfying a coordinate predicate.
    pub fn select_nodes(&self, pred: impl Fn([f64; 3]) -> bool) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&n| pred(self.coords[n])).collect()
    }

    /// Interpolates a nodal field at `p`; `None` outside the mesh or when the
    /// mesh has no tensor-product structure.
    pub fn interpolate(&self, field: &[f64], p: [f64; 3]) -> Option<f64> {
        let (e, loc) = self.grid.as_ref()?.locate(p, self.dim)?;
        let nodes = self.element(e);
        let n = super::element::shape_values(self.dim, loc);
        Some(nodes.iter().zip(n.iter()).map(|(&a, na)| field[a] * na).sum())
    }
}

/// Element sizes and refinement for specimen meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub dimension: Dimension,
    /// Size in the crack corridor, mm.
    pub h_fine: f64,
    /// Size far from the corridor, mm.
    pub h_coarse: f64,
    /// Growth of the element size per unit distance from a refined zone.
    #[serde(default = "default_growth")]
    pub growth: f64,
    /// Half-width in x of the refined corridor around the notch, mm.
    #[serde(default = "default_corridor")]
    pub corridor_half_width: f64,
    /// Element size through the thickness (3D), mm; defaults to `h_fine`.
    #[serde(default)]
    pub thickness_size: Option<f64>,
    /// Additional refinement boxes.
    #[serde(default)]
    pub zones: Vec<RefinementZone>,
}

fn default_growth() -> f64 {
    1.3
}

fn default_corridor() -> f64 {
    2.5
}

impl MeshSpec {
    pub fn new(dimension: Dimension, h_fine: f64, h_coarse: f64) -> Self {
        Self {
            dimension,
            h_fine,
            h_coarse,
            growth: default_growth(),
            corridor_half_width: default_corridor(),
            thickness_size: None,
            zones: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h_fine > 0.0 && self.h_coarse >= self.h_fine) {
            return Err(Error::Geometry(format!(
                "need 0 < h_fine <= h_coarse, got {} and {}",
                self.h_fine, self.h_coarse
            )));
        }
        if !(self.growth > 1.0) {
            return Err(Error::Geometry("growth factor must exceed 1".into()));
        }
        if self.zones.iter().any(|z| !(z.h > 0.0)) {
            return Err(Error::Geometry("zone sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Mesh of a notched beam with its boundary and pinned node sets.
#[derive(Debug, Clone)]
pub struct SpecimenMesh {
    pub geometry: SpecimenGeometry,
    pub mesh: Mesh,
    /// Out-of-plane thickness applied to 2D integrals; 1 in 3D.
    pub thickness: f64,
    pub supports: [Vec<usize>; 2],
    pub load: Vec<usize>,
    /// Nodes within the pinned radius of a rod line.
    pub pinned: Vec<usize>,
    /// Size of the refined corridor, recorded for audits.
    pub corridor: RefinementZone,
}

/// Builds the specimen mesh with the notch cut out as a void.
pub fn build_specimen_mesh(geom: &SpecimenGeometry, spec: &MeshSpec) -> Result<SpecimenMesh> {
    geom.validate()?;
    spec.validate()?;
    let dim = spec.dimension.value();
    let (l, h, w) = (geom.length, geom.height, geom.width);
    let notch = match spec.dimension {
        Dimension::Two => geom.notch.map(|n| n.mid_section(w)),
        Dimension::Three => geom.notch,
    };
    let (cx0, cx1) = match &notch {
        Some(n) => n.x_extent(w),
        None => (geom.load_offset, geom.load_offset),
    };
    let corridor = RefinementZone {
        x: [
            (cx0 - spec.corridor_half_width).max(-0.5 * l),
            (cx1 + spec.corridor_half_width).min(0.5 * l),
        ],
        y: [0.0, w],
        z: [0.0, h],
        h: spec.h_fine,
    };
    let mut zones = vec![corridor];
    zones.extend(spec.zones.iter().copied());
    for z in &zones {
        if z.x[0] >= z.x[1] || z.z[0] >= z.z[1] {
            return Err(Error::Geometry(format!("empty refinement zone {z:?}")));
        }
    }
    let field = |axis: usize| SizeField {
        coarse: spec.h_coarse,
        growth: spec.growth,
        intervals: zones
            .iter()
            .map(|z| ([z.x, z.y, z.z][axis], z.h))
            .collect(),
    };

    let mut xb: Vec<f64> = geom.rod_lines().iter().map(|r| r.0).collect();
    let mut zb = vec![];
    for z in &zones {
        xb.extend(z.x);
        zb.extend(z.z);
    }
    if let Some(n) = &notch {
        if dim == 2 {
            xb.extend([n.offset - n.half_section(), n.offset + n.half_section()]);
            zb.push(n.depth_at(0.5 * w, w));
        } else if n.inclination_deg == 90.0 {
            xb.extend([n.offset - n.half_section(), n.offset + n.half_section()]);
        }
        if dim == 3 {
            zb.extend([n.depth_at(0.0, w), n.depth_at(w, w)]);
        }
    }
    let xs = graded_axis(-0.5 * l, 0.5 * l, &xb, &field(0));
    let zs = graded_axis(0.0, h, &zb, &field(2));
    let ys = match spec.dimension {
        Dimension::Two => vec![0.5 * w],
        Dimension::Three => {
            let hy = spec.thickness_size.unwrap_or(spec.h_fine);
            let n = (w / hy - 1e-9).ceil().max(1.0) as usize;
            (0..=n).map(|j| w * j as f64 / n as f64).collect()
        }
    };
    // Any cell the notch cuts into is removed. With centroid tests an
    // inclined notch on coarse through-thickness layers breaks up into
    // slots that do not connect from one layer to the next.
    let mesh = Mesh::structured_boxes(dim, &xs, &ys, &zs, |lo, hi| match &notch {
        Some(n) => !n.overlaps_box(lo, hi, w),
        None => true,
    })?;

    let tol = 1e-9 * l;
    let [s0, s1] = geom.support_x();
    let on_line = |x0: f64, z0: f64| move |c: [f64; 3]| (c[0] - x0).abs() < tol && (c[2] - z0).abs() < tol;
    let supports = [mesh.select_nodes(on_line(s0, 0.0)), mesh.select_nodes(on_line(s1, 0.0))];
    let load = mesh.select_nodes(on_line(geom.load_offset, h));
    if supports.iter().any(|s| s.is_empty()) || load.is_empty() {
        return Err(Error::Geometry("rod lines do not coincide with mesh nodes".into()));
    }
    let rods = geom.rod_lines();
    let r2 = geom.pinned_radius * geom.pinned_radius * (1.0 + 1e-12);
    let pinned = mesh.select_nodes(|c| {
        rods.iter()
            .any(|(x, z)| (c[0] - x).powi(2) + (c[2] - z).powi(2) <= r2)
    });
    Ok(SpecimenMesh {
        geometry: geom.clone(),
        mesh,
        thickness: if dim == 2 { w } else { 1.0 },
        supports,
        load,
        pinned,
        corridor,
    })
}
