//! Legacy ASCII VTK unstructured grids with nodal displacement and damage.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::mesh::Mesh;
use crate::error::{Error, Result};

const VTK_QUAD: u8 = 9;
const VTK_HEXAHEDRON: u8 = 12;

/// Nodal fields attached to a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    /// Node-major displacement with `dim` components per node.
    pub displacement: Vec<f64>,
    pub damage: Vec<f64>,
}

pub fn to_string(mesh: &Mesh, fields: &FieldSnapshot, title: &str) -> String {
    let dim = mesh.dim();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "{}", title.replace('\n', " ")).unwrap();
    writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.num_nodes()).unwrap();
    for p in mesh.coords() {
        writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]).unwrap();
    }
    let npe = mesh.nodes_per_element();
    let ne = mesh.num_elements();
    writeln!(s, "CELLS {} {}", ne, ne * (npe + 1)).unwrap();
    for cell in mesh.elements() {
        write!(s, "{npe}").unwrap();
        for n in cell {
            write!(s, " {n}").unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "CELL_TYPES {ne}").unwrap();
    let t = if dim == 2 { VTK_QUAD } else { VTK_HEXAHEDRON };
    for _ in 0..ne {
        writeln!(s, "{t}").unwrap();
    }
    writeln!(s, "POINT_DATA {}", mesh.num_nodes()).unwrap();
    writeln!(s, "SCALARS d double 1\nLOOKUP_TABLE default").unwrap();
    for v in &fields.damage {
        writeln!(s, "{v:e}").unwrap();
    }
    writeln!(s, "VECTORS u double").unwrap();
    for n in 0..mesh.num_nodes() {
        let u = &fields.displacement[n * dim..(n + 1) * dim];
        let (ux, uy, uz) = if dim == 2 { (u[0], 0.0, u[1]) } else { (u[0], u[1], u[2]) };
        writeln!(s, "{ux:e} {uy:e} {uz:e}").unwrap();
    }
    s
}

pub fn write(path: &Path, mesh: &Mesh, fields: &FieldSnapshot, title: &str) -> Result<()> {
    fs::write(path, to_string(mesh, fields, title))?;
    Ok(())
}

/// Reads a file produced by [`write`].
pub fn read(path: &Path) -> Result<(Mesh, FieldSnapshot)> {
    let text = fs::read_to_string(path)?;
    parse(&text, &path.display().to_string())
}

pub fn parse(text: &str, origin: &str) -> Result<(Mesh, FieldSnapshot)> {
    let mut lines = text.lines().enumerate().peekable();
    let err = |line: usize, message: String| Error::Parse { path: origin.to_string(), line: line + 1, message };
    let mut coords = Vec::new();
    let mut conn = Vec::new();
    let mut types = Vec::new();
    let mut damage = Vec::new();
    let mut vectors: Vec<[f64; 3]> = Vec::new();
    let numbers = |line: usize, s: &str| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(line, format!("bad number '{t}'"))))
            .collect()
    };
    while let Some((ln, line)) = lines.next() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("POINTS") => {
                let n: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad POINTS".into()))?;
                while coords.len() < n {
                    let (l, s) = lines.next().ok_or_else(|| err(ln, "truncated POINTS".into()))?;
                    let v = numbers(l, s)?;
                    for c in v.chunks(3) {
                        if c.len() != 3 {
                            return Err(err(l, "point needs 3 coordinates".into()));
                        }
                        coords.push([c[0], c[1], c[2]]);
                    }
                }
            }
            Some("CELLS") => {
                let n: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad CELLS".into()))?;
                for _ in 0..n {
                    let (l, s) = lines.next().ok_or_else(|| err(ln, "truncated CELLS".into()))?;
                    let v = numbers(l, s)?;
                    let k = v.first().copied().unwrap_or(0.0) as usize;
                    if v.len() != k + 1 {
                        return Err(err(l, "cell size mismatch".into()));
                    }
                    conn.push(v[1..].iter().map(|x| *x as usize).collect::<Vec<usize>>());
                }
            }
            Some("CELL_TYPES") => {
                let n: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| err(ln, "bad CELL_TYPES".into()))?;
                for _ in 0..n {
                    let (l, s) = lines.next().ok_or_else(|| err(ln, "truncated CELL_TYPES".into()))?;
                    types.push(s.trim().parse::<u8>().map_err(|_| err(l, "bad cell type".into()))?);
                }
            }
            Some("SCALARS") if parts.next() == Some("d") => {
                lines.next();
                while damage.len() < coords.len() {
                    let (l, s) = lines.next().ok_or_else(|| err(ln, "truncated damage".into()))?;
                    damage.extend(numbers(l, s)?);
                }
            }
            Some("VECTORS") if parts.next() == Some("u") => {
                while vectors.len() < coords.len() {
                    let (l, s) = lines.next().ok_or_else(|| err(ln, "truncated displacement".into()))?;
                    let v = numbers(l, s)?;
                    if v.len() != 3 {
                        return Err(err(l, "vector needs 3 components".into()));
                    }
                    vectors.push([v[0], v[1], v[2]]);
                }
            }
            _ => {}
        }
    }
    let dim = match types.first() {
        Some(&VTK_QUAD) => 2,
        Some(&VTK_HEXAHEDRON) => 3,
        _ => return Err(err(0, "no supported cells (quad or hexahedron)".into())),
    };
    if types.iter().any(|t| *t != types[0]) || conn.iter().any(|c| c.len() != 1 << dim) {
        return Err(err(0, "mixed cell types".into()));
    }
    if damage.len() != coords.len() {
        return Err(err(0, "missing damage point data".into()));
    }
    let displacement = if vectors.is_empty() {
        vec![0.0; coords.len() * dim]
    } else {
        vectors
            .iter()
            .flat_map(|v| if dim == 2 { vec![v[0], v[2]] } else { v.to_vec() })
            .collect()
    };
    let mesh = Mesh::new(dim, coords, conn.concat())?;
    Ok((mesh, FieldSnapshot { displacement, damage }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let xs = [0.0, 0.5, 1.5];
        for dim in [2, 3] {
            let ys: &[f64] = if dim == 2 { &[0.0] } else { &xs };
            let m = Mesh::structured(dim, &xs, ys, &xs, |_| true).unwrap();
            let n = m.num_nodes();
            let f = FieldSnapshot {
                displacement: (0..n * dim).map(|i| i as f64 * 0.125).collect(),
                damage: (0..n).map(|i| i as f64 / n as f64).collect(),
            };
            let text = to_string(&m, &f, "test");
            let (m2, f2) = parse(&text, "mem").unwrap();
            assert_eq!(m2.coords(), m.coords());
            assert_eq!(m2.connectivity(), m.connectivity());
            assert_eq!(f2, f);
            assert!(m2.grid().is_some());
        }
    }
}
