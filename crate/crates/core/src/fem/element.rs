//! Bilinear/trilinear Lagrange elements with tensor Gauss quadrature.

use nalgebra::{Matrix2, Matrix3};

use super::mesh::{Mesh, HEX_CORNERS, QUAD_CORNERS};
use crate::error::{Error, Result};

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/√3

/// Shape function values at local coordinates (ξ, η[, ζ]).
pub fn shape_values(dim: usize, loc: [f64; 3]) -> Vec<f64> {
    if dim == 2 {
        QUAD_CORNERS
            .iter()
            .map(|c| 0.25 * (1.0 + c[0] * loc[0]) * (1.0 + c[1] * loc[1]))
            .collect()
    } else {
        HEX_CORNERS
            .iter()
            .map(|c| 0.125 * (1.0 + c[0] * loc[0]) * (1.0 + c[1] * loc[1]) * (1.0 + c[2] * loc[2]))
            .collect()
    }
}

/// Local derivatives ∂N_a/∂ξ_k, flattened as [a * dim + k].
pub fn shape_local_gradients(dim: usize, loc: [f64; 3]) -> Vec<f64> {
    let mut g = Vec::with_capacity(dim << dim);
    if dim == 2 {
        for c in QUAD_CORNERS {
            g.push(0.25 * c[0] * (1.0 + c[1] * loc[1]));
            g.push(0.25 * c[1] * (1.0 + c[0] * loc[0]));
        }
    } else {
        for c in HEX_CORNERS {
            let (a, b, d) = (1.0 + c[0] * loc[0], 1.0 + c[1] * loc[1], 1.0 + c[2] * loc[2]);
            g.push(0.125 * c[0] * b * d);
            g.push(0.125 * c[1] * a * d);
            g.push(0.125 * c[2] * a * b);
        }
    }
    g
}

/// 2×2 or 2×2×2 Gauss points, all with unit weight.
pub fn gauss_points(dim: usize) -> Vec<[f64; 3]> {
    let s = [-GAUSS, GAUSS];
    let mut pts = Vec::new();
    if dim == 2 {
        for b in s {
            for a in s {
                pts.push([a, b, 0.0]);
            }
        }
    } else {
        for c in s {
            for b in s {
                for a in s {
                    pts.push([a, b, c]);
                }
            }
        }
    }
    pts
}

/// Shape values, physical gradients, and integration weights at every
/// quadrature point of every element.
#[derive(Debug, Clone)]
pub struct ElementCache {
    pub dim: usize,
    pub npe: usize,
    pub nqp: usize,
    /// N_a at each reference quadrature point, [q * npe + a].
    pub shape: Vec<f64>,
    /// ∂N_a/∂x_k, [((e * nqp + q) * npe + a) * dim + k].
    pub grads: Vec<f64>,
    /// det J × weight × thickness, [e * nqp + q].
    pub weights: Vec<f64>,
}

impl ElementCache {
    /// `thickness` scales 2D integrals to volume; pass 1 in 3D.
    pub fn new(mesh: &Mesh, thickness: f64) -> Result<Self> {
        let dim = mesh.dim();
        let npe = mesh.nodes_per_element();
        let qps = gauss_points(dim);
        let nqp = qps.len();
        let ne = mesh.num_elements();
        let shape: Vec<f64> = qps.iter().flat_map(|q| shape_values(dim, *q)).collect();
        let local: Vec<Vec<f64>> = qps.iter().map(|q| shape_local_gradients(dim, *q)).collect();
        let mut grads = vec![0.0; ne * nqp * npe * dim];
        let mut weights = vec![0.0; ne * nqp];
        for e in 0..ne {
            let xe = mesh.element_coords(e);
            for (q, lg) in local.iter().enumerate() {
                let base = (e * nqp + q) * npe * dim;
                let out = &mut grads[base..base + npe * dim];
                let det = if dim == 2 {
                    let mut j = Matrix2::<f64>::zeros();
                    for a in 0..npe {
                        for r in 0..2 {
                            for c in 0..2 {
                                j[(r, c)] += xe[a][r] * lg[a * 2 + c];
                            }
                        }
                    }
                    let det = j.determinant();
                    let inv = j.try_inverse().filter(|_| det > 0.0).ok_or_else(|| {
                        Error::Geometry(format!("element {e} has non-positive Jacobian {det:e}"))
                    })?;
                    for a in 0..npe {
                        for k in 0..2 {
                            out[a * 2 + k] = lg[a * 2] * inv[(0, k)] + lg[a * 2 + 1] * inv[(1, k)];
                        }
                    }
                    det
                } else {
                    let mut j = Matrix3::<f64>::zeros();
                    for a in 0..npe {
                        for r in 0..3 {
                            for c in 0..3 {
                                j[(r, c)] += xe[a][r] * lg[a * 3 + c];
                            }
                        }
                    }
                    let det = j.determinant();
                    let inv = j.try_inverse().filter(|_| det > 0.0).ok_or_else(|| {
                        Error::Geometry(format!("element {e} has non-positive Jacobian {det:e}"))
                    })?;
                    for a in 0..npe {
                        for k in 0..3 {
                            out[a * 3 + k] = (0..3).map(|m| lg[a * 3 + m] * inv[(m, k)]).sum();
                        }
                    }
                    det
                };
                weights[e * nqp + q] = det * thickness;
            }
        }
        Ok(Self { dim, npe, nqp, shape, grads, weights })
    }

    pub fn num_elements(&self) -> usize {
        self.weights.len() / self.nqp
    }

    #[inline]
    pub fn shape_at(&self, q: usize) -> &[f64] {
        &self.shape[q * self.npe..(q + 1) * self.npe]
    }

    #[inline]
    pub fn grads_at(&self, e: usize, q: usize) -> &[f64] {
        let n = self.npe * self.dim;
        let base = (e * self.nqp + q) * n;
        &self.grads[base..base + n]
    }

    #[inline]
    pub fn weight(&self, e: usize, q: usize) -> f64 {
        self.weights[e * self.nqp + q]
    }

    /// Number of strain components: 3 in plane strain, 6 in 3D.
    pub fn strain_size(&self) -> usize {
        if self.dim == 2 { 3 } else { 6 }
    }

    /// Strain at a quadrature point from element displacements `ue`
    /// (node-major, `dim` components each). Engineering shear; 2D order
    /// (xx, zz, xz), 3D order (xx, yy, zz, yz, xz, xy).
    pub fn strain(&self, e: usize, q: usize, ue: &[f64], out: &mut [f64]) {
        let g = self.grads_at(e, q);
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.dim == 2 {
            for a in 0..self.npe {
                let (gx, gz) = (g[a * 2], g[a * 2 + 1]);
                let (ux, uz) = (ue[a * 2], ue[a * 2 + 1]);
                out[0] += gx * ux;
                out[1] += gz * uz;
                out[2] += gz * ux + gx * uz;
            }
        } else {
            for a in 0..self.npe {
                let (gx, gy, gz) = (g[a * 3], g[a * 3 + 1], g[a * 3 + 2]);
                let (ux, uy, uz) = (ue[a * 3], ue[a * 3 + 1], ue[a * 3 + 2]);
                out[0] += gx * ux;
                out[1] += gy * uy;
                out[2] += gz * uz;
                out[3] += gz * uy + gy * uz;
                out[4] += gz * ux + gx * uz;
                out[5] += gy * ux + gx * uy;
            }
        }
    }

    /// Strain-displacement matrix B, row-major [strain × (npe·dim)].
    pub fn b_matrix(&self, e: usize, q: usize, out: &mut [f64]) {
        let g = self.grads_at(e, q);
        let cols = self.npe * self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.dim == 2 {
            for a in 0..self.npe {
                let (gx, gz) = (g[a * 2], g[a * 2 + 1]);
                let c = a * 2;
                out[c] = gx;
                out[cols + c + 1] = gz;
                out[2 * cols + c] = gz;
                out[2 * cols + c + 1] = gx;
            }
        } else {
            for a in 0..self.npe {
                let (gx, gy, gz) = (g[a * 3], g[a * 3 + 1], g[a * 3 + 2]);
                let c = a * 3;
                out[c] = gx;
                out[cols + c + 1] = gy;
                out[2 * cols + c + 2] = gz;
                out[3 * cols + c + 1] = gz;
                out[3 * cols + c + 2] = gy;
                out[4 * cols + c] = gz;
                out[4 * cols + c + 2] = gx;
                out[5 * cols + c] = gy;
                out[5 * cols + c + 1] = gx;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        for dim in [2, 3] {
            for q in gauss_points(dim) {
                let n = shape_values(dim, q);
                assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                let g = shape_local_gradients(dim, q);
                for k in 0..dim {
                    let s: f64 = (0..n.len()).map(|a| g[a * dim + k]).sum();
                    assert!(s.abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn weights_integrate_volume() {
        let xs = [0.0, 0.3, 1.0];
        let ys = [0.0, 2.0];
        let zs = [0.0, 0.5, 1.5];
        let m = Mesh::structured(3, &xs, &ys, &zs, |_| true).unwrap();
        let c = ElementCache::new(&m, 1.0).unwrap();
        let vol: f64 = c.weights.iter().sum();
        assert!((vol - 3.0).abs() < 1e-12);
        let m2 = Mesh::structured(2, &xs, &[0.0], &zs, |_| true).unwrap();
        let c2 = ElementCache::new(&m2, 2.0).unwrap();
        assert!((c2.weights.iter().sum::<f64>() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn linear_field_gradient_exact() {
        let xs = [0.0, 0.4, 1.0];
        let m = Mesh::structured(3, &xs, &xs, &xs, |_| true).unwrap();
        let c = ElementCache::new(&m, 1.0).unwrap();
        let f: Vec<f64> = m.coords().iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 0.5 * p[2]).collect();
        for e in 0..m.num_elements() {
            for q in 0..c.nqp {
                let g = c.grads_at(e, q);
                let mut grad = [0.0; 3];
                for (a, &n) in m.element(e).iter().enumerate() {
                    for k in 0..3 {
                        grad[k] += g[a * 3 + k] * f[n];
                    }
                }
                assert!((grad[0] - 2.0).abs() < 1e-12);
                assert!((grad[1] + 3.0).abs() < 1e-12);
                assert!((grad[2] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverted_element_rejected() {
        let coords = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let m = Mesh::new(2, coords, vec![0, 1, 2, 3]).unwrap();
        assert!(matches!(ElementCache::new(&m, 1.0), Err(Error::Geometry(_))));
    }
}
