//! Global residuals and tangents of the displacement and damage problems.

use std::sync::Arc;

use super::element::ElementCache;
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::linalg::{SparsePattern, SymmetricMatrix};
use crate::material::{degradation, dissipation, ElasticityTensor, PhaseFieldLaw};

/// Energies of a field state, in N·mm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Energies {
    pub elastic: f64,
    pub dissipated: f64,
}

/// Element loops over a fixed mesh and material.
pub struct Assembler {
    cache: ElementCache,
    conn: Vec<usize>,
    /// Material stiffness in the strain basis of the element (3×3 or 6×6).
    dmat: Vec<f64>,
    pattern_u: Arc<SparsePattern>,
    pattern_d: Arc<SparsePattern>,
}

impl Assembler {
    pub fn new(mesh: &Mesh, thickness: f64, c: &ElasticityTensor) -> Result<Self> {
        let cache = ElementCache::new(mesh, thickness)?;
        let dim = mesh.dim();
        let dmat: Vec<f64> = if dim == 2 {
            let d = c.plane_strain_xz();
            (0..9).map(|k| d[(k / 3, k % 3)]).collect()
        } else {
            c.matrix().iter().flatten().copied().collect()
        };
        let pattern_u = Arc::new(SparsePattern::from_cells(mesh.num_nodes(), dim, mesh.elements()));
        let pattern_d = Arc::new(SparsePattern::from_cells(mesh.num_nodes(), 1, mesh.elements()));
        Ok(Self { cache, conn: mesh.connectivity().to_vec(), dmat, pattern_u, pattern_d })
    }

    pub fn cache(&self) -> &ElementCache {
        &self.cache
    }

    pub fn num_elements(&self) -> usize {
        self.cache.num_elements()
    }

    /// Number of quadrature points over the whole mesh.
    pub fn num_quadrature_points(&self) -> usize {
        self.cache.weights.len()
    }

    pub fn displacement_pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern_u
    }

    pub fn damage_pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern_d
    }

    fn nodes(&self, e: usize) -> &[usize] {
        let npe = self.cache.npe;
        &self.conn[e * npe..(e + 1) * npe]
    }

    fn gather_u(&self, e: usize, u: &[f64], ue: &mut [f64]) {
        let dim = self.cache.dim;
        for (a, &n) in self.nodes(e).iter().enumerate() {
            ue[a * dim..(a + 1) * dim].copy_from_slice(&u[n * dim..(n + 1) * dim]);
        }
    }

    fn damage_at(&self, e: usize, q: usize, d: &[f64]) -> f64 {
        let n = self.cache.shape_at(q);
        self.nodes(e).iter().zip(n).map(|(&a, na)| d[a] * na).sum()
    }

    fn stress(&self, eps: &[f64], sig: &mut [f64]) {
        let s = eps.len();
        for i in 0..s {
            sig[i] = (0..s).map(|j| self.dmat[i * s + j] * eps[j]).sum();
        }
    }

    /// Tangent K(d) = Σ g(d) Bᵀ C B and internal force K(d) u.
    pub fn assemble_displacement(
        &self,
        d: &[f64],
        g0: f64,
        u: &[f64],
    ) -> Result<(SymmetricMatrix, Vec<f64>)> {
        let c = &self.cache;
        let (dim, npe, s) = (c.dim, c.npe, c.strain_size());
        let cols = npe * dim;
        let mut k = SymmetricMatrix::zeros(self.pattern_u.clone());
        let mut b = vec![0.0; s * cols];
        let mut db = vec![0.0; s * cols];
        let mut ke = vec![0.0; cols * cols];
        let mut dofs = vec![0; cols];
        for e in 0..c.num_elements() {
            ke.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..c.nqp {
                let (g, _) = degradation(self.damage_at(e, q, d), g0);
                let w = g * c.weight(e, q);
                c.b_matrix(e, q, &mut b);
                for i in 0..s {
                    for col in 0..cols {
                        db[i * cols + col] = (0..s).map(|j| self.dmat[i * s + j] * b[j * cols + col]).sum();
                    }
                }
                for r in 0..cols {
                    for col in r..cols {
                        let v: f64 = (0..s).map(|i| b[i * cols + r] * db[i * cols + col]).sum();
                        ke[r * cols + col] += w * v;
                    }
                }
            }
            for (a, &n) in self.nodes(e).iter().enumerate() {
                for comp in 0..dim {
                    dofs[a * dim + comp] = n * dim + comp;
                }
            }
            for r in 0..cols {
                for col in r..cols {
                    let v = ke[r * cols + col];
                    k.add(dofs[r], dofs[col], v);
                    if r != col {
                        k.add(dofs[col], dofs[r], v);
                    }
                }
            }
        }
        if !k.all_finite() {
            return Err(Error::Assembly("non-finite displacement stiffness".into()));
        }
        let f = k.mul(u);
        Ok((k, f))
    }

    /// Internal force vector Σ g(d) Bᵀ σ₀(u) without forming the matrix.
    pub fn internal_force(&self, d: &[f64], g0: f64, u: &[f64]) -> Vec<f64> {
        let c = &self.cache;
        let (dim, npe, s) = (c.dim, c.npe, c.strain_size());
        let cols = npe * dim;
        let mut f = vec![0.0; u.len()];
        let mut ue = vec![0.0; cols];
        let mut b = vec![0.0; s * cols];
        let mut eps = vec![0.0; s];
        let mut sig = vec![0.0; s];
        for e in 0..c.num_elements() {
            self.gather_u(e, u, &mut ue);
            for q in 0..c.nqp {
                let (g, _) = degradation(self.damage_at(e, q, d), g0);
                c.strain(e, q, &ue, &mut eps);
                self.stress(&eps, &mut sig);
                c.b_matrix(e, q, &mut b);
                let w = g * c.weight(e, q);
                for (a, &n) in self.nodes(e).iter().enumerate() {
                    for comp in 0..dim {
                        let col = a * dim + comp;
                        let v: f64 = (0..s).map(|i| b[i * cols + col] * sig[i]).sum();
                        f[n * dim + comp] += w * v;
                    }
                }
            }
        }
        f
    }

    /// Undegraded strain energy density ψ₀ at every quadrature point.
    pub fn strain_energy_density(&self, u: &[f64]) -> Vec<f64> {
        let c = &self.cache;
        let (dim, s) = (c.dim, c.strain_size());
        let mut out = vec![0.0; self.num_quadrature_points()];
        let mut ue = vec![0.0; c.npe * dim];
        let mut eps = vec![0.0; s];
        let mut sig = vec![0.0; s];
        for e in 0..c.num_elements() {
            self.gather_u(e, u, &mut ue);
            for q in 0..c.nqp {
                c.strain(e, q, &ue, &mut eps);
                self.stress(&eps, &mut sig);
                out[e * c.nqp + q] = 0.5 * eps.iter().zip(&sig).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }

    /// Damage system K d = f whose residual K d − f is the gradient of the
    /// regularized energy at fixed history `h`:
    /// K = ∫ (2ℋ + 2β G_c/(4c_w ℓ)) N Nᵀ + (G_c ℓ/(2c_w)) ∇N ∇Nᵀ,
    /// f = ∫ (2ℋ − α G_c/(4c_w ℓ)) N, for w(d) = α d + β d².
    pub fn assemble_phasefield(
        &self,
        history: &[f64],
        law: &PhaseFieldLaw,
    ) -> Result<(SymmetricMatrix, Vec<f64>)> {
        let c = &self.cache;
        if history.len() != self.num_quadrature_points() {
            return Err(Error::Assembly("history size does not match quadrature points".into()));
        }
        if let Some(h) = history.iter().find(|h| !(h.is_finite() && **h >= 0.0)) {
            return Err(Error::Assembly(format!("invalid history value {h}")));
        }
        let (alpha, beta) = law.model.polynomial();
        let scale = law.dissipation_scale();
        let grad_coef = 2.0 * scale * law.ell;
        let (dim, npe) = (c.dim, c.npe);
        let mut k = SymmetricMatrix::zeros(self.pattern_d.clone());
        let mut f = vec![0.0; self.pattern_d.dim()];
        let mut ke = vec![0.0; npe * npe];
        for e in 0..c.num_elements() {
            ke.iter_mut().for_each(|v| *v = 0.0);
            let nodes = self.nodes(e);
            for q in 0..c.nqp {
                let hq = history[e * c.nqp + q];
                let w = c.weight(e, q);
                let n = c.shape_at(q);
                let g = c.grads_at(e, q);
                let mass = 2.0 * hq + 2.0 * beta * scale / law.ell;
                let src = 2.0 * hq - alpha * scale / law.ell;
                for a in 0..npe {
                    f[nodes[a]] += w * src * n[a];
                    for b in a..npe {
                        let gg: f64 = (0..dim).map(|k| g[a * dim + k] * g[b * dim + k]).sum();
                        ke[a * npe + b] += w * (mass * n[a] * n[b] + grad_coef * gg);
                    }
                }
            }
            for a in 0..npe {
                for b in a..npe {
                    let v = ke[a * npe + b];
                    k.add(nodes[a], nodes[b], v);
                    if a != b {
                        k.add(nodes[b], nodes[a], v);
                    }
                }
            }
        }
        if !k.all_finite() || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Assembly("non-finite damage system".into()));
        }
        Ok((k, f))
    }

    /// Elastic ∫ g(d) ψ₀ and dissipated ∫ G_c/(4c_w) (w/ℓ + ℓ|∇d|²) energy.
    pub fn energies(&self, u: &[f64], d: &[f64], law: &PhaseFieldLaw) -> Energies {
        let c = &self.cache;
        let psi = self.strain_energy_density(u);
        let dim = c.dim;
        let mut out = Energies::default();
        for e in 0..c.num_elements() {
            let nodes = self.nodes(e);
            for q in 0..c.nqp {
                let w = c.weight(e, q);
                let dq = self.damage_at(e, q, d);
                let g = c.grads_at(e, q);
                let mut grad = [0.0; 3];
                for (a, &n) in nodes.iter().enumerate() {
                    for k in 0..dim {
                        grad[k] += g[a * dim + k] * d[n];
                    }
                }
                let grad_sq: f64 = grad.iter().map(|v| v * v).sum();
                let (gd, _) = degradation(dq, law.g0);
                out.elastic += w * gd * psi[e * c.nqp + q];
                let (wd, _, _) = dissipation(dq, law.model);
                out.dissipated += w * law.dissipation_scale() * (wd / law.ell + law.ell * grad_sq);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::DissipationModel;

    fn square(n: usize, side: f64) -> Mesh {
        let xs: Vec<f64> = (0..=n).map(|i| side * i as f64 / n as f64).collect();
        Mesh::structured(2, &xs, &[0.0], &xs, |_| true).unwrap()
    }

    #[test]
    fn single_element_matches_hand_assembly() {
        // Unit square, isotropic plane strain, uniform stretch u_x = e·x.
        let m = square(1, 1.0);
        let c = ElasticityTensor::isotropic(1000.0, 0.25).unwrap();
        let asm = Assembler::new(&m, 1.0, &c).unwrap();
        let e = 1e-3;
        let mut u = vec![0.0; 8];
        for (n, p) in m.coords().iter().enumerate() {
            u[n * 2] = e * p[0];
        }
        let (_, f) = asm.assemble_displacement(&[0.0; 4], 0.0, &u).unwrap();
        // σ_xx = C11 e over a unit edge; consistent nodal forces are half each.
        let c11 = c.get(0, 0);
        let right: f64 = (0..4).filter(|&n| m.node(n)[0] == 1.0).map(|n| f[n * 2]).sum();
        assert!((right - c11 * e).abs() < 1e-10 * c11 * e);
        for n in 0..4 {
            if m.node(n)[0] == 1.0 {
                assert!((f[n * 2] - 0.5 * c11 * e).abs() < 1e-10 * c11 * e);
            }
        }
        let vertical: f64 = (0..4).filter(|&n| m.node(n)[2] == 1.0).map(|n| f[n * 2 + 1]).sum();
        assert!((vertical - c.get(0, 2) * e).abs() < 1e-10 * c11 * e);
    }

    #[test]
    fn full_damage_scales_by_residual() {
        let m = square(3, 1.0);
        let c = ElasticityTensor::isotropic(1000.0, 0.3).unwrap();
        let asm = Assembler::new(&m, 1.0, &c).unwrap();
        let u = vec![0.0; 32];
        let (k0, _) = asm.assemble_displacement(&vec![0.0; 16], 0.0, &u).unwrap();
        let (k1, _) = asm.assemble_displacement(&vec![1.0; 16], 1e-5, &u).unwrap();
        let scale = k0.norm_inf();
        for (a, b) in k0.values().iter().zip(k1.values()) {
            assert!((b - 1e-5 * a).abs() <= 1e-5 * 1e-13 * scale);
        }
    }

    #[test]
    fn internal_force_matches_matrix_product() {
        let m = square(4, 2.0);
        let c = ElasticityTensor::orthotropic([2057.0, 1767.0, 1501.0], [1725.0, 1408.0, 1536.0], [817.0, 740.0, 1104.0])
            .unwrap();
        let asm = Assembler::new(&m, 3.0, &c).unwrap();
        let n = m.num_nodes();
        let u: Vec<f64> = (0..2 * n).map(|i| ((i * 37 % 11) as f64 - 5.0) * 1e-3).collect();
        let d: Vec<f64> = (0..n).map(|i| (i % 5) as f64 / 5.0).collect();
        let (k, f) = asm.assemble_displacement(&d, 1e-5, &u).unwrap();
        let f2 = asm.internal_force(&d, 1e-5, &u);
        let scale = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in f.iter().zip(&f2) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
        assert!(k.asymmetry() <= 1e-12 * k.norm_inf());
    }

    #[test]
    fn phasefield_at1_threshold_and_symmetry() {
        let m = square(4, 1.0);
        let c = ElasticityTensor::isotropic(1000.0, 0.3).unwrap();
        let asm = Assembler::new(&m, 1.0, &c).unwrap();
        let law = PhaseFieldLaw::new(DissipationModel::At1, 0.1, 0.05).unwrap();
        let h = vec![0.0; asm.num_quadrature_points()];
        let (k, f) = asm.assemble_phasefield(&h, &law).unwrap();
        let d = vec![0.0; m.num_nodes()];
        let r: Vec<f64> = k.mul(&d).iter().zip(&f).map(|(kd, f)| kd - f).collect();
        assert!(r.iter().all(|v| *v >= 0.0));
        assert!(k.asymmetry() <= 1e-12 * k.norm_inf());
    }
}
