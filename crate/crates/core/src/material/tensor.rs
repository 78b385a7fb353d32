use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voigt component order used throughout the crate: xx, yy, zz, yz, xz, xy.
///
/// Material directions map onto the axes as V → x, T → y, H → z. Strain
/// vectors carry *engineering* shear strains (γ = 2ε), so `σ = C ε` holds with
/// the stiffness matrix as stored.
pub const VOIGT_LABELS: [&str; 6] = ["xx", "yy", "zz", "yz", "xz", "xy"];

pub type Voigt = [f64; 6];

/// Symmetric 6×6 orthotropic stiffness matrix in MPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticityTensor {
    c: [[f64; 6]; 6],
}

impl ElasticityTensor {
    /// Validates symmetry, the orthotropic zero pattern, and positive
    /// definiteness (all leading principal minors positive).
    pub fn from_matrix(c: [[f64; 6]; 6]) -> Result<Self> {
        let scale = c.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Domain("stiffness matrix is zero or non-finite".into()));
        }
        for i in 0..6 {
            for j in 0..i {
                if (c[i][j] - c[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::Domain(format!(
                        "stiffness matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                let coupled = (i < 3 && j < 3) || i == j;
                if !coupled && c[i][j] != 0.0 {
                    return Err(Error::Domain(format!(
                        "entry ({i}, {j}) must vanish for an orthotropic tensor"
                    )));
                }
            }
        }
        let m = DMatrix::from_fn(6, 6, |i, j| c[i][j] / scale);
        for k in 1..=6 {
            let minor = m.view((0, 0), (k, k)).determinant();
            if minor <= 0.0 {
                return Err(Error::Domain(format!(
                    "stiffness matrix not positive definite (leading minor {k} = {minor:e})"
                )));
            }
        }
        Ok(Self { c })
    }

    /// Orthotropic tensor from its nine constants.
    ///
    /// `normal = [C_xxxx, C_yyyy, C_zzzz]`, `coupling = [C_xxyy, C_yyzz, C_xxzz]`,
    /// `shear = [C_yzyz, C_xzxz, C_xyxy]`.
    pub fn orthotropic(normal: [f64; 3], coupling: [f64; 3], shear: [f64; 3]) -> Result<Self> {
        let mut c = [[0.0; 6]; 6];
        c[0][0] = normal[0];
        c[1][1] = normal[1];
        c[2][2] = normal[2];
        c[0][1] = coupling[0];
        c[1][0] = coupling[0];
        c[1][2] = coupling[1];
        c[2][1] = coupling[1];
        c[0][2] = coupling[2];
        c[2][0] = coupling[2];
        c[3][3] = shear[0];
        c[4][4] = shear[1];
        c[5][5] = shear[2];
        Self::from_matrix(c)
    }

    pub fn isotropic(young: f64, poisson: f64) -> Result<Self> {
        if young <= 0.0 || !(-1.0..0.5).contains(&poisson) {
            return Err(Error::Domain(format!(
                "isotropic constants out of range (E = {young}, nu = {poisson})"
            )));
        }
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let mu = young / (2.0 * (1.0 + poisson));
        Self::orthotropic(
            [lambda + 2.0 * mu; 3],
            [lambda; 3],
            [mu; 3],
        )
    }

    pub fn matrix(&self) -> &[[f64; 6]; 6] {
        &self.c
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[i][j]
    }

    /// Entrywise scaling; a positive factor preserves every invariant.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        let mut c = self.c;
        c.iter_mut().flatten().for_each(|v| *v *= factor);
        Self { c }
    }

    pub fn stress(&self, strain: &Voigt) -> Voigt {
        let mut s = [0.0; 6];
        for (i, si) in s.iter_mut().enumerate() {
            *si = (0..6).map(|j| self.c[i][j] * strain[j]).sum();
        }
        s
    }

    /// Plane-strain stiffness in the x–z plane, ordered (xx, zz, xz).
    pub fn plane_strain_xz(&self) -> SMatrix<f64, 3, 3> {
        const MAP: [usize; 3] = [0, 2, 4];
        SMatrix::from_fn(|i, j| self.c[MAP[i]][MAP[j]])
    }

    pub fn as_smatrix(&self) -> SMatrix<f64, 6, 6> {
        SMatrix::from_fn(|i, j| self.c[i][j])
    }

    /// Young's modulus for uniaxial stress along the unit direction `dir`.
    pub fn directional_young(&self, dir: [f64; 3]) -> f64 {
        let s = self
            .as_smatrix()
            .try_inverse()
            .expect("positive definite tensor is invertible");
        let [a, b, c] = dir;
        // Uniaxial stress tensor n⊗n in Voigt form.
        let sigma = SVector::<f64, 6>::from([a * a, b * b, c * c, b * c, a * c, a * b]);
        let eps = s * sigma;
        let norm = a * a + b * b + c * c;
        // n·ε·n with engineering shear components.
        let strain_along = a * a * eps[0]
            + b * b * eps[1]
            + c * c * eps[2]
            + b * c * eps[3]
            + a * c * eps[4]
            + a * b * eps[5];
        norm * norm / strain_along
    }
}

/// ψ₀(ε) = ½ εᵀ C ε, energy density in MPa.
pub fn strain_energy(strain: &Voigt, c: &ElasticityTensor) -> f64 {
    let s = c.stress(strain);
    0.5 * strain.iter().zip(s.iter()).map(|(e, s)| e * s).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calibrated() -> ElasticityTensor {
        ElasticityTensor::orthotropic(
            [2057.0, 1767.0, 1501.0],
            [1725.0, 1408.0, 1536.0],
            [817.0, 740.0, 1104.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_asymmetric_and_coupled_matrices() {
        let mut c = *calibrated().matrix();
        c[0][1] += 1.0;
        assert!(ElasticityTensor::from_matrix(c).is_err());
        let mut c = *calibrated().matrix();
        c[0][3] = 1.0;
        c[3][0] = 1.0;
        assert!(ElasticityTensor::from_matrix(c).is_err());
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let res = ElasticityTensor::orthotropic([1.0, 1.0, 1.0], [2.0, 0.0, 0.0], [1.0; 3]);
        assert!(matches!(res, Err(Error::Domain(_))));
    }

    #[test]
    fn zero_strain_has_zero_energy() {
        assert_eq!(strain_energy(&[0.0; 6], &calibrated()), 0.0);
    }

    #[test]
    fn uniaxial_strain_energy() {
        let c = calibrated();
        let e = 1e-3;
        let psi = strain_energy(&[e, 0.0, 0.0, 0.0, 0.0, 0.0], &c);
        assert!((psi - 0.5 * 2057.0 * e * e).abs() < 1e-15);
    }

    #[test]
    fn isotropic_directional_young_is_uniform() {
        let c = ElasticityTensor::isotropic(1000.0, 0.3).unwrap();
        for dir in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.2, -0.5, 0.9]] {
            assert!((c.directional_young(dir) - 1000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn plane_strain_picks_xz_block() {
        let d = calibrated().plane_strain_xz();
        assert_eq!(d[(0, 0)], 2057.0);
        assert_eq!(d[(0, 1)], 1536.0);
        assert_eq!(d[(1, 1)], 1501.0);
        assert_eq!(d[(2, 2)], 740.0);
        assert_eq!(d[(0, 2)], 0.0);
    }
}
