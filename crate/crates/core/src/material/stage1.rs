//! Elastic estimation from ultrasonic wave velocities and unconfined
//! compression tests.
//!
//! Directions are indexed V = 0, T = 1, H = 2 everywhere in this module.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::tensor::ElasticityTensor;
use crate::curve::LoadDeflectionCurve;
use crate::error::{Error, Result};

pub const DIRECTIONS: [char; 3] = ['V', 'T', 'H'];

/// Fractions of the peak force bounding the compression regression window.
pub const REGRESSION_WINDOW: (f64, f64) = (0.15, 0.65);

pub fn direction_index(c: char) -> Option<usize> {
    DIRECTIONS.iter().position(|d| d.eq_ignore_ascii_case(&c))
}

/// Measured wave speeds `s[m][n]`, propagation `m`, particle motion `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveVelocitySet {
    /// Density in kg·m⁻³.
    pub rho: f64,
    /// Speeds in m·s⁻¹.
    pub s: [[f64; 3]; 3],
}

impl WaveVelocitySet {
    pub fn new(rho: f64, s: [[f64; 3]; 3]) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("density must be positive, got {rho}")));
        }
        for (m, row) in s.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                if !(*v > 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!(
                        "velocity s_{}{} must be positive, got {v}",
                        DIRECTIONS[m], DIRECTIONS[n]
                    )));
                }
            }
        }
        Ok(Self { rho, s })
    }

    /// Builds the set from (propagation, particle, speed) rows. Every one of
    /// the nine pairs must appear exactly once.
    pub fn from_entries(rho: f64, entries: &[(char, char, f64)]) -> Result<Self> {
        let mut s = [[None; 3]; 3];
        for &(m, n, v) in entries {
            let (Some(i), Some(j)) = (direction_index(m), direction_index(n)) else {
                return Err(Error::Data(format!("unknown direction pair '{m}{n}'")));
            };
            if s[i][j].replace(v).is_some() {
                return Err(Error::Data(format!("duplicate velocity for pair '{m}{n}'")));
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = s[i][j].ok_or_else(|| {
                    Error::Data(format!(
                        "missing velocity for pair '{}{}'",
                        DIRECTIONS[i], DIRECTIONS[j]
                    ))
                })?;
            }
        }
        Self::new(rho, out)
    }

    /// [C_VVVV, C_TTTT, C_HHHH] in MPa.
    pub fn normal_stiffness(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| longitudinal_stiffness(self.rho, self.s[i][i]).expect("validated"))
    }

    /// [C_THTH, C_HVHV, C_VTVT] in MPa, i.e. Voigt order yz, xz, xy.
    pub fn shear_stiffness(&self) -> [f64; 3] {
        [(1, 2), (2, 0), (0, 1)].map(|(j, l)| {
            shear_stiffness(self.rho, self.s[j][l], self.s[l][j]).expect("validated")
        })
    }
}

/// ρ s² in MPa, with ρ in kg·m⁻³ and s in m·s⁻¹.
pub fn longitudinal_stiffness(rho: f64, s: f64) -> Result<f64> {
    if !(rho > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!(
            "density and speed must be positive (rho = {rho}, s = {s})"
        )));
    }
    Ok(rho * s * s * 1e-6)
}

/// ρ ((s_jl + s_lj)/2)² in MPa.
pub fn shear_stiffness(rho: f64, s_jl: f64, s_lj: f64) -> Result<f64> {
    if !(s_jl > 0.0 && s_lj > 0.0) {
        return Err(Error::Domain(format!(
            "shear speeds must be positive ({s_jl}, {s_lj})"
        )));
    }
    longitudinal_stiffness(rho, 0.5 * (s_jl + s_lj))
}

/// Samples whose force lies in the inclusive window [lo·F_max, hi·F_max],
/// taken from the loading branch up to the peak.
pub fn regression_window(curve: &LoadDeflectionCurve) -> Result<Vec<(f64, f64)>> {
    let (_, f_max) = curve.peak();
    if f_max <= 0.0 {
        return Err(Error::DegenerateCurve(format!(
            "curve '{}' has no positive peak",
            curve.tag()
        )));
    }
    let lo = REGRESSION_WINDOW.0 * f_max;
    let hi = REGRESSION_WINDOW.1 * f_max;
    Ok(curve
        .iter()
        .take(curve.peak_index() + 1)
        .filter(|(_, f)| *f >= lo && *f <= hi)
        .collect())
}

/// Least-squares slope (with intercept) of F against ū.
pub fn regression_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "regression needs at least 2 samples, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), (x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "regression samples share a single deflection".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Young's modulus K l / (π R²) from a cylinder compression curve.
pub fn young_from_compression(curve: &LoadDeflectionCurve, length: f64, radius: f64) -> Result<f64> {
    if !(length > 0.0 && radius > 0.0) {
        return Err(Error::Domain(format!(
            "specimen length and radius must be positive ({length}, {radius})"
        )));
    }
    let window = regression_window(curve)?;
    let k = regression_slope(&window)?;
    Ok(k * length / (PI * radius * radius))
}

/// Young's moduli and the three independent Poisson's ratios of an
/// orthotropic solid. The dependent ratios follow from ν_ij/E_i = ν_ji/E_j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineeringConstants {
    /// [E_V, E_T, E_H], MPa.
    pub youngs: [f64; 3],
    pub nu_vt: f64,
    pub nu_th: f64,
    pub nu_vh: f64,
}

impl EngineeringConstants {
    pub fn new(youngs: [f64; 3], nu_vt: f64, nu_th: f64, nu_vh: f64) -> Result<Self> {
        if youngs.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Domain(format!("Young's moduli must be positive: {youngs:?}")));
        }
        let c = Self { youngs, nu_vt, nu_th, nu_vh };
        let xi = c.xi();
        if !(xi > 0.0) {
            return Err(Error::Domain(format!("Poisson's ratios give xi = {xi} <= 0")));
        }
        Ok(c)
    }

    pub fn nu_tv(&self) -> f64 {
        self.nu_vt * self.youngs[1] / self.youngs[0]
    }

    pub fn nu_ht(&self) -> f64 {
        self.nu_th * self.youngs[2] / self.youngs[1]
    }

    pub fn nu_hv(&self) -> f64 {
        self.nu_vh * self.youngs[2] / self.youngs[0]
    }

    pub fn xi(&self) -> f64 {
        1.0 - self.nu_vt * self.nu_tv()
            - self.nu_th * self.nu_ht()
            - self.nu_hv() * self.nu_vh
            - 2.0 * self.nu_vt * self.nu_th * self.nu_hv()
    }

    /// Forward map to [C_VVVV, C_TTTT, C_HHHH].
    pub fn normal_stiffness(&self) -> [f64; 3] {
        let xi = self.xi();
        let [ev, et, eh] = self.youngs;
        [
            (1.0 - self.nu_th * self.nu_ht()) / xi * ev,
            (1.0 - self.nu_hv() * self.nu_vh) / xi * et,
            (1.0 - self.nu_vt * self.nu_tv()) / xi * eh,
        ]
    }
}

/// Solves for (ν_VT, ν_TH, ν_VH) such that the orthotropic compliance
/// relations reproduce the given longitudinal stiffnesses.
///
/// Damped Newton from (0.3, 0.3, 0.3). If that start stalls or leaves the
/// admissible region, a small grid of further starts is tried in order.
pub fn solve_poisson_ratios(diag: [f64; 3], youngs: [f64; 3]) -> Result<EngineeringConstants> {
    if diag.iter().chain(youngs.iter()).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!(
            "stiffnesses and moduli must be positive: {diag:?}, {youngs:?}"
        )));
    }
    let system = PoissonSystem::new(diag, youngs);
    let mut starts = vec![Vector3::new(0.3, 0.3, 0.3)];
    const GRID: [f64; 4] = [0.05, 0.25, 0.45, 0.65];
    for a in GRID {
        for b in GRID {
            for c in GRID {
                starts.push(Vector3::new(a, b, c));
            }
        }
    }
    for x0 in starts {
        if let Some(x) = system.newton(x0) {
            let constants = EngineeringConstants::new(youngs, x[0], x[1], x[2])?;
            let back = constants.normal_stiffness();
            if back.iter().zip(diag.iter()).all(|(b, d)| ((b - d) / d).abs() < 1e-8) {
                return Ok(constants);
            }
        }
    }
    Err(Error::Convergence(format!(
        "no admissible Poisson's ratios reproduce stiffnesses {diag:?} with moduli {youngs:?}"
    )))
}

struct PoissonSystem {
    /// E_i / C_iiii
    k: [f64; 3],
    /// E_T/E_V, E_H/E_T, E_H/E_V
    p: f64,
    q: f64,
    s: f64,
}

impl PoissonSystem {
    const TOL: f64 = 1e-10;
    const MAX_ITERS: usize = 200;

    fn new(diag: [f64; 3], youngs: [f64; 3]) -> Self {
        Self {
            k: [0, 1, 2].map(|i| youngs[i] / diag[i]),
            p: youngs[1] / youngs[0],
            q: youngs[2] / youngs[1],
            s: youngs[2] / youngs[0],
        }
    }

    fn xi(&self, x: &Vector3<f64>) -> f64 {
        1.0 - self.p * x[0] * x[0]
            - self.q * x[1] * x[1]
            - self.s * x[2] * x[2]
            - 2.0 * self.s * x[0] * x[1] * x[2]
    }

    fn admissible(&self, x: &Vector3<f64>) -> bool {
        x.iter().all(|v| v.abs() < 1.0) && self.xi(x) > 0.0
    }

    /// r_i = ξ − (1 − a_i) E_i / C_iiii, with a_V = ν_TH ν_HT,
    /// a_T = ν_HV ν_VH, a_H = ν_VT ν_TV.
    fn residual(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let xi = self.xi(x);
        let a = [self.q * x[1] * x[1], self.s * x[2] * x[2], self.p * x[0] * x[0]];
        Vector3::from_fn(|i, _| xi - (1.0 - a[i]) * self.k[i])
    }

    fn jacobian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let (p, q, s) = (self.p, self.q, self.s);
        let dxi = [
            -2.0 * p * x[0] - 2.0 * s * x[1] * x[2],
            -2.0 * q * x[1] - 2.0 * s * x[0] * x[2],
            -2.0 * s * x[2] - 2.0 * s * x[0] * x[1],
        ];
        let mut j = Matrix3::from_fn(|_, c| dxi[c]);
        j[(0, 1)] += self.k[0] * 2.0 * q * x[1];
        j[(1, 2)] += self.k[1] * 2.0 * s * x[2];
        j[(2, 0)] += self.k[2] * 2.0 * p * x[0];
        j
    }

    fn newton(&self, mut x: Vector3<f64>) -> Option<Vector3<f64>> {
        if !self.admissible(&x) {
            return None;
        }
        let mut r = self.residual(&x);
        for _ in 0..Self::MAX_ITERS {
            let norm = r.amax();
            if norm < Self::TOL {
                return Some(x);
            }
            let dx = self.jacobian(&x).lu().solve(&(-r))?;
            let mut lambda = 1.0;
            loop {
                let trial = x + dx * lambda;
                if self.admissible(&trial) {
                    let rt = self.residual(&trial);
                    if rt.amax() < norm * (1.0 - 1e-4 * lambda) {
                        x = trial;
                        r = rt;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-12 {
                    return None;
                }
            }
        }
        (r.amax() < Self::TOL).then_some(x)
    }
}

/// [C_VVTT, C_TTHH, C_HHVV] from engineering constants.
///
/// The third entry is scaled by E_V, as in the reference derivation this
/// pipeline reproduces; the symmetric textbook form uses E_H instead.
pub fn off_diagonal_stiffness(c: &EngineeringConstants) -> Result<[f64; 3]> {
    let xi = c.xi();
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("xi = {xi} must be positive")));
    }
    let [ev, et, _] = c.youngs;
    Ok([
        (c.nu_tv() + c.nu_hv() * c.nu_th) / xi * ev,
        (c.nu_ht() + c.nu_hv() * c.nu_vt) / xi * et,
        (c.nu_hv() + c.nu_tv() * c.nu_ht()) / xi * ev,
    ])
}

/// Divides every entry by C_VVVV.
pub fn reduce_to_ratios(full: &ElasticityTensor) -> ElasticityTensor {
    full.scaled(1.0 / full.get(0, 0))
}

pub fn scale_ratios(ratios: &ElasticityTensor, c_vvvv: f64) -> Result<ElasticityTensor> {
    if (ratios.get(0, 0) - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "ratio tensor must have unit leading entry, got {}",
            ratios.get(0, 0)
        )));
    }
    if !(c_vvvv > 0.0 && c_vvvv.is_finite()) {
        return Err(Error::Domain(format!("C_VVVV must be positive, got {c_vvvv}")));
    }
    Ok(ratios.scaled(c_vvvv))
}

/// Every intermediate quantity of the wave-speed based estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticEstimate {
    /// [C_VVVV, C_TTTT, C_HHHH], MPa.
    pub normal: [f64; 3],
    /// Voigt order yz, xz, xy: [C_THTH, C_HVHV, C_VTVT], MPa.
    pub shear: [f64; 3],
    pub constants: EngineeringConstants,
    /// [C_VVTT, C_TTHH, C_HHVV], MPa.
    pub coupling: [f64; 3],
    pub full: ElasticityTensor,
    pub ratios: ElasticityTensor,
}

/// Runs the estimate from wave speeds and known Young's moduli.
pub fn estimate_elastic(waves: &WaveVelocitySet, youngs: [f64; 3]) -> Result<ElasticEstimate> {
    let normal = waves.normal_stiffness();
    let shear = waves.shear_stiffness();
    let constants = solve_poisson_ratios(normal, youngs)?;
    let coupling = off_diagonal_stiffness(&constants)?;
    // Tensor coupling order is xxyy, yyzz, xxzz: VVTT, TTHH, HHVV.
    let full = ElasticityTensor::orthotropic(normal, coupling, shear)?;
    let ratios = reduce_to_ratios(&full);
    Ok(ElasticEstimate { normal, shear, constants, coupling, full, ratios })
}

/// Young's moduli from repeated compression tests per direction, averaged
/// arithmetically over repetitions.
pub fn youngs_from_compression(
    curves: &[Vec<LoadDeflectionCurve>; 3],
    length: f64,
    radius: f64,
) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (i, reps) in curves.iter().enumerate() {
        if reps.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no compression curves for direction {}",
                DIRECTIONS[i]
            )));
        }
        let mut sum = 0.0;
        for c in reps {
            sum += young_from_compression(c, length, radius)?;
        }
        out[i] = sum / reps.len() as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn waves() -> WaveVelocitySet {
        WaveVelocitySet::new(
            1350.0,
            [
                [2730.0, 2020.0, 1476.0],
                [1980.0, 2530.0, 1696.0],
                [1799.0, 1745.0, 2332.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn longitudinal_values() {
        assert!((longitudinal_stiffness(1350.0, 2730.0).unwrap() - 10061.0).abs() < 1.0);
        assert!((longitudinal_stiffness(1350.0, 2332.0).unwrap() - 7342.0).abs() < 1.0);
        assert_eq!(longitudinal_stiffness(1000.0, 1000.0).unwrap(), 1000.0);
        assert!(longitudinal_stiffness(0.0, 1.0).is_err());
        assert!(longitudinal_stiffness(1.0, -1.0).is_err());
    }

    #[test]
    fn shear_values() {
        assert!((shear_stiffness(1350.0, 2020.0, 1980.0).unwrap() - 5400.0).abs() < 1.0);
        assert!((shear_stiffness(1350.0, 1696.0, 1745.0).unwrap() - 3996.0).abs() < 1.0);
        assert_eq!(
            shear_stiffness(1234.0, 1500.0, 1500.0).unwrap(),
            longitudinal_stiffness(1234.0, 1500.0).unwrap()
        );
    }

    #[test]
    fn velocity_entries_require_all_pairs() {
        let mut rows = Vec::new();
        for (i, m) in DIRECTIONS.iter().enumerate() {
            for (j, n) in DIRECTIONS.iter().enumerate() {
                rows.push((*m, *n, waves().s[i][j]));
            }
        }
        assert_eq!(WaveVelocitySet::from_entries(1350.0, &rows).unwrap(), waves());
        rows.pop();
        let err = WaveVelocitySet::from_entries(1350.0, &rows).unwrap_err();
        assert!(err.to_string().contains("HH"));
    }

    #[test]
    fn isotropic_inversion() {
        let (e, nu) = (1000.0, 0.3);
        let c11 = e * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let sol = solve_poisson_ratios([c11; 3], [e; 3]).unwrap();
        for v in [sol.nu_vt, sol.nu_th, sol.nu_vh] {
            assert!((v - 0.3).abs() < 1e-6);
        }
        let off = off_diagonal_stiffness(&sol).unwrap();
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        for v in off {
            assert!((v - lambda).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_ratios_decouple() {
        let c = EngineeringConstants::new([1.0, 2.0, 3.0], 0.0, 0.0, 0.0).unwrap();
        assert_eq!(off_diagonal_stiffness(&c).unwrap(), [0.0; 3]);
    }

    #[test]
    fn full_estimate_matches_tabulated_values() {
        let est = estimate_elastic(&waves(), [1485.0, 1365.0, 1512.0]).unwrap();
        for (got, want) in est.normal.iter().zip([10061.0, 8641.0, 7342.0]) {
            assert!((got - want).abs() < 1.0, "{got} vs {want}");
        }
        for (got, want) in est.shear.iter().zip([3996.0, 3620.0, 5400.0]) {
            assert!((got - want).abs() < 1.0, "{got} vs {want}");
        }
        let c = est.constants;
        for (got, want) in [c.nu_vt, c.nu_th, c.nu_vh].iter().zip([0.638, 0.338, 0.425]) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
        for (got, want) in est.coupling.iter().zip([8439.0, 6887.0, 7513.0]) {
            assert!((got - want).abs() < 1.0, "{got} vs {want}");
        }
    }

    #[test]
    fn ratios_round_trip() {
        let est = estimate_elastic(&waves(), [1485.0, 1365.0, 1512.0]).unwrap();
        let r = est.ratios;
        assert_eq!(r.get(0, 0), 1.0);
        let back = reduce_to_ratios(&scale_ratios(&r, 2057.0).unwrap());
        for i in 0..6 {
            for j in 0..6 {
                assert!((back.get(i, j) - r.get(i, j)).abs() < 1e-15);
            }
        }
        assert_eq!(scale_ratios(&r, 1.0).unwrap(), r);
        assert!(scale_ratios(&est.full, 2.0).is_err());
    }

    #[test]
    fn compression_regression_on_exact_line() {
        let k = 4321.0;
        let u: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let f: Vec<f64> = u.iter().map(|x| k * x).collect();
        let curve = LoadDeflectionCurve::new("c", u, f).unwrap();
        let r = (1.0 / PI).sqrt();
        assert!((young_from_compression(&curve, 1.0, r).unwrap() - k).abs() < 1e-9 * k);
        let e = young_from_compression(&curve, 50.8, 12.7).unwrap();
        assert!((e - k * 50.8 / (PI * 12.7 * 12.7)).abs() < 1e-9 * e);
    }

    #[test]
    fn compression_needs_two_window_samples() {
        let curve = LoadDeflectionCurve::new("c", vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0]).unwrap();
        assert!(matches!(
            young_from_compression(&curve, 1.0, 1.0),
            Err(Error::InsufficientData(_))
        ));
    }
}
