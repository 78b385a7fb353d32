use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation of the area mismatch at (C_VVVV, G_c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub c: f64,
    pub g: f64,
    pub cost: f64,
}

/// Least-squares quadratic p0 + p1 C + p2 G + p3 C² + p4 C G + p5 G².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSurface {
    /// Coefficients in physical units.
    pub coefficients: [f64; 6],
    /// Root-mean-square misfit at the samples.
    pub residual: f64,
    pub positive_definite: bool,
    // Fit in x = (C - c_mean) / c_range, y = (G - g_mean) / g_range; kept
    // because the stationary point is far better conditioned there.
    standardized: [f64; 6],
    shift: [f64; 2],
    scale: [f64; 2],
}

fn basis(x: f64, y: f64) -> [f64; 6] {
    [1.0, x, y, x * x, x * y, y * y]
}

fn standardization(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    (mean, if range > 0.0 { range } else { 1.0 })
}

pub fn fit_quadratic(samples: &[CostSample]) -> Result<QuadraticSurface> {
    if samples.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "a quadratic surface needs at least 6 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !(s.c.is_finite() && s.g.is_finite() && s.cost.is_finite())) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let (mc, sc) = standardization(samples.iter().map(|s| s.c));
    let (mg, sg) = standardization(samples.iter().map(|s| s.g));
    let std = |s: &CostSample| ((s.c - mc) / sc, (s.g - mg) / sg);
    let a = DMatrix::from_fn(samples.len(), 6, |i, j| {
        let (x, y) = std(&samples[i]);
        basis(x, y)[j]
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.cost));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Fit(format!(
            "design matrix is rank deficient (singular values {smin:.3e} / {smax:.3e}); samples must not be collinear"
        )));
    }
    // Solved by QR: the SVD is only trusted for the rank test, since its
    // solve lost four digits on some well-conditioned 3×3 grids.
    let qr = a.clone().qr();
    let q = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &b))
        .ok_or_else(|| Error::Fit("singular triangular factor".into()))?;
    let r = &a * &q - &b;
    let residual = (r.norm_squared() / samples.len() as f64).sqrt();
    let q: [f64; 6] = std::array::from_fn(|k| q[k]);

    // Undo the standardization: x = (C - mc)/sc, y = (G - mg)/sg.
    let (a3, a4, a5) = (q[3] / (sc * sc), q[4] / (sc * sg), q[5] / (sg * sg));
    let (a1, a2) = (q[1] / sc, q[2] / sg);
    let p = [
        q[0] - a1 * mc - a2 * mg + a3 * mc * mc + a4 * mc * mg + a5 * mg * mg,
        a1 - 2.0 * a3 * mc - a4 * mg,
        a2 - 2.0 * a5 * mg - a4 * mc,
        a3,
        a4,
        a5,
    ];
    // Curvatures at round-off level of the fitted values count as flat.
    let tiny = 1e-12 * q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let positive_definite = q[3] > tiny && q[5] > tiny && 4.0 * q[3] * q[5] - q[4] * q[4] > tiny * tiny;
    Ok(QuadraticSurface {
        coefficients: p,
        residual,
        positive_definite,
        standardized: q,
        shift: [mc, mg],
        scale: [sc, sg],
    })
}

impl QuadraticSurface {
    pub fn evaluate(&self, c: f64, g: f64) -> f64 {
        let x = (c - self.shift[0]) / self.scale[0];
        let y = (g - self.shift[1]) / self.scale[1];
        basis(x, y).iter().zip(&self.standardized).map(|(b, q)| b * q).sum()
    }

    /// Stationary point of the surface, only when it is a minimum.
    pub fn argmin(&self) -> Result<(f64, f64)> {
        let q = &self.standardized;
        let det = 4.0 * q[3] * q[5] - q[4] * q[4];
        let size = (q[3].abs() + q[5].abs() + q[4].abs()).max(f64::MIN_POSITIVE);
        if !self.positive_definite || det <= 1e-12 * size * size {
            return Err(Error::NoMinimum(format!(
                "Hessian [[{:.4e}, {:.4e}], [{:.4e}, {:.4e}]] is not positive definite",
                2.0 * self.coefficients[3],
                self.coefficients[4],
                self.coefficients[4],
                2.0 * self.coefficients[5]
            )));
        }
        // [2 q3, q4; q4, 2 q5] (x, y) = -(q1, q2)
        let x = (-2.0 * q[5] * q[1] + q[4] * q[2]) / det;
        let y = (-2.0 * q[3] * q[2] + q[4] * q[1]) / det;
        Ok((self.shift[0] + self.scale[0] * x, self.shift[1] + self.scale[1] * y))
    }
}

pub fn argmin(surface: &QuadraticSurface) -> Result<(f64, f64)> {
    surface.argmin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(f: impl Fn(f64, f64) -> f64, cs: &[f64], gs: &[f64]) -> Vec<CostSample> {
        cs.iter()
            .flat_map(|&c| gs.iter().map(move |&g| (c, g)))
            .map(|(c, g)| CostSample { c, g, cost: f(c, g) })
            .collect()
    }

    #[test]
    fn recovers_a_bowl() {
        let s = fit_quadratic(&grid(|c, g| (c - 2.0).powi(2) + (g - 3.0).powi(2), &[1.0, 2.0, 3.5], &[2.0, 3.0, 4.0])).unwrap();
        let expected = [13.0, -4.0, -6.0, 1.0, 0.0, 1.0];
        for (p, e) in s.coefficients.iter().zip(expected) {
            assert!((p - e).abs() < 1e-9, "{:?}", s.coefficients);
        }
        assert!(s.residual < 1e-10);
        let (c, g) = s.argmin().unwrap();
        assert!((c - 2.0).abs() < 1e-12 && (g - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hand_solved_minima() {
        let s = fit_quadratic(&grid(|c, g| 2.0 * (c - 1.0).powi(2) + 8.0 * (g - 5.0).powi(2) + 3.0, &[0.0, 1.0, 2.0], &[4.0, 5.5, 7.0])).unwrap();
        let (c, g) = argmin(&s).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && (g - 5.0).abs() < 1e-12);
        let s = fit_quadratic(&grid(|c, g| c * c + c * g + g * g - 3.0 * c - 3.0 * g, &[-1.0, 0.0, 2.0], &[0.0, 1.0, 3.0])).unwrap();
        let (c, g) = argmin(&s).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && (g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_samples() {
        let s = fit_quadratic(&grid(|_, _| 7.0, &[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3])).unwrap();
        assert!((s.coefficients[0] - 7.0).abs() < 1e-12);
        assert!(s.coefficients[1..].iter().all(|p| p.abs() < 1e-9));
        assert!(!s.positive_definite);
        assert!(matches!(s.argmin(), Err(Error::NoMinimum(_))));
    }

    #[test]
    fn saddle_has_no_minimum() {
        let s = fit_quadratic(&grid(|c, g| c * c - g * g, &[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0])).unwrap();
        assert!(matches!(s.argmin(), Err(Error::NoMinimum(_))));
    }

    #[test]
    fn collinear_samples_are_rejected() {
        let samples: Vec<CostSample> = (0..9).map(|k| CostSample { c: k as f64, g: 2.0 * k as f64, cost: 1.0 }).collect();
        assert!(matches!(fit_quadratic(&samples), Err(Error::Fit(_))));
        assert!(fit_quadratic(&samples[..5]).is_err());
    }

    #[test]
    fn cubic_residual_matches_normal_equations() {
        let f = |c: f64, g: f64| c.powi(3) + 0.5 * g.powi(3) - c * g;
        let samples = grid(f, &[0.0, 0.5, 1.0, 1.5, 2.0], &[0.0, 0.5, 1.0, 1.5, 2.0]);
        let s = fit_quadratic(&samples).unwrap();
        // Brute force: normal equations in physical coordinates.
        let a = DMatrix::from_fn(samples.len(), 6, |i, j| basis(samples[i].c, samples[i].g)[j]);
        let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.cost));
        let p = (a.transpose() * &a).lu().solve(&(a.transpose() * &b)).unwrap();
        let oracle = ((&a * &p - &b).norm_squared() / samples.len() as f64).sqrt();
        assert!(oracle > 1e-3);
        assert!((s.residual - oracle).abs() < 1e-9 * oracle, "{} vs {oracle}", s.residual);
        for k in 0..6 {
            assert!((s.coefficients[k] - p[k]).abs() < 1e-8 * (1.0 + p[k].abs()));
        }
    }

    proptest! {
        #[test]
        fn exact_on_positive_definite_quadratics(
            c0 in 500.0f64..4000.0, g0 in 0.01f64..0.5,
            a in 0.1f64..10.0, b in 0.1f64..10.0, rho in -0.95f64..0.95, d in -5.0f64..5.0,
            wc in 10.0f64..2000.0, wg in 0.005f64..0.3, oc in -1.0f64..1.0, og in -1.0f64..1.0,
        ) {
            // Hessian in units scaled by the grid widths so that no term is negligible.
            let (sa, sb) = (a / (wc * wc), b / (wg * wg));
            let cross = 2.0 * rho * (sa * sb).sqrt();
            let f = |c: f64, g: f64| sa * (c - c0).powi(2) + sb * (g - g0).powi(2) + cross * (c - c0) * (g - g0) + d;
            let (cc, gc) = (c0 + oc * wc, g0 + og * wg);
            let s = fit_quadratic(&grid(f, &[cc - wc, cc, cc + wc], &[gc - wg, gc, gc + wg])).unwrap();
            let (c, g) = s.argmin().unwrap();
            prop_assert!((c - c0).abs() <= 1e-9 * c0.abs(), "{} vs {}", c, c0);
            prop_assert!((g - g0).abs() <= 1e-9 * g0.abs(), "{} vs {}", g, g0);
        }
    }
}
