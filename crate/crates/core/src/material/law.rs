use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual stiffness of the degradation function.
pub const DEFAULT_RESIDUAL_STIFFNESS: f64 = 1e-5;

/// Regularization length used for the pre-notched specimens, mm.
pub const DEFAULT_LENGTH_SCALE: f64 = 0.625;

/// Choice of local dissipation function w(d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DissipationModel {
    /// w(d) = d, elastic stage before damage onset.
    #[serde(rename = "AT1")]
    At1,
    /// w(d) = d², damage from vanishing stress.
    #[serde(rename = "AT2")]
    At2,
}

impl DissipationModel {
    pub fn normalization(self) -> f64 {
        match self {
            DissipationModel::At1 => 2.0 / 3.0,
            DissipationModel::At2 => 0.5,
        }
    }

    /// Coefficients (α, β) of w(d) = α d + β d².
    pub(crate) fn polynomial(self) -> (f64, f64) {
        match self {
            DissipationModel::At1 => (1.0, 0.0),
            DissipationModel::At2 => (0.0, 1.0),
        }
    }
}

impl fmt::Display for DissipationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DissipationModel::At1 => f.write_str("AT1"),
            DissipationModel::At2 => f.write_str("AT2"),
        }
    }
}

impl FromStr for DissipationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AT1" => Ok(DissipationModel::At1),
            "AT2" => Ok(DissipationModel::At2),
            other => Err(Error::Parameter(format!("unknown dissipation model '{other}'"))),
        }
    }
}

/// Phase-field fracture parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFieldLaw {
    pub model: DissipationModel,
    /// Regularization length ℓ, mm.
    pub ell: f64,
    /// Fracture toughness G_c, MPa·mm.
    pub gc: f64,
    /// Residual stiffness g₀.
    pub g0: f64,
}

impl PhaseFieldLaw {
    pub fn new(model: DissipationModel, ell: f64, gc: f64) -> Result<Self> {
        Self::with_residual(model, ell, gc, DEFAULT_RESIDUAL_STIFFNESS)
    }

    pub fn with_residual(model: DissipationModel, ell: f64, gc: f64, g0: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::Domain(format!("length scale must be positive, got {ell}")));
        }
        if !(gc > 0.0 && gc.is_finite()) {
            return Err(Error::Domain(format!("toughness must be positive, got {gc}")));
        }
        if !(g0 > 0.0 && g0 < 1e-2) {
            return Err(Error::Domain(format!("residual stiffness must lie in (0, 1e-2), got {g0}")));
        }
        Ok(Self { model, ell, gc, g0 })
    }

    pub fn cw(&self) -> f64 {
        self.model.normalization()
    }

    /// Prefactor G_c / (4 c_w).
    pub fn dissipation_scale(&self) -> f64 {
        self.gc / (4.0 * self.cw())
    }

    /// Dissipated energy density 𝒟 for damage `d` and gradient norm squared.
    pub fn dissipation_density(&self, d: f64, grad_sq: f64) -> f64 {
        let (w, _, _) = dissipation(d, self.model);
        self.dissipation_scale() * (w / self.ell + self.ell * grad_sq)
    }

    /// Undegraded energy density at which AT1 damage starts to grow in a
    /// homogeneous state; zero for AT2.
    pub fn damage_threshold(&self) -> f64 {
        match self.model {
            DissipationModel::At1 => self.dissipation_scale() / (2.0 * self.ell),
            DissipationModel::At2 => 0.0,
        }
    }
}

/// g(d) = (1 − d)² + g₀ and g′(d) = −2(1 − d).
pub fn degradation(d: f64, g0: f64) -> (f64, f64) {
    let r = 1.0 - d;
    (r * r + g0, -2.0 * r)
}

/// (w(d), w′(d), c_w).
pub fn dissipation(d: f64, model: DissipationModel) -> (f64, f64, f64) {
    match model {
        DissipationModel::At1 => (d, 1.0, 2.0 / 3.0),
        DissipationModel::At2 => (d * d, 2.0 * d, 0.5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degradation_values() {
        assert_eq!(degradation(0.0, 1e-5).0, 1.00001);
        assert_eq!(degradation(1.0, 1e-5), (1e-5, 0.0));
        let (g, dg) = degradation(0.5, 1e-5);
        assert!((g - (0.25 + 1e-5)).abs() < 1e-16);
        assert_eq!(dg, -1.0);
    }

    #[test]
    fn dissipation_values() {
        assert_eq!(dissipation(0.5, DissipationModel::At1), (0.5, 1.0, 2.0 / 3.0));
        assert_eq!(dissipation(0.5, DissipationModel::At2), (0.25, 1.0, 0.5));
        assert_eq!(dissipation(0.0, DissipationModel::At1).0, 0.0);
        assert_eq!(dissipation(0.0, DissipationModel::At2).0, 0.0);
    }

    #[test]
    fn monotonicity_on_unit_interval() {
        let n = 1000;
        let mut prev_g = f64::INFINITY;
        let mut prev_w = [0.0, 0.0];
        for k in 0..=n {
            let d = k as f64 / n as f64;
            let g = degradation(d, 1e-5).0;
            assert!(g < prev_g);
            prev_g = g;
            if k > 0 {
                for (m, model) in [DissipationModel::At1, DissipationModel::At2].iter().enumerate() {
                    let w = dissipation(d, *model).0;
                    assert!(w > prev_w[m]);
                    prev_w[m] = w;
                }
            }
        }
    }

    #[test]
    fn law_validation() {
        assert!(PhaseFieldLaw::new(DissipationModel::At1, 0.0, 0.1).is_err());
        assert!(PhaseFieldLaw::new(DissipationModel::At1, 0.6, -0.1).is_err());
        let law = PhaseFieldLaw::new(DissipationModel::At1, 0.625, 0.0923).unwrap();
        assert_eq!(law.g0, 1e-5);
        assert_eq!(law.cw(), 2.0 / 3.0);
        assert_eq!("at2".parse::<DissipationModel>().unwrap(), DissipationModel::At2);
    }
}
