//! Phase-field simulation of brittle fracture in orthotropic solids, with
//! elastic parameter estimation, response-surface calibration against
//! load–deflection curves, and crack-surface metrology.

pub mod calibration;
pub mod crack;
pub mod curve;
pub mod error;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod material;
pub mod solver;

pub use curve::LoadDeflectionCurve;
pub use error::{Error, Result};
