//! Constitutive functions and elastic parameter estimation.

mod law;
pub mod stage1;
mod tensor;

pub use law::{
    degradation, dissipation, DissipationModel, PhaseFieldLaw, DEFAULT_LENGTH_SCALE,
    DEFAULT_RESIDUAL_STIFFNESS,
};
pub use stage1::{
    estimate_elastic, longitudinal_stiffness, off_diagonal_stiffness, reduce_to_ratios,
    scale_ratios, shear_stiffness, solve_poisson_ratios, young_from_compression,
    youngs_from_compression, ElasticEstimate, EngineeringConstants, WaveVelocitySet,
};
pub use tensor::{strain_energy, ElasticityTensor, Voigt, VOIGT_LABELS};
