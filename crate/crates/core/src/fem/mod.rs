//! Specimen geometry, meshing, degrees of freedom, and assembly.

pub mod assembly;
pub mod conditions;
pub mod element;
pub mod geometry;
pub mod mesh;
pub mod vtk;

pub use assembly::{Assembler, Energies};
pub use conditions::{specimen_conditions, ConstraintTable, DofMap, LoadingConditions};
pub use element::ElementCache;
pub use geometry::{Notch, NotchDepth, SpecimenGeometry};
pub use mesh::{build_specimen_mesh, Dimension, Mesh, MeshSpec, RefinementZone, SpecimenMesh};
