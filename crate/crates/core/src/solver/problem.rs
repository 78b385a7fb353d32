use crate::error::{Error, Result};
use crate::fem::{specimen_conditions, DofMap, LoadingConditions, Mesh, SpecimenMesh};
use crate::material::{ElasticityTensor, PhaseFieldLaw};

/// Everything a simulation needs besides solver settings.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    /// Out-of-plane thickness for 2D meshes, 1 in 3D.
    pub thickness: f64,
    pub conditions: LoadingConditions,
    pub tensor: ElasticityTensor,
    pub law: PhaseFieldLaw,
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        thickness: f64,
        conditions: LoadingConditions,
        tensor: ElasticityTensor,
        law: PhaseFieldLaw,
    ) -> Result<Self> {
        if conditions.map != DofMap::new(mesh.dim(), mesh.num_nodes()) {
            return Err(Error::Configuration("loading conditions belong to a different mesh".into()));
        }
        if !(thickness > 0.0) {
            return Err(Error::Parameter(format!("thickness must be positive, got {thickness}")));
        }
        if !conditions.coef.iter().any(|c| *c != 0.0) {
            return Err(Error::Configuration("no loaded degrees of freedom".into()));
        }
        Ok(Self { mesh, thickness, conditions, tensor, law })
    }

    /// Three-point bending of a meshed specimen.
    pub fn specimen(sm: &SpecimenMesh, tensor: ElasticityTensor, law: PhaseFieldLaw) -> Result<Self> {
        let conditions = specimen_conditions(sm)?;
        Self::new(sm.mesh.clone(), sm.thickness, conditions, tensor, law)
    }

    /// Bar in uniaxial tension: a strip one element tall along x ∈ [−L, L],
    /// left end held, right end pulled by ū, all vertical motion
    /// suppressed. With zero Poisson ratio the response is exactly
    /// one-dimensional. Node columns sit at multiples of `h` from x = 0.
    pub fn tension_bar(half_length: f64, h: f64, young: f64, law: PhaseFieldLaw) -> Result<Self> {
        if !(h > 0.0 && half_length >= h) {
            return Err(Error::Geometry(format!("bar needs 0 < h <= L, got h={h}, L={half_length}")));
        }
        let n = (half_length / h).round() as usize;
        let xs: Vec<f64> = (0..=2 * n).map(|i| (i as f64 - n as f64) * h).collect();
        let mesh = Mesh::structured(2, &xs, &[0.0], &[0.0, h], |_| true)?;
        let map = DofMap::new(2, mesh.num_nodes());
        let mut entries = Vec::new();
        for (node, p) in mesh.coords().iter().enumerate() {
            entries.push((map.displacement(node, 1), 0.0));
            if p[0] == xs[0] {
                entries.push((map.displacement(node, 0), 0.0));
            } else if p[0] == xs[2 * n] {
                entries.push((map.displacement(node, 0), 1.0));
            }
        }
        let conditions = LoadingConditions::new(map, &entries, Vec::new())?;
        let tensor = ElasticityTensor::isotropic(young, 0.0)?;
        Self::new(mesh, 1.0, conditions, tensor, law)
    }

    pub fn map(&self) -> DofMap {
        self.conditions.map
    }
}
