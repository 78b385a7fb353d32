//! Degree-of-freedom numbering and Dirichlet conditions.

use std::collections::BTreeMap;

use super::mesh::SpecimenMesh;
use crate::error::{Error, Result};

/// Node-major numbering: displacement dof `node * dim + comp`, damage dof
/// `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub dim: usize,
    pub nodes: usize,
}

impl DofMap {
    pub fn new(dim: usize, nodes: usize) -> Self {
        Self { dim, nodes }
    }

    pub fn displacement(&self, node: usize, comp: usize) -> usize {
        node * self.dim + comp
    }

    pub fn num_displacement(&self) -> usize {
        self.nodes * self.dim
    }

    pub fn num_damage(&self) -> usize {
        self.nodes
    }

    /// Component index of the vertical (z) direction.
    pub fn vertical(&self) -> usize {
        self.dim - 1
    }
}

/// Displacement constraints proportional to the load parameter ū, plus the
/// damage-pinned nodes.
///
/// Dof `dofs[i]` takes the value `coef[i] * ū`. The reaction force is the
/// internal force summed over dofs with non-zero coefficient, each weighted
/// by its coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingConditions {
    pub map: DofMap,
    pub dofs: Vec<usize>,
    pub coef: Vec<f64>,
    pub pinned_damage: Vec<usize>,
}

/// Prescribed values for one load level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintTable {
    pub displacement: Vec<(usize, f64)>,
    pub damage: Vec<(usize, f64)>,
}

impl ConstraintTable {
    pub fn len(&self) -> usize {
        self.displacement.len() + self.damage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl LoadingConditions {
    /// Merges constraint lists; a dof listed twice must carry the same
    /// coefficient.
    pub fn new(map: DofMap, entries: &[(usize, f64)], pinned_damage: Vec<usize>) -> Result<Self> {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(dof, c) in entries {
            if dof >= map.num_displacement() {
                return Err(Error::Configuration(format!("constrained dof {dof} out of range")));
            }
            if let Some(prev) = merged.insert(dof, c) {
                if prev != c {
                    return Err(Error::Configuration(format!(
                        "dof {dof} constrained twice with different values"
                    )));
                }
            }
        }
        let mut pinned = pinned_damage;
        pinned.sort_unstable();
        pinned.dedup();
        if pinned.iter().any(|&n| n >= map.nodes) {
            return Err(Error::Configuration("pinned damage node out of range".into()));
        }
        let (dofs, coef) = merged.into_iter().unzip();
        Ok(Self { map, dofs, coef, pinned_damage: pinned })
    }

    pub fn table(&self, ubar: f64) -> ConstraintTable {
        ConstraintTable {
            displacement: self.dofs.iter().zip(&self.coef).map(|(&d, &c)| (d, c * ubar)).collect(),
            damage: self.pinned_damage.iter().map(|&n| (n, 0.0)).collect(),
        }
    }

    pub fn displacement_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.map.num_displacement()];
        self.dofs.iter().for_each(|&d| m[d] = true);
        m
    }

    pub fn damage_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.map.num_damage()];
        self.pinned_damage.iter().for_each(|&n| m[n] = true);
        m
    }

    /// Writes prescribed values for load level `ubar` into `u`.
    pub fn impose(&self, u: &mut [f64], ubar: f64) {
        for (&d, &c) in self.dofs.iter().zip(&self.coef) {
            u[d] = c * ubar;
        }
    }

    /// Σ coefᵢ · f_int[dofᵢ] over loaded dofs.
    pub fn reaction(&self, f_int: &[f64]) -> f64 {
        self.dofs
            .iter()
            .zip(&self.coef)
            .filter(|(_, c)| **c != 0.0)
            .map(|(&d, &c)| c * f_int[d])
            .sum()
    }

    /// Sum of internal forces along `comp` over all fixed dofs other than
    /// the loaded ones.
    pub fn support_reaction(&self, f_int: &[f64], comp: usize) -> f64 {
        self.dofs
            .iter()
            .zip(&self.coef)
            .filter(|(d, c)| **c == 0.0 && **d % self.map.dim == comp)
            .map(|(&d, _)| f_int[d])
            .sum()
    }
}

/// Three-point bending conditions: zero vertical displacement on the
/// support lines, vertical displacement −ū on the load line, minimal
/// horizontal pins against rigid motion, and d = 0 on the pinned zones.
pub fn specimen_conditions(sm: &SpecimenMesh) -> Result<LoadingConditions> {
    let dim = sm.mesh.dim();
    let map = DofMap::new(dim, sm.mesh.num_nodes());
    let v = map.vertical();
    if sm.supports.iter().any(|s| s.is_empty()) || sm.load.is_empty() {
        return Err(Error::Configuration("empty support or load node set".into()));
    }
    let mut entries = Vec::new();
    for s in &sm.supports {
        entries.extend(s.iter().map(|&n| (map.displacement(n, v), 0.0)));
    }
    entries.extend(sm.load.iter().map(|&n| (map.displacement(n, v), -1.0)));
    let left = &sm.supports[0];
    let by_y = |a: &&usize, b: &&usize| sm.mesh.node(**a)[1].total_cmp(&sm.mesh.node(**b)[1]);
    let first = *left.iter().min_by(by_y).unwrap();
    let last = *left.iter().max_by(by_y).unwrap();
    entries.push((map.displacement(first, 0), 0.0));
    if dim == 3 {
        if first == last {
            return Err(Error::Configuration("support line has a single node".into()));
        }
        entries.push((map.displacement(last, 0), 0.0));
        entries.push((map.displacement(first, 1), 0.0));
    }
    LoadingConditions::new(map, &entries, sm.pinned.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::geometry::SpecimenGeometry;
    use crate::fem::mesh::{build_specimen_mesh, Dimension, MeshSpec};

    #[test]
    fn table_counts_match_sets() {
        for dimension in [Dimension::Two, Dimension::Three] {
            let mut spec = MeshSpec::new(dimension, 1.0, 4.0);
            spec.thickness_size = Some(3.175);
            let sm = build_specimen_mesh(&SpecimenGeometry::hc(), &spec).unwrap();
            let bc = specimen_conditions(&sm).unwrap();
            let pins = if dimension == Dimension::Two { 1 } else { 3 };
            let t0 = bc.table(0.0);
            assert_eq!(
                t0.len(),
                sm.supports[0].len() + sm.supports[1].len() + sm.load.len() + sm.pinned.len() + pins
            );
            assert!(t0.displacement.iter().all(|(_, v)| *v == 0.0));
            let t = bc.table(0.1);
            let v = bc.map.vertical();
            for &n in &sm.load {
                let d = bc.map.displacement(n, v);
                assert!(t.displacement.contains(&(d, -0.1)));
            }
        }
    }

    #[test]
    fn conflicting_constraints_rejected() {
        let map = DofMap::new(2, 2);
        assert!(LoadingConditions::new(map, &[(0, 0.0), (0, 1.0)], vec![]).is_err());
    }
}
