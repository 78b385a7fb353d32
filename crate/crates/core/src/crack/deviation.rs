use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::CrackSurface;
use crate::error::{Error, Result};

/// Cell size of the spatial hash, mm.
pub const HASH_CELL: f64 = 0.5;

/// Uniform spatial hash for exact nearest-point queries.
#[derive(Debug, Clone)]
pub struct PointIndex {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<[f64; 3]>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl PointIndex {
    pub fn new(points: &[[f64; 3]], cell: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("cannot index an empty point set".into()));
        }
        if !(cell > 0.0) {
            return Err(Error::Parameter(format!("hash cell must be positive, got {cell}")));
        }
        let mut buckets: HashMap<[i64; 3], Vec<[f64; 3]>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for p in points {
            let key = p.map(|v| (v / cell).floor() as i64);
            for a in 0..3 {
                lo[a] = lo[a].min(key[a]);
                hi[a] = hi[a].max(key[a]);
            }
            buckets.entry(key).or_default().push(*p);
        }
        Ok(Self { cell, buckets, lo, hi })
    }

    /// Distance from `p` to the closest indexed point.
    pub fn nearest(&self, p: [f64; 3]) -> f64 {
        let key = p.map(|v| (v / self.cell).floor() as i64);
        // Rings beyond this cover no occupied cell.
        let reach = (0..3)
            .map(|a| (key[a] - self.lo[a]).abs().max((self.hi[a] - key[a]).abs()))
            .max()
            .unwrap();
        let mut best = f64::INFINITY;
        for r in 0..=reach {
            for i in -r..=r {
                for j in -r..=r {
                    for k in -r..=r {
                        if i.abs().max(j.abs()).max(k.abs()) != r {
                            continue;
                        }
                        if let Some(pts) = self.buckets.get(&[key[0] + i, key[1] + j, key[2] + k]) {
                            for q in pts {
                                let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                                best = best.min(d2);
                            }
                        }
                    }
                }
            }
            // Any point in ring r + 1 is at least r cells away along one axis.
            if best.sqrt() <= r as f64 * self.cell {
                break;
            }
        }
        best.sqrt()
    }
}

/// Distance from every defined node of one surface to the other surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationField {
    /// On the lattice of the first surface.
    pub values: Vec<Option<f64>>,
    pub max: f64,
    pub mean: f64,
}

pub fn deviation(a: &CrackSurface, b: &CrackSurface) -> Result<DeviationField> {
    if a.defined_count() == 0 || b.defined_count() == 0 {
        return Err(Error::Data("deviation needs two non-empty surfaces".into()));
    }
    let index = PointIndex::new(&b.points(), HASH_CELL)?;
    let mut values = vec![None; a.values.len()];
    let (mut max, mut sum, mut n) = (0.0f64, 0.0, 0usize);
    for (k, p) in a.nodes() {
        let ds = index.nearest(p);
        values[k] = Some(ds);
        max = max.max(ds);
        sum += ds;
        n += 1;
    }
    Ok(DeviationField { values, max, mean: sum / n as f64 })
}
