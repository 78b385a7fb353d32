//! Sampled load–deflection curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered series of (deflection mm, force N) samples.
///
/// Deflections are strictly increasing and all values finite. The peak
/// (largest force, first occurrence) is cached at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadDeflectionCurve {
    tag: String,
    u: Vec<f64>,
    f: Vec<f64>,
    peak: usize,
}

impl LoadDeflectionCurve {
    pub fn new(tag: impl Into<String>, u: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if u.len() != f.len() {
            return Err(Error::Data(format!(
                "curve has {} deflections but {} forces",
                u.len(),
                f.len()
            )));
        }
        if u.is_empty() {
            return Err(Error::Data("curve has no samples".into()));
        }
        if let Some(i) = u.iter().chain(f.iter()).position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at position {i}")));
        }
        if let Some(i) = u.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!(
                "deflection not strictly increasing at sample {}",
                i + 1
            )));
        }
        let peak = argmax(&f);
        Ok(Self {
            tag: tag.into(),
            u,
            f,
            peak,
        })
    }

    /// Builds a curve from (u, F) pairs.
    pub fn from_pairs(tag: impl Into<String>, pairs: &[(f64, f64)]) -> Result<Self> {
        let (u, f) = pairs.iter().copied().unzip();
        Self::new(tag, u, f)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.tag = tag.into();
    }

    pub fn deflections(&self) -> &[f64] {
        &self.u
    }

    pub fn forces(&self) -> &[f64] {
        &self.f
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn peak_index(&self) -> usize {
        self.peak
    }

    /// (ū_peak, F_peak)
    pub fn peak(&self) -> (f64, f64) {
        (self.u[self.peak], self.f[self.peak])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.u[0], self.u[self.u.len() - 1])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.f.iter().copied())
    }

    /// Piecewise-linear interpolation; `None` outside the sampled domain.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        interpolate(&self.u, &self.f, x)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Linear interpolation in a strictly increasing abscissa table.
pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    if n == 1 {
        return Some(ys[0]);
    }
    let hi = xs.partition_point(|v| *v < x).clamp(1, n - 1);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    Some(ys[lo] + t * (ys[hi] - ys[lo]))
}
