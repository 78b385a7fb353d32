//! Notched three-point-bending specimens.
//!
//! Frame: x along the beam (midspan at x = 0), y through the thickness
//! (0 ≤ y ≤ W), z upward (0 at the notched face, H at the loaded face).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotchDepth {
    Constant(f64),
    /// Depth varying linearly from the y = 0 face to the y = W face.
    Tapered { front: f64, back: f64 },
}

/// Prismatic notch cut from the bottom face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Notch {
    /// x position of the notch centre line at mid-thickness, mm.
    pub offset: f64,
    /// Angle between the notch plane and the beam axis in the x–y plane,
    /// degrees; 90 is a straight notch.
    pub inclination_deg: f64,
    /// Width measured normal to the notch plane, mm.
    pub width: f64,
    pub depth: NotchDepth,
}

impl Notch {
    pub fn straight(offset: f64, width: f64, depth: f64) -> Self {
        Self { offset, inclination_deg: 90.0, width, depth: NotchDepth::Constant(depth) }
    }

    fn angle(&self) -> f64 {
        self.inclination_deg.to_radians()
    }

    pub fn depth_at(&self, y: f64, thickness: f64) -> f64 {
        match self.depth {
            NotchDepth::Constant(h) => h,
            NotchDepth::Tapered { front, back } => {
                let t = (y / thickness).clamp(0.0, 1.0);
                front + t * (back - front)
            }
        }
    }

    pub fn max_depth(&self) -> f64 {
        match self.depth {
            NotchDepth::Constant(h) => h,
            NotchDepth::Tapered { front, back } => front.max(back),
        }
    }

    /// Centre-line x position at thickness coordinate `y`.
    pub fn center_at(&self, y: f64, thickness: f64) -> f64 {
        let a = self.angle();
        self.offset + (y - 0.5 * thickness) * a.cos() / a.sin()
    }

    /// Half of the notch extent along x in any y = const section.
    pub fn half_section(&self) -> f64 {
        0.5 * self.width / self.angle().sin()
    }

    pub fn contains(&self, x: f64, y: f64, z: f64, thickness: f64) -> bool {
        (x - self.center_at(y, thickness)).abs() < self.half_section()
            && z < self.depth_at(y, thickness)
    }

    /// Whether the notch covers part of the box `lo`..`hi` with positive
    /// volume. Cells touching the notch only along a face do not count.
    pub fn overlaps_box(&self, lo: [f64; 3], hi: [f64; 3], thickness: f64) -> bool {
        const SAMPLES: usize = 16;
        let tol = 1e-9 * (1.0 + thickness);
        let hs = self.half_section();
        (0..=SAMPLES).any(|i| {
            let y = lo[1] + (hi[1] - lo[1]) * i as f64 / SAMPLES as f64;
            let c = self.center_at(y, thickness);
            hi[0].min(c + hs) - lo[0].max(c - hs) > tol && self.depth_at(y, thickness) - lo[2] > tol
        })
    }

    /// Notch as seen in the mid-thickness section.
    pub fn mid_section(&self, thickness: f64) -> Notch {
        Notch::straight(self.offset, 2.0 * self.half_section(), self.depth_at(0.5 * thickness, thickness))
    }

    /// Smallest and largest x covered by the notch over the full thickness.
    pub fn x_extent(&self, thickness: f64) -> (f64, f64) {
        let (a, b) = (self.center_at(0.0, thickness), self.center_at(thickness, thickness));
        let h = self.half_section();
        (a.min(b) - h, a.max(b) + h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecimenGeometry {
    pub length: f64,
    pub height: f64,
    /// Thickness W.
    pub width: f64,
    /// Distance between the two support rods.
    pub span: f64,
    /// x position of the loading rod.
    #[serde(default)]
    pub load_offset: f64,
    pub notch: Option<Notch>,
    /// Radius of the damage-free zones around rod lines.
    pub pinned_radius: f64,
}

/// Outer dimensions shared by all beams of the challenge data set.
pub const BEAM_LENGTH: f64 = 76.2;
pub const BEAM_HEIGHT: f64 = 25.4;
pub const BEAM_WIDTH: f64 = 12.7;
/// Support rod spacing. Only shown graphically for the test set; this value
/// is an approximation.
pub const SUPPORT_SPAN: f64 = 63.5;

impl SpecimenGeometry {
    fn beam(notch: Notch, pinned_radius: f64) -> Self {
        Self {
            length: BEAM_LENGTH,
            height: BEAM_HEIGHT,
            width: BEAM_WIDTH,
            span: SUPPORT_SPAN,
            load_offset: 0.0,
            notch: Some(notch),
            pinned_radius,
        }
    }

    /// Centred straight notch (mode I). Notch dimensions are approximate.
    pub fn hc() -> Self {
        Self::beam(Notch::straight(0.0, 1.0, 5.08), 2.5)
    }

    /// Straight notch moderately off midspan. Approximate.
    pub fn hb() -> Self {
        Self::beam(Notch::straight(4.76, 1.0, 5.08), 2.5)
    }

    /// Straight notch far off midspan. Approximate.
    pub fn ha() -> Self {
        Self::beam(Notch::straight(9.52, 1.0, 5.08), 3.0)
    }

    /// Centred notch inclined at 45° through the thickness. Approximate.
    pub fn h45() -> Self {
        Self::beam(
            Notch {
                offset: 0.0,
                inclination_deg: 45.0,
                width: 1.0,
                depth: NotchDepth::Constant(5.08),
            },
            2.5,
        )
    }

    /// Off-centred, inclined, tapered notch of the blind-prediction beam.
    pub fn dmc() -> Self {
        Self::beam(
            Notch {
                offset: 9.52,
                inclination_deg: 63.4,
                width: 1.0,
                depth: NotchDepth::Tapered { front: 5.08, back: 2.54 },
            },
            3.0,
        )
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "HC" => Some(Self::hc()),
            "HB" => Some(Self::hb()),
            "HA" => Some(Self::ha()),
            "H45" => Some(Self::h45()),
            "DMC" => Some(Self::dmc()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.length, self.height, self.width, self.span];
        if dims.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Geometry(format!("dimensions must be positive: {dims:?}")));
        }
        if self.span >= self.length {
            return Err(Error::Geometry(format!(
                "support span {} must be shorter than the beam {}",
                self.span, self.length
            )));
        }
        if self.load_offset.abs() >= 0.5 * self.length {
            return Err(Error::Geometry("loading rod lies outside the beam".into()));
        }
        if !(self.pinned_radius > 0.0 && self.pinned_radius < 0.5 * self.height) {
            return Err(Error::Geometry(format!(
                "pinned radius must lie in (0, H/2), got {}",
                self.pinned_radius
            )));
        }
        if let Some(n) = &self.notch {
            if !(n.width > 0.0) {
                return Err(Error::Geometry("notch width must be positive".into()));
            }
            if !(n.inclination_deg > 0.0 && n.inclination_deg < 180.0) {
                return Err(Error::Geometry("notch inclination must lie in (0, 180)".into()));
            }
            let depths = match n.depth {
                NotchDepth::Constant(h) => [h, h],
                NotchDepth::Tapered { front, back } => [front, back],
            };
            if depths.iter().any(|h| !(*h > 0.0 && *h < self.height)) {
                return Err(Error::Geometry(format!(
                    "notch depth must lie in (0, H), got {depths:?}"
                )));
            }
            let (lo, hi) = n.x_extent(self.width);
            if lo <= -0.5 * self.length || hi >= 0.5 * self.length {
                return Err(Error::Geometry("notch reaches the beam ends".into()));
            }
        }
        Ok(())
    }

    pub fn support_x(&self) -> [f64; 2] {
        [-0.5 * self.span, 0.5 * self.span]
    }

    /// Rod contact lines as (x, z) pairs: two supports, then the load line.
    pub fn rod_lines(&self) -> [(f64, f64); 3] {
        let [a, b] = self.support_x();
        [(a, 0.0), (b, 0.0), (self.load_offset, self.height)]
    }
}
