//! Project configuration. One TOML file with a section per pipeline stage;
//! relative paths resolve against the file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use orthofrac::calibration::{CalibrationOptions, DEFAULT_GRID_STEP, DEFAULT_SMOOTHING_WINDOW};
use orthofrac::crack::{scan::CleanParams, BROKEN_THRESHOLD, LATTICE_STEP};
use orthofrac::fem::{MeshSpec, SpecimenGeometry};
use orthofrac::material::{DissipationModel, ElasticityTensor, DEFAULT_RESIDUAL_STIFFNESS};
use orthofrac::solver::{LoadSchedule, SolverSettings};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// Output root; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub material: Option<MaterialSection>,
    #[serde(default)]
    pub specimen: Option<SpecimenSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub calibration: Option<CalibrationSection>,
    #[serde(default)]
    pub crack: Option<CrackSection>,
    #[serde(default)]
    pub plots: PlotSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    /// kg/m³.
    pub density: Option<f64>,
    /// CSV rows propagation, polarization, speed (m/s).
    pub velocities: Option<PathBuf>,
    /// Manifest of compression curves keyed by direction letter V, T, H.
    pub compression: Option<PathBuf>,
    /// Compression cylinder length and radius, mm.
    #[serde(default)]
    pub cylinder: Option<[f64; 2]>,
    /// Known Young's moduli [E_V, E_T, E_H], MPa, instead of compression tests.
    pub youngs: Option<[f64; 3]>,
    /// Stiffness ratios given directly; skips the estimate-elastic output.
    pub ratios: Option<RatioSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioSection {
    /// [VVVV, TTTT, HHHH] / VVVV.
    pub normal: [f64; 3],
    /// [VVTT, TTHH, HHVV] / VVVV.
    pub coupling: [f64; 3],
    /// [THTH, HVHV, VTVT] / VVVV.
    pub shear: [f64; 3],
}

impl RatioSection {
    pub fn tensor(&self) -> orthofrac::Result<ElasticityTensor> {
        ElasticityTensor::orthotropic(self.normal, self.coupling, self.shear)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecimenSection {
    /// Named geometry (HC, HB, HA, H45, DMC) unless `geometry` is given.
    pub preset: Option<String>,
    pub geometry: Option<SpecimenGeometry>,
    /// Radius of the damage-free zones at the rods, mm.
    pub pinned_radius: Option<f64>,
    pub mesh: MeshSpec,
}

impl SpecimenSection {
    /// Geometry of the configured specimen, or of `name` when the preset
    /// is overridden per calibration test.
    pub fn geometry_for(&self, name: Option<&str>) -> Result<SpecimenGeometry, CliError> {
        let preset = |p: &str| {
            SpecimenGeometry::preset(p).ok_or_else(|| CliError::config(format!("unknown specimen preset '{p}'")))
        };
        let mut g = match (name, &self.geometry, &self.preset) {
            (Some(n), _, _) => preset(n)?,
            (None, Some(g), _) => g.clone(),
            (None, None, Some(p)) => preset(p)?,
            (None, None, None) => return Err(CliError::config("specimen needs a preset or a geometry")),
        };
        if let Some(r) = self.pinned_radius {
            g.pinned_radius = r;
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_model")]
    pub model: DissipationModel,
    /// Length scale, mm.
    #[serde(default = "default_ell")]
    pub ell: f64,
    /// Toughness, MPa·mm.
    #[serde(default = "default_gc")]
    pub gc: f64,
    /// Stiffness scale applied to the ratios, MPa.
    #[serde(default = "default_cvvvv")]
    pub c_vvvv: f64,
    #[serde(default = "default_g0")]
    pub residual_stiffness: f64,
    /// Final imposed deflection, mm.
    #[serde(default = "default_max_deflection")]
    pub max_deflection: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub stagger_tol: Option<f64>,
    #[serde(default)]
    pub newton_tol: Option<f64>,
    #[serde(default)]
    pub max_stagger_iters: Option<usize>,
    #[serde(default)]
    pub stop_fraction: Option<f64>,
    /// Factor reuse for large meshes.
    #[serde(default)]
    pub iterative: bool,
    /// Schedule indices whose fields are written.
    #[serde(default)]
    pub snapshots: Vec<usize>,
}

fn default_model() -> DissipationModel {
    DissipationModel::At1
}
fn default_ell() -> f64 {
    1.25
}
fn default_gc() -> f64 {
    0.0923
}
fn default_cvvvv() -> f64 {
    2057.0
}
fn default_g0() -> f64 {
    DEFAULT_RESIDUAL_STIFFNESS
}
fn default_max_deflection() -> f64 {
    0.5
}
fn default_steps() -> usize {
    50
}

impl Default for SolverSection {
    fn default() -> Self {
        toml::from_str("").expect("solver defaults")
    }
}

impl SolverSection {
    pub fn settings(&self) -> Result<SolverSettings, CliError> {
        let mut s = SolverSettings::new(LoadSchedule::uniform(self.max_deflection, self.steps)?);
        if self.iterative {
            s = s.with_iterative_solvers();
        }
        if let Some(v) = self.stagger_tol {
            s.stagger_tol = v;
        }
        if let Some(v) = self.newton_tol {
            s.newton_tol = v;
        }
        if let Some(v) = self.max_stagger_iters {
            s.max_stagger_iters = v;
        }
        if let Some(v) = self.stop_fraction {
            s.stop_fraction = v;
        }
        s.snapshot_steps = self.snapshots.clone();
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// Manifest rows (test, curve file); each test name is also the
    /// specimen preset used for its simulations.
    pub experiments: Option<PathBuf>,
    /// Tests to calibrate; defaults to every manifest key.
    #[serde(default)]
    pub tests: Vec<String>,
    pub c_range: [f64; 2],
    pub g_range: [f64; 2],
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Analytic cost in place of the simulator.
    pub mock: Option<MockCost>,
}

fn default_grids() -> Vec<usize> {
    CalibrationOptions::default().grids
}
fn default_shrink() -> f64 {
    CalibrationOptions::default().shrink
}
fn default_window() -> usize {
    DEFAULT_SMOOTHING_WINDOW
}
fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}

/// α(C−C₀)² + β(G−G₀)² + γ(C−C₀)(G−G₀) + δ, optionally with seeded
/// multiplicative noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockCost {
    pub c0: f64,
    pub g0: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    /// Relative amplitude of the noise.
    #[serde(default)]
    pub noise: f64,
    /// Indices into the first-round grid whose evaluation fails.
    #[serde(default)]
    pub fail: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackSection {
    /// Nodal damage field; defaults to the final fields of `simulate`.
    pub field: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_lattice")]
    pub step: f64,
    /// Horizontal cuts (name, height in mm).
    #[serde(default)]
    pub sections: BTreeMap<String, f64>,
    /// Numerical surface to compare; defaults to the average surface of
    /// `extract-crack`.
    pub numerical: Option<PathBuf>,
    #[serde(default)]
    pub scans: Vec<ScanEntry>,
    /// Specimen-frame position of the scan anchor point, mm.
    pub anchor: Option<[f64; 3]>,
    #[serde(default)]
    pub clean: CleanParams,
}

fn default_threshold() -> f64 {
    BROKEN_THRESHOLD
}
fn default_lattice() -> f64 {
    LATTICE_STEP
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanEntry {
    pub file: PathBuf,
    /// Anchor point in the scanner frame, mm.
    pub anchor: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSection {
    /// Test whose repetitions are overlaid on the simulated curve.
    pub test: Option<String>,
    /// Bin width of the deviation histogram, mm.
    #[serde(default = "default_bin")]
    pub bin_width: f64,
}

fn default_bin() -> f64 {
    0.25
}

impl Default for PlotSection {
    fn default() -> Self {
        Self { test: None, bin_width: default_bin() }
    }
}

/// A loaded configuration with its source text and location.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ProjectConfig,
    pub path: PathBuf,
    pub text: String,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: ProjectConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        config.resolve(&base);
        config.check()?;
        Ok(Self { config, path: path.to_path_buf(), text })
    }
}

impl ProjectConfig {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.output.as_mut() {
            fix(p);
        }
        if let Some(m) = self.material.as_mut() {
            m.velocities.as_mut().map(fix);
            m.compression.as_mut().map(fix);
        }
        if let Some(c) = self.calibration.as_mut() {
            c.experiments.as_mut().map(fix);
        }
        if let Some(c) = self.crack.as_mut() {
            c.field.as_mut().map(fix);
            c.numerical.as_mut().map(fix);
            for s in &mut c.scans {
                fix(&mut s.file);
            }
        }
    }

    /// Unit and existence checks that do not depend on the command.
    fn check(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("{name} must be positive, got {v}")))
            }
        };
        let exists = |p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(CliError::config(format!("referenced file {} does not exist", p.display())))
            }
        };
        if let Some(m) = &self.material {
            if let Some(rho) = m.density {
                positive("material.density (kg/m³)", rho)?;
            }
            for p in [&m.velocities, &m.compression].into_iter().flatten() {
                exists(p)?;
            }
            if let Some([l, r]) = m.cylinder {
                positive("cylinder length (mm)", l)?;
                positive("cylinder radius (mm)", r)?;
            }
        }
        let s = &self.solver;
        positive("solver.ell (mm)", s.ell)?;
        positive("solver.gc (MPa·mm)", s.gc)?;
        positive("solver.c_vvvv (MPa)", s.c_vvvv)?;
        positive("solver.max_deflection (mm)", s.max_deflection)?;
        if let Some(c) = &self.calibration {
            if let Some(p) = &c.experiments {
                exists(p)?;
            }
            for (name, r) in [("c_range (MPa)", c.c_range), ("g_range (MPa·mm)", c.g_range)] {
                if !(r[0] > 0.0 && r[1] > r[0]) {
                    return Err(CliError::config(format!("calibration.{name} must satisfy 0 < lo < hi, got {r:?}")));
                }
            }
            positive("calibration.grid_step (mm)", c.grid_step)?;
        }
        if let Some(c) = &self.crack {
            for p in c.field.iter().chain(&c.numerical).chain(c.scans.iter().map(|s| &s.file)) {
                exists(p)?;
            }
            positive("crack.step (mm)", c.step)?;
        }
        positive("plots.bin_width (mm)", self.plots.bin_width)?;
        Ok(())
    }
}
