mod calibrate;
mod crack;
mod elastic;
mod plots;
mod simulate;

use std::fs;
use std::path::{Path, PathBuf};

use orthofrac::material::{DissipationModel, ElasticityTensor};

use crate::config::{Loaded, RatioSection, SolverSection};
use crate::manifest::Recorder;
use crate::{Cli, CliError, Command, Overrides};

/// Everything a command needs besides its own section.
pub struct Context<'a> {
    pub cli: &'a Cli,
    pub loaded: Loaded,
    pub out: PathBuf,
}

impl Context<'_> {
    pub fn dir(&self, command: &str) -> PathBuf {
        self.out.join(command)
    }

    /// Fresh command directory with a recorder writing into it. Stale files
    /// from earlier runs would otherwise end up in the inventory.
    pub fn recorder(&self, command: &str, overrides: serde_json::Value) -> Result<Recorder, CliError> {
        let dir = self.dir(command);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        Recorder::new(dir, command, &self.loaded, self.cli.seed, self.cli.workers, overrides)
    }

    /// Unit stiffness ratios, either from the configuration or from an
    /// earlier estimate-elastic run.
    pub fn ratios(&self, rec: &mut Recorder) -> Result<ElasticityTensor, CliError> {
        if let Some(r) = self.loaded.config.material.as_ref().and_then(|m| m.ratios) {
            return Ok(r.tensor()?);
        }
        let path = self.dir(elastic::COMMAND).join(elastic::RATIOS_FILE);
        if !path.exists() {
            return Err(CliError::config(format!(
                "no stiffness ratios: set material.ratios or run estimate-elastic first ({} missing)",
                path.display()
            )));
        }
        rec.input(&path)?;
        let r: RatioSection = serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Ok(r.tensor()?)
    }
}

/// Solver section with command-line overrides applied.
pub fn apply_overrides(solver: &SolverSection, o: &Overrides) -> Result<SolverSection, CliError> {
    let mut s = solver.clone();
    if let Some(gc) = o.gc {
        s.gc = gc;
    }
    if let Some(ell) = o.ell {
        s.ell = ell;
    }
    if let Some(c) = o.cvvvv {
        s.c_vvvv = c;
    }
    if let Some(m) = &o.model {
        s.model = match m.as_str() {
            "AT1" => DissipationModel::At1,
            "AT2" => DissipationModel::At2,
            other => return Err(CliError::config(format!("unknown model '{other}'"))),
        };
    }
    for (name, v) in [("gc", s.gc), ("ell", s.ell), ("cvvvv", s.c_vvvv)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::config(format!("--{name} must be positive, got {v}")));
        }
    }
    Ok(s)
}

pub fn overrides_json(o: &Overrides) -> serde_json::Value {
    serde_json::to_value(o).unwrap_or_default()
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.workers == 0 {
        return Err(CliError::config("--workers must be at least 1"));
    }
    let loaded = Loaded::read(&cli.config)?;
    let out = match (&cli.out, &loaded.config.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => cli.config.parent().unwrap_or(Path::new("")).join("out"),
    };
    let ctx = Context { cli, loaded, out };
    match &cli.command {
        Command::EstimateElastic => elastic::run(&ctx),
        Command::Simulate(o) => simulate::run(&ctx, o),
        Command::Calibrate(o) => calibrate::run(&ctx, o),
        Command::ExtractCrack => crack::extract(&ctx),
        Command::CompareCrack => crack::compare(&ctx),
        Command::ExportPlots => plots::run(&ctx),
    }
}

/// Tidy CSV from a header and rows of already formatted cells.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
