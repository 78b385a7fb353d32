use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("iteration budget exhausted: {0}")]
    IterationBudget(String),
    #[error("staggered loop did not converge: {0}")]
    StaggerDivergence(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("least-squares fit failed: {0}")]
    Fit(String),
    #[error("surface has no minimum: {0}")]
    NoMinimum(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("load step {step} (u = {load} mm): {source}")]
    AtStep {
        step: usize,
        load: f64,
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure stems from invalid input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Domain(_)
            | Error::InsufficientData(_)
            | Error::Geometry(_)
            | Error::Configuration(_)
            | Error::Parameter(_)
            | Error::DegenerateCurve(_)
            | Error::Alignment(_)
            | Error::Data(_)
            | Error::Parse { .. } => true,
            Error::AtStep { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
