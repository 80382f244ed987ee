use crate::expr::ParseError;
use crate::ode::Trajectory;
use crate::section::SectionPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration failed at t = {t:e}: {message}")]
    IntegrationFailure {
        t: f64,
        message: String,
        partial: Box<Trajectory>,
    },

    #[error("event refinement did not converge in [{t_lo:e}, {t_hi:e}] (|g| = {residual:e})")]
    EventRefinement { t_lo: f64, t_hi: f64, residual: f64 },

    #[error("tangent crossing at t = {:e}, (x, z) = ({:e}, {:e})", .point.t, .point.x, .point.z)]
    TangentEncounter { point: Box<SectionPoint> },

    #[error("periodic orbit search failed after {iterations} iterations (best residual {best_residual:e})")]
    SearchFailure { best_residual: f64, iterations: usize },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("ill-posed: {0}")]
    IllPosed(String),

    #[error("insufficient resolution: raw degree {raw} is not within 0.1 of an integer")]
    Resolution { raw: f64 },

    #[error("ambiguous braid crossing at transit fraction {tau} (depth gap {depth_gap:e})")]
    AmbiguousCrossing { tau: f64, depth_gap: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParams(_) => "invalid_params",
            Error::Parse(_) => "parse",
            Error::Unsupported(_) => "unsupported",
            Error::Precondition(_) => "precondition",
            Error::IntegrationFailure { .. } => "integration_failure",
            Error::EventRefinement { .. } => "event_refinement",
            Error::TangentEncounter { .. } => "tangent_encounter",
            Error::SearchFailure { .. } => "search_failure",
            Error::Degenerate(_) => "degenerate",
            Error::IllPosed(_) => "ill_posed",
            Error::Resolution { .. } => "resolution",
            Error::AmbiguousCrossing { .. } => "ambiguous_crossing",
            Error::Input(_) => "input",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
