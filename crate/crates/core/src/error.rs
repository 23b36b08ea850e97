use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pole of {func} at s = {sigma} + {t}i")]
    Pole {
        func: &'static str,
        sigma: f64,
        t: f64,
    },

    #[error("{func} is undefined at s = {sigma} + {t}i")]
    Undefined {
        func: &'static str,
        sigma: f64,
        t: f64,
    },

    #[error("{func}: log-magnitude {log_modulus} exceeds the representable range")]
    Overflow { func: &'static str, log_modulus: f64 },

    #[error("{func}: argument {arg} outside the domain ({detail})")]
    Domain {
        func: &'static str,
        arg: f64,
        detail: &'static str,
    },

    #[error("{func} did not converge after {iterations} iterations")]
    NonConvergence { func: &'static str, iterations: usize },

    #[error("{func}: derivative vanished at s = {sigma} + {t}i")]
    DerivativeSingular {
        func: &'static str,
        sigma: f64,
        t: f64,
    },

    #[error("rotated value is not real at t = {t}: re = {re}, im = {im}")]
    SymmetryViolation { t: f64, re: f64, im: f64 },

    #[error("index error: {0}")]
    Index(String),

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("invalid section spec: {0}")]
    InvalidSpec(String),

    #[error("invalid rearrangement: {0}")]
    InvalidRearrangement(String),

    #[error("zero on (or numerically near) the contour at s = {sigma} + {t}i")]
    BoundaryZero { sigma: f64, t: f64 },

    #[error("phase step could not be resolved below pi/2 after maximal subdivision")]
    PhaseStep,

    #[error("tracking lost at N = {n_terms}, t_param = {t_param}: {reason}")]
    TrackingLoss {
        n_terms: usize,
        t_param: f64,
        reason: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
