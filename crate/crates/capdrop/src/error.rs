use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("smallness violated: W1,inf norm {norm:.3e} is not below {delta0:.3e}")]
    Smallness { norm: f64, delta0: f64 },
    #[error("taylor order {order} exceeds the configured maximum {max}")]
    TaylorOrder { order: usize, max: usize },
    #[error("dn method {0}")]
    DnMethod(String),
    #[error("collocation system ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("frequency {omega} is not resonant for mode {l} (|F| = {residual:.3e})")]
    NotResonant { l: usize, omega: f64, residual: f64 },
    #[error("no integer root of the resonance polynomial in [1, {l_max}] at frequency {omega}")]
    NoRoot { omega: f64, l_max: usize },
    #[error("newton failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("continuation stopped early: {0}")]
    BranchStopped(String),
    #[error("state left the symmetric subspace (defect {defect:.3e})")]
    SymmetryLost { defect: f64 },
    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serialize(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::Smallness { .. } => "smallness",
            Error::TaylorOrder { .. } => "taylor_order",
            Error::DnMethod(_) => "dn_method",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::InvalidParams(_) => "invalid_params",
            Error::NotResonant { .. } => "not_resonant",
            Error::NoRoot { .. } => "no_root",
            Error::NewtonFailed { .. } => "newton_failed",
            Error::BranchStopped(_) => "branch_stopped",
            Error::SymmetryLost { .. } => "symmetry_lost",
            Error::StepRejected { .. } => "step_rejected",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Serialize(_) => "serialize",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
