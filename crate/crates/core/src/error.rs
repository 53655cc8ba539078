use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("numerical hazard: {what} at x = {at:?}")]
    Hazard { what: String, at: [f64; 3] },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integration exceeded {steps} steps")]
    TooManySteps { steps: usize },

    #[error("grazing incidence at t = {t} (normal velocity {normal_velocity:e})")]
    GrazingIncidence { t: f64, normal_velocity: f64 },

    #[error("no gyration detected in trajectory")]
    NoOscillation,

    #[error("potential has {sign_changes} sign changes of d/dx3 (V/F) at x' = {xp:?}; minimum is not unique")]
    MultipleMinima { xp: [f64; 2], sign_changes: usize },

    #[error("well is closed at x' = {xp:?} for r = {r} (rbar = {rbar})")]
    EmptyWell { xp: [f64; 2], r: f64, rbar: f64 },

    #[error("degenerate well at x' = {xp:?}: second derivative of V/F vanishes at the minimum")]
    DegenerateWell { xp: [f64; 2] },

    #[error("magnetic lines are not parallel to x3 at {at:?}; the fiber machinery needs F^1 = F^2 = 0")]
    FiberNotVertical { at: [f64; 3] },

    #[error("quadrature did not converge with {nodes} nodes")]
    NonConvergence { nodes: usize },

    #[error("finite-difference estimates disagree (relative spread {spread:e})")]
    NoisyDerivative { spread: f64 },

    #[error("fiber operator is not confining: {0}")]
    NonConfinement(String),

    #[error("lattice count overflow")]
    Overflow,

    #[error("only {found} usable points for the slope fit (need at least {needed})")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidModel(_) | Error::Json(_) => 2,
            _ => 1,
        }
    }
}
