use thiserror::Error;

/// Every failure the solver can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite model value at theta = {theta}")]
    ModelEvaluation { theta: f64 },

    #[error("quantity target {target} is not reachable inside [-{bound}, {bound}]")]
    QuantityRange { target: f64, bound: f64 },

    #[error("outside option has a kink at theta = {theta}")]
    Kink { theta: f64 },

    #[error("no sign change on [{lo}, {hi}] (g(lo) = {g_lo}, g(hi) = {g_hi})")]
    Bracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("quadrature depth exhausted on [{a}, {b}]; partial value {partial}")]
    Quadrature { a: f64, b: f64, partial: f64 },

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("degenerate configuration: {0}")]
    Degeneracy(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("unsupported binding structure: {0}")]
    Structure(String),

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("oracle did not converge: {message} (best objective {best_objective})")]
    Oracle { message: String, best_objective: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
