use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration diverged at t = {t}: |value| = {value}")]
    Divergence { t: f64, value: f64 },

    #[error("endemic equilibrium does not exist (margin = {margin})")]
    MissingEquilibrium { margin: f64 },
}
