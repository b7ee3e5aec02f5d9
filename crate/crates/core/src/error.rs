use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid box field `{field}`: {value} ({reason})")]
    InvalidBox {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("point ({x}, {y}) lies more than one cell outside the grid")]
    OffGrid { x: f64, y: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("could not place {requested} objects ({placed} placed) after {attempts} attempts: {config}")]
    PlacementInfeasible {
        requested: usize,
        placed: usize,
        attempts: usize,
        config: String,
    },

    #[error("optimization diverged at step {step}: total loss {loss}")]
    Diverged { step: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
