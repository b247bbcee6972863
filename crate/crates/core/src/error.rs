use thiserror::Error;

use crate::lp::LpError;
use crate::market::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid market: {}", format_violations(.0))]
    InvalidMarket(Vec<Violation>),

    #[error("shape mismatch: expected {expected} nodes, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("cannot condition on node {node}: node mass is zero")]
    DegenerateConditioning { node: usize },

    #[error("no consistent price system exists at lambda = {lambda}")]
    NoConsistentPriceSystem { lambda: f64 },

    #[error("market admits arbitrage at lambda = {lambda}; superreplication price is unbounded below")]
    ArbitrageUnbounded { lambda: f64 },

    #[error("{outcomes} outcomes exceeds the enumeration cap of {max}")]
    TooManyOutcomes { outcomes: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Bad input, as opposed to a numerical or I/O failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidMarket(_)
                | Error::ShapeMismatch { .. }
                | Error::TooManyOutcomes { .. }
                | Error::InvalidParameter(_)
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
