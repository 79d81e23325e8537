use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (shape, sign, ordering...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step size {dt} exceeds the stability limit {limit}")]
    StepSize { dt: f64, limit: f64 },

    #[error("grid too coarse: dx = {dx} but at most {limit} is required")]
    Resolution { dx: f64, limit: f64 },

    #[error("observation horizon too short: b*T = {reach} < L = {length}")]
    Horizon { reach: f64, length: f64 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("series truncation budget exceeded: {0}")]
    TruncationBudget(String),

    #[error("small denominator |{what}| = {value:e} below floor {floor:e}")]
    SmallDenominator { what: String, value: f64, floor: f64 },

    #[error("linear system is singular or not positive definite: {0}")]
    Singular(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("gamma fit failed: {0}")]
    GammaFit(String),

    #[error("missing co-observed moment M{0}")]
    MissingMoment(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the numerics rather than by the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergent(_)
                | Error::TruncationBudget(_)
                | Error::SmallDenominator { .. }
                | Error::Singular(_)
                | Error::NonConvergence(_)
        )
    }
}

/// Non-fatal diagnostics collected by solvers and estimators.
///
/// Every warning is also emitted through the `log` facade when it is raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Mellin line magnitude at the truncation edge relative to its peak.
    MellinTail { ratio: f64, threshold: f64 },
    /// The discrepancy principle settled on an end of the penalty grid.
    PenaltyGridBoundary { lambda: f64 },
    /// Raw kernel estimate carries a large negative part.
    NegativeMass { fraction: f64 },
    /// Estimated series remainder exceeds the requested budget.
    SeriesDivergence { remainder: f64, budget: f64 },
    /// Kalman innovation variance became tiny relative to the prior scale.
    CovarianceConditioning { min_innovation: f64 },
    /// Inverting a moment of order k with the first-order route needs k+1 derivatives.
    HighOrderDifferentiation { order: usize },
    /// Negative values in a quantity that should stay nonnegative.
    SignViolation { min_value: f64 },
}

impl Warning {
    pub(crate) fn emit(self) -> Self {
        log::warn!("{self:?}");
        self
    }
}
