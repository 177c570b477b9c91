//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong when sampling, releasing, or serializing.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain (non-finite, wrong sign,
    /// wrong ordering, ...). The message names the offending argument.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A release was requested beyond the privacy bound the ledger was
    /// created with.
    #[error("requested rho = {requested} exceeds the ledger bound rho_inf = {bound}")]
    BudgetExceeded { requested: f64, bound: f64 },

    /// The mechanism has no exact-value sentinel, so `rho_inf` must be finite.
    #[error("mechanism {0} requires a finite rho_inf")]
    UnboundedUnsupported(&'static str),

    /// Thresholded releases must be requested at strictly increasing budgets.
    #[error("budgets must increase strictly: got {current} after {previous}")]
    BudgetOrder { previous: f64, current: f64 },

    /// A conditional sample was requested from an interval carrying no
    /// representable probability mass.
    #[error("conditioning event has probability below 1e-300; cannot sample")]
    ImpossibleConditioning,

    /// The ledger was loaded from an untrusted store, so the exact query
    /// value is absent and releases sharper than the stored ones are
    /// impossible. Carries the strongest level still answerable.
    #[error("ledger holds no exact value; cannot release above the strongest stored level rho = {0}")]
    SecretUnavailable(f64),

    /// A closed-form guarantee only holds under a side condition that the
    /// supplied parameters violate.
    #[error("precondition violated: {what} must exceed {required}, got {actual}")]
    PreconditionFailed {
        what: &'static str,
        required: f64,
        actual: f64,
    },

    /// Matrix shapes do not line up, or a required left inverse does not
    /// exist.
    #[error("{0}")]
    Linear(String),

    /// A persisted ledger document could not be parsed or has an
    /// unsupported version.
    #[error("ledger document: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
