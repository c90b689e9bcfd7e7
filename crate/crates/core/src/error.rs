use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("untrained memory: every class prototype is zero")]
    UntrainedMemory,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("idx: bad magic bytes {0:02x?}")]
    BadMagic([u8; 2]),

    #[error("idx: unsupported type code 0x{0:02x}")]
    UnsupportedType(u8),

    #[error("idx: truncated payload, expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("idx: {0}")]
    Malformed(String),

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("partition: {0}")]
    Partition(String),

    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Attach a user index to a per-link infeasibility raised by a kernel
    /// that does not know which user it was evaluating.
    pub(crate) fn for_user(self, user: usize) -> Self {
        match self {
            Error::Infeasible(Infeasibility::LinkBudget { .. }) => {
                Error::Infeasible(Infeasibility::LinkBudget { user })
            }
            other => other,
        }
    }
}

/// Why a resource-allocation instance (or one step of the solver) has no
/// feasible point.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// Computation alone exceeds the completion-time budget for this user.
    NoTransmissionTime { user: usize },
    /// The payload cannot be delivered within the available time at full power.
    LinkBudget { user: usize },
    /// Minimum bandwidths do not fit into the total bandwidth.
    BandwidthBudget { required: f64, available: f64 },
    /// The minimum transmission time exceeds what the deadline leaves over.
    Deadline { user: usize },
    /// Required CPU frequency exceeds the cap.
    FrequencyCap { user: usize, required: f64, cap: f64 },
    /// No candidate dimension passed the feasibility certificate.
    NoFeasibleDimension,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::NoTransmissionTime { user } => {
                write!(f, "user {user}: computation alone exceeds the time budget")
            }
            Infeasibility::LinkBudget { user } => {
                write!(f, "user {user}: payload not deliverable at maximum power")
            }
            Infeasibility::BandwidthBudget { required, available } => {
                write!(f, "minimum bandwidths sum to {required:.6e} Hz, budget is {available:.6e} Hz")
            }
            Infeasibility::Deadline { user } => {
                write!(f, "user {user}: minimum transmission time misses the deadline")
            }
            Infeasibility::FrequencyCap { user, required, cap } => {
                write!(f, "user {user}: required CPU frequency {required:.6e} Hz exceeds cap {cap:.6e} Hz")
            }
            Infeasibility::NoFeasibleDimension => {
                write!(f, "no candidate dimension passes the feasibility certificate")
            }
        }
    }
}
