use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mean move has no feasible redistribution under the current locks.
    #[error("rejected move: {0}")]
    RejectedMove(&'static str),

    #[error("unknown node {0}")]
    UnknownNode(u64),

    #[error("no cell mean for condition {0}")]
    MissingCellMean(usize),

    /// All paired differences are identical, so their SD is zero.
    #[error("degenerate standard deviation of paired differences")]
    DegenerateSd,

    #[error("computation cancelled by a newer request")]
    CancelledByNewerRequest,
}

impl Error {
    /// Stable machine-readable code, used on the wire and by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidMetadata(_) => "invalid_metadata",
            Error::InvalidDesign(_) => "invalid_design",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::RejectedMove(_) => "rejected_move",
            Error::UnknownNode(_) => "unknown_node",
            Error::MissingCellMean(_) => "missing_cell_mean",
            Error::DegenerateSd => "degenerate_sd",
            Error::CancelledByNewerRequest => "cancelled_by_newer_request",
        }
    }

    /// Whether the error stems from invalid input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidMetadata(_)
                | Error::InvalidDesign(_)
                | Error::InvalidArgument(_)
                | Error::RejectedMove(_)
                | Error::UnknownNode(_)
                | Error::MissingCellMean(_)
        )
    }
}
