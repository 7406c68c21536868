use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("grid mismatch: expected depth {expected}, found {found}")]
    GridMismatch { expected: u32, found: u32 },

    #[error("complementary function is unbounded at s = {0} (Young function is not superlinear)")]
    Unbounded(f64),

    #[error("series for c_phi does not decay: term {term} at k = {k}")]
    Divergent { k: u32, term: f64 },

    #[error("operation not supported for {0}")]
    Unsupported(String),

    #[error("degenerate denominator: {0}")]
    Degenerate(String),

    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },
}

impl Error {
    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_owned(),
            reason: reason.into(),
        }
    }
}
