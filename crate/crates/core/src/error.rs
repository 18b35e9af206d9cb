use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch { op: &'static str, left_rows: usize, left_cols: usize, right_rows: usize, right_cols: usize },

    #[error("empty range: lo ({lo}) must be below hi ({hi})")]
    EmptyRange { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("user index {user} out of range for {n_users} users")]
    UserOutOfRange { user: usize, n_users: usize },

    #[error("item index {item} out of range for {n_items} items")]
    ItemOutOfRange { item: usize, n_items: usize },

    #[error("non-finite value in `{param}`")]
    NonFinite { param: String },

    #[error("training diverged in epoch {epoch} (learning rate {learning_rate})")]
    Diverged { epoch: usize, learning_rate: f64 },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("duplicate rating for user {user}, item {item}")]
    DuplicateRating { user: usize, item: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("only {pairs} user pairs share at least {threshold} rated items; lower the threshold")]
    InsufficientPairs { threshold: u32, pairs: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error("expected a {expected} model, got {found}")]
    WrongModelKind { expected: &'static str, found: &'static str },
}

impl Error {
    pub(crate) fn mismatch(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch { op, left_rows: left.0, left_cols: left.1, right_rows: right.0, right_cols: right.1 }
    }
}
