use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("infeasible edge count: {0}")]
    Infeasible(String),

    #[error("graph has {components} connected components; the {variant} variant needs a connected graph")]
    Disconnected { components: usize, variant: String },

    #[error("oracle limit exceeded: n={n}, m={m} (limits n<={max_n}, m<={max_m})")]
    CapExceeded {
        n: usize,
        m: usize,
        max_n: usize,
        max_m: usize,
    },

    #[error("distributions have different supports ({0} vs {1} entries)")]
    SupportMismatch(usize, usize),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::InvalidState(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
