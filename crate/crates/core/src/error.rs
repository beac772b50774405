use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {0}")]
    Resource(String),

    /// A factor |f(p) p^{-s}| reached 1, so the principal log is undefined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Importance-sampling ESS or tail hit count below its gate.
    #[error("unstable estimate: {what} ({gauge} = {value:.3}, need >= {need})")]
    Unstable {
        what: String,
        gauge: &'static str,
        value: f64,
        need: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Unstable { .. } => 3,
            Error::Io { .. } => 4,
            Error::Resource(_) | Error::Domain(_) => 1,
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
