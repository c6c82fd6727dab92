use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A size limit (binomial width, tensor length) was exceeded.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// The statistic is not defined on this dataset (empty, zero variance).
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    /// A replay noise source ran out of values.
    #[error("noise sequence exhausted after {consumed} draws")]
    Exhausted { consumed: usize },
    #[error("config error: {0}")]
    Config(String),
    /// Malformed or out-of-range input data.
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
