use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("QBER is undefined: the corresponding yield is zero")]
    UndefinedQber,

    #[error("HOM visibility is undefined: single-port click probability is zero")]
    UndefinedVisibility,

    #[error("argument {value} outside the supported range [-{limit}, {limit}]")]
    OutOfRange { value: f64, limit: f64 },

    #[error("quadrature did not reach relative tolerance {tolerance:e} after {panels} panels")]
    IntegrationDidNotConverge { tolerance: f64, panels: usize },

    #[error("profile error: {0}")]
    Profile(String),

    #[error("no conclusive rounds to estimate from")]
    NoConclusiveRounds,

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep the rendered message.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(IoError(e.to_string()))
    }
}

pub(crate) fn ensure(
    ok: bool,
    name: &'static str,
    value: f64,
    reason: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

pub(crate) fn ensure_probability(name: &'static str, value: f64) -> Result<()> {
    ensure(
        (0.0..=1.0).contains(&value),
        name,
        value,
        "must lie in [0, 1]",
    )
}
