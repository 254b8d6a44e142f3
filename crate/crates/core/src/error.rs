use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A simulation or run configuration violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// Conditional inversion failed while sampling; carries the offending
    /// uniform pair so the draw can be reproduced.
    #[error("conditional inversion did not converge at u={u}, w={w}")]
    Inversion { u: f64, w: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
