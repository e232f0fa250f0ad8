use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range, expected {expected}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("state has zero norm")]
    ZeroState,

    #[error("vertex {vertex} is not on a ring with half-size {half_size}")]
    VertexOutOfRange { vertex: i64, half_size: usize },

    #[error("eigenvalue computation failed: {0}")]
    NonConvergence(String),

    #[error("no eigenvalue with modulus below {0}")]
    NoSubLeadingEigenvalue(f64),

    #[error("invalid fit window: {0}")]
    InvalidFitWindow(String),

    #[error("stationary state n = {n} has residual {residual:e}; coin is outside the trapping family")]
    StationaryResidual { n: i64, residual: f64 },

    #[error("unexpected linear dependence among stationary states at n = {0}")]
    LinearDependence(i64),

    #[error("operation requires an orthonormal sink-free trapped basis")]
    BasisNotSinkFree,

    #[error("closed-form efficiency is tabulated for N in 2..=5, got N = {0}")]
    OutsideTable(usize),

    #[error("exact enumeration needs 2N <= 16 edges, got {0}")]
    EnumerationTooLarge(usize),

    #[error("operation requires an exactly enumerated channel, got a sampled one")]
    SampledChannel,

    #[error("density matrix lost positivity: minimum eigenvalue {0:e}")]
    PositivityViolation(f64),
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name,
            value,
            expected,
        })
    }
}
