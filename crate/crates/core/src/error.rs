use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by synthesis, realization, and network construction.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Operand shapes do not agree.
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    NotSquare { rows: usize, cols: usize },
    /// The plant matrix is not Schur stable but the operation requires it.
    Unstable { spectral_radius: f64 },
    /// An equality constraint of a synthesis program cannot be met.
    Infeasible { constraint: String, residual: f64 },
    /// A matrix that must be inverted is (numerically) singular.
    Singular { context: &'static str },
    InvalidArgument(String),
    /// Wiring check failed; carries every violation found.
    Wiring(Vec<String>),
    /// The step schedule could not make progress (cyclic dependency across components).
    AlgebraicLoop { node: usize, component: usize },
    UnknownNode(usize),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                context,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::NotSquare { rows, cols } => write!(f, "matrix is not square ({rows}x{cols})"),
            Error::Unstable { spectral_radius } => {
                write!(f, "plant is not Schur stable (spectral radius {spectral_radius})")
            }
            Error::Infeasible {
                constraint,
                residual,
            } => write!(f, "infeasible: constraint {constraint} violated by {residual:e}"),
            Error::Singular { context } => write!(f, "singular matrix in {context}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Wiring(v) => {
                write!(f, "invalid wiring ({} violations)", v.len())?;
                for item in v {
                    write!(f, "; {item}")?;
                }
                Ok(())
            }
            Error::AlgebraicLoop { node, component } => write!(
                f,
                "unresolved algebraic loop: node {node} blocked at component {component}"
            ),
            Error::UnknownNode(id) => write!(f, "unknown node {id}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_shape(
    context: &'static str,
    found: (usize, usize),
    expected: (usize, usize),
) -> Result<()> {
    if found != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
