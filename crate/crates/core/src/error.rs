use thiserror::Error;

/// Errors raised by the solver library.
///
/// Construction paths that the callers can violate (degenerate geometry,
/// incompatible method/degree combinations, singular systems) report here;
/// plain shape mismatches between vectors and spaces are programming errors
/// and panic via assertions instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell} is degenerate (area {area:.3e})")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("nonzero value {value:.3e} prescribed at boundary vertex {vertex}")]
    NonzeroBoundaryValue { vertex: usize, value: f64 },

    #[error("singular local solver system on cell {cell}; the (kind, degree) combination is not well posed")]
    SingularLocalSystem { cell: usize },

    #[error("BDM-H requires polynomial degree p >= 2, got p = {p}")]
    BdmDegreeTooLow { p: usize },

    #[error("injection kind {kind} requires coarse local solver operators")]
    MissingLocalOperators { kind: &'static str },

    #[error("zero diagonal entry at row {row}; matrix is not SPD")]
    ZeroDiagonal { row: usize },

    #[error("denominator form is singular on the requested subspace")]
    SingularDenominator,

    #[error("stationary iteration diverged after {iterations} iterations (relative residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },
}
