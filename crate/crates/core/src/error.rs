use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in slot {slot}: expected {expected}, found {found}")]
    Dimension {
        slot: usize,
        expected: usize,
        found: usize,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index} out of range 1..={bound}")]
    Index { index: usize, bound: usize },

    #[error("duplicate tensor index {0:?}")]
    DuplicateIndex(Vec<usize>),

    #[error("coefficient of {key} is not the conjugate of its mirror {mirror}")]
    RealValuedness { key: String, mirror: String },

    #[error("imaginary residue {residue:e} exceeds tolerance for value {value}")]
    ImaginaryResidue { residue: f64, value: f64 },

    #[error("tensor is not conjugate super-symmetric")]
    NotConjugateSuperSymmetric,

    #[error("form is not square-free")]
    NotSquareFree,

    #[error("form is not square-free in variable {0}")]
    NotSquareFreeInVariable(usize),

    #[error("coordinate {coordinate} lies outside the convex hull of the feasible roots")]
    ConvexHullViolation { coordinate: usize },

    #[error("convexity has not been asserted for this form")]
    ConvexNotAsserted,

    #[error("degree {0} must be even")]
    OddDegree(usize),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("enumeration of {count:.3e} points exceeds guard {guard:.3e}")]
    EnumerationTooLarge { count: f64, guard: f64 },

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
