//! Adapted martingale expectations and differences, ordered subcubes, adapted Haar
//! functions and truncated decompositions.

mod decomposition;
mod expectation;
mod field;
mod haar;

pub use decomposition::{
    decompose, lipschitz_truncation_error, reconstruct, AdaptedDecomposition, CoefficientEntry, TruncationReport,
};
pub use expectation::{adapted_difference, adapted_expectation, cube_difference};
pub use field::VectorField;
pub use haar::{haar, order_children, CubeOrdering, HaarFunction};

use num_complex::Complex64;
use thiserror::Error;

use crate::dyadic::CubeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MartingaleError {
    #[error("cube {cube}: |<b>_Q| = {average} below a/2 = {bound}")]
    DegenerateAverage { cube: CubeId, average: f64, bound: f64 },
    #[error("cube {cube}: no ordering of {children} children meets the tail bound")]
    OrderingInfeasible { cube: CubeId, children: usize },
    #[error("generation {0} not in the system")]
    MissingGeneration(i32),
    #[error("truncation window {m}..{k0} is empty or outside the system")]
    BadWindow { m: i32, k0: i32 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("csv: {0}")]
    Csv(String),
}

/// `integral_A g dmu`.
pub(crate) fn integral(mass: &[f64], set: &[usize], g: impl Fn(usize) -> Complex64) -> Complex64 {
    set.iter().map(|&x| g(x) * mass[x]).sum()
}
