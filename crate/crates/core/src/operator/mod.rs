//! Standard kernels, discretized Calderon-Zygmund operators, matrix elements and their
//! decay, BMO-type estimators, the paraproduct, the adjacent-cube split and the Tb report.

mod adjacent;
mod bmo;
mod decay;
mod elements;
mod kernel;
mod matrix;
mod paraproduct;
mod report;

pub use adjacent::{
    adjacent_split, covering_cap, split_sets, AdjacentSplit, CoveringBall, CoveringReport, SplitComponents, SplitParams, SplitSets,
};
pub use bmo::{bmo_norm, best_constant, dyadic_radii, rbmo_norm, wbp_constant, Ball, BallFamily, BmoEstimate, RbmoEstimate, WbpEstimate};
pub use decay::{corrected_element_check, separated_decay_check, CorrectedTable, DecayParams, DecayRow, DecayTable};
pub use elements::{average, matrix_element, HaarGrid, MatrixElement, PairingContext};
pub use kernel::{cz_constants, CzConstants, KernelFamily, StandardKernel, DEFAULT_SEPARATION};
pub use matrix::{pairing, KernelOperator, QuadMode};
pub use paraproduct::{lp_norm, paraproduct, paraproduct_norm_ratio, paraproduct_pairs, ParaproductNorm};
pub use report::{
    annulus_integral_check, operator_norm_lower_bound, tb_report, AnnulusCheck, ConverseRatios, NormReport, OperatorNormBound,
    ParaproductSetup, TbFamilies, TbParams,
};

use thiserror::Error;

use crate::dyadic::CubeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("kernel evaluated on the diagonal")]
    DiagonalEvaluation,
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("no admissible pairs")]
    NoAdmissiblePairs,
    #[error("empty ball family")]
    EmptyBallFamily,
    #[error("|<b_2>| = {average} below {bound} on cube {cube:?}")]
    DegenerateAverage { cube: CubeId, average: f64, bound: f64 },
    #[error("cubes {q:?} and {r:?} are not adjacent (distance {distance})")]
    NotAdjacent { q: CubeId, r: CubeId, distance: f64 },
    #[error("covering failed: best deficit {deficit} with {balls} balls")]
    CoveringFailed { deficit: f64, balls: usize },
}

impl From<std::io::Error> for OperatorError {
    fn from(e: std::io::Error) -> Self {
        OperatorError::Io(e.to_string())
    }
}

impl From<csv::Error> for OperatorError {
    fn from(e: csv::Error) -> Self {
        OperatorError::Format(e.to_string())
    }
}
