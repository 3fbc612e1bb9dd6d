//! Tagged randomization of dyadic centers, good and bad cubes, and Monte Carlo
//! estimators for boundary layers, bad cubes and uniform goodness.

mod collapse;
mod goodness;
mod montecarlo;
mod sample;
mod tagging;

pub use collapse::{check_collapse_identity, CollapseInputs, CollapseReport};
pub use goodness::{classify_geometric, gamma, pi_good, separation_check, threshold, CenterTree, SeparationCheck};
pub use montecarlo::{
    estimate_bad_probability, estimate_boundary_probability, estimate_pi_table, goodness_flags, verify_uniform_goodness,
    BadReport, BoundaryReport, CubeFrequency, PiTable, UniformReport, PI_RELATIVE_CI,
};
pub use sample::{RandomGridSample, Randomizer};
pub use tagging::{conflict_sets, tag_points, TaggingPlan};

use thiserror::Error;

use crate::dyadic::DyadicError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RandGridError {
    #[error("no free tag for generation {k}, center {alpha} with {tags} tags")]
    TagExhausted { k: i32, alpha: usize, tags: usize },
    #[error("generation {k}: no finer center within delta^(k+1) of center {alpha}")]
    NoCloseChild { k: i32, alpha: usize },
    #[error("goodness probability of point {point} at generation {k} is unstable: relative CI {relative_ci}")]
    PiEstimateUnstable { k: i32, point: usize, relative_ci: f64 },
    #[error("tag count {given} must exceed the largest conflict set {largest}")]
    TooFewTags { given: usize, largest: usize },
    #[error("generation {k} outside {k_min}..={k_max}")]
    GenerationOutOfRange { k: i32, k_min: i32, k_max: i32 },
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
}
