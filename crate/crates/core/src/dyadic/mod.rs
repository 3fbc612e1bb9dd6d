//! Nested nets, half-open dyadic cubes and regularized radii.

mod cubes;
mod nets;
mod radius;

pub(crate) use cubes::{assemble, link_generations};
pub use cubes::{build_cubes, Cube, CubeId, DyadicSystem, Generation, InvariantReport};
pub use nets::{build_nets, NetHierarchy};
pub(crate) use nets::nearest_of;
pub use radius::{regularized_radius, RegularizedBall};

use thiserror::Error;

/// Diameter constant `C_0`.
pub const C0: f64 = 10.0;
/// Inner ball constant `C_1`.
pub const C1: f64 = 0.01;

/// Scale ratio of the original construction.
pub const REFERENCE_DELTA: f64 = 1.0 / 1000.0;

/// Report header line stating how the active scale ratio differs from the reference one.
pub fn delta_notice(delta: f64) -> String {
    if delta == REFERENCE_DELTA {
        format!("delta = {delta} matches the reference scale ratio 1/1000")
    } else {
        format!(
            "delta = {delta} replaces the reference scale ratio 1/1000; nesting and goodness constants are \
             evaluated at the active delta, and smallness assumptions tied to delta may fail"
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DyadicError {
    #[error("k_min = {k_min} exceeds k_max = {k_max}")]
    BadScaleRange { k_min: i32, k_max: i32 },
    #[error("scale ratio {0} outside (0, 1/2]")]
    InvalidDelta(f64),
    #[error("generation {k}: centers {a} and {b} at distance {dist} < {bound}")]
    SeparationViolated { k: i32, a: usize, b: usize, dist: f64, bound: f64 },
    #[error("generation {k}: point {x} at distance {dist} >= {bound} from every center")]
    CoveringViolated { k: i32, x: usize, dist: f64, bound: f64 },
    #[error("generation {k}: expected {expected} centers, got {got}")]
    CenterCount { k: i32, expected: usize, got: usize },
    #[error("ball around {center} with radius {r} has empty three-fold dilate")]
    EmptyOuterBall { center: usize, r: f64 },
}
