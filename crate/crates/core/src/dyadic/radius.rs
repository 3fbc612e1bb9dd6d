//! Regularized radius: a dilation of a ball whose thin annuli carry little mass.

use serde::Serialize;

use super::DyadicError;
use crate::space::MetricMeasureSpace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizedBall {
    pub center: usize,
    pub r: f64,
    /// Chosen radius in `[r, 1.2 r]`.
    pub big_r: f64,
    /// `sup_s mu(R - r s < d(x, c) < R + r s) / (s mu(B(c, 3r)))` over the test set.
    pub annulus_constant: f64,
}

/// Annulus constant for one candidate radius.
pub fn annulus_constant(space: &MetricMeasureSpace, center: usize, r: f64, big_r: f64, s_grid: &[f64]) -> f64 {
    let outer = space.ball_measure(center, 3.0 * r);
    let row = space.row(center);
    s_grid
        .iter()
        .filter(|s| **s > 0.0)
        .map(|&s| {
            let m: f64 = row
                .iter()
                .zip(space.masses())
                .filter(|(d, _)| **d > big_r - r * s && **d < big_r + r * s)
                .map(|(_, m)| m)
                .sum();
            m / (s * outer)
        })
        .fold(0.0, f64::max)
}

/// Scans `candidates` (at least 64) equally spaced radii of `[r, 1.2 r]` and returns the
/// one with the smallest annulus constant (ties to the smaller radius).
pub fn regularized_radius(
    space: &MetricMeasureSpace,
    center: usize,
    r: f64,
    s_grid: &[f64],
    candidates: usize,
) -> Result<RegularizedBall, DyadicError> {
    if space.ball_measure(center, 3.0 * r) <= 0.0 {
        return Err(DyadicError::EmptyOuterBall { center, r });
    }
    let m = candidates.max(64);
    let mut best = RegularizedBall { center, r, big_r: r, annulus_constant: f64::INFINITY };
    for i in 0..m {
        let big_r = r * (1.0 + 0.2 * i as f64 / (m - 1) as f64);
        let c = annulus_constant(space, center, r, big_r, s_grid);
        if c < best.annulus_constant {
            best = RegularizedBall { center, r, big_r, annulus_constant: c };
        }
    }
    Ok(best)
}
