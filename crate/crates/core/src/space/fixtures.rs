//! Built-in spaces: discretized line and square, random clouds, Heisenberg lattices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{heisenberg, DominatingFunction, Geometry, MetricMeasureSpace, SpaceError, DEFAULT_MAX_POINTS};
use crate::rng::Seed;

/// `n` cell midpoints of `[0, length)` with Lebesgue masses and `lambda(x,r) = 2(r + h)`.
///
/// An open interval of length `2r` holds fewer than `2r/h + 1` lattice points, so the
/// offset `h` makes `lambda` dominate the atoms at small radii.
pub fn line(n: usize, length: f64) -> Result<MetricMeasureSpace, SpaceError> {
    let h = length / n as f64;
    let coords = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
    MetricMeasureSpace::euclidean(
        1,
        coords,
        vec![h; n],
        Some(DominatingFunction::Power { scale: 2.0, offset: h, exponent: 1.0 }),
    )
}

/// `side x side` cell midpoints of `[0, side*h)^2` with masses `h^2` and
/// `lambda(x,r) = C (r + h)^2`, `C` the smallest constant dominating every ball.
pub fn grid2d(side: usize, h: f64) -> Result<MetricMeasureSpace, SpaceError> {
    let mut coords = Vec::with_capacity(2 * side * side);
    for i in 0..side {
        for j in 0..side {
            coords.push((i as f64 + 0.5) * h);
            coords.push((j as f64 + 0.5) * h);
        }
    }
    let space = MetricMeasureSpace::euclidean(2, coords, vec![h * h; side * side], Some(placeholder()))?;
    let scale = calibrate_power(&space, h, 2.0);
    Ok(space.with_lambda(DominatingFunction::Power { scale, offset: h, exponent: 2.0 }))
}

/// `n` uniform points of the unit cube in `R^dim` with equal masses `1/n` and the
/// fitted envelope as dominating function.
pub fn random_cloud(n: usize, dim: usize, seed: Seed) -> Result<MetricMeasureSpace, SpaceError> {
    let mut rng = seed.rng(&[n as u64, dim as u64]);
    let coords = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
    MetricMeasureSpace::euclidean(dim, coords, vec![1.0 / n as f64; n], None)
}

/// Lattice sample of `H^n`: `per_axis` cells along each of the `2n` horizontal axes on
/// `[-xi_half, xi_half]` and along the vertical axis on `[-t_half, t_half]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergGrid {
    pub n: usize,
    pub per_axis: usize,
    pub xi_half: f64,
    pub t_half: f64,
}

/// Heisenberg lattice with Haar masses and `lambda(x,r) = C (r + h)^{2n+2}`, where
/// `h` is the gauge size of one cell and `C` is the smallest constant dominating
/// every ball of the sample. `C_lambda = 2^{2n+2}`.
pub fn heisenberg_space(grid: HeisenbergGrid) -> Result<MetricMeasureSpace, SpaceError> {
    let HeisenbergGrid { n, per_axis, xi_half, t_half } = grid;
    if n == 0 || per_axis == 0 {
        return Err(SpaceError::Empty);
    }
    let dims = 2 * n + 1;
    let count = per_axis.checked_pow(dims as u32).unwrap_or(usize::MAX);
    if count > DEFAULT_MAX_POINTS {
        return Err(SpaceError::GridTooLarge { points: count, limit: DEFAULT_MAX_POINTS });
    }
    let h_xi = 2.0 * xi_half / per_axis as f64;
    let h_t = 2.0 * t_half / per_axis as f64;
    let axis = |i: usize, half: f64, h: f64| -half + (i as f64 + 0.5) * h;
    let mut coords = Vec::with_capacity(count * dims);
    for idx in 0..count {
        let mut rest = idx;
        for c in 0..dims {
            let i = rest % per_axis;
            rest /= per_axis;
            coords.push(if c == dims - 1 { axis(i, t_half, h_t) } else { axis(i, xi_half, h_xi) });
        }
    }
    let mut dist = vec![0.0; count * count];
    for i in 0..count {
        for j in (i + 1)..count {
            let d = heisenberg::distance(&coords[i * dims..(i + 1) * dims], &coords[j * dims..(j + 1) * dims]);
            dist[i * count + j] = d;
            dist[j * count + i] = d;
        }
    }
    let cell = h_xi.powi(2 * n as i32) * h_t;
    let labels = (0..count).map(|i| i.to_string()).collect();
    let exponent = (2 * n + 2) as f64;
    let space = MetricMeasureSpace::from_matrix(
        labels,
        Geometry::Heisenberg { n, coords },
        dist,
        vec![cell; count],
        Some(placeholder()),
    )?;
    let offset = h_xi + h_t.sqrt();
    let scale = calibrate_power(&space, offset, exponent);
    Ok(space.with_lambda(DominatingFunction::Power { scale, offset, exponent }))
}

fn placeholder() -> DominatingFunction {
    DominatingFunction::Power { scale: 1.0, offset: 1.0, exponent: 1.0 }
}

/// Smallest `C` with `mu(B(x,r)) <= C (r + offset)^exponent` for all `x, r`.
///
/// The open-ball mass is a step function jumping just above each distance, so the
/// supremum is `max_x max_s mu(closed ball(x, s)) / (s + offset)^exponent`.
pub fn calibrate_power(space: &MetricMeasureSpace, offset: f64, exponent: f64) -> f64 {
    let n = space.len();
    let mut best: f64 = f64::MIN_POSITIVE;
    let mut order: Vec<usize> = (0..n).collect();
    for x in 0..n {
        let row = space.row(x);
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
        let mut acc = 0.0;
        for (i, &y) in order.iter().enumerate() {
            acc += space.mass(y);
            if i + 1 == n || row[order[i + 1]] > row[y] {
                best = best.max(acc / (row[y] + offset).powf(exponent));
            }
        }
    }
    best * (1.0 + 1e-9)
}
