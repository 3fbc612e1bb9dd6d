//! Finite metric measure spaces with upper doubling data.
//!
//! A space is a finite set of points with a dense distance matrix, per-point masses
//! (quadrature weights of a continuous measure, or atoms) and a dominating function.
//! Balls are strictly open: `B(x, r) = { y : d(x, y) < r }`.

mod cloud;
mod fixtures;
pub(crate) mod heisenberg;
mod lambda;
mod test_function;

pub use cloud::{load_point_cloud, CloudOptions};
pub use fixtures::{grid2d, heisenberg_space, line, random_cloud, HeisenbergGrid};
pub use heisenberg::HeisenbergPoint;
pub use lambda::{DominatingFunction, Envelope, LambdaTable};
pub use test_function::{Accretivity, TestFunction};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::rng::Seed;

/// Upper bound on the number of points; the distance matrix is dense.
pub const DEFAULT_MAX_POINTS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("upper doubling violated ({kind}) at point {x}, radius {r}: ratio {ratio}")]
    ViolationFound { x: usize, r: f64, kind: ViolationKind, ratio: f64 },
    #[error("{points} points exceed the configured bound {limit}")]
    GridTooLarge { points: usize, limit: usize },
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("distance matrix asymmetric at ({i}, {j}): {dij} vs {dji}")]
    AsymmetricDistance { i: usize, j: usize, dij: f64, dji: f64 },
    #[error("negative mass {mass} at point {index}")]
    NegativeMass { index: usize, mass: f64 },
    #[error("invalid distance at ({i}, {j}): {value}")]
    InvalidDistance { i: usize, j: usize, value: f64 },
    #[error("space has no points")]
    Empty,
    #[error("test function is not accretive: {0}")]
    NotAccretive(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    MeasureAboveLambda,
    LambdaNotDoubling,
    LambdaDecreasing,
}

impl std::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::MeasureAboveLambda => "mu(B) > lambda",
            Self::LambdaNotDoubling => "lambda(x,2r) > C lambda(x,r)",
            Self::LambdaDecreasing => "lambda decreasing",
        };
        f.write_str(s)
    }
}

/// How distances were produced; kept so that group arithmetic stays available.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Euclidean { dim: usize, coords: Vec<f64> },
    Heisenberg { n: usize, coords: Vec<f64> },
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeasureSpace {
    labels: Vec<String>,
    geometry: Geometry,
    dist: Vec<f64>,
    mass: Vec<f64>,
    lambda: DominatingFunction,
    beta: f64,
}

impl MetricMeasureSpace {
    /// Builds a space from a dense row-major distance matrix.
    pub fn from_matrix(
        labels: Vec<String>,
        geometry: Geometry,
        dist: Vec<f64>,
        mass: Vec<f64>,
        lambda: Option<DominatingFunction>,
    ) -> Result<Self, SpaceError> {
        let n = mass.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        if n > DEFAULT_MAX_POINTS {
            return Err(SpaceError::GridTooLarge { points: n, limit: DEFAULT_MAX_POINTS });
        }
        if dist.len() != n * n || labels.len() != n {
            return Err(SpaceError::ParseError(format!(
                "expected {n} labels and {} distances, got {} and {}",
                n * n,
                labels.len(),
                dist.len()
            )));
        }
        if let Some((index, &m)) = mass.iter().enumerate().find(|(_, m)| !(**m >= 0.0) || !m.is_finite()) {
            return Err(SpaceError::NegativeMass { index, mass: m });
        }
        for i in 0..n {
            for j in 0..n {
                let v = dist[i * n + j];
                if !v.is_finite() || v < 0.0 || (i == j) != (v == 0.0) {
                    return Err(SpaceError::InvalidDistance { i, j, value: v });
                }
                let w = dist[j * n + i];
                if (v - w).abs() > 1e-12 * v.max(w).max(1.0) {
                    return Err(SpaceError::AsymmetricDistance { i, j, dij: v, dji: w });
                }
            }
        }
        let lambda = lambda.unwrap_or_else(|| DominatingFunction::Envelope(Envelope::fit(&dist, &mass)));
        Ok(Self { labels, geometry, dist, mass, lambda, beta: 1.0 })
    }

    /// Euclidean space from row-major coordinates.
    pub fn euclidean(
        dim: usize,
        coords: Vec<f64>,
        mass: Vec<f64>,
        lambda: Option<DominatingFunction>,
    ) -> Result<Self, SpaceError> {
        let n = mass.len();
        if n > DEFAULT_MAX_POINTS {
            return Err(SpaceError::GridTooLarge { points: n, limit: DEFAULT_MAX_POINTS });
        }
        if coords.len() != n * dim {
            return Err(SpaceError::ParseError(format!("expected {} coordinates, got {}", n * dim, coords.len())));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (0..dim)
                    .map(|c| (coords[i * dim + c] - coords[j * dim + c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::from_matrix(labels, Geometry::Euclidean { dim, coords }, dist, mass, lambda)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.len() + y]
    }

    /// Distances from `x` to every point.
    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.len();
        &self.dist[x * n..(x + 1) * n]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn mass(&self, x: usize) -> f64 {
        self.mass[x]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn lambda(&self) -> &DominatingFunction {
        &self.lambda
    }

    pub fn lambda_at(&self, x: usize, r: f64) -> f64 {
        self.lambda.eval(x, r)
    }

    pub fn c_lambda(&self) -> f64 {
        self.lambda.c_lambda()
    }

    /// `d = log2 C_lambda`.
    pub fn dim_d(&self) -> f64 {
        self.c_lambda().log2()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Replaces the point labels; the count must match.
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.len(), "label count mismatch");
        self.labels = labels;
        self
    }

    pub fn with_lambda(mut self, lambda: DominatingFunction) -> Self {
        self.lambda = lambda;
        self
    }

    /// Same points and distances with new masses.
    pub fn with_masses(mut self, mass: Vec<f64>) -> Result<Self, SpaceError> {
        if mass.len() != self.len() {
            return Err(SpaceError::ParseError("mass vector length mismatch".into()));
        }
        if let Some((index, &m)) = mass.iter().enumerate().find(|(_, m)| !(**m >= 0.0)) {
            return Err(SpaceError::NegativeMass { index, mass: m });
        }
        self.mass = mass;
        Ok(self)
    }

    pub fn ball_members(&self, c: usize, r: f64) -> Vec<usize> {
        self.row(c).iter().enumerate().filter(|(_, d)| **d < r).map(|(i, _)| i).collect()
    }

    /// `mu(B(c, r))` with strictly open balls.
    pub fn ball_measure(&self, c: usize, r: f64) -> f64 {
        self.row(c).iter().zip(&self.mass).filter(|(d, _)| **d < r).map(|(_, m)| m).sum()
    }

    pub fn measure_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.mass[i]).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.dist.iter().copied().filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min)
    }

    /// Distance between two point sets (infinite if either is empty).
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &x in a {
            let row = self.row(x);
            for &y in b {
                best = best.min(row[y]);
            }
        }
        best
    }

    pub fn set_diameter(&self, a: &[usize]) -> f64 {
        let mut best: f64 = 0.0;
        for (i, &x) in a.iter().enumerate() {
            let row = self.row(x);
            for &y in &a[i + 1..] {
                best = best.max(row[y]);
            }
        }
        best
    }

    fn sample_pairs(&self, samples: usize) -> Vec<(usize, f64)> {
        let n = self.len();
        let exhaustive = n * n <= samples.max(1);
        if exhaustive {
            let mut out = Vec::with_capacity(n * n);
            for x in 0..n {
                for y in 0..n {
                    let d = self.dist(x, y);
                    out.push((x, if d == 0.0 { self.min_spacing().min(1.0) / 2.0 } else { d.next_up() }));
                }
            }
            return out;
        }
        let mut rng = Seed(0x5eed).rng(&[n as u64, samples as u64]);
        (0..samples)
            .map(|_| {
                let x = rng.gen_range(0..n);
                let y = rng.gen_range(0..n);
                let d = self.dist(x, y);
                let r = if d == 0.0 || rng.gen_bool(0.25) {
                    rng.gen::<f64>() * self.diameter().max(1e-300) * 1.5
                } else {
                    d.next_up()
                };
                (x, r.max(f64::MIN_POSITIVE))
            })
            .collect()
    }

    /// Checks `mu(B(x,r)) <= lambda(x,r)`, monotonicity and doubling of `lambda` on
    /// sampled `(x, r)`. Radii are placed just above pairwise distances, where the
    /// measure-to-lambda ratio peaks. Exhaustive when `n^2 <= samples`.
    pub fn verify_upper_doubling(&self, samples: usize) -> Result<DoublingReport, SpaceError> {
        let c = self.c_lambda();
        let mut report = DoublingReport { samples: 0, max_ratio_mu_lambda: 0.0, max_ratio_doubling: 0.0 };
        for (x, r) in self.sample_pairs(samples) {
            let lam = self.lambda_at(x, r);
            let lam2 = self.lambda_at(x, 2.0 * r);
            let mu_ratio = self.ball_measure(x, r) / lam;
            let dbl = lam2 / lam;
            report.samples += 1;
            report.max_ratio_mu_lambda = report.max_ratio_mu_lambda.max(mu_ratio);
            report.max_ratio_doubling = report.max_ratio_doubling.max(dbl);
            if mu_ratio > 1.0 + 1e-12 {
                return Err(SpaceError::ViolationFound { x, r, kind: ViolationKind::MeasureAboveLambda, ratio: mu_ratio });
            }
            if dbl > c * (1.0 + 1e-12) {
                return Err(SpaceError::ViolationFound { x, r, kind: ViolationKind::LambdaNotDoubling, ratio: dbl });
            }
            if dbl < 1.0 - 1e-12 {
                return Err(SpaceError::ViolationFound { x, r, kind: ViolationKind::LambdaDecreasing, ratio: dbl });
            }
        }
        Ok(report)
    }

    /// Largest greedy count of `r/2`-balls (centered at points of the space) needed to
    /// cover `B(x, r)`, over sampled `(x, r)`. Exhaustive over all centers and all radii
    /// just above pairwise distances when `n^2 <= trials`.
    pub fn geometric_doubling_estimate(&self, trials: usize) -> usize {
        let n = self.len();
        let mut worst = 1;
        for (x, r) in self.sample_pairs(trials) {
            let ball = self.ball_members(x, r);
            worst = worst.max(self.greedy_cover(&ball, r / 2.0));
        }
        worst.min(n.max(1))
    }

    /// Greedy set cover of `targets` by open balls of radius `rho` centered anywhere in
    /// the space: repeatedly take the center covering the most uncovered targets.
    pub fn greedy_cover(&self, targets: &[usize], rho: f64) -> usize {
        let n = self.len();
        let mut uncovered: Vec<usize> = targets.to_vec();
        let mut count = 0;
        while !uncovered.is_empty() {
            let mut best = (0usize, usize::MAX);
            for c in 0..n {
                let row = self.row(c);
                let hits = uncovered.iter().filter(|&&y| row[y] < rho).count();
                if hits > best.0 {
                    best = (hits, c);
                }
            }
            let row = self.row(best.1);
            uncovered.retain(|&y| row[y] >= rho);
            count += 1;
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingReport {
    pub samples: usize,
    pub max_ratio_mu_lambda: f64,
    pub max_ratio_doubling: f64,
}
