//! Heisenberg group `H^n` in real coordinates `(x_1, ..., x_{2n}, t)`.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeisenbergPoint {
    coords: Vec<f64>,
}

impl HeisenbergPoint {
    /// `coords` must have odd length `2n + 1` with `n >= 1`.
    pub fn new(coords: Vec<f64>) -> Option<Self> {
        (coords.len() >= 3 && coords.len() % 2 == 1).then_some(Self { coords })
    }

    pub fn identity(n: usize) -> Self {
        Self { coords: vec![0.0; 2 * n + 1] }
    }

    pub fn n(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.coords[..2 * self.n()]
    }

    pub fn vertical(&self) -> f64 {
        self.coords[2 * self.n()]
    }

    /// Group product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.coords.len(), other.coords.len(), "dimension mismatch");
        Self { coords: product(&self.coords, &other.coords) }
    }

    pub fn inverse(&self) -> Self {
        Self { coords: self.coords.iter().map(|c| -c).collect() }
    }

    /// Homogeneous gauge `(|xi|^4 + t^2)^{1/4}`.
    pub fn norm(&self) -> f64 {
        gauge(&self.coords)
    }

    /// Left-invariant distance `|| self^{-1} · other ||`.
    pub fn dist(&self, other: &Self) -> f64 {
        distance(&self.coords, &other.coords)
    }
}

pub(crate) fn product(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() / 2;
    let mut out: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let symplectic: f64 = (0..n).map(|j| x[j] * y[j + n] - x[j + n] * y[j]).sum();
    out[2 * n] -= 2.0 * symplectic;
    out
}

pub(crate) fn gauge(x: &[f64]) -> f64 {
    let n = x.len() / 2;
    let xi2: f64 = x[..2 * n].iter().map(|v| v * v).sum();
    let t = x[2 * n];
    (xi2 * xi2 + t * t).sqrt().sqrt()
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() / 2;
    let mut xi2 = 0.0;
    for j in 0..2 * n {
        let d = y[j] - x[j];
        xi2 += d * d;
    }
    // (-x)·y: vertical part is y_t - x_t - 2 sum((-x_j) y_{j+n} - (-x_{j+n}) y_j)
    let symplectic: f64 = (0..n).map(|j| x[j] * y[j + n] - x[j + n] * y[j]).sum();
    let t = y[2 * n] - x[2 * n] + 2.0 * symplectic;
    (xi2 * xi2 + t * t).sqrt().sqrt()
}
