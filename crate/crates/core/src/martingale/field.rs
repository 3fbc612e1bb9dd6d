use num_complex::Complex64;
use serde::Serialize;

use super::MartingaleError;

/// Function with values in `C^dim`, stored point-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorField {
    dim: usize,
    values: Vec<Complex64>,
}

impl VectorField {
    pub fn new(dim: usize, values: Vec<Complex64>) -> Result<Self, MartingaleError> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(MartingaleError::LengthMismatch { expected: dim.max(1), got: values.len() });
        }
        Ok(Self { dim, values })
    }

    pub fn scalar(values: Vec<Complex64>) -> Self {
        Self { dim: 1, values }
    }

    /// Stacks coordinate functions of equal length.
    pub fn from_coordinates(coords: &[Vec<Complex64>]) -> Result<Self, MartingaleError> {
        let n = coords.first().map_or(0, Vec::len);
        if let Some(c) = coords.iter().find(|c| c.len() != n) {
            return Err(MartingaleError::LengthMismatch { expected: n, got: c.len() });
        }
        let values = (0..n).flat_map(|x| coords.iter().map(move |c| c[x])).collect();
        Self::new(coords.len(), values)
    }

    pub fn zeros(dim: usize, n: usize) -> Self {
        Self { dim, values: vec![Complex64::new(0.0, 0.0); dim * n] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, x: usize) -> &[Complex64] {
        &self.values[x * self.dim..(x + 1) * self.dim]
    }

    pub fn at_mut(&mut self, x: usize) -> &mut [Complex64] {
        &mut self.values[x * self.dim..(x + 1) * self.dim]
    }

    pub fn coordinate(&self, c: usize) -> Vec<Complex64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(integral |f|^2 dmu)^(1/2)` with the Euclidean norm on `C^dim`.
    pub fn l2_norm(&self, mass: &[f64]) -> f64 {
        (0..self.len()).map(|x| self.at(x).iter().map(|v| v.norm_sqr()).sum::<f64>() * mass[x]).sum::<f64>().sqrt()
    }

    /// `sup |f|` over points.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|x| self.at(x).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { dim: self.dim, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }
}
