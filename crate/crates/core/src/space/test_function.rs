//! Accretive test functions `b`.

use num_complex::Complex64;
use serde::Serialize;

use super::SpaceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Accretivity {
    /// `Re b >= a` pointwise.
    Strict,
    /// `|integral_A b| >= a mu(A)` on cube-like sets.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    values: Vec<Complex64>,
    a: f64,
    mode: Accretivity,
    sup: f64,
}

impl TestFunction {
    /// `b = c` everywhere; requires `Re c > 0`.
    pub fn constant(n: usize, c: Complex64) -> Result<Self, SpaceError> {
        Self::strict(vec![c; n])
    }

    /// Strictly accretive `b` with `a = min Re b`.
    pub fn strict(values: Vec<Complex64>) -> Result<Self, SpaceError> {
        let a = values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        if !(a > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(SpaceError::NotAccretive(format!("min Re b = {a}")));
        }
        let sup = sup_norm(&values);
        Ok(Self { values, a, mode: Accretivity::Strict, sup })
    }

    /// Weakly accretive `b` with a declared constant; the caller vouches for it and the
    /// martingale layer detects breaches.
    pub fn weak(values: Vec<Complex64>, a: f64) -> Result<Self, SpaceError> {
        if !(a > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(SpaceError::NotAccretive(format!("declared a = {a}")));
        }
        let sup = sup_norm(&values);
        Ok(Self { values, a, mode: Accretivity::Weak, sup })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize) -> Complex64 {
        self.values[x]
    }

    pub fn accretivity(&self) -> f64 {
        self.a
    }

    pub fn mode(&self) -> Accretivity {
        self.mode
    }

    /// `||b||_inf`.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `|integral_A b dmu| / mu(A)` lower bound check for the given sets.
    pub fn weak_constant_on(&self, sets: &[Vec<usize>], mass: &[f64]) -> f64 {
        sets.iter()
            .filter_map(|s| {
                let m: f64 = s.iter().map(|&i| mass[i]).sum();
                (m > 0.0).then(|| s.iter().map(|&i| self.values[i] * mass[i]).sum::<Complex64>().norm() / m)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn sup_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_is_strictly_accretive() {
        let b = TestFunction::constant(5, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(b.accretivity(), 1.0);
        assert_eq!(b.mode(), Accretivity::Strict);
        assert_eq!(b.sup(), 1.0);
    }

    #[test]
    fn negative_real_part_rejected() {
        assert!(TestFunction::strict(vec![Complex64::new(1.0, 0.0), Complex64::new(-0.1, 2.0)]).is_err());
    }

    #[test]
    fn weak_constant_of_alternating_signs() {
        let b = TestFunction::weak(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)], 1.0).unwrap();
        assert_eq!(b.weak_constant_on(&[vec![0, 1]], &[1.0, 1.0]), 0.0);
        assert_eq!(b.weak_constant_on(&[vec![0]], &[1.0, 1.0]), 1.0);
    }
}
