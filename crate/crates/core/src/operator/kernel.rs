//! Standard kernels and their fitted Calderon-Zygmund constants.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::OperatorError;
use crate::rng::{DrawKind, Seed};
use crate::space::{heisenberg, Geometry, MetricMeasureSpace};

/// Closed-form kernel families.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelFamily {
    Zero,
    /// `K(x, y) = c` off the diagonal.
    Constant { value: Complex64 },
    /// `K(x, y) = c / (x - y)` on the real line.
    Cauchy1d { scale: f64 },
    /// `K(x, y) = c (t + i |xi|^2)^(-n-1)` with `(xi, t) = y^(-1) x` in `H^n`.
    CauchySzego { n: usize, scale: f64 },
}

/// A kernel defined off the diagonal, with the Holder exponent and separation
/// constant used by its smoothness estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardKernel {
    pub family: KernelFamily,
    pub alpha: f64,
    pub sep_c: f64,
}

pub const DEFAULT_SEPARATION: f64 = 2.0;

impl StandardKernel {
    pub fn new(family: KernelFamily) -> Self {
        Self { family, alpha: 1.0, sep_c: DEFAULT_SEPARATION }
    }

    pub fn zero() -> Self {
        Self::new(KernelFamily::Zero)
    }

    pub fn constant(value: Complex64) -> Self {
        Self::new(KernelFamily::Constant { value })
    }

    pub fn cauchy1d() -> Self {
        Self::new(KernelFamily::Cauchy1d { scale: 1.0 })
    }

    pub fn cauchy_szego(n: usize) -> Self {
        Self::new(KernelFamily::CauchySzego { n, scale: 1.0 })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_separation(mut self, c: f64) -> Self {
        self.sep_c = c;
        self
    }

    /// The same kernel multiplied by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let family = match &self.family {
            KernelFamily::Zero => KernelFamily::Zero,
            KernelFamily::Constant { value } => KernelFamily::Constant { value: value * factor },
            KernelFamily::Cauchy1d { scale } => KernelFamily::Cauchy1d { scale: scale * factor },
            KernelFamily::CauchySzego { n, scale } => KernelFamily::CauchySzego { n: *n, scale: scale * factor },
        };
        Self { family, ..self.clone() }
    }

    /// `K(x, y)` from raw coordinates of the two points.
    pub fn eval_coords(&self, x: &[f64], y: &[f64]) -> Result<Complex64, OperatorError> {
        if x == y {
            return Err(OperatorError::DiagonalEvaluation);
        }
        Ok(match &self.family {
            KernelFamily::Zero => Complex64::new(0.0, 0.0),
            KernelFamily::Constant { value } => *value,
            KernelFamily::Cauchy1d { scale } => Complex64::new(scale / (x[0] - y[0]), 0.0),
            KernelFamily::CauchySzego { n, scale } => {
                if x.len() != 2 * n + 1 || y.len() != x.len() {
                    return Err(OperatorError::GeometryMismatch("Heisenberg coordinates expected"));
                }
                let y_inv: Vec<f64> = y.iter().map(|c| -c).collect();
                let z = heisenberg::product(&y_inv, x);
                let xi2: f64 = z[..2 * n].iter().map(|v| v * v).sum();
                let w = Complex64::new(z[2 * n], xi2);
                w.powi(-(*n as i32) - 1) * scale
            }
        })
    }

    /// `K(x, y)` for two points of a space whose geometry carries coordinates.
    pub fn eval(&self, space: &MetricMeasureSpace, x: usize, y: usize) -> Result<Complex64, OperatorError> {
        if x == y {
            return Err(OperatorError::DiagonalEvaluation);
        }
        match &self.family {
            KernelFamily::Zero => Ok(Complex64::new(0.0, 0.0)),
            KernelFamily::Constant { value } => Ok(*value),
            KernelFamily::Cauchy1d { .. } => match space.geometry() {
                Geometry::Euclidean { dim: 1, coords } => self.eval_coords(&coords[x..=x], &coords[y..=y]),
                _ => Err(OperatorError::GeometryMismatch("one-dimensional Euclidean space expected")),
            },
            KernelFamily::CauchySzego { n, .. } => match space.geometry() {
                Geometry::Heisenberg { n: m, coords } if m == n => {
                    let w = 2 * n + 1;
                    self.eval_coords(&coords[x * w..(x + 1) * w], &coords[y * w..(y + 1) * w])
                }
                _ => Err(OperatorError::GeometryMismatch("Heisenberg space of matching dimension expected")),
            },
        }
    }
}

/// Fitted constants of the size and the two smoothness estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CzConstants {
    pub size: f64,
    pub x_smooth: f64,
    pub y_smooth: f64,
    pub size_witness: Option<(usize, usize)>,
    /// `(x, x', y)` of the worst x-smoothness ratio.
    pub x_witness: Option<(usize, usize, usize)>,
    /// `(x, y, y')` of the worst y-smoothness ratio.
    pub y_witness: Option<(usize, usize, usize)>,
    pub pairs: usize,
    pub triples: usize,
}

impl CzConstants {
    /// `||K||_CZ`: the largest of the three fitted constants.
    pub fn b(&self) -> f64 {
        self.size.max(self.x_smooth).max(self.y_smooth)
    }
}

/// Max over sampled pairs and admissible triples of the ratio of each estimate.
///
/// `k(x, y)` must be the kernel off the diagonal. Pairs are exhaustive when
/// `n^2 <= samples`; triples draw `x, y` uniformly and the perturbed point uniformly
/// from those within `rho(x, y) / sep_c` of the base point.
pub fn cz_constants(
    space: &MetricMeasureSpace,
    k: impl Fn(usize, usize) -> Complex64,
    alpha: f64,
    sep_c: f64,
    samples: usize,
    seed: Seed,
) -> CzConstants {
    let n = space.len();
    let mut out = CzConstants {
        size: 0.0,
        x_smooth: 0.0,
        y_smooth: 0.0,
        size_witness: None,
        x_witness: None,
        y_witness: None,
        pairs: 0,
        triples: 0,
    };
    if n < 2 {
        return out;
    }
    let lam = |x: usize, r: f64| space.lambda_at(x, r);
    let size_at = |x: usize, y: usize, out: &mut CzConstants| {
        let d = space.dist(x, y);
        let ratio = k(x, y).norm() * lam(x, d).max(lam(y, d));
        out.pairs += 1;
        if ratio > out.size || out.size_witness.is_none() {
            out.size = ratio;
            out.size_witness = Some((x, y));
        }
    };
    if n * n <= samples {
        for x in 0..n {
            for y in (0..n).filter(|&y| y != x) {
                size_at(x, y, &mut out);
            }
        }
    } else {
        for i in 0..samples as u64 {
            let mut rng = seed.rng(&[0, i, DrawKind::Probe as u64]);
            let x = rng.gen_range(0..n);
            let y = (x + 1 + rng.gen_range(0..n - 1)) % n;
            size_at(x, y, &mut out);
        }
    }
    for i in 0..samples as u64 {
        let mut rng = seed.rng(&[1, i, DrawKind::Probe as u64]);
        let x = rng.gen_range(0..n);
        let y = (x + 1 + rng.gen_range(0..n - 1)) % n;
        let d = space.dist(x, y);
        let reach = d / sep_c;
        // x-smoothness: perturb x; y-smoothness: perturb y.
        let near_x: Vec<usize> = (0..n).filter(|&z| z != x && z != y && space.dist(x, z) <= reach).collect();
        let near_y: Vec<usize> = (0..n).filter(|&z| z != y && z != x && space.dist(y, z) <= reach).collect();
        let mut counted = false;
        if !near_x.is_empty() {
            let xp = near_x[rng.gen_range(0..near_x.len())];
            let diff = (k(x, y) - k(xp, y)).norm();
            let ratio = diff * (d / space.dist(x, xp)).powf(alpha) * lam(x, d);
            counted = true;
            if ratio > out.x_smooth || out.x_witness.is_none() {
                out.x_smooth = ratio;
                out.x_witness = Some((x, xp, y));
            }
        }
        if !near_y.is_empty() {
            let yp = near_y[rng.gen_range(0..near_y.len())];
            let diff = (k(x, y) - k(x, yp)).norm();
            let ratio = diff * (d / space.dist(y, yp)).powf(alpha) * lam(y, d);
            counted = true;
            if ratio > out.y_smooth || out.y_witness.is_none() {
                out.y_smooth = ratio;
                out.y_witness = Some((x, y, yp));
            }
        }
        out.triples += counted as usize;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{heisenberg_space, line, HeisenbergGrid};

    #[test]
    fn diagonal_is_rejected() {
        let k = StandardKernel::cauchy_szego(1);
        assert_eq!(k.eval_coords(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]), Err(OperatorError::DiagonalEvaluation));
    }

    #[test]
    fn cauchy_szego_on_vertical_axis() {
        // y^(-1) x = (0, 0, 2): K = 2^(-2).
        let k = StandardKernel::cauchy_szego(1);
        let v = k.eval_coords(&[0.0, 0.0, 2.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((v - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        // Horizontal unit step: (i)^(-2) = -1.
        let h = k.eval_coords(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((h - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cauchy_szego_size_is_gauge_power() {
        let k = StandardKernel::cauchy_szego(1);
        let x = [0.3, -0.2, 0.7];
        let y = [-0.1, 0.4, 0.05];
        let d = heisenberg::distance(&x, &y);
        let v = k.eval_coords(&x, &y).unwrap();
        assert!((v.norm() * d.powi(4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_constants_vanish() {
        let s = line(16, 1.0).unwrap();
        let c = cz_constants(&s, |_, _| Complex64::new(0.0, 0.0), 1.0, 2.0, 500, Seed(1));
        assert_eq!(c.b(), 0.0);
        assert!(c.triples > 0);
    }

    #[test]
    fn doubling_kernel_doubles_size_constant() {
        let s = line(32, 1.0).unwrap();
        let k = StandardKernel::cauchy1d();
        let k2 = k.scaled(2.0);
        let c1 = cz_constants(&s, |x, y| k.eval(&s, x, y).unwrap(), 1.0, 2.0, 2000, Seed(3));
        let c2 = cz_constants(&s, |x, y| k2.eval(&s, x, y).unwrap(), 1.0, 2.0, 2000, Seed(3));
        assert_eq!(c2.size, 2.0 * c1.size);
        assert_eq!(c2.x_smooth, 2.0 * c1.x_smooth);
    }

    #[test]
    fn cauchy1d_size_constant_on_lebesgue_line() {
        // |K| lambda = 2(d + h)/d, largest at the nearest neighbours: 4.
        let s = line(32, 1.0).unwrap();
        let k = StandardKernel::cauchy1d();
        let c = cz_constants(&s, |x, y| k.eval(&s, x, y).unwrap(), 1.0, 2.0, 2000, Seed(3));
        assert!((c.size - 4.0).abs() < 1e-12, "{}", c.size);
    }

    #[test]
    fn geometry_mismatch() {
        let s = line(4, 1.0).unwrap();
        let k = StandardKernel::cauchy_szego(1);
        assert!(matches!(k.eval(&s, 0, 1), Err(OperatorError::GeometryMismatch(_))));
        let h = heisenberg_space(HeisenbergGrid { n: 1, per_axis: 3, xi_half: 1.0, t_half: 1.0 }).unwrap();
        assert!(k.eval(&h, 0, 1).is_ok());
    }
}
