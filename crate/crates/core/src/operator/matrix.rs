//! Discretized operators: kernel values on point pairs applied with the point masses.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::kernel::StandardKernel;
use super::OperatorError;
use crate::space::MetricMeasureSpace;

const MAGIC: &[u8; 5] = b"NHDK1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMode {
    /// Kernel on distinct points; the diagonal mass contributes nothing.
    OffDiagonal,
    /// A user-supplied matrix, diagonal included.
    Dense,
}

/// `(Tf)(x) = sum_y K[x][y] f(y) mu(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOperator {
    kernel: Option<StandardKernel>,
    mode: QuadMode,
    mass: Vec<f64>,
    /// Row-major `K[x][y]`.
    values: Vec<Complex64>,
}

impl KernelOperator {
    /// Evaluates `kernel` on every pair of distinct points.
    pub fn assemble(space: &MetricMeasureSpace, kernel: StandardKernel) -> Result<Self, OperatorError> {
        let n = space.len();
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        values.par_chunks_mut(n.max(1)).enumerate().try_for_each(|(x, row)| {
            for (y, v) in row.iter_mut().enumerate() {
                if y != x {
                    *v = kernel.eval(space, x, y)?;
                }
            }
            Ok::<_, OperatorError>(())
        })?;
        Ok(Self { kernel: Some(kernel), mode: QuadMode::OffDiagonal, mass: space.masses().to_vec(), values })
    }

    /// Wraps a row-major `n x n` matrix of kernel values, diagonal included.
    pub fn from_dense(space: &MetricMeasureSpace, values: Vec<Complex64>) -> Result<Self, OperatorError> {
        let n = space.len();
        if values.len() != n * n {
            return Err(OperatorError::DimensionMismatch { expected: n * n, got: values.len() });
        }
        Ok(Self { kernel: None, mode: QuadMode::Dense, mass: space.masses().to_vec(), values })
    }

    /// `f -> f` as the dense matrix `diag(1 / mu)`; null points map to zero.
    pub fn identity(space: &MetricMeasureSpace) -> Self {
        let n = space.len();
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for x in 0..n {
            let m = space.mass(x);
            if m > 0.0 {
                values[x * n + x] = Complex64::new(1.0 / m, 0.0);
            }
        }
        Self { kernel: None, mode: QuadMode::Dense, mass: space.masses().to_vec(), values }
    }

    pub fn zero(space: &MetricMeasureSpace) -> Self {
        Self::assemble(space, StandardKernel::zero()).expect("zero kernel needs no geometry")
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mode(&self) -> QuadMode {
        self.mode
    }

    pub fn kernel(&self) -> Option<&StandardKernel> {
        self.kernel.as_ref()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn entry(&self, x: usize, y: usize) -> Complex64 {
        self.values[x * self.len() + y]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// The operator multiplied by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kernel: self.kernel.as_ref().map(|k| k.scaled(factor)),
            mode: self.mode,
            mass: self.mass.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        assert_eq!(f.len(), n, "function length mismatch");
        let weighted: Vec<Complex64> = f.iter().zip(&self.mass).map(|(v, m)| v * m).collect();
        self.values
            .par_chunks(n.max(1))
            .map(|row| row.iter().zip(&weighted).map(|(k, w)| k * w).sum())
            .collect()
    }

    /// Bilinear transpose: `<g, Tf> = <T^t g, f>`.
    pub fn apply_transpose(&self, g: &[Complex64]) -> Vec<Complex64> {
        self.column_pass(g, false)
    }

    /// Hermitian adjoint in `L^2(mu)`.
    pub fn apply_adjoint(&self, g: &[Complex64]) -> Vec<Complex64> {
        self.column_pass(g, true)
    }

    fn column_pass(&self, g: &[Complex64], conjugate: bool) -> Vec<Complex64> {
        let n = self.len();
        assert_eq!(g.len(), n, "function length mismatch");
        let weighted: Vec<Complex64> = g.iter().zip(&self.mass).map(|(v, m)| v * m).collect();
        (0..n)
            .into_par_iter()
            .map(|y| {
                (0..n)
                    .map(|x| {
                        let k = self.values[x * n + y];
                        (if conjugate { k.conj() } else { k }) * weighted[x]
                    })
                    .sum()
            })
            .collect()
    }

    /// `NHDK1` header, `u64` size, then row-major `(re, im)` pairs, all little-endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<(), OperatorError> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dense matrix written by [`Self::write_binary`].
    pub fn read_binary(space: &MetricMeasureSpace, mut r: impl Read) -> Result<Self, OperatorError> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(OperatorError::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        if n != space.len() {
            return Err(OperatorError::DimensionMismatch { expected: space.len(), got: n });
        }
        let mut values = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            values.push(Complex64::new(re, f64::from_le_bytes(word)));
        }
        Self::from_dense(space, values)
    }

    /// CSV `row,col,re,im` of the nonzero entries.
    pub fn write_csv(&self, w: impl Write) -> Result<(), OperatorError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["row", "col", "re", "im"])?;
        let n = self.len();
        for (i, v) in self.values.iter().enumerate().filter(|(_, v)| **v != Complex64::new(0.0, 0.0)) {
            out.write_record(&[(i / n).to_string(), (i % n).to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `row,col,re,im` records; missing entries are zero.
    pub fn read_csv(space: &MetricMeasureSpace, r: impl Read) -> Result<Self, OperatorError> {
        let n = space.len();
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        let mut rdr = csv::Reader::from_reader(r);
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).ok_or_else(|| OperatorError::Format("short record".into()));
            let parse_ix = |s: &str| s.trim().parse::<usize>().map_err(|e| OperatorError::Format(e.to_string()));
            let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|e| OperatorError::Format(e.to_string()));
            let (row, col) = (parse_ix(field(0)?)?, parse_ix(field(1)?)?);
            if row >= n || col >= n {
                return Err(OperatorError::Format(format!("entry ({row}, {col}) outside {n} points")));
            }
            values[row * n + col] = Complex64::new(parse_f(field(2)?)?, parse_f(field(3)?)?);
        }
        Self::from_dense(space, values)
    }
}

/// Bilinear pairing `<f, g> = sum f g mu`.
pub fn pairing(mass: &[f64], f: &[Complex64], g: &[Complex64]) -> Complex64 {
    f.iter().zip(g).zip(mass).map(|((a, b), m)| a * b * m).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::line;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_kernel_excludes_diagonal() {
        let s = MetricMeasureSpace::euclidean(1, vec![0.0, 1.0, 3.0], vec![0.5, 1.0, 2.0], None).unwrap();
        let t = KernelOperator::assemble(&s, StandardKernel::constant(c(1.0, 0.0))).unwrap();
        let f = vec![c(1.0, 0.0), c(2.0, 0.0), c(-1.0, 1.0)];
        let tf = t.apply(&f);
        let total: Complex64 = f.iter().zip(s.masses()).map(|(v, m)| v * m).sum();
        for x in 0..3 {
            assert!((tf[x] - (total - f[x] * s.mass(x))).norm() < 1e-15);
        }
    }

    #[test]
    fn point_mass_far_away() {
        let s = line(8, 1.0).unwrap();
        let t = KernelOperator::assemble(&s, StandardKernel::cauchy1d()).unwrap();
        let mut f = vec![c(0.0, 0.0); 8];
        f[1] = c(3.0, 0.0);
        let tf = t.apply(&f);
        let expect = 3.0 * s.mass(1) / (0.9375 - 0.1875);
        assert!((tf[7].re - expect).abs() < 1e-14);
    }

    #[test]
    fn transpose_and_adjoint_identities() {
        let s = line(6, 1.0).unwrap();
        let t = KernelOperator::assemble(&s, StandardKernel::cauchy1d()).unwrap().scaled(1.5);
        let f: Vec<Complex64> = (0..6).map(|i| c(i as f64, 1.0 - i as f64)).collect();
        let g: Vec<Complex64> = (0..6).map(|i| c(0.5 * i as f64, 2.0)).collect();
        let lhs = pairing(s.masses(), &g, &t.apply(&f));
        let rhs = pairing(s.masses(), &t.apply_transpose(&g), &f);
        assert!((lhs - rhs).norm() < 1e-12);
        let gc: Vec<Complex64> = g.iter().map(|v| v.conj()).collect();
        let inner = pairing(s.masses(), &gc, &t.apply(&f));
        let adj: Vec<Complex64> = t.apply_adjoint(&g).iter().map(|v| v.conj()).collect();
        assert!((inner - pairing(s.masses(), &adj, &f)).norm() < 1e-12);
    }

    #[test]
    fn identity_acts_as_identity() {
        let s = line(5, 2.0).unwrap();
        let t = KernelOperator::identity(&s);
        let f: Vec<Complex64> = (0..5).map(|i| c(i as f64, -1.0)).collect();
        let tf = t.apply(&f);
        assert!(tf.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let s = line(4, 1.0).unwrap();
        let t = KernelOperator::assemble(&s, StandardKernel::cauchy1d()).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"NHDK1");
        assert_eq!(buf.len(), 5 + 8 + 16 * 16);
        let back = KernelOperator::read_binary(&s, buf.as_slice()).unwrap();
        assert_eq!(back.values(), t.values());
        let mut text = Vec::new();
        t.write_csv(&mut text).unwrap();
        let back = KernelOperator::read_csv(&s, text.as_slice()).unwrap();
        assert_eq!(back.values(), t.values());
        assert!(KernelOperator::read_binary(&line(3, 1.0).unwrap(), buf.as_slice()).is_err());
    }
}
