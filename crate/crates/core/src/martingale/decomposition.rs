use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use super::expectation::cube_integral;
use super::haar::{haar, order_children, CubeOrdering, HaarFunction};
use super::{adapted_expectation, MartingaleError, VectorField};
use crate::dyadic::{CubeId, DyadicSystem, C0};
use crate::space::{MetricMeasureSpace, TestFunction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEntry {
    pub cube: CubeId,
    pub u: usize,
    /// `<phi_(Q,u), f>` per range coordinate.
    pub value: Vec<Complex64>,
}

/// Coefficients of `f` against the adapted Haar functions of all cubes with
/// `delta^k0 < l(Q) <= delta^m`; the non-cancellative `u = 0` only at generation `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedDecomposition {
    pub m: i32,
    pub k0: i32,
    pub range_dim: usize,
    pub orderings: Vec<CubeOrdering>,
    pub coefficients: Vec<CoefficientEntry>,
}

impl AdaptedDecomposition {
    pub fn ordering(&self, id: CubeId) -> Option<&CubeOrdering> {
        self.orderings.iter().find(|o| o.cube == id)
    }

    /// Rows `cube_id,u,re,im`, with a `coord` column before `re` when the range has
    /// more than one dimension.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MartingaleError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| MartingaleError::Csv(e.to_string());
        if self.range_dim > 1 {
            w.write_record(["cube_id", "u", "coord", "re", "im"]).map_err(err)?;
        } else {
            w.write_record(["cube_id", "u", "re", "im"]).map_err(err)?;
        }
        for e in &self.coefficients {
            for (c, v) in e.value.iter().enumerate() {
                let mut row = vec![e.cube.to_string(), e.u.to_string()];
                if self.range_dim > 1 {
                    row.push(c.to_string());
                }
                row.push(format!("{:e}", v.re));
                row.push(format!("{:e}", v.im));
                w.write_record(&row).map_err(err)?;
            }
        }
        w.flush().map_err(|e| MartingaleError::Csv(e.to_string()))
    }
}

fn check_window(system: &DyadicSystem, m: i32, k0: i32) -> Result<(), MartingaleError> {
    if m >= k0 || !system.contains_generation(m) || !system.contains_generation(k0) {
        return Err(MartingaleError::BadWindow { m, k0 });
    }
    Ok(())
}

fn haar_range(k: i32, m: i32, s: usize) -> std::ops::Range<usize> {
    if k == m {
        0..s
    } else {
        1..s
    }
}

pub fn decompose(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    f: &VectorField,
    m: i32,
    k0: i32,
) -> Result<AdaptedDecomposition, MartingaleError> {
    check_window(system, m, k0)?;
    if f.len() != space.len() {
        return Err(MartingaleError::LengthMismatch { expected: space.len(), got: f.len() });
    }
    let mut orderings = Vec::new();
    let mut coefficients = Vec::new();
    for k in m..k0 {
        for id in system.cube_ids(k) {
            cube_integral(space, b, id, &system.cube(id).members)?;
            let ordering = order_children(space, system, b, id)?;
            for u in haar_range(k, m, ordering.s()) {
                let phi = haar(space, system, b, &ordering, u)?;
                let value = (0..f.dim()).map(|c| phi.pair(space.masses(), |x| f.at(x)[c])).collect();
                coefficients.push(CoefficientEntry { cube: id, u, value });
            }
            orderings.push(ordering);
        }
    }
    Ok(AdaptedDecomposition { m, k0, range_dim: f.dim(), orderings, coefficients })
}

/// `sum b phi_(Q,u) <phi_(Q,u), f>` over the stored coefficients.
pub fn reconstruct(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    dec: &AdaptedDecomposition,
) -> Result<VectorField, MartingaleError> {
    let mut out = VectorField::zeros(dec.range_dim, space.len());
    let mut by_cube = dec.coefficients.iter().peekable();
    for ordering in &dec.orderings {
        while let Some(e) = by_cube.peek().filter(|e| e.cube == ordering.cube) {
            let phi: HaarFunction = haar(space, system, b, ordering, e.u)?;
            for &(x, v) in &phi.values {
                let bv = b.at(x) * v;
                for (slot, c) in out.at_mut(x).iter_mut().zip(&e.value) {
                    *slot += bv * c;
                }
            }
            by_cube.next();
        }
    }
    Ok(out)
}

/// Measured `sup |E_k0 f - f|` over points of positive mass for `f = b h` with `h`
/// Lipschitz with constant `lipschitz`, against the majorant
/// `||b||_inf^2 L C0 delta^k0 / a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub k0: i32,
    pub measured: f64,
    pub bound: f64,
    /// `measured / (L delta^k0)`.
    pub ratio: f64,
}

pub fn lipschitz_truncation_error(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    f: &VectorField,
    lipschitz: f64,
    k0: i32,
) -> Result<TruncationReport, MartingaleError> {
    let e = adapted_expectation(space, system, b, f, k0)?;
    let measured = (0..space.len())
        .filter(|&x| space.mass(x) > 0.0)
        .map(|x| e.at(x).iter().zip(f.at(x)).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let side = system.side(k0);
    let bound = b.sup().powi(2) * lipschitz * C0 * side / b.accretivity();
    let ratio = if lipschitz > 0.0 { measured / (lipschitz * side) } else { 0.0 };
    Ok(TruncationReport { k0, measured, bound, ratio })
}
