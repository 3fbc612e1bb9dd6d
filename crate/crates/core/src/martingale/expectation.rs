use num_complex::Complex64;

use super::{integral, MartingaleError, VectorField};
use crate::dyadic::{CubeId, DyadicSystem};
use crate::space::{MetricMeasureSpace, TestFunction};

/// `b(Q)` after checking `|<b>_Q| >= a / 2`; `None` for null cubes.
pub(crate) fn cube_integral(
    space: &MetricMeasureSpace,
    b: &TestFunction,
    id: CubeId,
    members: &[usize],
) -> Result<Option<Complex64>, MartingaleError> {
    let mass = space.measure_of(members);
    if mass <= 0.0 {
        return Ok(None);
    }
    let bq = integral(space.masses(), members, |x| b.at(x));
    let average = bq.norm() / mass;
    let bound = b.accretivity() / 2.0;
    if average < bound {
        return Err(MartingaleError::DegenerateAverage { cube: id, average, bound });
    }
    Ok(Some(bq))
}

/// `E_k f = sum_Q <f>_Q <b>_Q^(-1) chi_Q b`, zero on null cubes.
pub fn adapted_expectation(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    f: &VectorField,
    k: i32,
) -> Result<VectorField, MartingaleError> {
    if !system.contains_generation(k) {
        return Err(MartingaleError::MissingGeneration(k));
    }
    if f.len() != space.len() {
        return Err(MartingaleError::LengthMismatch { expected: space.len(), got: f.len() });
    }
    let mut out = VectorField::zeros(f.dim(), space.len());
    for (index, cube) in system.generation(k).cubes.iter().enumerate() {
        let Some(bq) = cube_integral(space, b, CubeId { k, index }, &cube.members)? else {
            continue;
        };
        for c in 0..f.dim() {
            let ratio = integral(space.masses(), &cube.members, |x| f.at(x)[c]) / bq;
            for &x in &cube.members {
                out.at_mut(x)[c] = b.at(x) * ratio;
            }
        }
    }
    Ok(out)
}

/// `Delta_k f = E_(k+1) f - E_k f`.
pub fn adapted_difference(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    f: &VectorField,
    k: i32,
) -> Result<VectorField, MartingaleError> {
    let fine = adapted_expectation(space, system, b, f, k + 1)?;
    Ok(fine.sub(&adapted_expectation(space, system, b, f, k)?))
}

/// `Delta_Q f = chi_Q Delta_k f`.
pub fn cube_difference(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    f: &VectorField,
    id: CubeId,
) -> Result<VectorField, MartingaleError> {
    let full = adapted_difference(space, system, b, f, id.k)?;
    let mut out = VectorField::zeros(f.dim(), space.len());
    for &x in &system.cube(id).members {
        out.at_mut(x).copy_from_slice(full.at(x));
    }
    Ok(out)
}
