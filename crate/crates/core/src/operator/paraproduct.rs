//! The paraproduct built from coarse averages of `g` and the pairings `<T* b_2, b_1 phi_Q>`.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::elements::{HaarGrid, PairingContext};
use super::OperatorError;
use crate::dyadic::CubeId;
use crate::rng::{DrawKind, Seed};
use crate::space::MetricMeasureSpace;

fn mean_over(space: &MetricMeasureSpace, set: &[usize], f: impl Fn(usize) -> Complex64) -> Option<Complex64> {
    let m = space.measure_of(set);
    (m > 0.0).then(|| set.iter().map(|&x| f(x) * space.mass(x)).sum::<Complex64>() / m)
}

/// `Pi g = sum_(R good) sum_(Q good in R, l(Q) = delta^r l(R)) <g>_R / <b_2>_R <T* b_2, b_1 phi_Q> phi_Q`,
/// with `R` from `r_grid`, `Q` from `q_grid` and every cancellative `phi_Q`.
pub fn paraproduct(
    ctx: &PairingContext<'_>,
    q_grid: &HaarGrid,
    r_grid: &HaarGrid,
    g: &[Complex64],
    r: u32,
) -> Result<Vec<Complex64>, OperatorError> {
    let space = ctx.space;
    let a = ctx.b2.accretivity();
    let mut out = vec![Complex64::new(0.0, 0.0); space.len()];
    let rs = r_grid.system();
    for k in q_grid.haar_generations() {
        let m = k - r as i32;
        if !rs.contains_generation(m) {
            continue;
        }
        for q in q_grid.system().cube_ids(k).filter(|&q| q_grid.is_good(q)) {
            let members = q_grid.members(q);
            let outer = rs.locate(m, members[0]);
            if !r_grid.is_good(outer) || !r_grid.contains(outer, members) {
                continue;
            }
            let r_members = r_grid.members(outer);
            let (Some(avg_g), Some(avg_b)) = (mean_over(space, r_members, |x| g[x]), mean_over(space, r_members, |x| ctx.b2.at(x))) else {
                continue;
            };
            if avg_b.norm() < a / 2.0 {
                return Err(OperatorError::DegenerateAverage { cube: outer, average: avg_b.norm(), bound: a / 2.0 });
            }
            let factor = avg_g / avg_b;
            for phi in q_grid.cancellative(space, q) {
                let coeff = factor * ctx.full_pairing(&phi);
                for &(x, v) in &phi.values {
                    out[x] += coeff * v;
                }
            }
        }
    }
    Ok(out)
}

/// `L^p(mu)` norm.
pub fn lp_norm(mass: &[f64], f: &[Complex64], p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().zip(mass).filter(|(_, m)| **m > 0.0).map(|(v, _)| v.norm()).fold(0.0, f64::max);
    }
    f.iter().zip(mass).map(|(v, m)| v.norm().powf(p) * m).sum::<f64>().powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParaproductNorm {
    /// `max ||Pi g||_q / ||g||_q` over the probes.
    pub ratio: f64,
    pub exponent: f64,
    pub probes: usize,
}

/// Random complex probes, indicator probes of the coarsest cubes and one Lipschitz probe.
pub fn paraproduct_norm_ratio(
    ctx: &PairingContext<'_>,
    q_grid: &HaarGrid,
    r_grid: &HaarGrid,
    r: u32,
    exponent: f64,
    probes: usize,
    seed: Seed,
) -> Result<ParaproductNorm, OperatorError> {
    let space = ctx.space;
    let n = space.len();
    let mut gs: Vec<Vec<Complex64>> = (0..probes as u64)
        .map(|i| {
            let mut rng = seed.rng(&[i, DrawKind::Probe as u64]);
            (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
        })
        .collect();
    let rs = r_grid.system();
    for id in rs.cube_ids(rs.k_min()).take(probes.max(1)) {
        let mut g = vec![Complex64::new(0.0, 0.0); n];
        for &x in r_grid.members(id) {
            g[x] = Complex64::new(1.0, 0.0);
        }
        gs.push(g);
    }
    let anchor = 0;
    gs.push(space.row(anchor).iter().map(|&d| Complex64::new(d, 0.0)).collect());
    let mut best: f64 = 0.0;
    for g in &gs {
        let norm = lp_norm(space.masses(), g, exponent);
        if norm > 0.0 {
            let pi = paraproduct(ctx, q_grid, r_grid, g, r)?;
            best = best.max(lp_norm(space.masses(), &pi, exponent) / norm);
        }
    }
    Ok(ParaproductNorm { ratio: best, exponent, probes: gs.len() })
}

/// Every `(R, Q)` of the paraproduct, for reports.
pub fn paraproduct_pairs(q_grid: &HaarGrid, r_grid: &HaarGrid, r: u32) -> Vec<(CubeId, CubeId)> {
    let rs = r_grid.system();
    let mut out = Vec::new();
    for k in q_grid.haar_generations() {
        let m = k - r as i32;
        if !rs.contains_generation(m) {
            continue;
        }
        for q in q_grid.system().cube_ids(k).filter(|&q| q_grid.is_good(q)) {
            let members = q_grid.members(q);
            let outer = rs.locate(m, members[0]);
            if r_grid.is_good(outer) && r_grid.contains(outer, members) {
                out.push((outer, q));
            }
        }
    }
    out
}
