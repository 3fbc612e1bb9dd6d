//! Decay of matrix elements for separated cubes and for cubes deep inside another.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::elements::{average, HaarGrid, PairingContext};
use super::OperatorError;
use crate::dyadic::{CubeId, C0};
use crate::martingale::HaarFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayParams {
    pub alpha: f64,
    /// Separation constant `C` of the kernel estimates.
    pub sep_c: f64,
    /// Lag `r` of goodness.
    pub r: u32,
}

/// Worst ratios for one pair of generations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub k_q: i32,
    pub k_r: i32,
    pub pairs: usize,
    pub max_separated: f64,
    pub max_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTable {
    pub params: DecayParams,
    pub pairs: usize,
    /// Max of `|T_RQ|` over the bound with `d(Q, R)`.
    pub max_separated: f64,
    /// Max of `|T_RQ|` over the bound with `D(Q, R)`.
    pub max_decay: f64,
    /// `(Q, u, R, v)` of the largest decay ratio.
    pub witness: Option<(CubeId, usize, CubeId, usize)>,
    pub rows: Vec<DecayRow>,
}

fn l1(ctx: &PairingContext<'_>, h: &HaarFunction) -> f64 {
    h.lp_norm(ctx.space.masses(), 1.0)
}

fn sup_lambda(ctx: &PairingContext<'_>, set: &[usize], r: f64) -> f64 {
    set.iter().map(|&z| ctx.space.lambda_at(z, r)).fold(0.0, f64::max)
}

struct SeparatedRatio {
    k_q: i32,
    k_r: i32,
    separated: f64,
    decay: f64,
    witness: (CubeId, usize, CubeId, usize),
}

/// Ratios `|T_RQ| / bound` over good `Q` with cancellative `phi_Q`, all `psi_R` with
/// `v >= 1`, `l(Q) <= l(R)` and `d(Q, R) >= C C_0 l(Q)`.
pub fn separated_decay_check(
    ctx: &PairingContext<'_>,
    q_grid: &HaarGrid,
    r_grid: &HaarGrid,
    params: DecayParams,
) -> Result<DecayTable, OperatorError> {
    let alpha = params.alpha;
    let space = ctx.space;
    let phis: Vec<HaarFunction> = q_grid
        .haar_generations()
        .flat_map(|k| q_grid.system().cube_ids(k).collect::<Vec<_>>())
        .filter(|&id| q_grid.is_good(id))
        .flat_map(|id| q_grid.cancellative(space, id))
        .collect();
    let psis: Vec<HaarFunction> = r_grid
        .haar_generations()
        .flat_map(|k| r_grid.system().cube_ids(k).collect::<Vec<_>>())
        .flat_map(|id| r_grid.cancellative(space, id))
        .collect();
    let ratios: Vec<SeparatedRatio> = phis
        .par_iter()
        .flat_map_iter(|phi| {
            let q = phi.cube;
            let lq = q_grid.system().side(q.k);
            let q_members = q_grid.members(q);
            let candidates: Vec<&HaarFunction> = psis
                .iter()
                .filter(|psi| {
                    let lr = r_grid.system().side(psi.cube.k);
                    lq <= lr && space.set_distance(q_members, r_grid.members(psi.cube)) >= params.sep_c * C0 * lq
                })
                .collect();
            if candidates.is_empty() {
                return Vec::new();
            }
            let g = ctx.apply_haar(phi);
            let norm_q = l1(ctx, phi);
            candidates
                .into_iter()
                .map(|psi| {
                    let r = psi.cube;
                    let lr = r_grid.system().side(r.k);
                    let d = space.set_distance(q_members, r_grid.members(r));
                    let big_d = lq + lr + d;
                    let t = ctx.pair_with(psi, &g).norm();
                    let norms = norm_q * l1(ctx, psi);
                    let b61 = lq.powf(alpha) / (d.powf(alpha) * sup_lambda(ctx, q_members, d)) * norms;
                    let b62 = (lq * lr).powf(alpha / 2.0) / (big_d.powf(alpha) * sup_lambda(ctx, q_members, big_d)) * norms;
                    SeparatedRatio {
                        k_q: q.k,
                        k_r: r.k,
                        separated: ratio(t, b61),
                        decay: ratio(t, b62),
                        witness: (q, phi.u, r, psi.u),
                    }
                })
                .collect()
        })
        .collect();
    if ratios.is_empty() {
        return Err(OperatorError::NoAdmissiblePairs);
    }
    let mut table =
        DecayTable { params, pairs: ratios.len(), max_separated: 0.0, max_decay: 0.0, witness: None, rows: Vec::new() };
    for s in &ratios {
        table.max_separated = table.max_separated.max(s.separated);
        if s.decay > table.max_decay || table.witness.is_none() {
            table.max_decay = s.decay;
            table.witness = Some(s.witness);
        }
        match table.rows.iter_mut().find(|row| row.k_q == s.k_q && row.k_r == s.k_r) {
            Some(row) => {
                row.pairs += 1;
                row.max_separated = row.max_separated.max(s.separated);
                row.max_decay = row.max_decay.max(s.decay);
            }
            None => table.rows.push(DecayRow {
                k_q: s.k_q,
                k_r: s.k_r,
                pairs: 1,
                max_separated: s.separated,
                max_decay: s.decay,
            }),
        }
    }
    table.rows.sort_by_key(|row| (row.k_q, row.k_r));
    Ok(table)
}

fn ratio(value: f64, bound: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value / bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectedTable {
    pub params: DecayParams,
    pub pairs: usize,
    /// Max of `|T~_RQ|` over its bound in terms of `<psi_R>_S`.
    pub max_ratio: f64,
    /// Max over `x in R` of the pointwise ratio.
    pub max_pointwise: f64,
    /// Largest relative residual of the decomposition of `T~_RQ` over the children of `R`.
    pub max_identity_residual: f64,
    pub witness: Option<(CubeId, usize, CubeId, usize)>,
}

struct CorrectedRatio {
    ratio: f64,
    pointwise: f64,
    residual: f64,
    witness: (CubeId, usize, CubeId, usize),
}

/// For good `Q` inside `R` with `l(Q) < delta^r l(R)` and `S` the child of `R`
/// containing `Q`: the corrected element against its bound, the pointwise bound,
/// and the identity
/// `T~_RQ = -<chi_(X \ S) b_2, T(b_1 phi_Q)> <psi_R>_S + sum_(S' != S) <chi_S' psi_R b_2, T(b_1 phi_Q)>`.
pub fn corrected_element_check(
    ctx: &PairingContext<'_>,
    q_grid: &HaarGrid,
    r_grid: &HaarGrid,
    params: DecayParams,
) -> Result<CorrectedTable, OperatorError> {
    let alpha = params.alpha;
    let space = ctx.space;
    let lag = params.r as i32;
    let phis: Vec<HaarFunction> = q_grid
        .haar_generations()
        .flat_map(|k| q_grid.system().cube_ids(k).collect::<Vec<_>>())
        .filter(|&id| q_grid.is_good(id))
        .flat_map(|id| q_grid.cancellative(space, id))
        .collect();
    let rs = r_grid.system();
    let ratios: Vec<CorrectedRatio> = phis
        .par_iter()
        .flat_map_iter(|phi| {
            let q = phi.cube;
            let q_members = q_grid.members(q);
            let lq = q_grid.system().side(q.k);
            let outers: Vec<CubeId> = r_grid
                .haar_generations()
                .filter(|&m| q.k - m > lag)
                .map(|m| rs.locate(m, q_members[0]))
                .filter(|&r| r_grid.contains(r, q_members))
                .collect();
            if outers.is_empty() {
                return Vec::new();
            }
            let g = ctx.apply_haar(phi);
            let full = ctx.full_pairing(phi);
            let norm_q = phi.lp_norm(space.masses(), 1.0);
            let sup_q = phi.lp_norm(space.masses(), f64::INFINITY);
            let mut out = Vec::new();
            for r in outers {
                let s = rs.locate(r.k + 1, q_members[0]);
                let s_members = rs.cube(s).members.as_slice();
                let r_members = r_grid.members(r);
                let mu_r = space.measure_of(r_members);
                let mu_s = space.measure_of(s_members);
                let scale = (lq / rs.side(r.k)).powf(alpha / 2.0);
                let outside_s: Vec<usize> = (0..space.len()).filter(|&x| rs.generation(s.k).label[x] != s.index).collect();
                let outside_pair = ctx.pair_set(&outside_s, |_| Complex64::new(1.0, 0.0), &g);
                for psi in r_grid.cancellative(space, r) {
                    let value = ctx.pair_with(&psi, &g);
                    let corrected = value - full * average(space, &psi, q_members);
                    let avg_s = average(space, &psi, s_members);
                    let dense = psi.to_dense(space.len());
                    let siblings: Complex64 = rs
                        .children(r)
                        .into_iter()
                        .filter(|&c| c != s)
                        .map(|c| ctx.pair_set(&rs.cube(c).members, |x| dense[x], &g))
                        .sum();
                    let via_children = -outside_pair * avg_s + siblings;
                    let residual = (corrected - via_children).norm() / corrected.norm().max(value.norm()).max(f64::MIN_POSITIVE);
                    let norm_r = psi.lp_norm(space.masses(), 1.0);
                    let bound = scale * (avg_s.norm() + norm_r / mu_r) * norm_q;
                    let mut pointwise: f64 = 0.0;
                    for &(x, v) in &psi.values {
                        if space.mass(x) <= 0.0 {
                            continue;
                        }
                        let inside = rs.generation(s.k).label[x] == s.index;
                        let weight = if inside { 1.0 / mu_s } else { 1.0 / mu_r };
                        pointwise = pointwise.max(ratio(v.norm() * corrected.norm() * sup_q, scale * weight));
                    }
                    out.push(CorrectedRatio {
                        ratio: ratio(corrected.norm(), bound),
                        pointwise,
                        residual,
                        witness: (q, phi.u, r, psi.u),
                    });
                }
            }
            out
        })
        .collect();
    if ratios.is_empty() {
        return Err(OperatorError::NoAdmissiblePairs);
    }
    let mut table = CorrectedTable {
        params,
        pairs: ratios.len(),
        max_ratio: 0.0,
        max_pointwise: 0.0,
        max_identity_residual: 0.0,
        witness: None,
    };
    for c in &ratios {
        if c.ratio > table.max_ratio || table.witness.is_none() {
            table.max_ratio = c.ratio;
            table.witness = Some(c.witness);
        }
        table.max_pointwise = table.max_pointwise.max(c.pointwise);
        table.max_identity_residual = table.max_identity_residual.max(c.residual);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_cubes, build_nets};
    use crate::operator::{KernelOperator, StandardKernel};
    use crate::space::{line, MetricMeasureSpace, TestFunction};

    fn setup(n: usize) -> (MetricMeasureSpace, HaarGrid, TestFunction) {
        let s = line(n, 1.0).unwrap();
        let b = TestFunction::strict((0..n).map(|i| Complex64::from_polar(1.0, 0.4 * (i as f64 * 0.2).sin())).collect()).unwrap();
        let sys = build_cubes(&s, &build_nets(&s, 0.5, 0, 6).unwrap(), None).unwrap();
        let g = HaarGrid::new(&s, sys, b.clone()).unwrap();
        (s, g, b)
    }

    const PARAMS: DecayParams = DecayParams { alpha: 1.0, sep_c: 2.0, r: 2 };

    #[test]
    fn zero_kernel_gives_zero_ratios() {
        let (s, g, b) = setup(128);
        let op = KernelOperator::zero(&s);
        let ctx = PairingContext::new(&s, &op, &b, &b);
        let t = separated_decay_check(&ctx, &g, &g, DecayParams { sep_c: 0.1, ..PARAMS }).unwrap();
        assert_eq!((t.max_separated, t.max_decay), (0.0, 0.0));
        let c = corrected_element_check(&ctx, &g, &g, PARAMS).unwrap();
        assert_eq!((c.max_ratio, c.max_pointwise), (0.0, 0.0));
    }

    #[test]
    fn doubling_kernel_doubles_ratios() {
        let (s, g, b) = setup(128);
        let op = KernelOperator::assemble(&s, StandardKernel::cauchy1d()).unwrap();
        let op2 = op.scaled(2.0);
        let params = DecayParams { sep_c: 0.1, ..PARAMS };
        let t1 = separated_decay_check(&PairingContext::new(&s, &op, &b, &b), &g, &g, params).unwrap();
        let t2 = separated_decay_check(&PairingContext::new(&s, &op2, &b, &b), &g, &g, params).unwrap();
        assert!(t1.max_decay > 0.0);
        assert!((t2.max_decay - 2.0 * t1.max_decay).abs() <= 1e-12 * t1.max_decay);
        assert!((t2.max_separated - 2.0 * t1.max_separated).abs() <= 1e-12 * t1.max_separated);
    }

    #[test]
    fn child_identity_holds() {
        let (s, g, b) = setup(128);
        let op = KernelOperator::assemble(&s, StandardKernel::cauchy1d()).unwrap();
        let ctx = PairingContext::new(&s, &op, &b, &b);
        let c = corrected_element_check(&ctx, &g, &g, PARAMS).unwrap();
        assert!(c.pairs > 0);
        assert!(c.max_identity_residual <= 1e-10, "{}", c.max_identity_residual);
        assert!(c.max_ratio.is_finite() && c.max_ratio > 0.0);
    }

    #[test]
    fn strict_separation_leaves_no_pairs() {
        let (s, g, b) = setup(64);
        let op = KernelOperator::zero(&s);
        let ctx = PairingContext::new(&s, &op, &b, &b);
        let r = separated_decay_check(&ctx, &g, &g, DecayParams { sep_c: 1e6, ..PARAMS });
        assert_eq!(r.unwrap_err(), OperatorError::NoAdmissiblePairs);
    }
}
