//! Right-hand side quantities of the Tb bound against an empirical operator norm.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bmo::{bmo_norm, rbmo_norm, wbp_constant, BallFamily};
use super::elements::{HaarGrid, PairingContext};
use super::kernel::{cz_constants, DEFAULT_SEPARATION};
use super::matrix::KernelOperator;
use super::paraproduct::{lp_norm, paraproduct_norm_ratio};
use super::OperatorError;
use crate::dyadic::delta_notice;
use crate::rng::{DrawKind, Seed};
use crate::space::MetricMeasureSpace;

/// Both sides of the annulus estimate around a regularized ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusCheck {
    /// `sum over B(c, R) x (B(c, 3r) \ B(c, R))` of `|K| dmu dmu`.
    pub lhs: f64,
    /// `mu(B(c, 3r))`.
    pub rhs: f64,
    pub ratio: f64,
}

pub fn annulus_integral_check(space: &MetricMeasureSpace, op: &KernelOperator, center: usize, r: f64, big_r: f64) -> AnnulusCheck {
    let inner = space.ball_members(center, big_r);
    let row = space.row(center);
    let ring: Vec<usize> = (0..space.len()).filter(|&y| row[y] >= big_r && row[y] < 3.0 * r).collect();
    let lhs: f64 = inner
        .iter()
        .map(|&x| ring.iter().map(|&y| op.entry(x, y).norm() * space.mass(y)).sum::<f64>() * space.mass(x))
        .sum();
    let rhs = space.ball_measure(center, 3.0 * r);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    AnnulusCheck { lhs, rhs, ratio }
}

/// Paraproduct inputs: the two grids with goodness flags and the lag.
pub struct ParaproductSetup<'a> {
    pub q_grid: &'a HaarGrid,
    pub r_grid: &'a HaarGrid,
    pub r: u32,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TbParams {
    pub p: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// Dilation of the RBMO oscillation condition.
    pub varrho: f64,
    pub alpha: f64,
    pub sep_c: f64,
    pub cz_samples: usize,
    pub norm_probes: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl TbParams {
    pub fn new(p: f64, kappa: f64, lambda: f64, seed: u64) -> Self {
        Self {
            p,
            kappa,
            lambda,
            varrho: kappa,
            alpha: 1.0,
            sep_c: DEFAULT_SEPARATION,
            cz_samples: 10_000,
            norm_probes: 1000,
            power_iterations: 100,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorNormBound {
    /// Largest observed `||T f||_p / ||f||_p`; a lower bound for the operator norm.
    pub lower_bound: f64,
    pub method: &'static str,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseRatios {
    pub bmo_tb1: f64,
    pub bmo_tt_b2: f64,
    pub wbp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub params: TbParams,
    pub delta_notice: String,
    pub points: usize,
    pub balls: usize,
    pub rbmo_balls: usize,
    /// `||T b_1||` in `BMO^1_kappa`.
    pub bmo_tb1: f64,
    /// `||T^t b_2||` in `BMO^1_kappa`, with the bilinear transpose.
    pub bmo_tt_b2: f64,
    pub rbmo_tb1: f64,
    pub rbmo_converged: bool,
    /// Weak boundedness constant of `M_b2 T M_b1` with dilation `Lambda`.
    pub wbp: f64,
    pub cz_b: f64,
    pub operator_norm: OperatorNormBound,
    /// `||Pi g||_p' / ||g||_p'` when grids are given.
    pub paraproduct_ratio: Option<f64>,
    /// First three terms over the operator norm bound; zero when the bound is zero.
    pub converse: ConverseRatios,
}

impl NormReport {
    pub fn all_finite(&self) -> bool {
        let c = &self.converse;
        [self.bmo_tb1, self.bmo_tt_b2, self.rbmo_tb1, self.wbp, self.cz_b, self.operator_norm.lower_bound, c.bmo_tb1, c.bmo_tt_b2, c.wbp]
            .into_iter()
            .chain(self.paraproduct_ratio)
            .all(|v| v.is_finite() && v >= 0.0)
    }
}

fn l2_mu(mass: &[f64], f: &[Complex64]) -> f64 {
    lp_norm(mass, f, 2.0)
}

/// Probe functions: random complex vectors, one Lipschitz probe per anchor and
/// indicators of balls around the anchors.
fn probes(space: &MetricMeasureSpace, count: usize, seed: Seed) -> Vec<Vec<Complex64>> {
    let n = space.len();
    let anchors = [0, n / 2, n.saturating_sub(1)];
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    let radius = 0.25 * space.diameter();
    for &a in anchors.iter().take(n.min(3)) {
        out.push(space.row(a).iter().map(|&d| Complex64::new(d, 0.0)).collect());
        out.push(space.row(a).iter().map(|&d| Complex64::new(if d < radius { 1.0 } else { 0.0 }, 0.0)).collect());
    }
    let random = count.saturating_sub(out.len());
    out.extend((0..random as u64).map(|i| {
        let mut rng = seed.rng(&[i, DrawKind::Probe as u64]);
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    }));
    out
}

/// Lower bound for `||T||_(L^p -> L^p)`: probes for every `p`, plus power iteration on
/// `T* T` for `p = 2`.
pub fn operator_norm_lower_bound(space: &MetricMeasureSpace, op: &KernelOperator, p: f64, count: usize, iterations: usize, seed: Seed) -> OperatorNormBound {
    let mass = space.masses();
    let fs = probes(space, count, seed);
    let mut best = fs
        .par_iter()
        .map(|f| {
            let norm = lp_norm(mass, f, p);
            if norm > 0.0 {
                lp_norm(mass, &op.apply(f), p) / norm
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    let mut method = "random probes";
    if p == 2.0 && iterations > 0 {
        method = "power iteration and random probes";
        let mut rng = seed.rng(&[u64::MAX, DrawKind::Probe as u64]);
        let mut v: Vec<Complex64> = (0..space.len()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        for _ in 0..iterations {
            let norm = l2_mu(mass, &v);
            if norm == 0.0 {
                break;
            }
            let tv = op.apply(&v);
            best = best.max(l2_mu(mass, &tv) / norm);
            let w = op.apply_adjoint(&tv);
            let wn = l2_mu(mass, &w);
            if wn == 0.0 {
                break;
            }
            v = w.into_iter().map(|z| z / wn).collect();
        }
    }
    OperatorNormBound { lower_bound: best, method, probes: fs.len() }
}

fn over(term: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        term / norm
    } else {
        0.0
    }
}

/// Ball families of the estimators; RBMO couples every nested pair, so it usually
/// runs on a smaller family.
#[derive(Debug, Clone, Copy)]
pub struct TbFamilies<'a> {
    pub bmo: &'a BallFamily,
    pub rbmo: &'a BallFamily,
}

impl<'a> TbFamilies<'a> {
    pub fn single(family: &'a BallFamily) -> Self {
        Self { bmo: family, rbmo: family }
    }
}

/// Assembles the Tb report for `ctx`.
pub fn tb_report(
    ctx: &PairingContext<'_>,
    families: TbFamilies<'_>,
    paraproduct: Option<ParaproductSetup<'_>>,
    params: TbParams,
    delta: f64,
) -> Result<NormReport, OperatorError> {
    let space = ctx.space;
    let op = ctx.op;
    let seed = Seed(params.seed);
    let tb1 = op.apply(ctx.b1.values());
    let bmo_tb1 = bmo_norm(space, &tb1, 1.0, params.kappa, families.bmo)?;
    let bmo_tt_b2 = bmo_norm(space, ctx.transpose_b2(), 1.0, params.kappa, families.bmo)?;
    let rbmo = rbmo_norm(space, &tb1, params.varrho, families.rbmo)?;
    let wbp = wbp_constant(ctx, params.lambda, families.bmo);
    let cz = cz_constants(space, |x, y| op.entry(x, y), params.alpha, params.sep_c, params.cz_samples, seed.derive(&[1]));
    let norm = operator_norm_lower_bound(space, op, params.p, params.norm_probes, params.power_iterations, seed.derive(&[2]));
    let paraproduct_ratio = match paraproduct {
        Some(setup) => {
            let dual = params.p / (params.p - 1.0);
            Some(paraproduct_norm_ratio(ctx, setup.q_grid, setup.r_grid, setup.r, dual, setup.probes, seed.derive(&[3]))?.ratio)
        }
        None => None,
    };
    let t = norm.lower_bound;
    Ok(NormReport {
        delta_notice: delta_notice(delta),
        points: space.len(),
        balls: families.bmo.len(),
        rbmo_balls: families.rbmo.len(),
        bmo_tb1: bmo_tb1.norm,
        bmo_tt_b2: bmo_tt_b2.norm,
        rbmo_tb1: rbmo.norm,
        rbmo_converged: rbmo.converged,
        wbp: wbp.constant,
        cz_b: cz.b(),
        converse: ConverseRatios { bmo_tb1: over(bmo_tb1.norm, t), bmo_tt_b2: over(bmo_tt_b2.norm, t), wbp: over(wbp.constant, t) },
        operator_norm: norm,
        paraproduct_ratio,
        params,
    })
}
