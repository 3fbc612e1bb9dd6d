//! Geometric splitting of the pairing of two adjacent cubes of comparable size.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::elements::PairingContext;
use super::OperatorError;
use crate::dyadic::{CubeId, DyadicSystem, C0};
use crate::rng::{DrawKind, Seed};
use crate::space::MetricMeasureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitParams {
    pub eps: f64,
    pub upsilon: f64,
    /// Dilation `Lambda` with `Lambda B` inside `Q intersect R`.
    pub lambda: f64,
    /// Comparable size: generations differ by at most `r`.
    pub r: u32,
    /// Separation constant `C` of the adjacency condition `d(Q, R) < C C_0 min l`.
    pub sep_c: f64,
    pub max_attempts: usize,
}

impl SplitParams {
    pub fn new(eps: f64, upsilon: f64, lambda: f64, r: u32) -> Self {
        Self { eps, upsilon, lambda, r, sep_c: 2.0, max_attempts: 16 }
    }

    /// Separation `d(B, B') >= s max(r_B, r_B')` demanded of the covering: `s = upsilon`.
    pub fn separation(&self) -> f64 {
        self.upsilon
    }
}

/// Bound on the number of covering balls: `ceil((Lambda / (eps upsilon))^max(d, 1))`.
pub fn covering_cap(params: &SplitParams, d: f64) -> usize {
    (params.lambda / (params.eps * params.upsilon)).powf(d.max(1.0)).ceil() as usize
}

/// Point sets of the split, each sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SplitSets {
    /// `Q intersect R`.
    pub overlap: Vec<usize>,
    /// `delta_Q`: within `eps l(Q)` of both `Q` and its complement.
    pub layer_q: Vec<usize>,
    pub layer_r: Vec<usize>,
    pub q_bad: Vec<usize>,
    pub r_bad: Vec<usize>,
    pub q_sep: Vec<usize>,
    pub q_edge: Vec<usize>,
    pub r_sep: Vec<usize>,
    pub r_edge: Vec<usize>,
    /// Overlap minus both layers.
    pub interior: Vec<usize>,
    pub omega_i: Vec<usize>,
    pub omega_q: Vec<usize>,
    pub omega_r: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringBall {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringReport {
    pub balls: usize,
    /// `mu(interior \ union B) / mu(interior)`, zero for a null interior.
    pub deficit: f64,
    pub dilates_inside: bool,
    /// `min d(B, B') / max(r_B, r_B')`, infinite with fewer than two balls.
    pub min_separation: f64,
    pub separation_bound: f64,
    pub count_cap: usize,
    pub attempts: usize,
    pub deficit_ok: bool,
    pub separation_ok: bool,
    pub count_ok: bool,
}

impl CoveringReport {
    pub fn holds(&self) -> bool {
        self.deficit_ok && self.dilates_inside && self.separation_ok && self.count_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitComponents {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub e1: Complex64,
    pub e2: Complex64,
    pub e3: Complex64,
    pub f1: Complex64,
    pub f2: Complex64,
    pub f3: Complex64,
    pub g1: Complex64,
    pub g2: Complex64,
}

impl SplitComponents {
    pub fn as_array(&self) -> [Complex64; 12] {
        [self.a, self.b, self.c, self.d, self.e1, self.e2, self.e3, self.f1, self.f2, self.f3, self.g1, self.g2]
    }

    pub fn sum(&self) -> Complex64 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjacentSplit {
    pub q: CubeId,
    pub r: CubeId,
    /// `<chi_R b_2, T(b_1 chi_Q)>`.
    pub pairing: Complex64,
    pub components: SplitComponents,
    /// `|sum - pairing|` over the pairing with absolute values.
    pub relative_residual: f64,
    pub sets: SplitSets,
    pub covering: Vec<CoveringBall>,
    pub report: CoveringReport,
}

fn minus(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_err()).collect()
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Points within `width` of both `set` and its complement.
fn layer(space: &MetricMeasureSpace, set: &[usize], width: f64) -> Vec<usize> {
    let n = space.len();
    let mut inside = vec![false; n];
    for &x in set {
        inside[x] = true;
    }
    (0..n)
        .filter(|&x| {
            let row = space.row(x);
            // d(x, A) = 0 on A; otherwise the nearest point of the other side decides.
            (0..n).any(|y| inside[y] != inside[x] && row[y] <= width)
        })
        .collect()
}

/// Union of the layers of every cube of generation `k`: points within `width` of a
/// point in another cube.
fn generation_layer(space: &MetricMeasureSpace, system: &DyadicSystem, k: i32, width: f64) -> Vec<usize> {
    let label = &system.generation(k).label;
    let n = space.len();
    (0..n)
        .filter(|&x| {
            let row = space.row(x);
            (0..n).any(|y| label[y] != label[x] && row[y] <= width)
        })
        .collect()
}

fn comparable_layers(space: &MetricMeasureSpace, system: &DyadicSystem, k: i32, r: u32, eps: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for j in (k - r as i32)..=(k + r as i32) {
        if system.contains_generation(j) {
            out = union(&out, &generation_layer(space, system, j, eps * system.side(j)));
        }
    }
    out
}

/// Geometric sets of the split for `Q` in `q_sys` and `R` in `r_sys`.
pub fn split_sets(
    space: &MetricMeasureSpace,
    q_sys: &DyadicSystem,
    r_sys: &DyadicSystem,
    q: CubeId,
    r: CubeId,
    params: &SplitParams,
) -> SplitSets {
    let qm = &q_sys.cube(q).members;
    let rm = &r_sys.cube(r).members;
    let overlap = intersect(qm, rm);
    let layer_q = layer(space, qm, params.eps * q_sys.side(q.k));
    let layer_r = layer(space, rm, params.eps * r_sys.side(r.k));
    let q_bad = intersect(qm, &comparable_layers(space, r_sys, q.k, params.r, params.eps));
    let r_bad = intersect(rm, &comparable_layers(space, q_sys, r.k, params.r, params.eps));
    let q_sep = minus(&minus(qm, &overlap), &layer_r);
    let q_edge = minus(&minus(qm, &overlap), &q_sep);
    let r_sep = minus(&minus(rm, &overlap), &layer_q);
    let r_edge = minus(&minus(rm, &overlap), &r_sep);
    let interior = minus(&minus(&overlap, &layer_q), &layer_r);
    SplitSets {
        overlap,
        layer_q,
        layer_r,
        q_bad,
        r_bad,
        q_sep,
        q_edge,
        r_sep,
        r_edge,
        interior,
        ..Default::default()
    }
}

/// Randomized greedy covering of the interior by balls with `Lambda B` inside the overlap,
/// pairwise separated. Candidates are visited by decreasing admissible radius with a
/// random perturbation; each takes the largest radius on a geometric ladder that keeps
/// the separation.
fn greedy_covering(
    space: &MetricMeasureSpace,
    sets: &SplitSets,
    params: &SplitParams,
    seed: Seed,
    attempt: u64,
) -> Vec<CoveringBall> {
    let n = space.len();
    let mut in_overlap = vec![false; n];
    for &x in &sets.overlap {
        in_overlap[x] = true;
    }
    let reach = |c: usize| {
        let row = space.row(c);
        (0..n).filter(|&y| !in_overlap[y]).map(|y| row[y]).fold(space.diameter() * 2.0 + 1.0, f64::min)
    };
    let mut rng = seed.rng(&[attempt, DrawKind::Covering as u64]);
    let jitter = 0.5 * attempt as f64 / params.max_attempts.max(1) as f64;
    let mut order: Vec<(f64, usize)> = sets
        .interior
        .iter()
        .map(|&c| (reach(c) / params.lambda * (1.0 + jitter * rng.gen::<f64>()), c))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let sep = params.separation();
    let mut balls: Vec<CoveringBall> = Vec::new();
    let mut covered = vec![false; n];
    for (_, c) in order {
        if covered[c] {
            continue;
        }
        let top = reach(c) / params.lambda;
        let mut radius = top;
        for _ in 0..60 {
            let members = space.ball_members(c, radius);
            let ok = balls.iter().all(|b| space.set_distance(&members, &b.members) >= sep * radius.max(b.radius));
            if ok {
                for &x in &members {
                    covered[x] = true;
                }
                balls.push(CoveringBall { center: c, radius, members });
                break;
            }
            radius *= 0.8;
        }
    }
    balls
}

fn covering_report(
    space: &MetricMeasureSpace,
    sets: &SplitSets,
    balls: &[CoveringBall],
    params: &SplitParams,
    attempts: usize,
) -> CoveringReport {
    let all: Vec<usize> = balls.iter().fold(Vec::new(), |acc, b| union(&acc, &b.members));
    let interior_mass = space.measure_of(&sets.interior);
    let deficit = if interior_mass > 0.0 { space.measure_of(&minus(&sets.interior, &all)) / interior_mass } else { 0.0 };
    let dilates_inside = balls.iter().all(|b| {
        space.ball_members(b.center, params.lambda * b.radius).iter().all(|x| sets.overlap.binary_search(x).is_ok())
    });
    let mut min_separation = f64::INFINITY;
    for (i, a) in balls.iter().enumerate() {
        for b in &balls[i + 1..] {
            min_separation = min_separation.min(space.set_distance(&a.members, &b.members) / a.radius.max(b.radius));
        }
    }
    let count_cap = covering_cap(params, space.dim_d());
    CoveringReport {
        balls: balls.len(),
        deficit,
        dilates_inside,
        min_separation,
        separation_bound: params.separation(),
        count_cap,
        attempts,
        deficit_ok: deficit <= params.upsilon,
        separation_ok: min_separation >= params.separation(),
        count_ok: balls.len() <= count_cap,
    }
}

/// Splits `<chi_R b_2, T(b_1 chi_Q)>` into the twelve pairings
/// `A, B, C, D, E1..E3, F1..F3, G1, G2` over the geometric sets of `Q` and `R`.
pub fn adjacent_split(
    ctx: &PairingContext<'_>,
    q_sys: &DyadicSystem,
    r_sys: &DyadicSystem,
    q: CubeId,
    r: CubeId,
    params: &SplitParams,
    seed: Seed,
) -> Result<AdjacentSplit, OperatorError> {
    let space = ctx.space;
    let (lq, lr) = (q_sys.side(q.k), r_sys.side(r.k));
    let d = space.set_distance(&q_sys.cube(q).members, &r_sys.cube(r).members);
    if d >= params.sep_c * C0 * lq.min(lr) || (q.k - r.k).unsigned_abs() > params.r {
        return Err(OperatorError::NotAdjacent { q, r, distance: d });
    }
    let mut sets = split_sets(space, q_sys, r_sys, q, r, params);
    let mut best: Option<(Vec<CoveringBall>, CoveringReport)> = None;
    for attempt in 0..params.max_attempts.max(1) {
        let balls = greedy_covering(space, &sets, params, seed, attempt as u64);
        let report = covering_report(space, &sets, &balls, params, attempt + 1);
        let better = best.as_ref().is_none_or(|(_, b)| report.deficit < b.deficit);
        let done = report.holds();
        if done || better {
            best = Some((balls, report));
        }
        if done {
            break;
        }
    }
    let (covering, report) = best.expect("at least one attempt");
    if !report.holds() {
        return Err(OperatorError::CoveringFailed { deficit: report.deficit, balls: report.balls });
    }
    let covered: Vec<usize> = covering.iter().fold(Vec::new(), |acc, b| union(&acc, &b.members));
    let rest = minus(&sets.overlap, &covered);
    sets.omega_i = intersect(&rest, &sets.interior);
    sets.omega_q = intersect(&rest, &sets.layer_r);
    sets.omega_r = minus(&minus(&rest, &sets.omega_i), &sets.omega_q);

    let qm = &q_sys.cube(q).members;
    let rm = &r_sys.cube(r).members;
    let p = |a: &[usize], b: &[usize]| ctx.set_pairing(a, b);
    let mut g1 = Complex64::new(0.0, 0.0);
    let mut g2 = Complex64::new(0.0, 0.0);
    for (i, bi) in covering.iter().enumerate() {
        for (j, bj) in covering.iter().enumerate() {
            let v = p(&bj.members, &bi.members);
            if i == j {
                g1 += v;
            } else {
                g2 += v;
            }
        }
    }
    let components = SplitComponents {
        a: p(&sets.r_edge, qm),
        b: p(&sets.r_sep, qm),
        c: p(&sets.overlap, &sets.q_edge),
        d: p(&sets.overlap, &sets.q_sep),
        e1: p(&sets.omega_q, &sets.overlap),
        e2: p(&sets.omega_r, &sets.overlap),
        e3: p(&sets.omega_i, &sets.overlap),
        f1: p(&covered, &sets.omega_q),
        f2: p(&covered, &sets.omega_r),
        f3: p(&covered, &sets.omega_i),
        g1,
        g2,
    };
    let pairing = p(rm, qm);
    let scale = ctx.abs_pairing(rm, qm);
    let relative_residual = if scale > 0.0 { (components.sum() - pairing).norm() / scale } else { 0.0 };
    Ok(AdjacentSplit { q, r, pairing, components, relative_residual, sets, covering, report })
}
