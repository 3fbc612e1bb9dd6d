use num_complex::Complex64;
use serde::Serialize;

use super::expectation::cube_integral;
use super::{integral, MartingaleError};
use crate::dyadic::{CubeId, DyadicSystem};
use crate::space::{MetricMeasureSpace, TestFunction};

/// Children `Q_1, ..., Q_s` of a cube in adapted order with their `b`-integrals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeOrdering {
    pub cube: CubeId,
    /// Child indices in generation `k + 1`.
    pub children: Vec<usize>,
    pub child_b: Vec<Complex64>,
    pub child_mass: Vec<f64>,
    /// `b(Q^_i) = sum_(j >= i) b(Q_j)`.
    pub tails: Vec<Complex64>,
    pub mass: f64,
    pub exhaustive: bool,
}

impl CubeOrdering {
    pub fn s(&self) -> usize {
        self.children.len()
    }

    pub fn b_total(&self) -> Complex64 {
        self.tails.first().copied().unwrap_or_default()
    }

    /// Smallest `|b(Q^_i)| / ((1 - (i - 1)/s) a mu(Q))`.
    pub fn tail_margin(&self, a: f64) -> f64 {
        tail_margin(&self.tails, a, self.mass)
    }

    pub fn tail_bound_holds(&self, a: f64) -> bool {
        self.tail_margin(a) >= 1.0 - 1e-12
    }
}

fn tail_margin(tails: &[Complex64], a: f64, mass: f64) -> f64 {
    let s = tails.len() as f64;
    tails
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let need = (1.0 - i as f64 / s) * a * mass;
            if need <= 0.0 {
                f64::INFINITY
            } else {
                t.norm() / need
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn tails_of(order: &[usize], child_b: &[Complex64]) -> Vec<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut out: Vec<Complex64> = order
        .iter()
        .rev()
        .map(|&i| {
            acc += child_b[i];
            acc
        })
        .collect();
    out.reverse();
    out
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

const EXHAUSTIVE_LIMIT: usize = 8;

/// Orders the children so that `|b(Q^_i)| >= (1 - (i - 1)/s(Q)) a mu(Q)`: greedily,
/// each step removing the child that leaves the largest remaining `|b|`, then by
/// exhaustive search when that fails and `s(Q) <= 8`.
pub fn order_children(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    id: CubeId,
) -> Result<CubeOrdering, MartingaleError> {
    let cube = system.cube(id);
    let a = b.accretivity();
    let kids = &cube.children;
    let child_ids: Vec<CubeId> = kids.iter().map(|&i| CubeId { k: id.k + 1, index: i }).collect();
    let child_b: Vec<Complex64> =
        child_ids.iter().map(|&c| integral(space.masses(), &system.cube(c).members, |x| b.at(x))).collect();
    let child_mass: Vec<f64> = child_ids.iter().map(|&c| space.measure_of(&system.cube(c).members)).collect();
    let mass: f64 = child_mass.iter().sum();

    let mut remaining: Vec<usize> = (0..kids.len()).collect();
    let mut order = Vec::with_capacity(kids.len());
    let mut rest: Complex64 = child_b.iter().sum();
    while remaining.len() > 1 {
        let pos = (0..remaining.len())
            .max_by(|&p, &q| {
                let (bp, bq) = ((rest - child_b[remaining[p]]).norm(), (rest - child_b[remaining[q]]).norm());
                bp.total_cmp(&bq).then(remaining[q].cmp(&remaining[p]))
            })
            .expect("nonempty");
        let c = remaining.remove(pos);
        rest -= child_b[c];
        order.push(c);
    }
    order.extend(remaining);

    let mut exhaustive = false;
    if tail_margin(&tails_of(&order, &child_b), a, mass) < 1.0 - 1e-12 {
        if kids.len() > EXHAUSTIVE_LIMIT {
            return Err(MartingaleError::OrderingInfeasible { cube: id, children: kids.len() });
        }
        let mut p: Vec<usize> = (0..kids.len()).collect();
        loop {
            if tail_margin(&tails_of(&p, &child_b), a, mass) >= 1.0 - 1e-12 {
                order = p;
                exhaustive = true;
                break;
            }
            if !next_permutation(&mut p) {
                return Err(MartingaleError::OrderingInfeasible { cube: id, children: kids.len() });
            }
        }
    }
    let tails = tails_of(&order, &child_b);
    Ok(CubeOrdering {
        cube: id,
        children: order.iter().map(|&i| kids[i]).collect(),
        child_b: order.iter().map(|&i| child_b[i]).collect(),
        child_mass: order.iter().map(|&i| child_mass[i]).collect(),
        tails,
        mass,
        exhaustive,
    })
}

/// Adapted Haar function `phi_(Q,u)` stored on its support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HaarFunction {
    pub cube: CubeId,
    pub u: usize,
    /// `(point, value)` sorted by point.
    pub values: Vec<(usize, Complex64)>,
}

impl HaarFunction {
    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_dense(&self, n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for &(x, v) in &self.values {
            out[x] = v;
        }
        out
    }

    /// Bilinear pairing `integral phi g dmu`.
    pub fn pair(&self, mass: &[f64], g: impl Fn(usize) -> Complex64) -> Complex64 {
        self.values.iter().map(|&(x, v)| v * g(x) * mass[x]).sum()
    }

    pub fn lp_norm(&self, mass: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().filter(|e| mass[e.0] > 0.0).map(|e| e.1.norm()).fold(0.0, f64::max);
        }
        self.values.iter().map(|&(x, v)| v.norm().powf(p) * mass[x]).sum::<f64>().powf(1.0 / p)
    }
}

/// `phi_(Q,u)` for `1 <= u < s(Q)`, or the non-cancellative `b(Q)^(-1/2) chi_Q` for
/// `u = 0`. Square roots take the principal branch. Zero when `mu(Q_u) = 0` or
/// `mu(Q^_(u+1)) = 0`.
pub fn haar(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    b: &TestFunction,
    ordering: &CubeOrdering,
    u: usize,
) -> Result<HaarFunction, MartingaleError> {
    let id = ordering.cube;
    let mut values = Vec::new();
    if u == 0 {
        let members = &system.cube(id).members;
        if let Some(bq) = cube_integral(space, b, id, members)? {
            let v = bq.sqrt().inv();
            values = members.iter().map(|&x| (x, v)).collect();
        }
    } else {
        assert!(u < ordering.s(), "Haar index {u} out of range for {} children", ordering.s());
        let tail_mass: f64 = ordering.child_mass[u..].iter().sum();
        if ordering.child_mass[u - 1] > 0.0 && tail_mass > 0.0 {
            let bu = ordering.child_b[u - 1];
            let bt = ordering.tails[u];
            let scale = (bu * bt / ordering.tails[u - 1]).sqrt();
            let member_of = |i: usize| &system.cube(CubeId { k: id.k + 1, index: ordering.children[i] }).members;
            values.extend(member_of(u - 1).iter().map(|&x| (x, scale / bu)));
            for i in u..ordering.s() {
                values.extend(member_of(i).iter().map(|&x| (x, -scale / bt)));
            }
            values.sort_by_key(|e| e.0);
        }
    }
    Ok(HaarFunction { cube: id, u, values })
}
