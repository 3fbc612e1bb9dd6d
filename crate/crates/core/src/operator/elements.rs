//! Adapted Haar systems on a grid, pairings with an operator, and matrix elements.

use num_complex::Complex64;
use serde::Serialize;

use super::matrix::KernelOperator;
use crate::dyadic::{CubeId, DyadicSystem};
use crate::martingale::{haar, order_children, CubeOrdering, HaarFunction, MartingaleError};
use crate::randgrid::{classify_geometric, CenterTree};
use crate::space::{MetricMeasureSpace, TestFunction};

/// A dyadic system with its adapted orderings and goodness flags.
#[derive(Debug, Clone)]
pub struct HaarGrid {
    system: DyadicSystem,
    b: TestFunction,
    /// Orderings of generations `k_min .. k_max - 1`.
    orderings: Vec<Vec<CubeOrdering>>,
    good: Vec<Vec<bool>>,
}

impl HaarGrid {
    /// Orders the children of every cube with children; all cubes start good.
    pub fn new(space: &MetricMeasureSpace, system: DyadicSystem, b: TestFunction) -> Result<Self, MartingaleError> {
        let mut orderings = Vec::new();
        for k in system.k_min()..system.k_max() {
            let row = system.cube_ids(k).map(|id| order_children(space, &system, &b, id)).collect::<Result<Vec<_>, _>>()?;
            orderings.push(row);
        }
        let good = system.generations().map(|k| vec![true; system.generation(k).cubes.len()]).collect();
        Ok(Self { system, b, orderings, good })
    }

    /// Marks cubes geometrically good or bad against `other` with lag `r`.
    pub fn with_goodness(mut self, space: &MetricMeasureSpace, other: &DyadicSystem, r: u32, gamma: f64) -> Self {
        let tree = CenterTree::from_system(other);
        self.good = self
            .system
            .generations()
            .map(|k| {
                self.system
                    .generation(k)
                    .cubes
                    .iter()
                    .map(|c| classify_geometric(space, c.center, k, &tree, r, gamma))
                    .collect()
            })
            .collect();
        self
    }

    pub fn system(&self) -> &DyadicSystem {
        &self.system
    }

    pub fn b(&self) -> &TestFunction {
        &self.b
    }

    pub fn is_good(&self, id: CubeId) -> bool {
        self.good[(id.k - self.system.k_min()) as usize][id.index]
    }

    pub fn set_good(&mut self, id: CubeId, good: bool) {
        self.good[(id.k - self.system.k_min()) as usize][id.index] = good;
    }

    /// Ordering of a cube of generation `< k_max`.
    pub fn ordering(&self, id: CubeId) -> &CubeOrdering {
        &self.orderings[(id.k - self.system.k_min()) as usize][id.index]
    }

    /// Generations whose cubes carry Haar functions.
    pub fn haar_generations(&self) -> std::ops::Range<i32> {
        self.system.k_min()..self.system.k_max()
    }

    pub fn haar(&self, space: &MetricMeasureSpace, id: CubeId, u: usize) -> HaarFunction {
        haar(space, &self.system, &self.b, self.ordering(id), u).expect("orderings were validated on construction")
    }

    /// Nonzero cancellative Haar functions `u >= 1` of the cube `id`.
    pub fn cancellative(&self, space: &MetricMeasureSpace, id: CubeId) -> Vec<HaarFunction> {
        (1..self.ordering(id).s()).map(|u| self.haar(space, id, u)).filter(|h| !h.is_zero()).collect()
    }

    /// Whether every point of `inner` lies in the cube `outer` of this grid.
    pub fn contains(&self, outer: CubeId, inner: &[usize]) -> bool {
        let label = &self.system.generation(outer.k).label;
        inner.iter().all(|&x| label[x] == outer.index)
    }

    pub fn members(&self, id: CubeId) -> &[usize] {
        &self.system.cube(id).members
    }
}

/// Operator with the two accretive functions, and `T^t b_2` precomputed.
pub struct PairingContext<'a> {
    pub space: &'a MetricMeasureSpace,
    pub op: &'a KernelOperator,
    pub b1: &'a TestFunction,
    pub b2: &'a TestFunction,
    transpose_b2: Vec<Complex64>,
}

impl<'a> PairingContext<'a> {
    pub fn new(space: &'a MetricMeasureSpace, op: &'a KernelOperator, b1: &'a TestFunction, b2: &'a TestFunction) -> Self {
        let transpose_b2 = op.apply_transpose(b2.values());
        Self { space, op, b1, b2, transpose_b2 }
    }

    /// `T^t b_2`, so that `<b_2, T h> = <T^t b_2, h>`.
    pub fn transpose_b2(&self) -> &[Complex64] {
        &self.transpose_b2
    }

    /// `T(b_1 phi)` on every point.
    pub fn apply_haar(&self, phi: &HaarFunction) -> Vec<Complex64> {
        let mut f = vec![Complex64::new(0.0, 0.0); self.space.len()];
        for &(x, v) in &phi.values {
            f[x] = self.b1.at(x) * v;
        }
        self.op.apply(&f)
    }

    /// `<b_2 psi, g>` for `g = T(b_1 phi)`.
    pub fn pair_with(&self, psi: &HaarFunction, g: &[Complex64]) -> Complex64 {
        psi.values.iter().map(|&(x, v)| v * self.b2.at(x) * g[x] * self.space.mass(x)).sum()
    }

    /// `<chi_A b_2 w, g>` over a set with an optional weight.
    pub fn pair_set(&self, set: &[usize], weight: impl Fn(usize) -> Complex64, g: &[Complex64]) -> Complex64 {
        set.iter().map(|&x| weight(x) * self.b2.at(x) * g[x] * self.space.mass(x)).sum()
    }

    /// `<b_2, T(b_1 phi)>`.
    pub fn full_pairing(&self, phi: &HaarFunction) -> Complex64 {
        phi.values.iter().map(|&(y, v)| self.transpose_b2[y] * self.b1.at(y) * v * self.space.mass(y)).sum()
    }

    /// `<chi_A b_2, T(b_1 chi_B)>` by a direct double sum.
    pub fn set_pairing(&self, a: &[usize], b: &[usize]) -> Complex64 {
        let mass = self.space.masses();
        a.iter()
            .map(|&x| {
                let inner: Complex64 = b.iter().map(|&y| self.op.entry(x, y) * self.b1.at(y) * mass[y]).sum();
                self.b2.at(x) * mass[x] * inner
            })
            .sum()
    }

    /// `set_pairing` with every term replaced by its modulus.
    pub fn abs_pairing(&self, a: &[usize], b: &[usize]) -> f64 {
        let mass = self.space.masses();
        a.iter()
            .map(|&x| {
                let inner: f64 = b.iter().map(|&y| (self.op.entry(x, y) * self.b1.at(y)).norm() * mass[y]).sum();
                self.b2.at(x).norm() * mass[x] * inner
            })
            .sum()
    }
}

/// `<f>_A`, zero on null sets.
pub fn average(space: &MetricMeasureSpace, f: &HaarFunction, set: &[usize]) -> Complex64 {
    let m = space.measure_of(set);
    if m <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut i = 0;
    for &x in set {
        while i < f.values.len() && f.values[i].0 < x {
            i += 1;
        }
        if i < f.values.len() && f.values[i].0 == x {
            total += f.values[i].1 * space.mass(x);
        }
    }
    total / m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixElement {
    pub q: CubeId,
    pub u: usize,
    pub r: CubeId,
    pub v: usize,
    /// `T_RQ = <b_2 psi_R, T(b_1 phi_Q)>`.
    pub value: Complex64,
    /// `T_RQ - <b_2, T(b_1 phi_Q)> <psi_R>_Q` when `Q` is inside `R` more than `r` generations down.
    pub corrected: Option<Complex64>,
    /// `l(Q) + l(R) + d(Q, R)`.
    pub d_qr: f64,
}

/// The matrix element of `phi` (on `q_grid`) against `psi` (on `r_grid`).
pub fn matrix_element(
    ctx: &PairingContext<'_>,
    q_grid: &HaarGrid,
    r_grid: &HaarGrid,
    phi: &HaarFunction,
    psi: &HaarFunction,
    lag: u32,
) -> MatrixElement {
    let g = ctx.apply_haar(phi);
    let value = ctx.pair_with(psi, &g);
    let q_members = q_grid.members(phi.cube);
    let corrected = (phi.cube.k - psi.cube.k > lag as i32 && r_grid.contains(psi.cube, q_members))
        .then(|| value - ctx.full_pairing(phi) * average(ctx.space, psi, q_members));
    let d = ctx.space.set_distance(q_members, r_grid.members(psi.cube));
    let d_qr = q_grid.system().side(phi.cube.k) + r_grid.system().side(psi.cube.k) + d;
    MatrixElement { q: phi.cube, u: phi.u, r: psi.cube, v: psi.u, value, corrected, d_qr }
}
