//! Two-sided Monte Carlo check of the collapse of the goodness restriction on the
//! coarser cube: with one grid fixed, restricting to good coarse cubes only costs the
//! factor `pi_good`.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::Serialize;

use super::goodness::classify_geometric;
use super::montecarlo::{estimate_pi_table, goodness_flags, run_trials};
use super::{RandGridError, Randomizer};
use crate::operator::{average, HaarGrid, PairingContext};
use crate::rng::{gen_word, DrawKind, Seed};
use crate::stats::mean_estimate;

/// Functions and operator of the pairing
/// `phi(Q, R) = <g, psi_R> <b_2, T(b_1 phi_Q)> <psi_R>_Q <phi_Q, f>`.
pub struct CollapseInputs<'a> {
    pub ctx: &'a PairingContext<'a>,
    pub f: &'a [Complex64],
    pub g: &'a [Complex64],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub trials: u64,
    pub pi_trials: u64,
    pub r: u32,
    pub pi_good: f64,
    /// Mean of `pi_good sum_R sum_(Q good) phi(Q, R)`.
    pub lhs: Complex64,
    /// Mean of `sum_(R good) sum_(Q good) phi(Q, R)`.
    pub rhs: Complex64,
    /// Mean of the paired per-trial difference `lhs - rhs`.
    pub difference: Complex64,
    /// Standard errors of the real and imaginary parts of the difference.
    pub std_error: (f64, f64),
    /// Bound on the bias inherited from the estimated `pi_y` of the fixed grid.
    pub pi_error: f64,
    /// `max(|Re d| / sigma_re, |Im d| / sigma_im)` with
    /// `sigma = sqrt(se^2 + pi_error^2)`.
    pub z: f64,
    pub within_3_sigma: bool,
}

/// Per trial: draws the grid `D` and the pseudogoodness parameters of the fixed grid
/// `D'`, and sums `phi(Q, R)` over `R` in `D'` of generation `m` and good `Q` in `D`
/// of generation `k >= m`, both in `gens`.
///
/// `phi_Q` are `b_1`-adapted on `D`, `psi_R` are `b_2`-adapted on `D'`, both cancellative.
pub fn check_collapse_identity(
    randomizer: &Randomizer<'_>,
    inputs: &CollapseInputs<'_>,
    gens: RangeInclusive<i32>,
    r: u32,
    gamma: f64,
    pi_trials: u64,
    trials: u64,
    seed: Seed,
) -> Result<CollapseReport, RandGridError> {
    let space = randomizer.space();
    let ctx = inputs.ctx;
    let table = estimate_pi_table(randomizer, gens.clone(), r, gamma, pi_trials, seed.derive(&[1]))?;
    let pi_good = table.pi_good();
    let fixed = randomizer.sample(seed.derive(&[2]), 0)?;
    let fixed_grid = HaarGrid::new(space, randomizer.system(&fixed), ctx.b2.clone()).expect("b_2 is accretive");
    let grid_seed = seed.derive(&[3]);
    let coarse: Vec<i32> = gens.clone().filter(|&m| m < fixed_grid.system().k_max()).collect();

    // psi_R with <g, psi_R>, per generation and cube of D'.
    let psis: Vec<Vec<Vec<(crate::martingale::HaarFunction, Complex64)>>> = coarse
        .iter()
        .map(|&m| {
            fixed_grid
                .system()
                .cube_ids(m)
                .map(|id| {
                    fixed_grid
                        .cancellative(space, id)
                        .into_iter()
                        .map(|psi| {
                            let gp: Complex64 = psi.values.iter().map(|&(x, v)| inputs.g[x] * v * space.mass(x)).sum();
                            (psi, gp)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let runs = run_trials(trials, |trial| -> Result<(Complex64, Complex64, Vec<Vec<Complex64>>), RandGridError> {
        let sample = randomizer.sample(grid_seed, trial)?;
        let grid = HaarGrid::new(space, randomizer.system(&sample), ctx.b1.clone()).expect("b_1 is accretive");
        let fixed_tree = randomizer.center_tree(&fixed);
        let tree = randomizer.center_tree(&sample);
        let q_good = goodness_flags(randomizer, &sample, |k, a| sample.t(k, a), &fixed_tree, &table, gens.clone());
        let mut per_r: Vec<Vec<Complex64>> = psis.iter().map(|row| vec![Complex64::new(0.0, 0.0); row.len()]).collect();
        for k in gens.clone().filter(|&k| k < grid.system().k_max()) {
            for q in grid.system().cube_ids(k) {
                if !q_good[(k - gens.start()) as usize][q.index] {
                    continue;
                }
                let members = grid.members(q);
                for phi in grid.cancellative(space, q) {
                    let tq = ctx.full_pairing(&phi);
                    let fq: Complex64 = phi.values.iter().map(|&(x, v)| v * inputs.f[x] * space.mass(x)).sum();
                    if tq == Complex64::new(0.0, 0.0) || fq == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for (gi, &m) in coarse.iter().enumerate().filter(|(_, &m)| m <= k) {
                        let label = &fixed_grid.system().generation(m).label;
                        let mut touched: Vec<usize> = members.iter().map(|&x| label[x]).collect();
                        touched.sort_unstable();
                        touched.dedup();
                        for c in touched {
                            for (psi, gp) in &psis[gi][c] {
                                per_r[gi][c] += gp * tq * average(space, psi, members) * fq;
                            }
                        }
                    }
                }
            }
        }
        let mut all = Complex64::new(0.0, 0.0);
        let mut good = Complex64::new(0.0, 0.0);
        for (gi, &m) in coarse.iter().enumerate() {
            for (c, &x_r) in per_r[gi].iter().enumerate() {
                all += x_r;
                let y = fixed.centers(m)[c];
                let u = grid_seed.uniform(&[trial, gen_word(m), c as u64, DrawKind::PseudoU as u64]);
                let threshold = (pi_good / table.pi(m, y)).clamp(0.0, 1.0);
                if u <= threshold && classify_geometric(space, y, m, &tree, r, gamma) {
                    good += x_r;
                }
            }
        }
        Ok((all, good, per_r))
    });
    let runs: Vec<_> = runs.into_iter().collect::<Result<_, _>>()?;

    let n = runs.len().max(1) as f64;
    let lhs: Complex64 = runs.iter().map(|r| r.0 * pi_good).sum::<Complex64>() / n;
    let rhs: Complex64 = runs.iter().map(|r| r.1).sum::<Complex64>() / n;
    let diffs: Vec<Complex64> = runs.iter().map(|r| r.0 * pi_good - r.1).collect();
    let re = mean_estimate(&diffs.iter().map(|d| d.re).collect::<Vec<_>>());
    let im = mean_estimate(&diffs.iter().map(|d| d.im).collect::<Vec<_>>());

    // P(R good) = pi_good pi_y / pi^_y, so each R carries a bias of
    // pi_good (pi_y / pi^_y - 1) E[X_R]; summed in absolute value.
    let mut pi_error = 0.0;
    for (gi, &m) in coarse.iter().enumerate() {
        for c in 0..psis[gi].len() {
            let y = fixed.centers(m)[c];
            let Some(p) = table.entry(m, y) else { continue };
            if p.freq <= 0.0 || p.sigma == 0.0 {
                continue;
            }
            let mean_x: Complex64 = runs.iter().map(|r| r.2[gi][c]).sum::<Complex64>() / n;
            pi_error += pi_good * p.sigma / p.freq * mean_x.norm();
        }
    }
    let z_of = |mean: f64, se: f64| {
        let sigma = (se * se + pi_error * pi_error).sqrt();
        if sigma > 0.0 {
            mean.abs() / sigma
        } else if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let z = z_of(re.mean, re.std_error).max(z_of(im.mean, im.std_error));
    Ok(CollapseReport {
        trials,
        pi_trials,
        r,
        pi_good,
        lhs,
        rhs,
        difference: Complex64::new(re.mean, im.mean),
        std_error: (re.std_error, im.std_error),
        pi_error,
        z,
        within_3_sigma: z <= 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::build_nets;
    use crate::operator::{KernelOperator, StandardKernel};
    use crate::randgrid::{conflict_sets, tag_points};
    use crate::space::{line, TestFunction};

    fn functions(n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let f = (0..n).map(|i| Complex64::new((i as f64 * 0.21).sin(), 0.0)).collect();
        let g = (0..n).map(|i| Complex64::new((i as f64 * 0.13).cos(), 0.1)).collect();
        (f, g)
    }

    #[test]
    fn zero_operator_gives_zero_sides() {
        let n = 32;
        let s = line(n, 1.0).unwrap();
        let nets = build_nets(&s, 0.5, 0, 4).unwrap();
        let rz = Randomizer::new(&s, &nets, tag_points(&conflict_sets(&s, &nets), None).unwrap()).unwrap();
        let op = KernelOperator::zero(&s);
        let one = TestFunction::constant(n, Complex64::new(1.0, 0.0)).unwrap();
        let ctx = PairingContext::new(&s, &op, &one, &one);
        let (f, g) = functions(n);
        let rep = check_collapse_identity(&rz, &CollapseInputs { ctx: &ctx, f: &f, g: &g }, 0..=3, 3, 0.25, 3000, 20, Seed(1)).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
        assert!(rep.within_3_sigma);
    }

    #[test]
    fn certain_goodness_collapses_per_sample() {
        let n = 32;
        let s = line(n, 1.0).unwrap();
        let nets = build_nets(&s, 0.5, 0, 4).unwrap();
        let rz = Randomizer::new(&s, &nets, tag_points(&conflict_sets(&s, &nets), None).unwrap()).unwrap();
        let op = KernelOperator::assemble(&s, StandardKernel::cauchy1d()).unwrap();
        let one = TestFunction::constant(n, Complex64::new(1.0, 0.0)).unwrap();
        let ctx = PairingContext::new(&s, &op, &one, &one);
        let (f, g) = functions(n);
        let rep = check_collapse_identity(&rz, &CollapseInputs { ctx: &ctx, f: &f, g: &g }, 0..=3, 9, 0.25, 20, 20, Seed(2)).unwrap();
        assert_eq!(rep.pi_good, 1.0);
        assert!(rep.lhs.norm() > 0.0);
        assert_eq!(rep.difference, Complex64::new(0.0, 0.0));
        assert_eq!(rep.std_error, (0.0, 0.0));
    }
}
