//! Monte Carlo estimators over random grids.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use super::goodness::{classify_geometric, CenterTree};
use super::{RandGridError, Randomizer};
use crate::rng::Seed;
use crate::stats::{weighted_line_fit, LineFit, MeanEstimate, Proportion};

/// Largest relative 95% half width accepted for a goodness probability.
pub const PI_RELATIVE_CI: f64 = 0.10;

/// Runs `f` for every trial in parallel and returns the results in trial order.
pub(crate) fn run_trials<T: Send>(trials: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..trials).into_par_iter().map(f).collect()
}

fn first_error<T>(results: Vec<Result<T, RandGridError>>) -> Result<Vec<T>, RandGridError> {
    results.into_iter().collect()
}

/// Estimated probability that a cube of generation `k` centered at a point is
/// geometrically good against a random grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiTable {
    pub k_min: i32,
    pub r: u32,
    pub gamma: f64,
    pub trials: u64,
    /// Per generation, `(point, estimate)` sorted by point.
    pub rows: Vec<Vec<(usize, Proportion)>>,
}

impl PiTable {
    pub fn k_max(&self) -> i32 {
        self.k_min + self.rows.len() as i32 - 1
    }

    pub fn entry(&self, k: i32, x: usize) -> Option<&Proportion> {
        let row = self.rows.get((k - self.k_min) as usize)?;
        row.binary_search_by_key(&x, |e| e.0).ok().map(|i| &row[i].1)
    }

    /// Estimated probability; 1 outside the table.
    pub fn pi(&self, k: i32, x: usize) -> f64 {
        self.entry(k, x).map_or(1.0, |p| p.freq)
    }

    fn entries(&self) -> impl Iterator<Item = (i32, usize, &Proportion)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(move |(g, row)| row.iter().map(move |(x, p)| (self.k_min + g as i32, *x, p)))
    }

    /// Common goodness probability: the smallest estimated `pi_x`, so that every
    /// `pi_x >= pi_good`.
    pub fn pi_good(&self) -> f64 {
        self.entries().map(|e| e.2.freq).fold(1.0, f64::min)
    }

    /// Constant `C` with `pi_good = 1 - C delta^(r gamma eta)`.
    pub fn eps_const(&self, delta: f64, eta: f64) -> f64 {
        (1.0 - self.pi_good()) / delta.powf(self.r as f64 * self.gamma * eta)
    }

    pub fn max_relative_ci(&self) -> f64 {
        self.entries().map(|e| if e.2.freq == 1.0 { 0.0 } else { e.2.relative_ci() }).fold(0.0, f64::max)
    }

    /// Largest `sigma / pi` over the table.
    pub fn max_relative_sigma(&self) -> f64 {
        self.entries().map(|e| if e.2.freq > 0.0 { e.2.sigma / e.2.freq } else { f64::INFINITY }).fold(0.0, f64::max)
    }

    fn check_stable(&self) -> Result<(), RandGridError> {
        for (k, point, p) in self.entries() {
            let rel = if p.freq == 1.0 { 0.0 } else { p.relative_ci() };
            if rel > PI_RELATIVE_CI {
                return Err(RandGridError::PiEstimateUnstable { k, point, relative_ci: rel });
            }
        }
        Ok(())
    }
}

fn check_range(randomizer: &Randomizer<'_>, gens: &RangeInclusive<i32>) -> Result<(), RandGridError> {
    let nets = randomizer.nets();
    for k in [*gens.start(), *gens.end()] {
        if k < nets.k_min() || k > nets.k_max() {
            return Err(RandGridError::GenerationOutOfRange { k, k_min: nets.k_min(), k_max: nets.k_max() });
        }
    }
    Ok(())
}

/// Estimates `pi_x` for every candidate center of the generations in `gens` from
/// `trials` draws of the other grid.
pub fn estimate_pi_table(
    randomizer: &Randomizer<'_>,
    gens: RangeInclusive<i32>,
    r: u32,
    gamma: f64,
    trials: u64,
    seed: Seed,
) -> Result<PiTable, RandGridError> {
    check_range(randomizer, &gens)?;
    let space = randomizer.space();
    let layout: Vec<Vec<usize>> = gens.clone().map(|k| randomizer.candidate_points(k).to_vec()).collect();
    let runs = run_trials(trials, |trial| {
        let other = randomizer.sample(seed, trial)?;
        let tree = randomizer.center_tree(&other);
        Ok(gens
            .clone()
            .zip(&layout)
            .map(|(k, pts)| pts.iter().map(|&x| classify_geometric(space, x, k, &tree, r, gamma)).collect::<Vec<bool>>())
            .collect::<Vec<_>>())
    });
    let runs = first_error(runs)?;
    let rows = layout
        .iter()
        .enumerate()
        .map(|(g, pts)| {
            pts.iter()
                .enumerate()
                .map(|(i, &x)| (x, Proportion::new(runs.iter().filter(|run| run[g][i]).count() as u64, trials)))
                .collect()
        })
        .collect();
    let table = PiTable { k_min: *gens.start(), r, gamma, trials, rows };
    table.check_stable()?;
    Ok(table)
}

/// Boundary layer frequencies for one generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub k: i32,
    pub eps: Vec<f64>,
    /// Fraction of points in some boundary layer, mean over trials.
    pub freq: Vec<MeanEstimate>,
    /// Fit of `ln freq` against `ln eps` over the non-saturated entries.
    pub fit: Option<LineFit>,
    pub monotone: bool,
}

impl BoundaryReport {
    pub fn eta(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn eta_ci95(&self) -> Option<(f64, f64)> {
        self.fit.map(|f| f.slope_ci95())
    }
}

/// Frequency with which a point lies within `eps delta^k` of a generation-`k` cube
/// it does not belong to and within `eps delta^k` of the complement of its own
/// cube, i.e. within `eps delta^k` of a point with another label.
pub fn estimate_boundary_probability(
    randomizer: &Randomizer<'_>,
    k: i32,
    eps: &[f64],
    trials: u64,
    seed: Seed,
) -> Result<BoundaryReport, RandGridError> {
    check_range(randomizer, &(k..=k))?;
    let space = randomizer.space();
    let side = randomizer.nets().scale(k);
    let reach = eps.iter().copied().fold(0.0, f64::max) * side;
    let neighbors: Vec<Vec<(f64, usize)>> = (0..space.len())
        .map(|x| {
            let row = space.row(x);
            let mut v: Vec<(f64, usize)> = (0..space.len()).filter(|&y| y != x && row[y] <= reach).map(|y| (row[y], y)).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v
        })
        .collect();
    let runs = first_error(run_trials(trials, |trial| {
        let sample = randomizer.sample(seed, trial)?;
        let system = randomizer.system_from(&sample, k);
        let label = &system.generation(k).label;
        let gap: Vec<f64> = (0..space.len())
            .map(|x| {
                neighbors[x].iter().find(|&&(_, y)| label[y] != label[x]).map_or(f64::INFINITY, |&(d, _)| d)
            })
            .collect();
        Ok(eps.iter().map(|&e| gap.iter().filter(|&&g| g <= e * side).count()).collect::<Vec<usize>>())
    }))?;
    let freq: Vec<MeanEstimate> = (0..eps.len())
        .map(|i| binomial_bound(runs.iter().map(|r| r[i]).sum::<usize>() as f64 / space.len() as f64, trials))
        .collect();
    let monotone = sorted_pairs(eps).all(|(big, small)| {
        let (a, b) = (&freq[big], &freq[small]);
        b.mean <= a.mean + 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
    });
    let usable: Vec<usize> = (0..eps.len()).filter(|&i| freq[i].mean > 0.0 && freq[i].mean < 1.0).collect();
    let xs: Vec<f64> = usable.iter().map(|&i| eps[i].ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|&i| freq[i].mean.ln()).collect();
    let vs: Vec<f64> = usable.iter().map(|&i| (freq[i].std_error / freq[i].mean).powi(2)).collect();
    Ok(BoundaryReport { k, eps: eps.to_vec(), freq, fit: weighted_line_fit(&xs, &ys, &vs), monotone })
}

/// Mean of per-point frequencies over `trials` draws. The error is the binomial
/// error of a single point at the mean frequency, which bounds the error of the
/// average over points.
fn binomial_bound(hits_per_point: f64, trials: u64) -> MeanEstimate {
    let p = hits_per_point / trials as f64;
    MeanEstimate { mean: p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), n: trials as usize }
}

/// Index pairs `(i, j)` with `eps[i] > eps[j]` adjacent in decreasing order.
fn sorted_pairs(eps: &[f64]) -> impl Iterator<Item = (usize, usize)> {
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]));
    let pairs: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    pairs.into_iter()
}

/// Frequencies of geometric badness of the fixed reference cubes of generation `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadReport {
    pub k: i32,
    pub gamma: f64,
    pub eta: f64,
    pub r: Vec<u32>,
    /// Fraction of generation-`k` cubes that are bad, mean over trials.
    pub freq: Vec<MeanEstimate>,
    pub decreasing: bool,
    /// Smallest `C` with `freq <= C delta^(r gamma eta)` at every lag.
    pub fitted_c: f64,
    /// Least squares decay rate of `ln freq` per unit lag.
    pub log_slope: Option<f64>,
    pub bound_holds: bool,
}

pub fn estimate_bad_probability(
    randomizer: &Randomizer<'_>,
    k: i32,
    r_list: &[u32],
    gamma: f64,
    eta: f64,
    trials: u64,
    seed: Seed,
) -> Result<BadReport, RandGridError> {
    check_range(randomizer, &(k..=k))?;
    let space = randomizer.space();
    let cubes = randomizer.nets().centers(k);
    let runs = first_error(run_trials(trials, |trial| {
        let other = randomizer.sample(seed, trial)?;
        let tree = randomizer.center_tree(&other);
        Ok(r_list
            .iter()
            .map(|&r| cubes.iter().filter(|&&x| !classify_geometric(space, x, k, &tree, r, gamma)).count())
            .collect::<Vec<usize>>())
    }))?;
    let freq: Vec<MeanEstimate> = (0..r_list.len())
        .map(|i| binomial_bound(runs.iter().map(|r| r[i]).sum::<usize>() as f64 / cubes.len() as f64, trials))
        .collect();
    let delta = randomizer.nets().delta();
    let decay = |r: u32| delta.powf(r as f64 * gamma * eta);
    let mut order: Vec<usize> = (0..r_list.len()).collect();
    order.sort_by_key(|&i| r_list[i]);
    let decreasing = order.windows(2).all(|w| {
        let (a, b) = (&freq[w[0]], &freq[w[1]]);
        b.mean <= a.mean + 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
    });
    let fitted_c = order.iter().map(|&i| freq[i].mean / decay(r_list[i])).fold(0.0, f64::max);
    let bound_holds = fitted_c.is_finite()
        && order.iter().all(|&i| freq[i].mean <= fitted_c * decay(r_list[i]) * (1.0 + 1e-12));
    let usable: Vec<usize> = order.iter().copied().filter(|&i| freq[i].mean > 0.0 && freq[i].mean < 1.0).collect();
    let log_slope = weighted_line_fit(
        &usable.iter().map(|&i| r_list[i] as f64).collect::<Vec<_>>(),
        &usable.iter().map(|&i| freq[i].mean.ln()).collect::<Vec<_>>(),
        &usable.iter().map(|&i| (freq[i].std_error / freq[i].mean).powi(2)).collect::<Vec<_>>(),
    )
    .map(|f| f.slope);
    Ok(BadReport { k, gamma, eta, r: r_list.to_vec(), freq, decreasing, fitted_c, log_slope, bound_holds })
}

/// Goodness frequency of one cube of the random grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeFrequency {
    pub k: i32,
    pub alpha: usize,
    pub freq: f64,
    pub sigma: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformReport {
    pub pi_good: f64,
    /// Distinct geometric goodness probabilities among the table entries.
    pub distinct_pi: usize,
    pub pi_max_relative_ci: f64,
    pub cubes: Vec<CubeFrequency>,
    pub max_abs_z: f64,
    pub all_within: bool,
}

/// Goodness flag of every cube `(k, alpha)` of a sample against the other grid.
pub fn goodness_flags(
    randomizer: &Randomizer<'_>,
    sample: &super::RandomGridSample,
    pseudo: impl Fn(i32, usize) -> f64,
    other: &CenterTree,
    table: &PiTable,
    gens: RangeInclusive<i32>,
) -> Vec<Vec<bool>> {
    let space = randomizer.space();
    let pi_good = table.pi_good();
    gens.map(|k| {
        sample
            .centers(k)
            .iter()
            .enumerate()
            .map(|(a, &x)| {
                let threshold = (pi_good / table.pi(k, x)).clamp(0.0, 1.0);
                pseudo(k, a) <= threshold && classify_geometric(space, x, k, other, table.r, table.gamma)
            })
            .collect()
    })
    .collect()
}

/// Estimates `pi_x` from `pi_trials` draws, then counts over `trials` independent
/// pairs of grids how often each cube of the generations in `gens` is good.
///
/// The error bar of a cube combines the binomial error with the error inherited
/// from the estimated `pi_x`.
pub fn verify_uniform_goodness(
    randomizer: &Randomizer<'_>,
    gens: RangeInclusive<i32>,
    r: u32,
    gamma: f64,
    pi_trials: u64,
    trials: u64,
    seed: Seed,
) -> Result<UniformReport, RandGridError> {
    let table = estimate_pi_table(randomizer, gens.clone(), r, gamma, pi_trials, seed.derive(&[1]))?;
    let grid_seed = seed.derive(&[2]);
    let other_seed = seed.derive(&[3]);
    let runs = first_error(run_trials(trials, |trial| {
        let sample = randomizer.sample(grid_seed, trial)?;
        let other = randomizer.sample(other_seed, trial)?;
        let tree = randomizer.center_tree(&other);
        Ok(goodness_flags(randomizer, &sample, |k, a| sample.t(k, a), &tree, &table, gens.clone()))
    }))?;
    let pi_good = table.pi_good();
    let inherited = pi_good * table.max_relative_sigma();
    let mut cubes = Vec::new();
    for (g, k) in gens.clone().enumerate() {
        for a in 0..randomizer.nets().centers(k).len() {
            let hits = runs.iter().filter(|run| run[g][a]).count() as u64;
            let p = Proportion::new(hits, trials);
            let sigma = (pi_good * (1.0 - pi_good) / trials as f64 + inherited * inherited).sqrt();
            let z = if sigma > 0.0 { (p.freq - pi_good) / sigma } else if p.freq == pi_good { 0.0 } else { f64::INFINITY };
            cubes.push(CubeFrequency { k, alpha: a, freq: p.freq, sigma, z });
        }
    }
    let mut values: Vec<f64> = table.rows.iter().flatten().map(|e| e.1.freq).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let max_abs_z = cubes.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    Ok(UniformReport {
        pi_good,
        distinct_pi: values.len(),
        pi_max_relative_ci: table.max_relative_ci(),
        cubes,
        max_abs_z,
        all_within: max_abs_z <= 3.0,
    })
}
