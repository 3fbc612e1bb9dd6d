//! Drawing new centers from the tagged plan.

use serde::Serialize;

use super::{CenterTree, RandGridError, TaggingPlan};
use crate::dyadic::{assemble, link_generations, nearest_of, DyadicSystem, NetHierarchy};
use crate::rng::{gen_word, DrawKind, Seed};
use crate::space::MetricMeasureSpace;

/// One draw of the randomization: a tag per generation, new centers `x^k_alpha` (point
/// ids aligned with the reference index `alpha`) and pseudo variables `t`, `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomGridSample {
    pub seed: u64,
    pub trial: u64,
    pub k_min: i32,
    /// Drawn tag `i` per generation below the finest.
    pub drawn: Vec<usize>,
    pub centers: Vec<Vec<usize>>,
    pub t: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl RandomGridSample {
    pub fn centers(&self, k: i32) -> &[usize] {
        &self.centers[(k - self.k_min) as usize]
    }

    pub fn t(&self, k: i32, alpha: usize) -> f64 {
        self.t[(k - self.k_min) as usize][alpha]
    }

    pub fn u(&self, k: i32, alpha: usize) -> f64 {
        self.u[(k - self.k_min) as usize][alpha]
    }
}

/// Reference nets with their tagging plan and the lookup tables used to sample and
/// assemble random systems quickly.
#[derive(Debug, Clone)]
pub struct Randomizer<'a> {
    space: &'a MetricMeasureSpace,
    nets: &'a NetHierarchy,
    plan: TaggingPlan,
    /// `candidates[g][x]`: reference centers within `3 delta^k` of `x`. Every new center
    /// lies within `delta^k` of its reference center, so the nearest new center of `x`
    /// is among these.
    candidates: Vec<Vec<Vec<usize>>>,
    /// Reference pairs closer than `2 delta^k + delta^k / 8`: the only pairs whose new
    /// centers can violate the `delta^k / 8` separation.
    near_pairs: Vec<Vec<(usize, usize)>>,
    /// Finer reference center nearest to `z^k_alpha`, when within `delta^(k+1)`.
    close_child: Vec<Vec<Option<usize>>>,
}

impl<'a> Randomizer<'a> {
    pub fn new(space: &'a MetricMeasureSpace, nets: &'a NetHierarchy, plan: TaggingPlan) -> Result<Self, RandGridError> {
        if !plan.is_tagged() {
            return Err(RandGridError::TooFewTags { given: 0, largest: plan.largest_conflict_set() });
        }
        let mut candidates = Vec::new();
        let mut near_pairs = Vec::new();
        let mut close_child = Vec::new();
        for k in nets.generations() {
            let scale = nets.scale(k);
            let cs = nets.centers(k);
            candidates.push(
                (0..space.len())
                    .map(|x| {
                        let row = space.row(x);
                        (0..cs.len()).filter(|&a| row[cs[a]] < 3.0 * scale).collect()
                    })
                    .collect(),
            );
            let mut pairs = Vec::new();
            for a in 0..cs.len() {
                for b in (a + 1)..cs.len() {
                    if space.dist(cs[a], cs[b]) < 2.125 * scale * (1.0 + 1e-12) {
                        pairs.push((a, b));
                    }
                }
            }
            near_pairs.push(pairs);
            if k < nets.k_max() {
                let fine = nets.centers(k + 1);
                close_child.push(
                    cs.iter()
                        .map(|&z| {
                            let b = nearest_of(space, z, fine, None);
                            (space.dist(z, fine[b]) < nets.scale(k + 1)).then_some(fine[b])
                        })
                        .collect(),
                );
            }
        }
        Ok(Self { space, nets, plan, candidates, near_pairs, close_child })
    }

    pub fn space(&self) -> &'a MetricMeasureSpace {
        self.space
    }

    pub fn nets(&self) -> &'a NetHierarchy {
        self.nets
    }

    pub fn plan(&self) -> &TaggingPlan {
        &self.plan
    }

    /// Points that can serve as generation-`k` centers: finer reference centers below
    /// the finest generation, the reference centers at the finest.
    pub fn candidate_points(&self, k: i32) -> &[usize] {
        if k < self.nets.k_max() {
            self.nets.centers(k + 1)
        } else {
            self.nets.centers(k)
        }
    }

    pub fn sample(&self, seed: Seed, trial: u64) -> Result<RandomGridSample, RandGridError> {
        self.sample_with_streams(seed, trial, &|k| gen_word(k))
    }

    /// As [`Randomizer::sample`], with the stream word of each generation chosen by
    /// `stream_of`.
    pub fn sample_with_streams(
        &self,
        seed: Seed,
        trial: u64,
        stream_of: &dyn Fn(i32) -> u64,
    ) -> Result<RandomGridSample, RandGridError> {
        let nets = self.nets;
        let l = self.plan.tag_count();
        let mut drawn = Vec::new();
        let mut centers = Vec::new();
        let mut t = Vec::new();
        let mut u = Vec::new();
        for (g, k) in nets.generations().enumerate() {
            let w = stream_of(k);
            let cs = nets.centers(k);
            if k < nets.k_max() {
                let i = 1 + seed.below(&[trial, w, 0, DrawKind::Tag as u64], l);
                drawn.push(i);
                let fine = nets.centers(k + 1);
                let mut row = Vec::with_capacity(cs.len());
                for a in 0..cs.len() {
                    if self.plan.tag(k, a) == i {
                        let kids = nets.children(k, a);
                        let pick = seed.below(&[trial, w, a as u64, DrawKind::Child as u64], kids.len());
                        row.push(fine[kids[pick]]);
                    } else {
                        row.push(self.close_child[g][a].ok_or(RandGridError::NoCloseChild { k, alpha: a })?);
                    }
                }
                centers.push(row);
            } else {
                centers.push(cs.to_vec());
            }
            t.push((0..cs.len()).map(|a| seed.uniform(&[trial, w, a as u64, DrawKind::PseudoT as u64])).collect());
            u.push((0..cs.len()).map(|a| seed.uniform(&[trial, w, a as u64, DrawKind::PseudoU as u64])).collect());
        }
        let sample = RandomGridSample { seed: seed.0, trial, k_min: nets.k_min(), drawn, centers, t, u };
        self.validate(&sample)?;
        Ok(sample)
    }

    /// Separation `delta^k / 8` and covering `4 delta^k` of the new centers.
    pub fn validate(&self, sample: &RandomGridSample) -> Result<(), RandGridError> {
        use crate::dyadic::DyadicError;
        for (g, k) in self.nets.generations().enumerate() {
            let scale = self.nets.scale(k);
            let cs = &sample.centers[g];
            for &(a, b) in &self.near_pairs[g] {
                let d = self.space.dist(cs[a], cs[b]);
                if d < scale / 8.0 {
                    return Err(DyadicError::SeparationViolated { k, a: cs[a], b: cs[b], dist: d, bound: scale / 8.0 }.into());
                }
            }
            for x in 0..self.space.len() {
                let mut d = self.space.dist(x, cs[self.nets.nearest(k, x)]);
                if d >= 4.0 * scale {
                    d = cs.iter().map(|&c| self.space.dist(x, c)).fold(f64::INFINITY, f64::min);
                }
                if d >= 4.0 * scale {
                    return Err(DyadicError::CoveringViolated { k, x, dist: d, bound: 4.0 * scale }.into());
                }
            }
        }
        Ok(())
    }

    /// Full cube system of a sample.
    pub fn system(&self, sample: &RandomGridSample) -> DyadicSystem {
        self.system_from(sample, self.nets.k_min())
    }

    /// Cube system restricted to generations `k_from..=k_max`; cubes of generation `k`
    /// depend only on centers of generations `>= k`.
    pub fn system_from(&self, sample: &RandomGridSample, k_from: i32) -> DyadicSystem {
        let g0 = (k_from - self.nets.k_min()) as usize;
        assemble(
            self.space,
            self.nets.delta(),
            k_from,
            sample.centers[g0..].to_vec(),
            Some(&self.candidates[g0..]),
        )
    }

    /// Centers and parent links of a sample, without membership.
    pub fn center_tree(&self, sample: &RandomGridSample) -> CenterTree {
        let (_, parent) = link_generations(self.space, &sample.centers, Some(&self.candidates));
        CenterTree::new(self.nets.delta(), self.nets.k_min(), sample.centers.clone(), parent)
    }
}
