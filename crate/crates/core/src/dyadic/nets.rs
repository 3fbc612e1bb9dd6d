//! Nested maximal separated nets.

use serde::Serialize;

use super::DyadicError;
use crate::space::MetricMeasureSpace;

/// Reference points `z^k_alpha` for generations `k_min..=k_max`.
///
/// Centers of each generation are sorted by point id; the coarser net is contained in
/// every finer one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetHierarchy {
    delta: f64,
    k_min: i32,
    k_max: i32,
    centers: Vec<Vec<usize>>,
    parent: Vec<Vec<usize>>,
    children: Vec<Vec<Vec<usize>>>,
    #[serde(skip)]
    nearest: Vec<Vec<usize>>,
}

pub(crate) fn nearest_of(space: &MetricMeasureSpace, x: usize, centers: &[usize], candidates: Option<&[usize]>) -> usize {
    let row = space.row(x);
    let mut best = (f64::INFINITY, usize::MAX, 0usize);
    let mut visit = |a: usize| {
        let c = centers[a];
        let key = (row[c], c);
        if key.0 < best.0 || (key.0 == best.0 && key.1 < best.1) {
            best = (key.0, key.1, a);
        }
    };
    match candidates {
        Some(list) => list.iter().for_each(|&a| visit(a)),
        None => (0..centers.len()).for_each(&mut visit),
    }
    best.2
}

pub fn build_nets(space: &MetricMeasureSpace, delta: f64, k_min: i32, k_max: i32) -> Result<NetHierarchy, DyadicError> {
    if k_min > k_max {
        return Err(DyadicError::BadScaleRange { k_min, k_max });
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(DyadicError::InvalidDelta(delta));
    }
    let n = space.len();
    let mut centers: Vec<Vec<usize>> = Vec::new();
    let mut prev: Vec<usize> = Vec::new();
    for k in k_min..=k_max {
        let scale = delta.powi(k);
        let mut chosen = prev.clone();
        let mut gap = vec![f64::INFINITY; n];
        for &c in &chosen {
            for (g, d) in gap.iter_mut().zip(space.row(c)) {
                *g = g.min(*d);
            }
        }
        for x in 0..n {
            if gap[x] >= scale {
                chosen.push(x);
                for (g, d) in gap.iter_mut().zip(space.row(x)) {
                    *g = g.min(*d);
                }
            }
        }
        chosen.sort_unstable();
        prev = chosen.clone();
        centers.push(chosen);
    }
    let nearest: Vec<Vec<usize>> =
        centers.iter().map(|cs| (0..n).map(|x| nearest_of(space, x, cs, None)).collect()).collect();
    let mut parent = vec![Vec::new()];
    for g in 1..centers.len() {
        parent.push(centers[g].iter().map(|&z| nearest[g - 1][z]).collect());
    }
    let mut children: Vec<Vec<Vec<usize>>> = centers.iter().map(|cs| vec![Vec::new(); cs.len()]).collect();
    for g in 1..centers.len() {
        for (b, &a) in parent[g].iter().enumerate() {
            children[g - 1][a].push(b);
        }
    }
    Ok(NetHierarchy { delta, k_min, k_max, centers, parent, children, nearest })
}

impl NetHierarchy {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn generations(&self) -> std::ops::RangeInclusive<i32> {
        self.k_min..=self.k_max
    }

    pub fn scale(&self, k: i32) -> f64 {
        self.delta.powi(k)
    }

    fn g(&self, k: i32) -> usize {
        assert!(k >= self.k_min && k <= self.k_max, "generation {k} out of range");
        (k - self.k_min) as usize
    }

    /// Point ids of `z^k_alpha`, indexed by `alpha`.
    pub fn centers(&self, k: i32) -> &[usize] {
        &self.centers[self.g(k)]
    }

    /// `alpha` with `(k, beta) <= (k - 1, alpha)`; `None` at `k_min`.
    pub fn parent(&self, k: i32, beta: usize) -> Option<usize> {
        (k > self.k_min).then(|| self.parent[self.g(k)][beta])
    }

    /// Indices `beta` of generation `k + 1` with `(k + 1, beta) <= (k, alpha)`.
    pub fn children(&self, k: i32, alpha: usize) -> &[usize] {
        &self.children[self.g(k)][alpha]
    }

    /// Index of the generation-`k` center nearest to `x` (ties by smallest point id).
    pub fn nearest(&self, k: i32, x: usize) -> usize {
        self.nearest[self.g(k)][x]
    }

    /// Checks separation, covering and the parent distance bound exactly.
    pub fn validate(&self, space: &MetricMeasureSpace) -> Result<(), DyadicError> {
        for k in self.generations() {
            let scale = self.scale(k);
            let cs = self.centers(k);
            for (i, &a) in cs.iter().enumerate() {
                for &b in &cs[i + 1..] {
                    if space.dist(a, b) < scale {
                        return Err(DyadicError::SeparationViolated { k, a, b, dist: space.dist(a, b), bound: scale });
                    }
                }
            }
            for x in 0..space.len() {
                let d = space.dist(x, cs[self.nearest(k, x)]);
                if d >= scale {
                    return Err(DyadicError::CoveringViolated { k, x, dist: d, bound: scale });
                }
            }
            if k > self.k_min {
                for (b, &z) in cs.iter().enumerate() {
                    let p = self.centers(k - 1)[self.parent(k, b).unwrap()];
                    let bound = self.scale(k - 1);
                    if space.dist(z, p) >= bound {
                        return Err(DyadicError::CoveringViolated { k: k - 1, x: z, dist: space.dist(z, p), bound });
                    }
                }
            }
        }
        Ok(())
    }
}
