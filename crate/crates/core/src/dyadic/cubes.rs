//! Half-open dyadic cubes built finest-first from centers.

use serde::Serialize;

use super::{nearest_of, DyadicError, NetHierarchy, C0, C1};
use crate::space::MetricMeasureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CubeId {
    pub k: i32,
    pub index: usize,
}

impl std::fmt::Display for CubeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.k, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cube {
    /// Point id of the center `x^k_alpha`.
    pub center: usize,
    /// Sorted point ids.
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generation {
    pub k: i32,
    pub side: f64,
    pub cubes: Vec<Cube>,
    /// Cube index of every point.
    #[serde(skip)]
    pub label: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicSystem {
    delta: f64,
    k_min: i32,
    k_max: i32,
    generations: Vec<Generation>,
}

/// Builds cubes over the reference nets, or over `new_centers[k - k_min][alpha]`
/// (point ids) when given. New centers must be `delta^k / 8` separated and cover the
/// space within `4 delta^k`.
pub fn build_cubes(
    space: &MetricMeasureSpace,
    nets: &NetHierarchy,
    new_centers: Option<&[Vec<usize>]>,
) -> Result<DyadicSystem, DyadicError> {
    let centers: Vec<Vec<usize>> = match new_centers {
        None => nets.generations().map(|k| nets.centers(k).to_vec()).collect(),
        Some(given) => {
            for (g, k) in nets.generations().enumerate() {
                let got = given.get(g).map_or(0, Vec::len);
                if got != nets.centers(k).len() {
                    return Err(DyadicError::CenterCount { k, expected: nets.centers(k).len(), got });
                }
                check_new_centers(space, k, nets.scale(k), &given[g])?;
            }
            given.to_vec()
        }
    };
    Ok(assemble(space, nets.delta(), nets.k_min(), centers, None))
}

fn check_new_centers(space: &MetricMeasureSpace, k: i32, scale: f64, cs: &[usize]) -> Result<(), DyadicError> {
    for (i, &a) in cs.iter().enumerate() {
        for &b in &cs[i + 1..] {
            let d = space.dist(a, b);
            if d < scale / 8.0 {
                return Err(DyadicError::SeparationViolated { k, a, b, dist: d, bound: scale / 8.0 });
            }
        }
    }
    for x in 0..space.len() {
        let d = cs.iter().map(|&c| space.dist(x, c)).fold(f64::INFINITY, f64::min);
        if d >= 4.0 * scale {
            return Err(DyadicError::CoveringViolated { k, x, dist: d, bound: 4.0 * scale });
        }
    }
    Ok(())
}

/// Point labels and parent links, finest generation first. A finer cube holding a coarser
/// center is linked to that center's cube (the nearest such center when several share it);
/// every other finer cube is linked to the coarse center nearest to its own center.
/// `candidates[g][x]`, when given, lists the generation-`g` center indices that can be
/// nearest to point `x`.
pub(crate) fn link_generations(
    space: &MetricMeasureSpace,
    centers: &[Vec<usize>],
    candidates: Option<&[Vec<Vec<usize>>]>,
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let n = space.len();
    let gens = centers.len();
    let cand = |g: usize, x: usize| candidates.map(|c| c[g][x].as_slice());
    let mut labels: Vec<Vec<usize>> = vec![Vec::new(); gens];
    labels[gens - 1] = (0..n).map(|x| nearest_of(space, x, &centers[gens - 1], cand(gens - 1, x))).collect();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); gens];
    for g in (0..gens - 1).rev() {
        let mut up: Vec<usize> =
            centers[g + 1].iter().map(|&c| nearest_of(space, c, &centers[g], cand(g, c))).collect();
        let mut claim: Vec<Option<(f64, usize)>> = vec![None; centers[g + 1].len()];
        for (a, &c) in centers[g].iter().enumerate() {
            let b = labels[g + 1][c];
            let key = (space.dist(c, centers[g + 1][b]), c);
            if claim[b].is_none_or(|(d, p)| key.0 < d || (key.0 == d && key.1 < p)) {
                claim[b] = Some(key);
                up[b] = a;
            }
        }
        labels[g] = labels[g + 1].iter().map(|&b| up[b]).collect();
        parents[g + 1] = up;
    }
    (labels, parents)
}

/// Finest-first assembly over [`link_generations`].
pub(crate) fn assemble(
    space: &MetricMeasureSpace,
    delta: f64,
    k_min: i32,
    centers: Vec<Vec<usize>>,
    candidates: Option<&[Vec<Vec<usize>>]>,
) -> DyadicSystem {
    let gens = centers.len();
    let (mut labels, parents) = link_generations(space, &centers, candidates);
    let generations = (0..gens)
        .map(|g| {
            let k = k_min + g as i32;
            let mut cubes: Vec<Cube> = centers[g]
                .iter()
                .enumerate()
                .map(|(a, &c)| Cube {
                    center: c,
                    members: Vec::new(),
                    parent: (g > 0).then(|| parents[g][a]),
                    children: Vec::new(),
                })
                .collect();
            for (x, &a) in labels[g].iter().enumerate() {
                cubes[a].members.push(x);
            }
            if g + 1 < gens {
                for (b, &a) in parents[g + 1].iter().enumerate() {
                    cubes[a].children.push(b);
                }
            }
            Generation { k, side: delta.powi(k), cubes, label: std::mem::take(&mut labels[g]) }
        })
        .collect();
    DyadicSystem { delta, k_min, k_max: k_min + gens as i32 - 1, generations }
}

/// Outcome of the four structural checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub partition: bool,
    pub nesting: bool,
    pub union_of_children: bool,
    /// `max diam(Q) / delta^k` over all cubes.
    pub max_diameter_ratio: f64,
    pub diameter_ok: bool,
    /// Cubes whose inner ball `B(x, C_1 delta^k)` leaves the cube.
    pub inner_ball_violations: usize,
    pub max_children: usize,
    pub empty_cubes: usize,
}

impl InvariantReport {
    pub fn all_hold(&self) -> bool {
        self.partition && self.nesting && self.union_of_children && self.diameter_ok && self.inner_ball_violations == 0
    }
}

impl DyadicSystem {
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

    pub fn contains_generation(&self, k: i32) -> bool {
        k >= self.k_min && k <= self.k_max
    }

    /// `l(Q) = delta^k`.
    pub fn side(&self, k: i32) -> f64 {
        self.delta.powi(k)
    }

    pub fn generation(&self, k: i32) -> &Generation {
        assert!(self.contains_generation(k), "generation {k} out of range");
        &self.generations[(k - self.k_min) as usize]
    }

    pub fn cube(&self, id: CubeId) -> &Cube {
        &self.generation(id.k).cubes[id.index]
    }

    pub fn cube_ids(&self, k: i32) -> impl Iterator<Item = CubeId> + '_ {
        (0..self.generation(k).cubes.len()).map(move |index| CubeId { k, index })
    }

    /// Cube of generation `k` containing point `x`.
    pub fn locate(&self, k: i32, x: usize) -> CubeId {
        CubeId { k, index: self.generation(k).label[x] }
    }

    /// Cube ids of the children of `id`.
    pub fn children(&self, id: CubeId) -> Vec<CubeId> {
        self.cube(id).children.iter().map(|&index| CubeId { k: id.k + 1, index }).collect()
    }

    /// Ancestor of `id` at generation `k <= id.k`.
    pub fn ancestor(&self, id: CubeId, k: i32) -> CubeId {
        let mut cur = id;
        while cur.k > k {
            cur = CubeId { k: cur.k - 1, index: self.cube(cur).parent.expect("parent below k_min") };
        }
        cur
    }

    /// Point ids of the centers of generation `k`.
    pub fn centers(&self, k: i32) -> Vec<usize> {
        self.generation(k).cubes.iter().map(|c| c.center).collect()
    }

    pub fn check_invariants(&self, space: &MetricMeasureSpace) -> InvariantReport {
        let n = space.len();
        let mut rep = InvariantReport {
            partition: true,
            nesting: true,
            union_of_children: true,
            max_diameter_ratio: 0.0,
            diameter_ok: true,
            inner_ball_violations: 0,
            max_children: 0,
            empty_cubes: 0,
        };
        for k in self.generations() {
            let gen = self.generation(k);
            let mut seen = vec![0usize; n];
            for (a, cube) in gen.cubes.iter().enumerate() {
                for &x in &cube.members {
                    seen[x] += 1;
                    if gen.label[x] != a {
                        rep.partition = false;
                    }
                }
                if cube.members.is_empty() {
                    rep.empty_cubes += 1;
                }
                let ratio = space.set_diameter(&cube.members) / gen.side;
                rep.max_diameter_ratio = rep.max_diameter_ratio.max(ratio);
                let inner = C1 * gen.side;
                if space.row(cube.center).iter().enumerate().any(|(y, d)| *d < inner && gen.label[y] != a) {
                    rep.inner_ball_violations += 1;
                }
                rep.max_children = rep.max_children.max(cube.children.len());
                if k < self.k_max {
                    let finer = self.generation(k + 1);
                    let mut union: Vec<usize> =
                        cube.children.iter().flat_map(|&b| finer.cubes[b].members.iter().copied()).collect();
                    union.sort_unstable();
                    if union != cube.members {
                        rep.union_of_children = false;
                    }
                    for &b in &cube.children {
                        if finer.cubes[b].parent != Some(a) {
                            rep.nesting = false;
                        }
                    }
                }
            }
            if seen.iter().any(|&c| c != 1) {
                rep.partition = false;
            }
            if k < self.k_max {
                let finer = self.generation(k + 1);
                for x in 0..n {
                    if finer.cubes[finer.label[x]].parent != Some(gen.label[x]) {
                        rep.nesting = false;
                    }
                }
            }
        }
        rep.diameter_ok = rep.max_diameter_ratio < C0;
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::build_nets;

    fn four() -> MetricMeasureSpace {
        MetricMeasureSpace::euclidean(1, vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4], None).unwrap()
    }

    #[test]
    fn two_cubes_at_scale_two() {
        let s = four();
        let nets = build_nets(&s, 0.5, -1, 0).unwrap();
        let sys = build_cubes(&s, &nets, None).unwrap();
        let g = sys.generation(-1);
        assert_eq!(g.cubes[0].members, vec![0, 1]);
        assert_eq!(g.cubes[1].members, vec![2, 3]);
        assert!(sys.check_invariants(&s).all_hold());
    }

    #[test]
    fn single_point_chain() {
        let s = MetricMeasureSpace::euclidean(1, vec![0.0], vec![1.0], None).unwrap();
        let nets = build_nets(&s, 0.5, 0, 3).unwrap();
        let sys = build_cubes(&s, &nets, None).unwrap();
        for k in 0..=3 {
            assert_eq!(sys.generation(k).cubes.len(), 1);
            assert_eq!(sys.generation(k).cubes[0].members, vec![0]);
        }
    }

    #[test]
    fn new_centers_checked() {
        let s = four();
        let nets = build_nets(&s, 0.5, -1, 0).unwrap();
        // generation 0 centers must be 1/8 separated: 0 and 0 twice is not
        let bad = vec![vec![0, 2], vec![0, 0, 2, 3]];
        assert!(matches!(build_cubes(&s, &nets, Some(&bad)), Err(DyadicError::SeparationViolated { .. })));
        let ok = vec![vec![1, 2], vec![0, 1, 2, 3]];
        let sys = build_cubes(&s, &nets, Some(&ok)).unwrap();
        assert_eq!(sys.generation(-1).cubes[0].members, vec![0, 1]);
    }

    #[test]
    fn ancestors_and_locate() {
        let s = four();
        let nets = build_nets(&s, 0.5, -2, 0).unwrap();
        let sys = build_cubes(&s, &nets, None).unwrap();
        let leaf = sys.locate(0, 3);
        assert_eq!(sys.ancestor(leaf, -1), sys.locate(-1, 3));
        assert_eq!(sys.ancestor(leaf, -2), CubeId { k: -2, index: 0 });
    }
}
