//! Geometric goodness of cubes against another grid.

use serde::Serialize;

use crate::dyadic::DyadicSystem;
use crate::space::MetricMeasureSpace;

/// Exponent `alpha / (2 (alpha + d))` of the goodness threshold.
pub fn gamma(alpha: f64, d: f64) -> f64 {
    alpha / (2.0 * (alpha + d))
}

/// `1 - c delta^(r gamma eta)`.
pub fn pi_good(c: f64, delta: f64, r: u32, gamma: f64, eta: f64) -> f64 {
    1.0 - c * delta.powf(r as f64 * gamma * eta)
}

/// Threshold `delta^(gamma k) delta^((1 - gamma)(k - s))`.
pub fn threshold(delta: f64, k: i32, s: i32, gamma: f64) -> f64 {
    delta.powf(gamma * k as f64 + (1.0 - gamma) * (k - s) as f64)
}

/// Centers of every generation with parent links; all that goodness needs of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterTree {
    delta: f64,
    k_min: i32,
    centers: Vec<Vec<usize>>,
    parent: Vec<Vec<usize>>,
}

impl CenterTree {
    pub fn new(delta: f64, k_min: i32, centers: Vec<Vec<usize>>, parent: Vec<Vec<usize>>) -> Self {
        Self { delta, k_min, centers, parent }
    }

    pub fn from_system(system: &DyadicSystem) -> Self {
        let centers = system.generations().map(|k| system.centers(k)).collect();
        let parent = system
            .generations()
            .map(|k| system.generation(k).cubes.iter().filter_map(|c| c.parent).collect())
            .collect();
        Self::new(system.delta(), system.k_min(), centers, parent)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_min + self.centers.len() as i32 - 1
    }

    pub fn centers(&self, k: i32) -> &[usize] {
        &self.centers[(k - self.k_min) as usize]
    }

    /// Mutable access for perturbation experiments.
    pub fn centers_mut(&mut self, k: i32) -> &mut Vec<usize> {
        &mut self.centers[(k - self.k_min) as usize]
    }

    /// Index of the generation-`to` ancestor of center `index` of generation `k`.
    pub fn ancestor(&self, k: i32, mut index: usize, to: i32) -> usize {
        let mut g = (k - self.k_min) as usize;
        let stop = (to - self.k_min) as usize;
        while g > stop {
            index = self.parent[g][index];
            g -= 1;
        }
        index
    }
}

/// Whether a generation-`k` cube centered at `center` is geometrically good against
/// `other`: for every lag `s >= r` with generation `k - s` present, the generation
/// `k - 1` centers of `other` within the threshold of `center` descend from a single
/// generation `k - s` cube.
pub fn classify_geometric(
    space: &MetricMeasureSpace,
    center: usize,
    k: i32,
    other: &CenterTree,
    r: u32,
    gamma: f64,
) -> bool {
    let parent_gen = k - 1;
    if parent_gen > other.k_max() || parent_gen < other.k_min() {
        return true;
    }
    let row = space.row(center);
    let coarse = other.centers(parent_gen);
    let mut near: Vec<(f64, usize)> = Vec::new();
    let s_max = k - other.k_min();
    let tau_max = threshold(other.delta(), k, s_max, gamma);
    for (eta, &y) in coarse.iter().enumerate() {
        if row[y] <= tau_max {
            near.push((row[y], eta));
        }
    }
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for s in (r.max(1) as i32)..=s_max {
        let tau = threshold(other.delta(), k, s, gamma);
        let mut first = None;
        for &(d, eta) in &near {
            if d > tau {
                break;
            }
            let a = other.ancestor(parent_gen, eta, k - s);
            match first {
                None => first = Some(a),
                Some(f) if f != a => return false,
                _ => {}
            }
        }
    }
    true
}

/// Worst case of the separation consequence of goodness for one cube.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationCheck {
    /// Minimum over admissible `R` of `max(d(Q, R), d(Q, X \ R)) / threshold`.
    pub min_ratio: f64,
    pub witness: Option<(i32, usize)>,
    pub admissible: usize,
}

impl SeparationCheck {
    pub fn holds(&self, constant: f64) -> bool {
        self.min_ratio >= constant
    }
}

/// For the cube `(k, index)` of `system` and every cube `R` of `other` with
/// `l(Q) <= delta^r l(R)`, measures `max(d(Q, R), d(Q, X \ R))` against
/// `l(Q)^gamma l(R)^(1 - gamma)`.
pub fn separation_check(
    space: &MetricMeasureSpace,
    system: &DyadicSystem,
    k: i32,
    index: usize,
    other: &DyadicSystem,
    r: u32,
    gamma: f64,
) -> SeparationCheck {
    let q = &system.generation(k).cubes[index].members;
    let mut out = SeparationCheck { min_ratio: f64::INFINITY, witness: None, admissible: 0 };
    let delta = system.delta();
    for m in other.generations().filter(|&m| m <= k - r as i32) {
        let tau = threshold(delta, k, k - m, gamma);
        let gen = other.generation(m);
        for (b, cube) in gen.cubes.iter().enumerate() {
            out.admissible += 1;
            let inside = cube.members.binary_search(&q[0]).is_ok();
            // Q is nested in R or disjoint from it.
            let dist = if inside {
                q.iter()
                    .map(|&x| {
                        let row = space.row(x);
                        (0..space.len())
                            .filter(|&y| gen.label[y] != b)
                            .map(|y| row[y])
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::INFINITY, f64::min)
            } else {
                space.set_distance(q, &cube.members)
            };
            let ratio = dist / tau;
            if ratio < out.min_ratio {
                out.min_ratio = ratio;
                out.witness = Some((m, b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_for_unit_exponent_and_dimension() {
        assert_eq!(gamma(1.0, 1.0), 0.25);
    }

    #[test]
    fn pi_good_arithmetic() {
        let p = pi_good(1.0, 0.5, 2, 0.25, 1.0);
        assert!((p - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
        assert!((p - 0.2929).abs() < 1e-4);
    }

    fn two_cells() -> (MetricMeasureSpace, CenterTree) {
        // Coarse cells around 0 and 1; generation-1 centers at 0.45 and 0.55.
        let coords = vec![0.0, 0.45, 0.5, 0.55, 1.0];
        let s = MetricMeasureSpace::euclidean(1, coords, vec![1.0; 5], None).unwrap();
        let tree = CenterTree::new(0.5, 0, vec![vec![0, 4], vec![1, 3]], vec![vec![], vec![0, 1]]);
        (s, tree)
    }

    #[test]
    fn single_cube_other_grid_is_always_good() {
        let s = MetricMeasureSpace::euclidean(1, vec![0.0, 0.3, 0.6], vec![1.0; 3], None).unwrap();
        let tree = CenterTree::new(0.5, 0, vec![vec![0], vec![0]], vec![vec![], vec![0]]);
        for x in 0..3 {
            assert!(classify_geometric(&s, x, 2, &tree, 1, 0.25));
        }
    }

    #[test]
    fn center_near_coarse_boundary_is_bad() {
        let (s, tree) = two_cells();
        // Generation 2, lag 2: threshold 0.5^(0.5 + 0) = 0.707 reaches both centers.
        assert!(!classify_geometric(&s, 2, 2, &tree, 2, 0.25));
        // Far from the boundary with a tight exponent only one center is in reach.
        assert!(classify_geometric(&s, 0, 2, &tree, 2, 0.9));
    }

    #[test]
    fn lag_beyond_available_generations_is_vacuous() {
        let (s, tree) = two_cells();
        assert!(classify_geometric(&s, 2, 2, &tree, 3, 0.25));
    }

    #[test]
    fn ancestor_walks_parent_links() {
        let tree = CenterTree::new(0.5, -1, vec![vec![0], vec![0, 1], vec![0, 1, 2]], vec![vec![], vec![0, 0], vec![1, 0, 1]]);
        assert_eq!(tree.ancestor(1, 2, 0), 1);
        assert_eq!(tree.ancestor(1, 2, -1), 0);
        assert_eq!(tree.k_max(), 1);
    }
}
