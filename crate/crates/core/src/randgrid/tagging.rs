//! Conflict sets and greedy tagging of reference centers.

use serde::Serialize;

use super::RandGridError;
use crate::dyadic::NetHierarchy;
use crate::space::MetricMeasureSpace;

/// Conflicts and tags per generation `k_min..k_max - 1` (the finest generation has no
/// children and is never re-drawn).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggingPlan {
    k_min: i32,
    conflicts: Vec<Vec<Vec<usize>>>,
    tag_count: usize,
    tags: Vec<Vec<usize>>,
}

impl TaggingPlan {
    /// `I(k, alpha)`, sorted, without `alpha` itself.
    pub fn conflicts(&self, k: i32, alpha: usize) -> &[usize] {
        &self.conflicts[(k - self.k_min) as usize][alpha]
    }

    pub fn largest_conflict_set(&self) -> usize {
        self.conflicts.iter().flatten().map(Vec::len).max().unwrap_or(0)
    }

    /// `L`; zero before tagging.
    pub fn tag_count(&self) -> usize {
        self.tag_count
    }

    /// Tag in `1..=L` of `(k, alpha)`.
    pub fn tag(&self, k: i32, alpha: usize) -> usize {
        self.tags[(k - self.k_min) as usize][alpha]
    }

    pub fn is_tagged(&self) -> bool {
        self.tag_count > 0
    }
}

/// `(k, beta)` conflicts with `(k, alpha)` when some children of the two are closer than
/// `delta^k / 4`.
pub fn conflict_sets(space: &MetricMeasureSpace, nets: &NetHierarchy) -> TaggingPlan {
    let mut conflicts = Vec::new();
    for k in nets.k_min()..nets.k_max() {
        let scale = nets.scale(k);
        let cs = nets.centers(k);
        let fine = nets.centers(k + 1);
        let mut sets = vec![Vec::new(); cs.len()];
        for a in 0..cs.len() {
            for b in (a + 1)..cs.len() {
                // children lie within delta^k of their parents
                if space.dist(cs[a], cs[b]) >= 2.0 * scale + scale / 4.0 {
                    continue;
                }
                let hit = nets.children(k, a).iter().any(|&g| {
                    nets.children(k, b).iter().any(|&s| space.dist(fine[g], fine[s]) < scale / 4.0)
                });
                if hit {
                    sets[a].push(b);
                    sets[b].push(a);
                }
            }
        }
        sets.iter_mut().for_each(|s| s.sort_unstable());
        conflicts.push(sets);
    }
    TaggingPlan { k_min: nets.k_min(), conflicts, tag_count: 0, tags: Vec::new() }
}

/// Greedy tagging in point-id order with the smallest tag unused by already tagged
/// conflicting centers. `tag_count` defaults to the largest conflict set plus one.
pub fn tag_points(plan: &TaggingPlan, tag_count: Option<usize>) -> Result<TaggingPlan, RandGridError> {
    let largest = plan.largest_conflict_set();
    let l = tag_count.unwrap_or(largest + 1);
    if l <= largest {
        return Err(RandGridError::TooFewTags { given: l, largest });
    }
    let mut tags = Vec::with_capacity(plan.conflicts.len());
    for (g, sets) in plan.conflicts.iter().enumerate() {
        let mut t = vec![0usize; sets.len()];
        for a in 0..sets.len() {
            let used: Vec<usize> = sets[a].iter().map(|&b| t[b]).filter(|&v| v > 0).collect();
            t[a] = (1..=l).find(|c| !used.contains(c)).ok_or(RandGridError::TagExhausted {
                k: plan.k_min + g as i32,
                alpha: a,
                tags: l,
            })?;
        }
        tags.push(t);
    }
    Ok(TaggingPlan { tag_count: l, tags, ..plan.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::build_nets;

    #[test]
    fn separated_centers_have_no_conflicts() {
        // far apart clusters of one point each
        let s = MetricMeasureSpace::euclidean(1, vec![0.0, 10.0, 20.0], vec![1.0; 3], None).unwrap();
        let nets = build_nets(&s, 0.5, 0, 2).unwrap();
        let plan = tag_points(&conflict_sets(&s, &nets), None).unwrap();
        assert_eq!(plan.tag_count(), 1);
        for k in 0..2 {
            for a in 0..nets.centers(k).len() {
                assert!(plan.conflicts(k, a).is_empty());
                assert_eq!(plan.tag(k, a), 1);
            }
        }
    }

    #[test]
    fn half_scale_ratio_never_conflicts() {
        // children of distinct parents are delta^(k+1) = delta^k / 2 apart
        let s = crate::space::random_cloud(200, 2, crate::rng::Seed(3)).unwrap();
        let nets = build_nets(&s, 0.5, 0, 4).unwrap();
        assert_eq!(conflict_sets(&s, &nets).largest_conflict_set(), 0);
    }

    #[test]
    fn chain_of_three_gets_three_tags() {
        let plan = TaggingPlan {
            k_min: 0,
            conflicts: vec![vec![vec![1, 2], vec![0, 2], vec![0, 1]]],
            tag_count: 0,
            tags: Vec::new(),
        };
        let tagged = tag_points(&plan, Some(4)).unwrap();
        assert_eq!((0..3).map(|a| tagged.tag(0, a)).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(matches!(tag_points(&plan, Some(2)), Err(RandGridError::TooFewTags { .. })));
    }

    #[test]
    fn shared_close_children_conflict() {
        // centers 0 and 1 at scale 1; children 0.42 and 0.58 are 1/8 separated but
        // closer than 1/4
        let s = MetricMeasureSpace::euclidean(1, vec![0.0, 1.0, 0.42, 0.58], vec![1.0; 4], None).unwrap();
        let nets = build_nets(&s, 0.125, 0, 1).unwrap();
        assert_eq!(nets.centers(0), &[0, 1]);
        let plan = conflict_sets(&s, &nets);
        assert_eq!(plan.conflicts(0, 0), &[1]);
        assert_eq!(plan.conflicts(0, 1), &[0]);
        let tagged = tag_points(&plan, None).unwrap();
        assert_ne!(tagged.tag(0, 0), tagged.tag(0, 1));
    }
}
