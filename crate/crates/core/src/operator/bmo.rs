//! BMO, RBMO and weak boundedness estimators over finite ball families.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::elements::PairingContext;
use super::OperatorError;
use crate::space::MetricMeasureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

impl Ball {
    pub fn dilate(self, factor: f64) -> Self {
        Self { center: self.center, radius: self.radius * factor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
}

impl BallFamily {
    /// Every pair of a center and a radius.
    pub fn grid(centers: &[usize], radii: &[f64]) -> Self {
        let balls = centers.iter().flat_map(|&center| radii.iter().map(move |&radius| Ball { center, radius })).collect();
        Self { balls }
    }

    /// Balls at every point with radii `diam * 2^(-j)`, `j < levels`.
    pub fn dyadic(space: &MetricMeasureSpace, levels: usize) -> Self {
        let centers: Vec<usize> = (0..space.len()).collect();
        Self::grid(&centers, &dyadic_radii(space, levels))
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

pub fn dyadic_radii(space: &MetricMeasureSpace, levels: usize) -> Vec<f64> {
    let diam = space.diameter();
    (0..levels).map(|j| diam * 0.5f64.powi(j as i32)).collect()
}

fn is_real(values: &[Complex64]) -> bool {
    values.iter().all(|v| v.im == 0.0)
}

/// `sum |f - c|^p mu` over a set.
fn deviation(vals: &[(Complex64, f64)], c: Complex64, p: f64) -> f64 {
    vals.iter().map(|(v, m)| (v - c).norm().powf(p) * m).sum()
}

fn weighted_median(vals: &[(Complex64, f64)]) -> f64 {
    let mut sorted: Vec<(f64, f64)> = vals.iter().map(|(v, m)| (v.re, *m)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = sorted.iter().map(|e| e.1).sum::<f64>() / 2.0;
    let mut acc = 0.0;
    for (v, m) in &sorted {
        acc += m;
        if acc >= half {
            return *v;
        }
    }
    sorted.last().map_or(0.0, |e| e.0)
}

fn ternary(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..100 {
        if hi - lo <= 1e-13 * (hi.abs() + lo.abs()).max(1e-300) {
            break;
        }
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// Weighted geometric median by Weiszfeld's iteration from the weighted mean.
fn geometric_median(vals: &[(Complex64, f64)], total: f64) -> Complex64 {
    let mut z = vals.iter().map(|(v, m)| v * m).sum::<Complex64>() / total;
    let scale = vals.iter().map(|(v, _)| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for _ in 0..2000 {
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for (v, m) in vals {
            let d = (v - z).norm();
            if d > 1e-14 * scale && *m > 0.0 {
                num += v * (m / d);
                den += m / d;
            }
        }
        if den == 0.0 {
            break;
        }
        let next = num / den;
        let step = (next - z).norm();
        z = next;
        if step <= 1e-14 * scale {
            break;
        }
    }
    z
}

/// Minimizer of a convex function of a complex argument over a box, by nested
/// ternary search; with `real` the imaginary part is held at zero.
fn convex_argmin(re: (f64, f64), im: (f64, f64), real: bool, f: impl Fn(Complex64) -> f64) -> Complex64 {
    if real {
        return Complex64::new(ternary(re.0, re.1, |x| f(Complex64::new(x, 0.0))), 0.0);
    }
    let inner = |x: f64| ternary(im.0, im.1, |y| f(Complex64::new(x, y)));
    let x = ternary(re.0, re.1, |x| f(Complex64::new(x, inner(x))));
    Complex64::new(x, inner(x))
}

fn bounds(vals: &[(Complex64, f64)]) -> ((f64, f64), (f64, f64)) {
    let fold = |g: fn(&Complex64) -> f64| {
        vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(g(v)), hi.max(g(v))))
    };
    (fold(|v| v.re), fold(|v| v.im))
}

/// The constant `c` minimizing `sum |f - c|^p mu` and the minimum. Means for `p = 2`,
/// weighted medians for real data with `p = 1`, geometric medians for complex data
/// with `p = 1`, otherwise a convex search; the last two are refined against every
/// sample value.
pub fn best_constant(vals: &[(Complex64, f64)], p: f64) -> (Complex64, f64) {
    let total: f64 = vals.iter().map(|e| e.1).sum();
    if vals.is_empty() || total <= 0.0 {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let real = vals.iter().all(|(v, _)| v.im == 0.0);
    let mut best = if p == 2.0 {
        vals.iter().map(|(v, m)| v * m).sum::<Complex64>() / total
    } else if real && p == 1.0 {
        Complex64::new(weighted_median(vals), 0.0)
    } else if p == 1.0 {
        geometric_median(vals, total)
    } else {
        let (re, im) = bounds(vals);
        convex_argmin(re, im, real, |c| deviation(vals, c, p))
    };
    let mut value = deviation(vals, best, p);
    if p != 2.0 && !(real && p == 1.0) {
        for (v, _) in vals {
            let d = deviation(vals, *v, p);
            if d < value {
                value = d;
                best = *v;
            }
        }
    }
    (best, value)
}

fn ball_values(space: &MetricMeasureSpace, f: &[Complex64], ball: Ball) -> Vec<(Complex64, f64)> {
    space.row(ball.center).iter().enumerate().filter(|(_, d)| **d < ball.radius).map(|(y, _)| (f[y], space.mass(y))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoEstimate {
    pub norm: f64,
    pub witness: Option<Ball>,
    pub balls: usize,
}

/// `max_B (min_c integral_B |f - c|^p)^(1/p) / mu(kappa B)^(1/p)` over balls with
/// `mu(kappa B) > 0`.
pub fn bmo_norm(
    space: &MetricMeasureSpace,
    f: &[Complex64],
    p: f64,
    kappa: f64,
    family: &BallFamily,
) -> Result<BmoEstimate, OperatorError> {
    if family.is_empty() {
        return Err(OperatorError::EmptyBallFamily);
    }
    let per_ball: Vec<(f64, Ball)> = family
        .balls
        .par_iter()
        .filter_map(|&ball| {
            let outer = space.ball_measure(ball.center, kappa * ball.radius);
            if outer <= 0.0 {
                return None;
            }
            let vals = ball_values(space, f, ball);
            let (_, dev) = best_constant(&vals, p);
            Some(((dev / outer).powf(1.0 / p), ball))
        })
        .collect();
    let mut out = BmoEstimate { norm: 0.0, witness: None, balls: per_ball.len() };
    for (v, ball) in per_ball {
        if v > out.norm || out.witness.is_none() {
            out.norm = v;
            out.witness = Some(ball);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbmoEstimate {
    pub norm: f64,
    /// Certificate constants `f_B`, one per ball of the family.
    pub constants: Vec<Complex64>,
    pub pairs: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// `1 + integral_(2 B_1 \ B) 1 / lambda(c_B, rho(x, c_B)) dmu(x)`.
fn pair_weight(space: &MetricMeasureSpace, inner: Ball, outer: Ball) -> f64 {
    let row_inner = space.row(inner.center);
    let row_outer = space.row(outer.center);
    let mut w = 1.0;
    for x in 0..space.len() {
        if row_outer[x] < 2.0 * outer.radius && row_inner[x] >= inner.radius {
            w += space.mass(x) / space.lambda_at(inner.center, row_inner[x]);
        }
    }
    w
}

struct RbmoProblem {
    vals: Vec<Vec<(Complex64, f64)>>,
    /// `mu(varrho B)`.
    outer: Vec<f64>,
    /// `(i, j, w)` with `B_i` inside `B_j`.
    pairs: Vec<(usize, usize, f64)>,
}

impl RbmoProblem {
    fn oscillation(&self, i: usize, c: Complex64) -> f64 {
        let d = deviation(&self.vals[i], c, 1.0);
        if d == 0.0 {
            0.0
        } else {
            d / self.outer[i]
        }
    }

    fn objective(&self, c: &[Complex64]) -> f64 {
        let osc = (0..c.len()).map(|i| self.oscillation(i, c[i])).fold(0.0, f64::max);
        self.pairs.iter().map(|&(i, j, w)| (c[i] - c[j]).norm() / w).fold(osc, f64::max)
    }
}

/// Smallest `L` with constants `f_B` satisfying both RBMO conditions on the family.
///
/// Real data: bisection on `L` with an exact feasibility test (interval bounds from
/// the oscillation condition and difference constraints solved by Bellman-Ford).
/// Complex data: block coordinate descent from the medians. At most 100 iterations,
/// stopping when `L` moves by less than `1e-8` relative.
pub fn rbmo_norm(
    space: &MetricMeasureSpace,
    f: &[Complex64],
    varrho: f64,
    family: &BallFamily,
) -> Result<RbmoEstimate, OperatorError> {
    if family.is_empty() {
        return Err(OperatorError::EmptyBallFamily);
    }
    let balls = &family.balls;
    let members: Vec<Vec<usize>> = balls.iter().map(|b| space.ball_members(b.center, b.radius)).collect();
    let vals: Vec<Vec<(Complex64, f64)>> = balls.iter().map(|&b| ball_values(space, f, b)).collect();
    let outer: Vec<f64> = balls.iter().map(|b| space.ball_measure(b.center, varrho * b.radius)).collect();
    let mut pairs = Vec::new();
    for i in 0..balls.len() {
        for j in 0..balls.len() {
            if i != j && is_subset(&members[i], &members[j]) {
                pairs.push((i, j, pair_weight(space, balls[i], balls[j])));
            }
        }
    }
    let problem = RbmoProblem { vals, outer, pairs };
    let start: Vec<Complex64> = problem.vals.iter().map(|v| best_constant(v, 1.0).0).collect();
    if is_real(f) {
        Ok(rbmo_real(&problem, start))
    } else {
        Ok(rbmo_descent(&problem, start))
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

const RBMO_ITERATIONS: usize = 100;
const RBMO_TOLERANCE: f64 = 1e-8;

fn rbmo_descent(problem: &RbmoProblem, mut c: Vec<Complex64>) -> RbmoEstimate {
    let n = c.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, w) in &problem.pairs {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    let mut current = problem.objective(&c);
    let mut iterations = 0;
    let mut converged = current == 0.0;
    while !converged && iterations < RBMO_ITERATIONS {
        iterations += 1;
        for i in 0..n {
            let mut pts: Vec<(Complex64, f64)> = problem.vals[i].clone();
            pts.extend(adj[i].iter().map(|&(j, _)| (c[j], 0.0)));
            if pts.is_empty() {
                continue;
            }
            let (re, im) = bounds(&pts);
            let local = |z: Complex64| {
                adj[i].iter().map(|&(j, w)| (z - c[j]).norm() / w).fold(problem.oscillation(i, z), f64::max)
            };
            let z = convex_argmin(re, im, false, local);
            if local(z) < local(c[i]) {
                c[i] = z;
            }
        }
        let next = problem.objective(&c);
        converged = current - next <= RBMO_TOLERANCE * current;
        current = next;
    }
    RbmoEstimate { norm: current, constants: c, pairs: problem.pairs.len(), iterations, converged }
}

/// Interval of `c` with `sum |f - c| mu <= budget`, or `None` when empty.
fn feasible_interval(vals: &[(Complex64, f64)], budget: f64) -> Option<(f64, f64)> {
    let total: f64 = vals.iter().map(|e| e.1).sum();
    if total <= 0.0 {
        return Some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let med = weighted_median(vals);
    let dev = |c: f64| deviation(vals, Complex64::new(c, 0.0), 1.0);
    if dev(med) > budget {
        return None;
    }
    // dev(c) >= total |c - mean|, so the interval lies within mean +- budget / total.
    let mean = vals.iter().map(|(v, m)| v.re * m).sum::<f64>() / total;
    let reach = budget / total;
    let edge = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if dev(mid) <= budget {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lo_out = (mean - reach).min(med) - 1e-12 * (1.0 + mean.abs());
    let hi_out = (mean + reach).max(med) + 1e-12 * (1.0 + mean.abs());
    Some((edge(med, lo_out), edge(med, hi_out)))
}

/// Feasible constants for a given `L`, by Bellman-Ford on the difference constraints.
fn feasible_constants(problem: &RbmoProblem, l: f64) -> Option<Vec<f64>> {
    let n = problem.vals.len();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let source = n;
    for i in 0..n {
        let (lo, hi) = feasible_interval(&problem.vals[i], l * problem.outer[i])?;
        if hi.is_finite() {
            edges.push((source, i, hi));
        }
        if lo.is_finite() {
            edges.push((i, source, -lo));
        }
    }
    for &(i, j, w) in &problem.pairs {
        edges.push((j, i, l * w));
        edges.push((i, j, l * w));
    }
    let mut dist = vec![0.0; n + 1];
    for round in 0..=n + 1 {
        let mut changed = false;
        for &(u, v, w) in &edges {
            let cand = dist[u] + w;
            if cand < dist[v] - 1e-12 * (1.0 + cand.abs()) {
                dist[v] = cand;
                changed = true;
            }
        }
        if !changed {
            return Some((0..n).map(|i| dist[i] - dist[source]).collect());
        }
        if round == n + 1 {
            return None;
        }
    }
    None
}

fn rbmo_real(problem: &RbmoProblem, start: Vec<Complex64>) -> RbmoEstimate {
    let mut best_c = start;
    let mut best = problem.objective(&best_c);
    let (mut lo, mut hi) = (0.0, best);
    let mut iterations = 0;
    while iterations < RBMO_ITERATIONS && hi - lo > RBMO_TOLERANCE * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match feasible_constants(problem, mid) {
            Some(c) => {
                hi = mid;
                let c: Vec<Complex64> = c.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
                let score = problem.objective(&c);
                if score < best {
                    best = score;
                    best_c = c;
                }
            }
            None => lo = mid,
        }
    }
    let converged = hi - lo <= RBMO_TOLERANCE * hi;
    RbmoEstimate { norm: best, constants: best_c, pairs: problem.pairs.len(), iterations, converged }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WbpEstimate {
    pub constant: f64,
    pub witness: Option<Ball>,
    /// Balls with `mu(Lambda B) = 0`.
    pub skipped: usize,
}

/// `max_B |<b_2 chi_B, T(b_1 chi_B)>| / mu(Lambda B)`.
pub fn wbp_constant(ctx: &PairingContext<'_>, lambda: f64, family: &BallFamily) -> WbpEstimate {
    let space = ctx.space;
    let per_ball: Vec<Option<(f64, Ball)>> = family
        .balls
        .par_iter()
        .map(|&ball| {
            let outer = space.ball_measure(ball.center, lambda * ball.radius);
            if outer <= 0.0 {
                return None;
            }
            let set = space.ball_members(ball.center, ball.radius);
            Some((ctx.set_pairing(&set, &set).norm() / outer, ball))
        })
        .collect();
    let mut out = WbpEstimate { constant: 0.0, witness: None, skipped: 0 };
    for entry in per_ball {
        match entry {
            None => out.skipped += 1,
            Some((v, ball)) => {
                if v > out.constant || out.witness.is_none() {
                    out.constant = v;
                    out.witness = Some(ball);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{KernelOperator, StandardKernel};
    use crate::space::{line, TestFunction};

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn constants_have_zero_norms() {
        let s = line(24, 1.0).unwrap();
        let f = vec![Complex64::new(2.0, -1.0); 24];
        let fam = BallFamily::dyadic(&s, 4);
        assert_eq!(bmo_norm(&s, &f, 1.0, 2.0, &fam).unwrap().norm, 0.0);
        assert_eq!(bmo_norm(&s, &f, 2.0, 2.0, &fam).unwrap().norm, 0.0);
        let r = rbmo_norm(&s, &f, 2.0, &fam).unwrap();
        assert_eq!(r.norm, 0.0);
        assert!(r.constants.iter().all(|c| *c == Complex64::new(2.0, -1.0)));
        let fr = vec![Complex64::new(3.0, 0.0); 24];
        assert_eq!(rbmo_norm(&s, &fr, 2.0, &fam).unwrap().norm, 0.0);
    }

    #[test]
    fn median_and_mean_minimizers() {
        let vals = vec![(Complex64::new(0.0, 0.0), 1.0), (Complex64::new(1.0, 0.0), 1.0), (Complex64::new(5.0, 0.0), 1.5)];
        let (c, d) = best_constant(&vals, 1.0);
        assert_eq!(c.re, 1.0);
        assert_eq!(d, 1.0 + 6.0);
        let (c2, _) = best_constant(&vals, 2.0);
        assert!((c2.re - 8.5 / 3.5).abs() < 1e-15);
    }

    #[test]
    fn general_exponent_matches_brute_force() {
        let vals: Vec<(Complex64, f64)> = [0.0, 0.2, 0.9, 1.0, 3.0].iter().map(|&v| (Complex64::new(v, 0.0), 0.3)).collect();
        let (_, d) = best_constant(&vals, 1.5);
        let brute = (0..=30000).map(|i| deviation(&vals, Complex64::new(i as f64 * 1e-4, 0.0), 1.5)).fold(f64::INFINITY, f64::min);
        assert!(d <= brute + 1e-12 && brute - d < 1e-6);
    }

    #[test]
    fn complex_p1_uses_geometric_median() {
        // Three equal weights at the vertices of a triangle with all angles < 120 degrees.
        let vals = vec![
            (Complex64::new(0.0, 0.0), 1.0),
            (Complex64::new(1.0, 0.0), 1.0),
            (Complex64::new(0.5, 0.8), 1.0),
        ];
        let (c, d) = best_constant(&vals, 1.0);
        let mut brute = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                brute = brute.min(deviation(&vals, Complex64::new(i as f64 / 400.0, j as f64 / 500.0), 1.0));
            }
        }
        assert!(d <= brute + 1e-9, "{c} {d} {brute}");
    }

    #[test]
    fn half_line_indicator() {
        let s = line(16, 1.0).unwrap();
        let f = real(&(0..16).map(|i| if i < 8 { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        let fam = BallFamily::grid(&[7], &[0.2]);
        let est = bmo_norm(&s, &f, 1.0, 2.0, &fam).unwrap();
        // Ball of radius 0.2 around 0.46875 holds 3 + 3 points; best constant leaves mass 3h.
        let h = 1.0 / 16.0;
        let inner = s.ball_measure(7, 0.4);
        assert!((est.norm - 3.0 * h / inner).abs() < 1e-15);
    }

    #[test]
    fn rbmo_matches_brute_force_on_three_balls() {
        let s = line(20, 1.0).unwrap();
        let f = real(&(0..20).map(|i| ((i as f64 + 0.5) / 20.0 - 0.43).abs().ln()).collect::<Vec<_>>());
        let fam = BallFamily { balls: vec![Ball { center: 8, radius: 0.08 }, Ball { center: 8, radius: 0.3 }, Ball { center: 12, radius: 0.5 }] };
        let est = rbmo_norm(&s, &f, 2.0, &fam).unwrap();
        assert!(est.converged);
        let members: Vec<Vec<usize>> = fam.balls.iter().map(|b| s.ball_members(b.center, b.radius)).collect();
        let vals: Vec<Vec<(Complex64, f64)>> = fam.balls.iter().map(|&b| ball_values(&s, &f, b)).collect();
        let outer: Vec<f64> = fam.balls.iter().map(|b| s.ball_measure(b.center, 2.0 * b.radius)).collect();
        let mut pairs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j && is_subset(&members[i], &members[j]) {
                    pairs.push((i, j, pair_weight(&s, fam.balls[i], fam.balls[j])));
                }
            }
        }
        assert!(!pairs.is_empty());
        let problem = RbmoProblem { vals, outer, pairs };
        let grid: Vec<f64> = (0..=120).map(|i| -4.0 + i as f64 * 0.035).collect();
        let mut brute = f64::INFINITY;
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    brute = brute.min(problem.objective(&real(&[a, b, c])));
                }
            }
        }
        assert!(est.norm <= brute + 1e-12);
        assert!(brute - est.norm < 0.05 * brute, "{} vs {}", est.norm, brute);
    }

    #[test]
    fn wbp_of_zero_and_identity() {
        let s = line(12, 1.0).unwrap();
        let one = TestFunction::constant(12, Complex64::new(1.0, 0.0)).unwrap();
        let fam = BallFamily::dyadic(&s, 4);
        let zero = KernelOperator::zero(&s);
        assert_eq!(wbp_constant(&PairingContext::new(&s, &zero, &one, &one), 2.0, &fam).constant, 0.0);
        let id = KernelOperator::identity(&s);
        let a = wbp_constant(&PairingContext::new(&s, &id, &one, &one), 2.0, &fam).constant;
        assert!(a <= 1.0 + 1e-12 && a > 0.0);
        let k = KernelOperator::assemble(&s, StandardKernel::cauchy1d()).unwrap();
        assert!(wbp_constant(&PairingContext::new(&s, &k, &one, &one), 2.0, &fam).constant.is_finite());
    }
}
