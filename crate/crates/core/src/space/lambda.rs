//! Dominating functions `lambda(x, r)` for upper doubling measures.

use serde::Serialize;

const FLOOR: f64 = 1e-300;

/// `lambda(x, r)`: positive, non-decreasing and doubling in `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DominatingFunction {
    /// `scale * (r + offset)^exponent`; the offset absorbs the atoms of a quadrature.
    Power { scale: f64, offset: f64, exponent: f64 },
    /// Envelope fitted to ball measures of a point cloud.
    Envelope(Envelope),
    /// Per-point table of `(radius, value)` rows.
    Table(LambdaTable),
}

impl DominatingFunction {
    pub fn eval(&self, x: usize, r: f64) -> f64 {
        match self {
            Self::Power { scale, offset, exponent } => scale * (r.max(0.0) + offset).powf(*exponent),
            Self::Envelope(e) => e.eval(x, r),
            Self::Table(t) => t.eval(x, r),
        }
    }

    /// Doubling constant `C_lambda`.
    pub fn c_lambda(&self) -> f64 {
        match self {
            Self::Power { exponent, .. } => 2f64.powf(*exponent),
            Self::Envelope(e) => e.c_lambda,
            Self::Table(t) => t.c_lambda,
        }
    }

    /// The same function multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Power { scale, offset, exponent } => {
                Self::Power { scale: scale * factor, offset: *offset, exponent: *exponent }
            }
            Self::Envelope(e) => Self::Envelope(Envelope { factor: e.factor * factor, ..e.clone() }),
            Self::Table(t) => Self::Table(LambdaTable { factor: t.factor * factor, ..t.clone() }),
        }
    }
}

/// `lambda(x, r) = factor * max_j m_j * min(1, r / s_j)^D`, where `s_j` runs over the
/// distances from `x` and `m_j` is the mass of the closed ball of radius `s_j`.
///
/// Each term is non-decreasing and satisfies `term(2r) <= 2^D term(r)`, and the term
/// with the largest `s_j < r` already dominates the open ball of radius `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    #[serde(skip)]
    radii: Vec<Vec<f64>>,
    #[serde(skip)]
    masses: Vec<Vec<f64>>,
    pub exponent: f64,
    pub c_lambda: f64,
    pub factor: f64,
}

impl Envelope {
    /// Fits the envelope from a dense distance matrix and masses. `C_lambda` is the
    /// largest observed ratio `mu(B(x,2r)) / mu(B(x,r))` rounded up (at least 2).
    pub fn fit(dist: &[f64], mass: &[f64]) -> Self {
        let n = mass.len();
        let mut radii = Vec::with_capacity(n);
        let mut masses = Vec::with_capacity(n);
        let mut worst: f64 = 2.0;
        for x in 0..n {
            let row = &dist[x * n..(x + 1) * n];
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            let mut rs: Vec<f64> = Vec::new();
            let mut ms: Vec<f64> = Vec::new();
            let mut acc = 0.0;
            for (i, &y) in order.iter().enumerate() {
                acc += mass[y];
                let last = i + 1 == n || row[order[i + 1]] > row[y];
                if last {
                    rs.push(row[y]);
                    ms.push(acc);
                }
            }
            // open ball of radius r has the mass of the closed ball at the largest s < r
            for (j, &s) in rs.iter().enumerate() {
                let r = s.next_up();
                let inner = ms[j];
                if inner <= 0.0 {
                    continue;
                }
                let outer_idx = rs.partition_point(|&v| v < 2.0 * r);
                let outer = if outer_idx == 0 { 0.0 } else { ms[outer_idx - 1] };
                worst = worst.max(outer / inner);
            }
            radii.push(rs);
            masses.push(ms);
        }
        let c_lambda = worst.ceil();
        Self { radii, masses, exponent: c_lambda.log2(), c_lambda, factor: 1.0 }
    }

    pub fn eval(&self, x: usize, r: f64) -> f64 {
        let mut best = FLOOR;
        for (&s, &m) in self.radii[x].iter().zip(&self.masses[x]) {
            let term = if s < r || s == 0.0 { m } else { m * (r / s).powf(self.exponent) };
            best = best.max(term);
        }
        self.factor * best
    }
}

/// Step function through per-point table values: the value at the smallest tabulated
/// radius `>= r`, or the last value beyond the table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaTable {
    #[serde(skip)]
    rows: Vec<Vec<(f64, f64)>>,
    pub c_lambda: f64,
    pub factor: f64,
}

impl LambdaTable {
    /// `rows[x]` lists `(radius, value)` for point `x`. Points without rows get the
    /// global maximum value. Returns `None` if the table is empty or not positive and
    /// non-decreasing.
    pub fn new(mut rows: Vec<Vec<(f64, f64)>>) -> Option<Self> {
        let global = rows.iter().flatten().map(|r| r.1).fold(f64::NAN, f64::max);
        if !(global > 0.0) {
            return None;
        }
        for row in rows.iter_mut() {
            row.sort_by(|a, b| a.0.total_cmp(&b.0));
            if row.iter().any(|r| !(r.1 > 0.0)) || row.windows(2).any(|w| w[1].1 < w[0].1) {
                return None;
            }
            if row.is_empty() {
                row.push((0.0, global));
            }
        }
        let mut t = Self { rows, c_lambda: 1.0, factor: 1.0 };
        let mut worst: f64 = 1.0;
        for x in 0..t.rows.len() {
            let probes: Vec<f64> = t.rows[x]
                .iter()
                .flat_map(|&(s, _)| [s, s.next_up(), s / 2.0, (s / 2.0).next_up()])
                .filter(|r| *r > 0.0)
                .collect();
            for r in probes {
                worst = worst.max(t.eval(x, 2.0 * r) / t.eval(x, r));
            }
        }
        t.c_lambda = worst.ceil().max(2.0);
        Some(t)
    }

    pub fn eval(&self, x: usize, r: f64) -> f64 {
        let row = &self.rows[x];
        let i = row.partition_point(|p| p.0 < r);
        let v = if i < row.len() { row[i].1 } else { row[row.len() - 1].1 };
        self.factor * v
    }
}
