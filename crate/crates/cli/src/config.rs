use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use nhdyadic::operator::{KernelOperator, StandardKernel, DEFAULT_SEPARATION};
use nhdyadic::space::{grid2d, heisenberg_space, line, load_point_cloud, CloudOptions, HeisenbergGrid, MetricMeasureSpace, TestFunction};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Line { n: usize, length: f64 },
    Grid2d { side: usize, h: f64 },
    Heisenberg { n: usize, per_axis: usize, xi_half: f64, t_half: f64 },
    File { path: PathBuf, distances: Option<PathBuf>, lambda: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Zero,
    Cauchy1d,
    CauchySzego { n: usize },
    /// Dense matrix, binary (`.bin`) or CSV.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { re: f64, im: f64 },
    /// CSV with header `re,im`, one row per point.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    /// Finest generation of decompositions; `k_max` when absent.
    pub k0: Option<i32>,
    /// Coarsest generation of decompositions; `k_min` when absent.
    pub m: Option<i32>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { delta: 0.5, k_min: 0, k_max: 6, k0: None, m: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomConfig {
    /// Tag count `L`; the smallest admissible one when absent.
    pub tags: Option<usize>,
    pub r: u32,
    pub r_list: Vec<u32>,
    pub eps: Vec<f64>,
    pub trials: u64,
    pub pi_trials: u64,
    pub seed: Option<u64>,
    /// Generation of the boundary and badness estimates; the middle one when absent.
    pub k: Option<i32>,
    /// Generations of the goodness and collapse checks; `[k_max - 3, k_max - 1]`
    /// (clamped to `k_min`) when absent.
    pub gens: Option<[i32; 2]>,
    pub checks: Vec<String>,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self {
            tags: None,
            r: 4,
            r_list: vec![1, 2, 3],
            eps: vec![0.2, 0.1, 0.05, 0.025],
            trials: 1000,
            pi_trials: 20_000,
            seed: None,
            k: None,
            gens: None,
            checks: vec!["boundary".into(), "bad".into(), "uniform".into(), "collapse".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TbConfig {
    pub p: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub eps: f64,
    pub upsilon: f64,
    pub alpha: f64,
    pub sep_c: f64,
    pub ball_centers: usize,
    pub ball_levels: usize,
    pub rbmo_centers: usize,
    pub rbmo_levels: usize,
    pub probes: usize,
    pub cz_samples: usize,
}

impl Default for TbConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            kappa: 2.0,
            lambda: 2.0,
            eps: 0.1,
            upsilon: 0.2,
            alpha: 1.0,
            sep_c: DEFAULT_SEPARATION,
            ball_centers: 64,
            ball_levels: 5,
            rbmo_centers: 16,
            rbmo_levels: 4,
            probes: 1000,
            cz_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceSpec,
    pub grid: GridConfig,
    pub random: RandomConfig,
    pub kernel: KernelSpec,
    pub b1: FunctionSpec,
    pub b2: FunctionSpec,
    pub tb: TbConfig,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            space: SpaceSpec::Line { n: 128, length: 1.0 },
            grid: GridConfig::default(),
            random: RandomConfig::default(),
            kernel: KernelSpec::Cauchy1d,
            b1: FunctionSpec::Constant { re: 1.0, im: 0.0 },
            b2: FunctionSpec::Constant { re: 1.0, im: 0.0 },
            tb: TbConfig::default(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let g = &self.grid;
        if !(g.delta > 0.0 && g.delta <= 0.5) {
            return bad(format!("delta must lie in (0, 1/2], got {}", g.delta));
        }
        if g.k_min > g.k_max {
            return bad(format!("k_min {} exceeds k_max {}", g.k_min, g.k_max));
        }
        let (m, k0) = self.window();
        if !(g.k_min <= m && m < k0 && k0 <= g.k_max) {
            return bad(format!("need k_min <= m < k0 <= k_max, got m = {m}, k0 = {k0}"));
        }
        let r = &self.random;
        if r.r < 1 || r.r_list.iter().any(|&v| v < 1) {
            return bad("r must be at least 1".into());
        }
        if r.trials < 1 || r.pi_trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if r.eps.iter().any(|&e| !(e > 0.0)) {
            return bad("eps values must be positive".into());
        }
        if let Some([a, b]) = r.gens {
            if a > b || a < g.k_min || b > g.k_max {
                return bad(format!("gens [{a}, {b}] outside [{}, {}]", g.k_min, g.k_max));
            }
        }
        if let Some(k) = r.k {
            if k < g.k_min || k > g.k_max {
                return bad(format!("k = {k} outside [{}, {}]", g.k_min, g.k_max));
            }
        }
        for c in &r.checks {
            if !["boundary", "bad", "uniform", "collapse"].contains(&c.as_str()) {
                return bad(format!("unknown check {c:?}"));
            }
        }
        let t = &self.tb;
        if !(t.p > 1.0 && t.p.is_finite()) {
            return bad(format!("p must lie in (1, inf), got {}", t.p));
        }
        if !(t.kappa > 1.0 && t.lambda > 1.0) {
            return bad(format!("kappa and Lambda must exceed 1, got {} and {}", t.kappa, t.lambda));
        }
        if !(t.eps > 0.0 && t.upsilon > 0.0 && t.alpha > 0.0 && t.sep_c > 0.0) {
            return bad("eps, upsilon, alpha and sep_c must be positive".into());
        }
        Ok(())
    }

    /// `(m, k0)` of decompositions.
    pub fn window(&self) -> (i32, i32) {
        (self.grid.m.unwrap_or(self.grid.k_min), self.grid.k0.unwrap_or(self.grid.k_max))
    }

    pub fn gens(&self) -> std::ops::RangeInclusive<i32> {
        let (lo, hi) = (self.grid.k_min, self.grid.k_max);
        let [a, b] = self.random.gens.unwrap_or([(hi - 3).max(lo), (hi - 1).max(lo)]);
        a..=b
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.random.seed.ok_or_else(|| CliError::Config("this subcommand is randomized and needs --seed".into()))
    }

    pub fn build_space(&self) -> Result<MetricMeasureSpace, CliError> {
        let space = match &self.space {
            SpaceSpec::Line { n, length } => line(*n, *length),
            SpaceSpec::Grid2d { side, h } => grid2d(*side, *h),
            SpaceSpec::Heisenberg { n, per_axis, xi_half, t_half } => {
                heisenberg_space(HeisenbergGrid { n: *n, per_axis: *per_axis, xi_half: *xi_half, t_half: *t_half })
            }
            SpaceSpec::File { path, distances, lambda } => load_point_cloud(
                path,
                &CloudOptions { distance_matrix: distances.clone(), lambda_table: lambda.clone() },
            ),
        };
        space.map_err(|e| CliError::Config(format!("space: {e}")))
    }

    pub fn kernel(&self) -> Option<StandardKernel> {
        let k = match &self.kernel {
            KernelSpec::Zero => StandardKernel::zero(),
            KernelSpec::Cauchy1d => StandardKernel::cauchy1d(),
            KernelSpec::CauchySzego { n } => StandardKernel::cauchy_szego(*n),
            KernelSpec::File { .. } => return None,
        };
        Some(k.with_alpha(self.tb.alpha).with_separation(self.tb.sep_c))
    }

    pub fn build_operator(&self, space: &MetricMeasureSpace) -> Result<KernelOperator, CliError> {
        let op = match (&self.kernel, self.kernel()) {
            (_, Some(k)) => KernelOperator::assemble(space, k),
            (KernelSpec::File { path }, None) => {
                let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if path.extension().is_some_and(|e| e == "bin") {
                    KernelOperator::read_binary(space, std::io::BufReader::new(file))
                } else {
                    KernelOperator::read_csv(space, file)
                }
            }
            _ => unreachable!("builtin kernels always resolve"),
        };
        op.map_err(|e| CliError::Config(format!("kernel: {e}")))
    }

    pub fn build_b(&self, spec: &FunctionSpec, n: usize) -> Result<TestFunction, CliError> {
        let values = match spec {
            FunctionSpec::Constant { re, im } => vec![Complex64::new(*re, *im); n],
            FunctionSpec::File { path } => read_function(path)?,
        };
        if values.len() != n {
            return Err(CliError::Config(format!("test function has {} values for {n} points", values.len())));
        }
        TestFunction::strict(values).map_err(|e| CliError::Config(format!("test function: {e}")))
    }
}

fn read_function(path: &Path) -> Result<Vec<Complex64>, CliError> {
    #[derive(Deserialize)]
    struct Row {
        re: f64,
        im: f64,
    }
    let err = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(err)?;
    rdr.deserialize::<Row>().map(|r| r.map(|r| Complex64::new(r.re, r.im)).map_err(err)).collect()
}

/// Values given on the command line; each replaces the file value when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub delta: Option<f64>,
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    pub trials: Option<u64>,
    pub r: Option<u32>,
    pub eps: Option<Vec<f64>>,
    pub p: Option<f64>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.random.seed = Some(v);
        }
        if let Some(v) = self.out {
            cfg.out = Some(v);
        }
        if let Some(v) = self.delta {
            cfg.grid.delta = v;
        }
        if let Some(v) = self.k_min {
            cfg.grid.k_min = v;
        }
        if let Some(v) = self.k_max {
            cfg.grid.k_max = v;
        }
        if let Some(v) = self.trials {
            cfg.random.trials = v;
        }
        if let Some(v) = self.r {
            cfg.random.r = v;
        }
        if let Some(v) = self.eps {
            cfg.random.eps = v;
        }
        if let Some(v) = self.p {
            cfg.tb.p = v;
        }
    }
}
