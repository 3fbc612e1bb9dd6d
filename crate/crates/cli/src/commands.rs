use num_complex::Complex64;
use serde_json::{json, Value};

use nhdyadic::dyadic::{build_cubes, build_nets, regularized_radius, DyadicSystem, NetHierarchy};
use nhdyadic::martingale::{adapted_expectation, decompose, haar, lipschitz_truncation_error, reconstruct, VectorField};
use nhdyadic::operator::{
    adjacent_split, annulus_integral_check, corrected_element_check, cz_constants, dyadic_radii, separated_decay_check,
    tb_report, BallFamily, DecayParams, HaarGrid, KernelOperator, OperatorError, PairingContext, ParaproductSetup,
    SplitParams, TbFamilies, TbParams,
};
use nhdyadic::randgrid::{
    check_collapse_identity, conflict_sets, estimate_bad_probability, estimate_boundary_probability, gamma, tag_points,
    verify_uniform_goodness, CollapseInputs, Randomizer,
};
use nhdyadic::rng::Seed;
use nhdyadic::space::{MetricMeasureSpace, TestFunction};

use crate::config::ExperimentConfig;
use crate::error::{run_err, CliError};

pub const RESIDUAL_TOL: f64 = 1e-10;

/// Results of one subcommand, before the provenance envelope.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    /// Witnesses of failed hard assertions.
    pub failures: Vec<Value>,
    /// Extra files `(name, contents)` written next to the report.
    pub artifacts: Vec<(String, String)>,
}

struct Setup {
    space: MetricMeasureSpace,
    nets: NetHierarchy,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, CliError> {
    let space = cfg.build_space()?;
    let nets = build_nets(&space, cfg.grid.delta, cfg.grid.k_min, cfg.grid.k_max).map_err(|e| CliError::Config(format!("nets: {e}")))?;
    Ok(Setup { space, nets })
}

fn randomizer<'a>(cfg: &ExperimentConfig, s: &'a Setup) -> Result<Randomizer<'a>, CliError> {
    let plan = tag_points(&conflict_sets(&s.space, &s.nets), cfg.random.tags).map_err(|e| CliError::Config(e.to_string()))?;
    Randomizer::new(&s.space, &s.nets, plan).map_err(run_err)
}

/// Two independent random systems `(D, D')` drawn from `seed`.
fn grid_pair(rz: &Randomizer<'_>, seed: Seed) -> Result<(DyadicSystem, DyadicSystem), CliError> {
    let d = rz.system(&rz.sample(seed, 0).map_err(run_err)?);
    let dp = rz.system(&rz.sample(seed, 1).map_err(run_err)?);
    Ok((d, dp))
}

/// Smooth probe functions `sin(6 t)` and `cos(4 t) + i sin(3 t)`, `t = x / n`.
fn probes(n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let t = |i: usize| i as f64 / n as f64;
    let f = (0..n).map(|i| Complex64::new((6.0 * t(i)).sin(), 0.0)).collect();
    let g = (0..n).map(|i| Complex64::new((4.0 * t(i)).cos(), (3.0 * t(i)).sin())).collect();
    (f, g)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn build_grid(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let system = match cfg.random.seed {
        Some(seed) => {
            let rz = randomizer(cfg, &s)?;
            rz.system(&rz.sample(Seed(seed), 0).map_err(run_err)?)
        }
        None => build_cubes(&s.space, &s.nets, None).map_err(run_err)?,
    };
    let inv = system.check_invariants(&s.space);
    let mut out = Outcome::default();
    let structural = inv.partition && inv.nesting && inv.union_of_children && inv.diameter_ok;
    let holds = if cfg.random.seed.is_some() { structural } else { inv.all_hold() };
    if !holds {
        out.failures.push(json!({ "check": "invariants", "report": inv }));
    }
    let export = serde_json::to_string_pretty(&system).expect("systems serialize");
    out.results = json!({
        "points": s.space.len(),
        "randomized": cfg.random.seed.is_some(),
        "cubes_per_generation": system.generations().map(|k| system.generation(k).cubes.len()).collect::<Vec<_>>(),
        "invariants": inv,
    });
    out.artifacts.push(("system.json".into(), export));
    Ok(out)
}

pub fn randgrid_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = Seed(cfg.seed()?);
    let s = setup(cfg)?;
    let rz = randomizer(cfg, &s)?;
    let rc = &cfg.random;
    let k = rc.k.unwrap_or((cfg.grid.k_min + cfg.grid.k_max) / 2);
    let g = gamma(cfg.tb.alpha, s.space.dim_d());
    let wants = |name: &str| rc.checks.iter().any(|c| c == name);
    let mut out = Outcome::default();
    let mut results = serde_json::Map::new();
    results.insert("gamma".into(), json!(g));
    results.insert("tags".into(), json!(rz.plan().tag_count()));

    let mut eta = None;
    if wants("boundary") {
        match estimate_boundary_probability(&rz, k, &rc.eps, rc.trials, seed.derive(&[1])) {
            Ok(rep) => {
                eta = rep.eta();
                let positive = rep.eta_ci95().is_some_and(|(lo, _)| lo > 0.0);
                if !rep.monotone || !positive {
                    out.failures.push(json!({ "check": "boundary", "monotone": rep.monotone, "eta_ci95": rep.eta_ci95() }));
                }
                results.insert("boundary".into(), to_value(&rep));
            }
            Err(e) => out.failures.push(json!({ "check": "boundary", "error": e.to_string() })),
        }
    }
    if wants("bad") {
        let eta_used = eta.filter(|e| *e > 0.0).unwrap_or(1.0);
        match estimate_bad_probability(&rz, k, &rc.r_list, g, eta_used, rc.trials, seed.derive(&[2])) {
            Ok(rep) => {
                if !rep.decreasing || !rep.bound_holds {
                    out.failures.push(json!({ "check": "bad", "decreasing": rep.decreasing, "bound_holds": rep.bound_holds }));
                }
                results.insert("bad".into(), to_value(&rep));
            }
            Err(e) => out.failures.push(json!({ "check": "bad", "error": e.to_string() })),
        }
    }
    if wants("uniform") {
        match verify_uniform_goodness(&rz, cfg.gens(), rc.r, g, rc.pi_trials, rc.trials, seed.derive(&[3])) {
            Ok(rep) => {
                if !rep.all_within {
                    let worst = rep.cubes.iter().max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()));
                    out.failures.push(json!({ "check": "uniform", "max_abs_z": rep.max_abs_z, "witness": worst }));
                }
                results.insert("uniform".into(), to_value(&rep));
            }
            Err(e) => out.failures.push(json!({ "check": "uniform", "error": e.to_string() })),
        }
    }
    if wants("collapse") {
        let op = cfg.build_operator(&s.space)?;
        let n = s.space.len();
        let (b1, b2) = (cfg.build_b(&cfg.b1, n)?, cfg.build_b(&cfg.b2, n)?);
        let ctx = PairingContext::new(&s.space, &op, &b1, &b2);
        let (f, gf) = probes(n);
        let inputs = CollapseInputs { ctx: &ctx, f: &f, g: &gf };
        match check_collapse_identity(&rz, &inputs, cfg.gens(), rc.r, g, rc.pi_trials, rc.trials, seed.derive(&[4])) {
            Ok(rep) => {
                if !rep.within_3_sigma {
                    out.failures.push(json!({ "check": "collapse", "z": rep.z, "difference": rep.difference }));
                }
                results.insert("collapse".into(), to_value(&rep));
            }
            Err(e) => out.failures.push(json!({ "check": "collapse", "error": e.to_string() })),
        }
    }
    out.results = Value::Object(results);
    Ok(out)
}

pub fn haar_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let space = &s.space;
    let n = space.len();
    let system = match cfg.random.seed {
        Some(seed) => {
            let rz = randomizer(cfg, &s)?;
            rz.system(&rz.sample(Seed(seed), 0).map_err(run_err)?)
        }
        None => build_cubes(space, &s.nets, None).map_err(run_err)?,
    };
    let b = cfg.build_b(&cfg.b1, n)?;
    let (m, k0) = cfg.window();
    let (p1, p2) = probes(n);
    let f = VectorField::from_coordinates(&[p1, p2]).map_err(run_err)?;
    let dec = decompose(space, &system, &b, &f, m, k0).map_err(run_err)?;
    let target = adapted_expectation(space, &system, &b, &f, k0).map_err(run_err)?;
    let rebuilt = reconstruct(space, &system, &b, &dec).map_err(run_err)?;
    let scale = target.l2_norm(space.masses());
    let residual = rebuilt.sub(&target).l2_norm(space.masses()) / if scale > 0.0 { scale } else { 1.0 };

    let a = b.accretivity();
    let mass = space.masses();
    let mut cancellation: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut ordering_failures = Vec::new();
    let mut scaling = [(f64::INFINITY, 0.0f64); 3];
    for ord in &dec.orderings {
        let margin = ord.tail_margin(a);
        min_margin = min_margin.min(margin);
        if !ord.tail_bound_holds(a) {
            ordering_failures.push(json!({ "cube": ord.cube, "margin": margin }));
        }
        for u in 1..ord.s() {
            let phi = haar(space, &system, &b, ord, u).map_err(run_err)?;
            if phi.is_zero() {
                continue;
            }
            let integral: Complex64 = phi.values.iter().map(|&(x, v)| b.at(x) * v * mass[x]).sum();
            let size: f64 = phi.values.iter().map(|&(x, v)| (b.at(x) * v).norm() * mass[x]).sum();
            cancellation = cancellation.max(integral.norm() / size);
            for (slot, p) in scaling.iter_mut().zip([1.0, 2.0, 4.0]) {
                let ratio = phi.lp_norm(mass, p) / ord.child_mass[u - 1].powf(1.0 / p - 0.5);
                *slot = (slot.0.min(ratio), slot.1.max(ratio));
            }
        }
    }
    // f = b h with h the distance to the first point: Lipschitz with constant 1.
    let h = VectorField::scalar((0..n).map(|x| b.at(x) * space.dist(0, x)).collect());
    let truncation = lipschitz_truncation_error(space, &system, &b, &h, 1.0, k0).map_err(run_err)?;

    let mut out = Outcome::default();
    if residual > RESIDUAL_TOL {
        out.failures.push(json!({ "check": "reconstruction", "residual": residual }));
    }
    if cancellation > RESIDUAL_TOL {
        out.failures.push(json!({ "check": "cancellation", "max_relative_integral": cancellation }));
    }
    if !ordering_failures.is_empty() {
        out.failures.push(json!({ "check": "ordering", "cubes": ordering_failures }));
    }
    let mut csv = Vec::new();
    dec.write_csv(&mut csv).map_err(run_err)?;
    out.artifacts.push(("coefficients.csv".into(), String::from_utf8(csv).expect("csv is utf-8")));
    out.results = json!({
        "window": { "m": m, "k0": k0 },
        "coefficients": dec.coefficients.len(),
        "telescoping_residual": residual,
        "max_relative_integral": cancellation,
        "min_ordering_margin": min_margin,
        "lp_scaling": { "p": [1.0, 2.0, 4.0], "min": scaling.map(|s| s.0), "max": scaling.map(|s| s.1) },
        "truncation": truncation,
    });
    Ok(out)
}

pub fn kernel_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = Seed(cfg.seed()?);
    let space = cfg.build_space()?;
    let op = cfg.build_operator(&space)?;
    let t = &cfg.tb;
    let cz = match cfg.kernel() {
        Some(k) => cz_constants(&space, |x, y| k.eval(&space, x, y).unwrap_or_default(), t.alpha, t.sep_c, t.cz_samples, seed.derive(&[1])),
        None => cz_constants(&space, |x, y| op.entry(x, y), t.alpha, t.sep_c, t.cz_samples, seed.derive(&[1])),
    };
    let mut out = Outcome::default();
    let doubling = match space.verify_upper_doubling(t.cz_samples) {
        Ok(rep) => to_value(&rep),
        Err(e) => {
            out.failures.push(json!({ "check": "upper_doubling", "error": e.to_string() }));
            Value::Null
        }
    };
    // Annulus integrals around regularized balls on a spread of centers and radii.
    let n = space.len();
    let s_grid: Vec<f64> = (1..=8).map(|j| j as f64 / 16.0).collect();
    let mut annuli = Vec::new();
    for c in (0..8).map(|i| i * n / 8) {
        for r in dyadic_radii(&space, 4) {
            let Ok(ball) = regularized_radius(&space, c, r, &s_grid, 64) else { continue };
            let check = annulus_integral_check(&space, &op, c, r, ball.big_r);
            annuli.push(json!({ "center": c, "r": r, "big_r": ball.big_r, "annulus_constant": ball.annulus_constant,
                "lhs": check.lhs, "rhs": check.rhs, "ratio": check.ratio }));
        }
    }
    let max_annulus = annuli.iter().filter_map(|a| a["ratio"].as_f64()).fold(0.0, f64::max);
    if ![cz.size, cz.x_smooth, cz.y_smooth, max_annulus].iter().all(|v| v.is_finite()) {
        out.failures.push(json!({ "check": "finite_constants", "cz": cz, "max_annulus_ratio": max_annulus }));
    }
    out.results = json!({ "cz": cz, "upper_doubling": doubling, "max_annulus_ratio": max_annulus, "annuli": annuli });
    Ok(out)
}

pub fn decay_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = Seed(cfg.seed()?);
    let s = setup(cfg)?;
    let rz = randomizer(cfg, &s)?;
    let space = &s.space;
    let n = space.len();
    let (d, dp) = grid_pair(&rz, seed)?;
    let op = cfg.build_operator(space)?;
    let (b1, b2) = (cfg.build_b(&cfg.b1, n)?, cfg.build_b(&cfg.b2, n)?);
    let ctx = PairingContext::new(space, &op, &b1, &b2);
    let g = gamma(cfg.tb.alpha, space.dim_d());
    let params = DecayParams { alpha: cfg.tb.alpha, sep_c: cfg.tb.sep_c, r: cfg.random.r };
    let q = HaarGrid::new(space, d, b1.clone()).map_err(run_err)?.with_goodness(space, &dp, params.r, g);
    let r = HaarGrid::new(space, dp, b2.clone()).map_err(run_err)?;
    let mut out = Outcome::default();
    let separated = admissible(separated_decay_check(&ctx, &q, &r, params))?;
    let corrected = admissible(corrected_element_check(&ctx, &q, &r, params))?;
    if let Some(t) = &corrected {
        if t.max_identity_residual > RESIDUAL_TOL {
            out.failures.push(json!({ "check": "corrected_identity", "residual": t.max_identity_residual, "witness": t.witness }));
        }
    }
    if let Some(t) = &separated {
        let mut csv = String::from("k_q,k_r,pairs,max_separated,max_decay\n");
        for row in &t.rows {
            csv.push_str(&format!("{},{},{},{:e},{:e}\n", row.k_q, row.k_r, row.pairs, row.max_separated, row.max_decay));
        }
        out.artifacts.push(("decay.csv".into(), csv));
    }
    out.results = json!({ "gamma": g, "good_cubes": count_good(&q), "separated": separated, "corrected": corrected });
    Ok(out)
}

/// `None` when the fixture has no admissible pair at all.
fn admissible<T>(r: Result<T, OperatorError>) -> Result<Option<T>, CliError> {
    match r {
        Ok(t) => Ok(Some(t)),
        Err(OperatorError::NoAdmissiblePairs) => Ok(None),
        Err(e) => Err(run_err(e)),
    }
}

fn count_good(grid: &HaarGrid) -> usize {
    grid.system().generations().flat_map(|k| grid.system().cube_ids(k).collect::<Vec<_>>()).filter(|&id| grid.is_good(id)).count()
}

pub fn adjacent_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = Seed(cfg.seed()?);
    let s = setup(cfg)?;
    let rz = randomizer(cfg, &s)?;
    let space = &s.space;
    let n = space.len();
    let (d, dp) = grid_pair(&rz, seed)?;
    let op = cfg.build_operator(space)?;
    let (b1, b2) = (cfg.build_b(&cfg.b1, n)?, cfg.build_b(&cfg.b2, n)?);
    let ctx = PairingContext::new(space, &op, &b1, &b2);
    let k = cfg.random.k.unwrap_or((cfg.grid.k_min + cfg.grid.k_max) / 2);
    let t = &cfg.tb;
    let params = SplitParams::new(t.eps, t.upsilon, t.lambda, 1);
    let mut out = Outcome::default();
    let mut pairs = Vec::new();
    let mut worst: f64 = 0.0;
    for q in d.cube_ids(k) {
        let members = &d.cube(q).members;
        let r = dp.locate(k, members[members.len() / 2]);
        match adjacent_split(&ctx, &d, &dp, q, r, &params, seed.derive(&[q.index as u64])) {
            Ok(split) => {
                worst = worst.max(split.relative_residual);
                if split.relative_residual > RESIDUAL_TOL || !split.report.holds() {
                    out.failures.push(json!({ "check": "split", "q": q, "r": r, "residual": split.relative_residual, "covering": split.report }));
                }
                pairs.push(json!({ "q": q, "r": r, "pairing": split.pairing, "components": split.components,
                    "relative_residual": split.relative_residual, "covering": split.report }));
            }
            Err(e) => out.failures.push(json!({ "check": "split", "q": q, "r": r, "error": e.to_string() })),
        }
    }
    out.results = json!({ "generation": k, "params": params, "max_relative_residual": worst, "pairs": pairs });
    Ok(out)
}

fn spread(n: usize, count: usize) -> Vec<usize> {
    let count = count.clamp(1, n);
    (0..count).map(|i| i * n / count).collect()
}

pub fn tb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = cfg.seed()?;
    let s = setup(cfg)?;
    let rz = randomizer(cfg, &s)?;
    let space = &s.space;
    let n = space.len();
    let op: KernelOperator = cfg.build_operator(space)?;
    let (b1, b2): (TestFunction, TestFunction) = (cfg.build_b(&cfg.b1, n)?, cfg.build_b(&cfg.b2, n)?);
    let ctx = PairingContext::new(space, &op, &b1, &b2);
    let t = &cfg.tb;
    let bmo = BallFamily::grid(&spread(n, t.ball_centers), &dyadic_radii(space, t.ball_levels));
    let rbmo = BallFamily::grid(&spread(n, t.rbmo_centers), &dyadic_radii(space, t.rbmo_levels));
    let g = gamma(t.alpha, space.dim_d());
    let (d, dp) = grid_pair(&rz, Seed(seed))?;
    let q_grid = HaarGrid::new(space, d, b1.clone()).map_err(run_err)?.with_goodness(space, &dp, cfg.random.r, g);
    let r_grid = HaarGrid::new(space, dp, b2.clone()).map_err(run_err)?.with_goodness(space, q_grid.system(), cfg.random.r, g);
    let setup = ParaproductSetup { q_grid: &q_grid, r_grid: &r_grid, r: cfg.random.r, probes: (t.probes / 10).max(1) };
    let mut params = TbParams::new(t.p, t.kappa, t.lambda, seed);
    params.alpha = t.alpha;
    params.sep_c = t.sep_c;
    params.cz_samples = t.cz_samples;
    params.norm_probes = t.probes;
    let rep = tb_report(&ctx, TbFamilies { bmo: &bmo, rbmo: &rbmo }, Some(setup), params, cfg.grid.delta).map_err(run_err)?;
    let mut out = Outcome::default();
    if !rep.all_finite() {
        out.failures.push(json!({ "check": "finite_entries", "report": rep }));
    }
    out.results = to_value(&rep);
    Ok(out)
}
