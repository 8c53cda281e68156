//! The individual pipeline stages. Each one turns the configuration (and,
//! where needed, the Gibbs family) into a [`StageOutput`]: a list of
//! checks plus the text of every artifact it wants written.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqrpf::cones::{
    check_aperture, check_invariance, check_perturbation, cone_decompose, sample_cone, ConeParams, PerturbationConfig,
};
use seqrpf::map_zoo::{compute_s, verify_pairing, MapModel};
use seqrpf::montecarlo::{
    birkhoff_sums, clt_from_sums, condition_h_cross_check, condition_h_gap, lil_envelope, mdp_check,
    mdp_gaussian_control, quadrature_means, sample_initial, BeVerdict, BirkhoffSums, BlockPattern, MdpConfig, MdpTable,
    SimConfig, StatReport, LIL_ETAS, VARIANCE_FLOOR,
};
use seqrpf::rpf::{
    check_conformal, check_decay_correlations, check_exp_convergence, gibbs_family, DecayReport, GibbsFamily,
    RpfOptions,
};
use seqrpf::spectral_stats::{
    check_cov_hessian, covariance_curve, norm_decay_scan, pressure_block, stability_scan, variance_growth_check,
    NormDecayConfig, PressureOptions,
};
use seqrpf::transfer_op::io::write_csv;
use seqrpf::transfer_op::{GridFunction, Transfer};
use serde::{Deserialize, Serialize};

use crate::cache::{cache_key, Cache};
use crate::config::{transfer_for, RunConfig, SystemConfig};
use crate::error::{CliError, CliResult};
use crate::report::{csv_text, json_text, num, Check, Overall, StageReport};

pub const PAIRING: &str = "pairing";
pub const S_CHECK: &str = "s_check";
pub const RPF: &str = "rpf";
pub const CONES: &str = "cones";
pub const SPECTRAL: &str = "spectral";
pub const SIMULATE: &str = "simulate";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub report: StageReport,
    /// `(file name, contents)` pairs, written under the output directory.
    pub files: Vec<(String, String)>,
}

impl StageOutput {
    fn new(stage: &str) -> Self {
        StageOutput { report: StageReport::new(stage), files: Vec::new() }
    }

    fn check(&mut self, c: Check) {
        self.report.checks.push(c);
    }

    fn file(&mut self, name: &str, contents: String) {
        self.report.artifacts.push(name.to_string());
        self.files.push((name.to_string(), contents));
    }
}

fn core(stage: &'static str) -> impl Fn(seqrpf::Error) -> CliError {
    move |e| CliError::from_core(stage, e)
}

fn rpf_options(cfg: &RunConfig) -> RpfOptions {
    RpfOptions::default().with_depth(cfg.grid.depth)
}

/// Fibers the Gibbs family must cover. Periodic systems are handled by
/// the solver; driven ones need every index any stage will visit.
pub fn family_len(cfg: &RunConfig) -> CliResult<usize> {
    let sys = cfg.system.build().map_err(core(RPF))?;
    if sys.period().is_some() {
        return Ok(cfg.rpf.fibers);
    }
    let sp = &cfg.spectral;
    let mut reach = [cfg.rpf.n_max, sp.norm_n_max, sp.stability_n, *cfg.sim.ladder.last().unwrap_or(&0)]
        .into_iter()
        .chain(sp.cov_ns.iter().copied())
        .chain(sp.growth_ns.iter().copied())
        .chain(sp.pressure_ns.iter().copied())
        .max()
        .unwrap_or(0);
    if let Some(h) = &cfg.sim.condition_h {
        reach = reach.max(2 * h.block_len + h.k_max.max(h.cross_k));
    }
    if let Some(m) = &cfg.sim.mdp {
        reach = reach.max(m.n);
    }
    Ok(cfg.rpf.fibers.max(reach + 1))
}

/// The `z = 0` Gibbs family of `system`, served from the cache when possible.
pub fn gibbs_for(system: &SystemConfig, cfg: &RunConfig, len: usize, cache: &Cache) -> CliResult<GibbsFamily> {
    let key = cache_key("gibbs", &(system, cfg.grid, len));
    let (g, _) = cache.get_or(&key, || {
        let tr = transfer_for(system, cfg.grid.n).map_err(core(RPF))?;
        gibbs_family(&tr, 0, len, &rpf_options(cfg)).map_err(core(RPF))
    })?;
    Ok(g)
}

pub fn gibbs(cfg: &RunConfig, cache: &Cache) -> CliResult<GibbsFamily> {
    gibbs_for(&cfg.system, cfg, family_len(cfg)?, cache)
}

fn distinct_maps(cfg: &RunConfig) -> CliResult<Vec<(i64, MapModel)>> {
    let sys = cfg.system.build().map_err(core(PAIRING))?;
    let mut out: Vec<(i64, MapModel)> = Vec::new();
    for j in sys.window() {
        let m = sys.fiber(j).map.as_ref().clone();
        if !out.iter().any(|(_, x)| *x == m) {
            out.push((j, m));
        }
    }
    Ok(out)
}

pub fn pairing(cfg: &RunConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::new(PAIRING);
    let mut rows = Vec::new();
    for (j, map) in distinct_maps(cfg)? {
        let r = verify_pairing(&map, cfg.pairing.samples, cfg.seed).map_err(core(PAIRING))?;
        let worst = r.branch_max.iter().copied().fold(0.0, f64::max);
        out.check(Check::new(format!("pairing[{j}]"), r.consistent, worst, f64::NAN).detail(format!(
            "d={} q={} L={} sigma={}",
            r.d,
            r.q,
            num(r.declared_l),
            num(r.declared_sigma)
        )));
        for (b, m) in r.branch_max.iter().enumerate() {
            rows.push(vec![j.to_string(), b.to_string(), num(*m), r.d.to_string(), r.q.to_string()]);
        }
    }
    out.file("pairing.csv", csv_text(&["fiber", "branch", "ratio_max", "d", "q"], &rows));
    Ok(out)
}

pub fn s_check(cfg: &RunConfig) -> CliResult<StageOutput> {
    let mut out = StageOutput::new(S_CHECK);
    let sys = cfg.system.build().map_err(core(S_CHECK))?;
    let r = compute_s(&sys);
    out.check(Check::new("s_below_one", r.below_one, r.s, 1.0).detail(format!(
        "worst fiber {}, max admissible epsilon {}",
        r.worst_fiber,
        num(r.max_admissible_epsilon)
    )));
    out.file("s.json", json_text(&r));
    Ok(out)
}

/// `δ < 1` with a good fit, or residuals already at roundoff.
fn decay_passes(r: &DecayReport, r2: f64) -> (bool, f64) {
    match &r.fit {
        Some(f) => (f.delta < 1.0 && f.r2 >= r2, f.delta),
        None => (true, 0.0),
    }
}

fn conformal_sets(map: &MapModel, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let branches = map.branches();
    (0..count)
        .map(|_| {
            let b = &branches[rng.random_range(0..branches.len())];
            let width = b.hi - b.lo;
            let len = width * rng.random_range(0.2..0.8);
            let a = b.lo + rng.random_range(0.0..width - len);
            (a, a + len)
        })
        .collect()
}

fn grid_csv(components: &[GridFunction], alpha: f64) -> CliResult<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, components, alpha).map_err(core(RPF))?;
    let text = String::from_utf8(buf).expect("csv is utf-8");
    // The grid-function header is a `key=value` line; the schema joins it.
    Ok(format!("# schema={}{}", crate::report::SCHEMA_VERSION, text.trim_start_matches('#')))
}

#[derive(Serialize)]
struct LambdaRow {
    fiber: i64,
    lambda_re: f64,
    lambda_im: f64,
    pressure: f64,
}

#[derive(Serialize)]
struct LambdaDoc {
    fibers: Vec<LambdaRow>,
    max_residual: f64,
}

pub fn rpf(cfg: &RunConfig, g: &GibbsFamily) -> CliResult<StageOutput> {
    let mut out = StageOutput::new(RPF);
    let tol = &cfg.tolerances;
    let tr = cfg.transfer().map_err(core(RPF))?;
    let res = g.rpf.max_residual();
    out.check(Check::new("residual", res <= tol.rpf_residual, res, tol.rpf_residual));
    let min_h = g.rpf.triplets.iter().map(|t| t.h.min_re()).fold(f64::INFINITY, f64::min);
    out.check(Check::new("h_positive", min_h > 0.0, min_h, 0.0));

    let map = tr.system().fiber(0).map;
    let sets = conformal_sets(&map, cfg.rpf.conformal_sets, cfg.seed);
    let conf = check_conformal(&tr, g, 0, &sets).map_err(core(RPF))?;
    out.check(Check::new("conformal", conf.max_relative <= tol.conformal, conf.max_relative, tol.conformal));

    let test_fn = |x: f64| x * (1.0 - x);
    let gf = GridFunction::from_real(0, tr.grid(), test_fn);
    let conv = check_exp_convergence(&tr, &g.rpf, 0, &gf, cfg.rpf.n_max).map_err(core(RPF))?;
    let (ok, delta) = decay_passes(&conv, tol.decay_r2);
    out.check(Check::new("exp_convergence", ok, delta, 1.0));

    let m = g.expect_fn(0, test_fn).map_err(core(RPF))?;
    let centred = GridFunction::from_real(0, tr.grid(), |x| test_fn(x) - m);
    let corr = check_decay_correlations(&tr, g, 0, &centred, test_fn, cfg.rpf.n_max).map_err(core(RPF))?;
    let (ok, delta) = decay_passes(&corr, tol.correlation_r2);
    out.check(Check::new("decay_of_correlations", ok, delta, 1.0));

    let t0 = g.rpf.get(0).map_err(core(RPF))?;
    out.file("h.csv", grid_csv(std::slice::from_ref(&t0.h), tr.alpha())?);
    let nu = GridFunction::new(0, tr.grid(), t0.nu.clone()).map_err(core(RPF))?;
    out.file("nu.csv", grid_csv(&[nu], tr.alpha())?);
    let fibers = g
        .rpf
        .triplets
        .iter()
        .zip(&g.log_lambda)
        .map(|(t, &p)| LambdaRow { fiber: t.fiber, lambda_re: t.lambda.re, lambda_im: t.lambda.im, pressure: p })
        .collect();
    out.file("lambda.json", json_text(&LambdaDoc { fibers, max_residual: res }));
    let rows: Vec<Vec<String>> = (0..conv.residuals.len())
        .map(|n| vec![n.to_string(), num(conv.residuals[n]), num(corr.residuals[n])])
        .collect();
    out.file("rpf_decay.csv", csv_text(&["n", "convergence", "correlation"], &rows));
    Ok(out)
}

#[derive(Serialize)]
struct ConesDoc {
    params: ConeParams,
    invariance_passed: usize,
    invariance_samples: usize,
    invariance_worst_ratio: f64,
    aperture_passed: usize,
    aperture_worst_ratio: f64,
    decompose_within_bound: usize,
    decompose_samples: usize,
    perturbation: Option<seqrpf::cones::PerturbationReport>,
}

fn random_function(rng: &mut ChaCha8Rng, tr: &Transfer) -> GridFunction {
    let coef: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..6.3)))
        .collect();
    GridFunction::from_fn(0, tr.grid(), |x| {
        coef.iter()
            .enumerate()
            .map(|(k, &(a, b, ph))| {
                let w = (k as f64 + 1.0) * std::f64::consts::PI * x + ph;
                Complex64::new(a * w.cos(), b * w.sin())
            })
            .sum()
    })
}

pub fn cones(cfg: &RunConfig, g: &GibbsFamily) -> CliResult<StageOutput> {
    let mut out = StageOutput::new(CONES);
    let c = &cfg.cones;
    let tr = cfg.transfer().map_err(core(CONES))?;
    let params = ConeParams::for_system(tr.system(), tr.grid(), c.kappa, c.delta).map_err(core(CONES))?;

    let inv = check_invariance(&tr, 0, &params, c.samples, cfg.seed).map_err(core(CONES))?;
    out.check(
        Check::new("invariance", inv.ok(), inv.worst_ratio, inv.zeta)
            .detail(format!("{}/{} samples", inv.passed, inv.samples)),
    );

    let samples = sample_cone(tr.grid(), 0, &params, c.aperture_samples, cfg.seed);
    let ap = check_aperture(&samples, &params, 0);
    out.check(
        Check::new("aperture", ap.passed == ap.samples, ap.worst_ratio, 1.0)
            .detail(format!("{}/{} samples", ap.passed, ap.samples)),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let within = (0..c.decompose_samples)
        .filter(|_| cone_decompose(&random_function(&mut rng, &tr), &params).within_bound())
        .count();
    out.check(
        Check::new("decomposition", within == c.decompose_samples, within as f64, c.decompose_samples as f64)
            .detail(format!("{within}/{} within the norm bound", c.decompose_samples)),
    );

    let perturbation = if tr.system().fiber(0).observable.is_zero() || c.moduli.is_empty() {
        None
    } else {
        let mean = (0..tr.dim())
            .map(|a| {
                let f = tr.system().fiber(0);
                g.expect_fn(0, |x| f.observable.eval_component(a, &f.map, x))
            })
            .collect::<seqrpf::Result<Vec<f64>>>()
            .map_err(core(CONES))?;
        let pc = PerturbationConfig {
            moduli: c.moduli.clone(),
            samples: c.perturbation_samples,
            triples: c.triples,
            seed: cfg.seed,
            centre: Some(mean),
        };
        let r = check_perturbation(&tr, 0, &params, &pc).map_err(core(CONES))?;
        let tol = cfg.tolerances.perturbation_ratio;
        let finite = r.levels.iter().all(|l| l.c_hat.is_finite());
        out.check(Check::new("perturbation", finite && r.max_level_ratio <= tol, r.max_level_ratio, tol));
        let rows: Vec<Vec<String>> =
            r.levels.iter().map(|l| vec![num(l.modulus), num(l.c_hat), l.discarded.to_string()]).collect();
        out.file("perturbation.csv", csv_text(&["modulus", "c_hat", "discarded"], &rows));
        Some(r)
    };

    out.file(
        "cones.json",
        json_text(&ConesDoc {
            params,
            invariance_passed: inv.passed,
            invariance_samples: inv.samples,
            invariance_worst_ratio: inv.worst_ratio,
            aperture_passed: ap.passed,
            aperture_worst_ratio: ap.worst_ratio,
            decompose_within_bound: within,
            decompose_samples: c.decompose_samples,
            perturbation,
        }),
    );
    Ok(out)
}

/// `vᵀ M v` for a row-major `d × d` matrix.
fn quad(m: &[f64], v: &[f64]) -> f64 {
    let d = v.len();
    (0..d).map(|a| (0..d).map(|b| v[a] * m[a * d + b] * v[b]).sum::<f64>()).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn pressure_options(cfg: &RunConfig) -> PressureOptions {
    PressureOptions { rpf: rpf_options(cfg), ..Default::default() }
}

pub fn variance(cfg: &RunConfig, g: &GibbsFamily, out: &mut StageOutput) -> CliResult<()> {
    let sp = &cfg.spectral;
    let tr = cfg.transfer().map_err(core(SPECTRAL))?;
    let v = cfg.direction();
    let tol = cfg.tolerances.cov_hessian;
    if !sp.cov_ns.is_empty() {
        let r = check_cov_hessian(&tr, g, 0, &sp.cov_ns, tol, &pressure_options(cfg)).map_err(core(SPECTRAL))?;
        out.check(Check::new("cov_hessian", r.ok(), r.max_diff, tol));
        let rows: Vec<Vec<String>> = r
            .rows
            .iter()
            .map(|row| {
                let (c, h) = (quad(&row.cov, &v), quad(&row.hessian, &v));
                vec![row.n.to_string(), num(c), num(h), num(row.diff), num(row.stencil_gap)]
            })
            .collect();
        out.file("cov_hessian.csv", csv_text(&["n", "var", "hessian", "max_entry_diff", "stencil_gap"], &rows));
    }
    if !sp.growth_ns.is_empty() {
        let r = variance_growth_check(&tr, g, &[0], &sp.growth_ns, std::slice::from_ref(&v), sp.declared_c)
            .map_err(core(SPECTRAL))?;
        out.check(Check::new("variance_growth", r.passed(), r.min_ratio, sp.declared_c));
        let rows: Vec<Vec<String>> =
            r.cells.iter().map(|c| vec![c.j.to_string(), c.n.to_string(), num(c.ratio)]).collect();
        out.file("variance.csv", csv_text(&["j", "n", "var_over_n"], &rows));
    }
    Ok(())
}

pub fn norm_decay(cfg: &RunConfig, g: &GibbsFamily, out: &mut StageOutput) -> CliResult<()> {
    let sp = &cfg.spectral;
    if sp.norm_ts.is_empty() {
        return Ok(());
    }
    let tr = cfg.transfer().map_err(core(SPECTRAL))?;
    let nd = NormDecayConfig {
        ts: sp.norm_ts.clone(),
        direction: Some(unit(&cfg.direction())),
        n_max: sp.norm_n_max,
        burn_in: sp.burn_in,
        trials: sp.trials,
        seed: cfg.seed,
        ..Default::default()
    };
    let r = norm_decay_scan(&tr, g, 0, &nd).map_err(core(SPECTRAL))?;
    for row in &r.rows {
        out.check(Check::new(format!("norm_decay_slope[t={}]", num(row.t)), row.slope() < 0.0, row.slope(), 0.0));
    }
    for a in &r.rows {
        if let Some(b) = r.row(2.0 * a.t).filter(|_| a.t != 0.0) {
            let ratio = b.slope() / a.slope();
            out.check(Check::new(
                format!("norm_decay_scaling[t={}]", num(a.t)),
                (2.0..=8.0).contains(&ratio),
                ratio,
                8.0,
            ));
        }
    }
    let cap = cfg.tolerances.norm_bound;
    out.check(Check::new("uniform_bound", r.uniform_bound_holds(cap), r.sup_norm, cap));
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .flat_map(|row| row.norms.iter().enumerate().map(move |(n, v)| vec![num(row.t), n.to_string(), num(*v)]))
        .collect();
    out.file("norm_decay.csv", csv_text(&["t", "n", "norm"], &rows));
    Ok(())
}

pub fn stability(cfg: &RunConfig, g: &GibbsFamily, cache: &Cache, out: &mut StageOutput) -> CliResult<()> {
    let sp = &cfg.spectral;
    if sp.beta_sweep.is_empty() {
        return Ok(());
    }
    let base = cfg.transfer().map_err(core(SPECTRAL))?;
    let len = family_len(cfg)?;
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for &db in &sp.beta_sweep {
        let sys = cfg.system.shift_beta(db).ok_or_else(|| CliError::Usage("stability needs an MP-type map".into()))?;
        let pert = transfer_for(&sys, cfg.grid.n).map_err(core(SPECTRAL))?;
        let gp = gibbs_for(&sys, cfg, len, cache)?;
        let r = stability_scan(&base, g, &pert, &gp, 0, sp.stability_n, sp.r0, cfg.seed).map_err(core(SPECTRAL))?;
        rows.push(vec![num(db), num(r.epsilon_hat), num(r.sup_ratio)]);
        ratios.push(r.sup_ratio);
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    out.check(Check::new("stability_monotone", decreasing, *ratios.last().unwrap(), ratios[0]));
    out.file("stability.csv", csv_text(&["delta_beta", "epsilon_hat", "sup_ratio"], &rows));
    Ok(())
}

pub fn pressure(cfg: &RunConfig, g: &GibbsFamily, out: &mut StageOutput) -> CliResult<()> {
    let tr = cfg.transfer().map_err(core(SPECTRAL))?;
    let v = cfg.direction();
    let opts = pressure_options(cfg);
    let mut rows = Vec::new();
    for &n in &cfg.spectral.pressure_ns {
        let b = pressure_block(&tr, g, 0, n, &opts).map_err(core(SPECTRAL))?;
        let grad: f64 = b.gradient.iter().zip(&v).map(|(a, b)| a * b).sum();
        rows.push(vec![
            n.to_string(),
            num(grad),
            num(quad(&b.hessian, &v)),
            num(quad(&b.hessian_five_point, &v)),
            num(b.stencil_gap()),
        ]);
    }
    out.file("pressure.csv", csv_text(&["n", "gradient", "hessian", "hessian_five_point", "stencil_gap"], &rows));
    Ok(())
}

pub fn spectral(cfg: &RunConfig, g: &GibbsFamily, cache: &Cache) -> CliResult<StageOutput> {
    let mut out = StageOutput::new(SPECTRAL);
    variance(cfg, g, &mut out)?;
    norm_decay(cfg, g, &mut out)?;
    stability(cfg, g, cache, &mut out)?;
    Ok(out)
}

/// Sampled Birkhoff sums at every rung, with their quadrature centres.
pub fn simulate_sums(cfg: &RunConfig, g: &GibbsFamily) -> CliResult<(BirkhoffSums, Vec<Vec<f64>>)> {
    let tr = cfg.transfer().map_err(core(SIMULATE))?;
    let s = &cfg.sim;
    let sim = SimConfig::new(s.replicas, s.ladder.clone(), cfg.seed).map_err(core(SIMULATE))?;
    let points = sample_initial(g, 0, s.replicas, cfg.seed).map_err(core(SIMULATE))?;
    let sums = birkhoff_sums(&tr, &points, &sim).map_err(core(SIMULATE))?;
    let means = quadrature_means(&tr, g, 0, &s.ladder).map_err(core(SIMULATE))?;
    Ok((sums, means))
}

pub fn sums_csv(sums: &BirkhoffSums, v: &[f64]) -> String {
    let cols: Vec<String> = sums.ladder.iter().map(|n| format!("s_{n}")).collect();
    let mut header = vec!["replica"];
    header.extend(cols.iter().map(String::as_str));
    let proj: Vec<Vec<f64>> = (0..sums.ladder.len()).map(|r| sums.project(r, v)).collect();
    let rows: Vec<Vec<String>> = (0..sums.replicas)
        .map(|i| std::iter::once(i.to_string()).chain(proj.iter().map(|p| num(p[i]))).collect())
        .collect();
    csv_text(&header, &rows)
}

#[derive(Serialize)]
struct LimitDoc<'a> {
    overall: Overall,
    report: &'a StatReport,
    mdp_control: Option<&'a MdpTable>,
}

/// Berry–Esseen, LIL envelope and, if configured, condition (H) and the MDP.
pub fn limit_tests(cfg: &RunConfig, g: &GibbsFamily) -> CliResult<StageOutput> {
    let mut out = StageOutput::new(SIMULATE);
    let tol = &cfg.tolerances;
    let tr = cfg.transfer().map_err(core(SIMULATE))?;
    let v = cfg.direction();
    let (sums, means) = simulate_sums(cfg, g)?;
    let mut stats = StatReport::default();

    let be = clt_from_sums(&sums, &means, &v, VARIANCE_FLOOR).map_err(core(SIMULATE))?;
    let ok = be.verdict != BeVerdict::Degenerate && be.scaled_ratio <= tol.ks_ratio && be.improving;
    out.check(
        Check::new("berry_esseen", ok, be.scaled_ratio, tol.ks_ratio)
            .detail(format!("verdict {:?}, improving {}", be.verdict, be.improving)),
    );

    let last = sums.ladder.len() - 1;
    let n = sums.ladder[last];
    let sigma2 = covariance_curve(&tr, g, 0, n).map_err(core(SIMULATE))?.quadratic(n, &v) / n as f64;
    let centre: f64 = means[last].iter().zip(&v).map(|(a, b)| a * b).sum();
    let lil = lil_envelope(&sums.project(last, &v), n, centre, sigma2, &LIL_ETAS);
    let exceed = lil.rows.iter().find(|r| r.eta == 0.5).map_or(f64::NAN, |r| r.exceedance);
    match lil.passed {
        Some(p) => out.check(Check::new("lil_envelope", p, exceed, 0.05)),
        None => out.check(Check::new("lil_envelope", true, f64::NAN, 0.05).detail("skipped: zero asymptotic variance")),
    }

    let rows: Vec<Vec<String>> = be
        .rows
        .iter()
        .map(|r| {
            let e = if r.n == n { num(exceed) } else { String::new() };
            vec![r.n.to_string(), num(r.mean), num(r.centre), num(r.var), num(r.ks), num(r.ks_scaled), e]
        })
        .collect();
    out.file("limit_tests.csv", csv_text(&["n", "mean", "centre", "var", "ks", "ks_scaled", "exceedance"], &rows));
    stats.berry_esseen = Some(be);
    stats.lil = Some(lil);

    if let Some(h) = &cfg.sim.condition_h {
        let pattern = BlockPattern {
            block_len: h.block_len,
            first: 1,
            second: 1,
            ts: vec![h.t, h.t],
            direction: Some(v.clone()),
        };
        let gap = condition_h_gap(&tr, g, &pattern, h.k_max, h.eps0).map_err(core(SIMULATE))?;
        let last_gap = gap.rows.last().map_or(f64::NAN, |r| r.gap);
        out.check(
            Check::new("condition_h_gap", last_gap <= tol.h_gap && gap.rate() < 0.0, last_gap, tol.h_gap)
                .detail(format!("rate {}", num(gap.rate()))),
        );
        let rows: Vec<Vec<String>> = gap.rows.iter().map(|r| vec![r.k.to_string(), num(r.gap)]).collect();
        out.file("condition_h.csv", csv_text(&["k", "gap"], &rows));
        let cross = condition_h_cross_check(&tr, g, &pattern, h.cross_k, h.eps0, cfg.sim.replicas, cfg.seed)
            .map_err(core(SIMULATE))?;
        let worst = cross.checks.iter().map(|c| c.z).fold(0.0, f64::max);
        out.check(Check::new("condition_h_cross", cross.within(tol.h_sigmas), worst, tol.h_sigmas));
        stats.condition_h = Some(gap);
        stats.condition_h_cross = Some(cross);
    }

    let mut control = None;
    if let Some(m) = &cfg.sim.mdp {
        let mut mc = MdpConfig::new(m.gamma, m.xs.clone(), m.n, m.replicas, cfg.seed).map_err(core(SIMULATE))?;
        mc.direction = Some(v.clone());
        let ctl = mdp_gaussian_control(&mc).map_err(core(SIMULATE))?;
        let worst = |t: &MdpTable| t.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
        out.check(Check::new("mdp_gaussian_control", ctl.passed(tol.mdp_rel), worst(&ctl), tol.mdp_rel));
        let table = mdp_check(&tr, g, &mc, &rpf_options(cfg)).map_err(core(SIMULATE))?;
        out.check(Check::new("mdp", table.passed(tol.mdp_rel), worst(&table), tol.mdp_rel));
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| vec![num(r.x), num(r.rate), num(r.target), num(r.rel_error), r.hits.to_string()])
            .collect();
        out.file("mdp.csv", csv_text(&["x", "rate", "target", "rel_error", "hits"], &rows));
        stats.mdp = Some(table);
        control = Some(ctl);
    }

    let overall = if out.report.passed() { Overall::Pass } else { Overall::Fail };
    out.file("limit_tests.json", json_text(&LimitDoc { overall, report: &stats, mdp_control: control.as_ref() }));
    Ok(out)
}
