//! Experiment execution: dispatch per kind, deterministic data files, and
//! a manifest whose hash covers the config echo and every output.

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use lle::bifurcation::{analyze_crossing, refine_f1zero_solution};
use lle::bounds::{self, compute_bounds};
use lle::continuation::{
    newton_solve, trace_branch, trace_two_sided, Branch, ContinuationParam, ContinuationSettings,
    NewtonSettings,
};
use lle::discretize::norms;
use lle::model::{Params, PeriodicField};
use lle::response::{self, sign_map};
use lle::trivial::{self, solve_constants};
use lle::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(String),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Exit status semantics: 0 ok, 1 config error, 2 numerical failure,
/// 3 partial results (some branches failed, the rest were written).
#[derive(Debug)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub partial: bool,
    pub notes: Vec<String>,
}

struct OutputCollector {
    dir: PathBuf,
    files: Vec<(String, String, usize)>, // name, sha256, bytes
}

impl OutputCollector {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(OutputCollector {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        let digest = hex::encode(Sha256::digest(contents));
        self.files.push((name.to_string(), digest, contents.len()));
        Ok(path)
    }
}

/// Execute the experiment named by the config (or the explicit override)
/// and write its data files plus `manifest.json` into `out_dir`.
pub fn run(
    config: &ExperimentConfig,
    kind_override: Option<ExperimentKind>,
    out_dir: &Path,
) -> Result<RunSummary, RunError> {
    let kind = kind_override.or(config.kind).ok_or_else(|| {
        ConfigError("no experiment kind given (config `kind` or subcommand)".into())
    })?;
    config.validate()?;
    let start = Instant::now();
    let mut out = OutputCollector::new(out_dir)?;
    let mut notes = Vec::new();

    let partial = match kind {
        ExperimentKind::TrivialBranch => run_trivial_branch(config, &mut out)?,
        ExperimentKind::Continue => run_continue(config, &mut out)?,
        ExperimentKind::Sweep => run_sweep(config, None, &mut out, &mut notes)?,
        ExperimentKind::BifurcationScan => run_bifurcation_scan(config, &mut out, &mut notes)?,
        ExperimentKind::SignMap => run_sign_map(config, &mut out)?,
        ExperimentKind::BoundsReport => run_bounds_report(config, &mut out)?,
        ExperimentKind::ReproduceFig => run_reproduce_fig(config, &mut out, &mut notes)?,
        ExperimentKind::LocateThreshold => run_locate_threshold(config, &mut out)?,
    };

    // manifest: config echo, versions, wall time, outputs; the hash covers
    // the config and the output digests (not the wall time)
    let config_echo = serde_json::to_value(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&config_echo).unwrap());
    let mut file_entries = Vec::new();
    for (name, digest, bytes) in &out.files {
        hasher.update(digest.as_bytes());
        file_entries.push(serde_json::json!({ "path": name, "sha256": digest, "bytes": bytes }));
    }
    let manifest = serde_json::json!({
        "kind": kind.name(),
        "config": config_echo,
        "versions": { "lle": lle_version(), "lle-cli": env!("CARGO_PKG_VERSION") },
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": file_entries,
        "notes": notes,
        "manifest_hash": hex::encode(hasher.finalize()),
    });
    let manifest_path = out.dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&manifest).unwrap(),
    )?;

    let mut outputs: Vec<PathBuf> = out
        .files
        .iter()
        .map(|(name, _, _)| out.dir.join(name))
        .collect();
    outputs.push(manifest_path);
    Ok(RunSummary {
        outputs,
        partial,
        notes,
    })
}

fn lle_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

fn run_trivial_branch(
    config: &ExperimentConfig,
    out: &mut OutputCollector,
) -> Result<bool, RunError> {
    let f0 = config.model.f0;
    let (t_min, t_max) = (
        config.experiment.t_min.unwrap_or(-0.999),
        config.experiment.t_max.unwrap_or(0.999),
    );
    let samples = config.experiment.t_samples.unwrap_or(2001);
    let mut csv = String::from("t,zeta,rho,re_u0,im_u0,nondegenerate,witness_mode\n");
    for i in 0..samples {
        let t = t_min + (t_max - t_min) * i as f64 / (samples - 1) as f64;
        let tp = trivial::param_point(t, f0).map_err(|e| RunError::Numerical(e.to_string()))?;
        let verdict = trivial::is_nondegenerate(&tp, config.model.omega, config.model.d);
        let (flag, witness) = match verdict {
            trivial::Nondegeneracy::NonDegenerate => (true, String::new()),
            trivial::Nondegeneracy::Degenerate { m } => (false, m.to_string()),
        };
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            t, tp.zeta, tp.rho, tp.u0.re, tp.u0.im, flag, witness
        )
        .unwrap();
    }
    out.write("trivial_curve.csv", csv.as_bytes())?;
    let report = trivial::turning_points(f0);
    out.write(
        "turning_points.json",
        serde_json::to_vec_pretty(&report).unwrap().as_slice(),
    )?;
    Ok(false)
}

fn start_field(config: &ExperimentConfig, p: &Params) -> Result<(PeriodicField, usize), RunError> {
    let cons = solve_constants(p.zeta, p.f0);
    let idx = config.experiment.start_index.unwrap_or(0);
    let tp = cons.get(idx).ok_or_else(|| {
        ConfigError(format!(
            "start_index {idx} out of range ({} constants)",
            cons.len()
        ))
    })?;
    let u = PeriodicField::constant(config.grid.n, tp.u0)
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    Ok((u, idx))
}

fn run_continue(config: &ExperimentConfig, out: &mut OutputCollector) -> Result<bool, RunError> {
    let p = config.params().with_f1(0.0);
    let settings = config.continuation_settings()?;
    let (u, idx) = start_field(config, &p)?;
    let branch =
        trace_two_sided(&p, &u, &settings).map_err(|e| RunError::Numerical(e.to_string()))?;
    write_branches(config, &p, &[branch], &format!("start{idx}_"), out)?;
    Ok(false)
}

fn write_branches(
    config: &ExperimentConfig,
    p: &Params,
    branches: &[Branch],
    prefix: &str,
    out: &mut OutputCollector,
) -> Result<(), RunError> {
    let mut csv = String::from(Branch::csv_header());
    csv.push('\n');
    let mut buf = Vec::new();
    for (i, b) in branches.iter().enumerate() {
        let id = format!("{prefix}b{i}");
        buf.clear();
        b.write_csv(&mut buf, &id, p)?;
        csv.push_str(std::str::from_utf8(&buf).unwrap());
    }
    out.write(&format!("{prefix}branches.csv"), csv.as_bytes())?;
    if config.experiment.write_fields {
        for (i, b) in branches.iter().enumerate() {
            let json = serde_json::to_vec_pretty(&b.fields_json(p)).unwrap();
            out.write(&format!("{prefix}fields_b{i}.json"), &json)?;
        }
    }
    Ok(())
}

fn run_sweep(
    config: &ExperimentConfig,
    zeta_list_override: Option<Vec<f64>>,
    out: &mut OutputCollector,
    notes: &mut Vec<String>,
) -> Result<bool, RunError> {
    let zeta_list = zeta_list_override
        .or_else(|| config.experiment.zeta_list.clone())
        .ok_or_else(|| ConfigError("sweep requires experiment.zeta_list".into()))?;
    let p = config.params();
    let mut settings = config.continuation_settings()?;
    settings.param = ContinuationParam::F1;
    let sweeps = lle::continuation::sweep_zeta(&p, &zeta_list, config.grid.n, &settings);
    let mut partial = false;
    let mut csv = String::from(Branch::csv_header());
    csv.push('\n');
    let mut buf = Vec::new();
    for sw in &sweeps {
        for (i, b) in sw.branches.iter().enumerate() {
            let id = format!("zeta{}_b{}", sw.zeta, i);
            buf.clear();
            b.write_csv(&mut buf, &id, &p.with_zeta(sw.zeta))?;
            csv.push_str(std::str::from_utf8(&buf).unwrap());
        }
        for err in &sw.errors {
            partial = true;
            notes.push(format!("zeta {}: {err}", sw.zeta));
        }
    }
    out.write("branches.csv", csv.as_bytes())?;
    if config.experiment.write_fields {
        for sw in &sweeps {
            for (i, b) in sw.branches.iter().enumerate() {
                let json =
                    serde_json::to_vec_pretty(&b.fields_json(&p.with_zeta(sw.zeta))).unwrap();
                out.write(&format!("fields_zeta{}_b{}.json", sw.zeta, i), &json)?;
            }
        }
    }
    Ok(partial)
}

fn run_bifurcation_scan(
    config: &ExperimentConfig,
    out: &mut OutputCollector,
    notes: &mut Vec<String>,
) -> Result<bool, RunError> {
    let p = config.params().with_f1(0.0);
    let mut settings = config.continuation_settings()?;
    settings.param = ContinuationParam::F1;
    let n = config.grid.n;
    let sweeps = lle::continuation::sweep_zeta(&p, &[p.zeta], n, &settings);
    let sw = &sweeps[0];
    let mut partial = !sw.errors.is_empty();
    for e in &sw.errors {
        notes.push(e.clone());
    }
    write_branches(config, &p, &sw.branches, "", out)?;

    // analyze every f1 = 0 crossing, constants included
    let newton = NewtonSettings {
        tol_residual: settings.newton.tol_residual,
        ..NewtonSettings::default()
    };
    let mut reports = Vec::new();
    for (bi, b) in sw.branches.iter().enumerate() {
        for (ci, pt) in b.zero_crossings().iter().enumerate() {
            let refined = match refine_f1zero_solution(&p, &pt.u, &newton) {
                Ok(u) => u,
                Err(e) => {
                    partial = true;
                    notes.push(format!("branch {bi} crossing {ci}: refine failed: {e}"));
                    continue;
                }
            };
            match analyze_crossing(&p, &refined) {
                Ok(rep) => {
                    let nm = norms(&refined);
                    let mut json = rep.to_json(config.experiment.write_fields);
                    json["branch"] = serde_json::json!(bi);
                    json["crossing"] = serde_json::json!(ci);
                    json["norm_sq_over_2pi"] =
                        serde_json::json!(nm.l2 * nm.l2 / std::f64::consts::TAU);
                    json["nonconstant"] = serde_json::json!(nm.l2_deriv > 1e-3 * nm.l2);
                    reports.push(json);
                }
                Err(e) => {
                    partial = true;
                    notes.push(format!("branch {bi} crossing {ci}: analysis failed: {e}"));
                }
            }
        }
    }
    out.write(
        "bifurcation_reports.json",
        serde_json::to_vec_pretty(&serde_json::Value::Array(reports))
            .unwrap()
            .as_slice(),
    )?;
    Ok(partial)
}

fn run_sign_map(config: &ExperimentConfig, out: &mut OutputCollector) -> Result<bool, RunError> {
    let (t_min, t_max) = (
        config.experiment.t_min.unwrap_or(-0.999),
        config.experiment.t_max.unwrap_or(0.999),
    );
    let samples = config.experiment.t_samples.unwrap_or(2001);
    let grid: Vec<f64> = (0..samples)
        .map(|i| t_min + (t_max - t_min) * i as f64 / (samples - 1) as f64)
        .collect();
    let pts = sign_map(
        config.model.f0,
        config.model.d,
        config.model.omega,
        config.model.k1,
        &grid,
    );
    let mut buf = Vec::new();
    response::write_sign_map_csv(&mut buf, &pts)?;
    out.write("sign_map.csv", &buf)?;
    Ok(false)
}

/// Multi-start Newton probe of the uniqueness region: random starts
/// inside the a-priori sup-norm ball.
pub struct MultiStartProbe {
    pub converged: usize,
    pub starts: usize,
    pub max_pairwise_linf: f64,
}

pub fn multi_start_uniqueness(
    p: &Params,
    n: usize,
    starts: usize,
    seed: u64,
) -> Result<MultiStartProbe, String> {
    let rep = compute_bounds(p, None).map_err(|e| e.to_string())?;
    let radius = rep.c.max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let newton = NewtonSettings::default();
    let mut solutions: Vec<PeriodicField> = Vec::new();
    for _ in 0..starts {
        let guess = PeriodicField::new(
            (0..n)
                .map(|_| {
                    let r = radius * rng.random_range(0.0..1.0);
                    let th = rng.random_range(0.0..std::f64::consts::TAU);
                    Complex::from_polar(r, th)
                })
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        if let Ok(sol) = newton_solve(p, &guess, &newton) {
            solutions.push(sol);
        }
    }
    let mut max_pairwise = 0.0f64;
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            let d = solutions[i]
                .values()
                .iter()
                .zip(solutions[j].values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            max_pairwise = max_pairwise.max(d);
        }
    }
    Ok(MultiStartProbe {
        converged: solutions.len(),
        starts,
        max_pairwise_linf: max_pairwise,
    })
}

fn run_bounds_report(
    config: &ExperimentConfig,
    out: &mut OutputCollector,
) -> Result<bool, RunError> {
    let p = config.params();
    let rep = compute_bounds(&p, None).map_err(|e| RunError::Numerical(e.to_string()))?;
    let uniq =
        bounds::uniqueness_classify(&p, None).map_err(|e| RunError::Numerical(e.to_string()))?;
    let coro = bounds::global_continuation_case(&p);
    let op_bound = bounds::operator_norm_bound(&p);
    let probe = match (config.experiment.starts, config.experiment.seed) {
        (Some(starts), seed) => {
            let pr = multi_start_uniqueness(&p, config.grid.n, starts, seed.unwrap_or(0))
                .map_err(RunError::Numerical)?;
            Some(serde_json::json!({
                "starts": pr.starts,
                "converged": pr.converged,
                "max_pairwise_linf": pr.max_pairwise_linf,
            }))
        }
        _ => None,
    };
    let json = serde_json::json!({
        "bounds": rep,
        "uniqueness": uniq,
        "global_continuation": coro,
        "operator_norm_bound": op_bound,
        "multi_start": probe,
    });
    out.write(
        "bounds.json",
        serde_json::to_vec_pretty(&json).unwrap().as_slice(),
    )?;
    Ok(false)
}

fn run_reproduce_fig(
    config: &ExperimentConfig,
    out: &mut OutputCollector,
    notes: &mut Vec<String>,
) -> Result<bool, RunError> {
    let target = config
        .experiment
        .target
        .as_deref()
        .ok_or_else(|| ConfigError("reproduce-fig requires experiment.target".into()))?;
    // canonical parameter sets of the reference computations
    let mut cfg = config.clone();
    cfg.model.d = -0.1;
    cfg.model.f0 = 2.0;
    cfg.model.k1 = 1;
    cfg.model.f1 = 0.0;
    match target {
        "fig2" => {
            cfg.model.omega = 1.0;
            let zetas: Vec<f64> = (0..10).map(|i| 2.4 + 0.2 * i as f64).collect();
            run_sweep(&cfg, Some(zetas), out, notes)
        }
        "fig5" => {
            cfg.model.omega = 1.0;
            run_sign_map(&cfg, out)
        }
        "fig6" => {
            cfg.model.omega = 0.0;
            let zetas = vec![2.7, 3.0, 3.3, 3.6, 3.9];
            run_sweep(&cfg, Some(zetas), out, notes)
        }
        other => Err(ConfigError(format!("unknown reproduce-fig target `{other}`")).into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LoopConnectivity {
    /// The loop through the middle constant returns at the lower one.
    Lower,
    /// The loop returns exclusively at the upper constant.
    Upper,
}

/// Which pair of constant solutions the `f₁` loop through the middle one
/// connects. Near the reconnection threshold the traced curve can visit
/// both partners; that regime is classified `Lower` so bisection brackets
/// the upper edge of the transition window.
pub fn loop_connectivity(
    p_template: &Params,
    zeta: f64,
    n: usize,
    settings: &ContinuationSettings,
) -> Result<LoopConnectivity, String> {
    let p = p_template.with_zeta(zeta).with_f1(0.0);
    let cons = solve_constants(zeta, p.f0);
    if cons.len() != 3 {
        return Err(format!(
            "predicate needs three constants at zeta {zeta}, found {}",
            cons.len()
        ));
    }
    let u = PeriodicField::constant(n, cons[1].u0).map_err(|e| e.to_string())?;
    let branch = trace_branch(&p, &u, settings).map_err(|e| e.to_string())?;
    if !branch.closed {
        return Err(format!(
            "no loop at zeta {zeta}: termination {:?}",
            branch.termination
        ));
    }
    let (mut saw_lower, mut saw_upper) = (false, false);
    for pt in branch.zero_crossings() {
        let nm = norms(&pt.u);
        if nm.l2_deriv > 1e-3 * nm.l2 {
            continue; // nonconstant crossing: not an endpoint label
        }
        let rho = pt.norm_sq_over_2pi;
        if (rho - cons[0].rho).abs() < 1e-4 {
            saw_lower = true;
        } else if (rho - cons[2].rho).abs() < 1e-4 {
            saw_upper = true;
        }
    }
    if saw_lower {
        Ok(LoopConnectivity::Lower)
    } else if saw_upper {
        Ok(LoopConnectivity::Upper)
    } else {
        Err(format!(
            "loop at zeta {zeta} has no constant partner crossing"
        ))
    }
}

#[derive(Debug, serde::Serialize)]
pub struct ThresholdResult {
    pub lo: f64,
    pub hi: f64,
    pub evaluations: Vec<(f64, LoopConnectivity)>,
}

/// Bisect the loop-connectivity switch over a ζ bracket down to the
/// requested width.
pub fn locate_threshold(
    p_template: &Params,
    bracket: (f64, f64),
    width: f64,
    n: usize,
    settings: &ContinuationSettings,
) -> Result<ThresholdResult, String> {
    let (mut lo, mut hi) = bracket;
    if lo == hi {
        return Ok(ThresholdResult {
            lo,
            hi,
            evaluations: vec![],
        });
    }
    if lo > hi {
        return Err("bracket must satisfy lo <= hi".into());
    }
    let mut evaluations = Vec::new();
    let v_lo = loop_connectivity(p_template, lo, n, settings)?;
    evaluations.push((lo, v_lo));
    let v_hi = loop_connectivity(p_template, hi, n, settings)?;
    evaluations.push((hi, v_hi));
    if v_lo == v_hi {
        return Err(format!(
            "connectivity is {v_lo:?} at both bracket ends; no switch inside [{lo}, {hi}]"
        ));
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let v_mid = loop_connectivity(p_template, mid, n, settings)?;
        evaluations.push((mid, v_mid));
        if v_mid == v_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        lo,
        hi,
        evaluations,
    })
}

fn run_locate_threshold(
    config: &ExperimentConfig,
    out: &mut OutputCollector,
) -> Result<bool, RunError> {
    let lo = config
        .experiment
        .zeta_lo
        .ok_or_else(|| ConfigError("locate-threshold requires experiment.zeta_lo".into()))?;
    let hi = config
        .experiment
        .zeta_hi
        .ok_or_else(|| ConfigError("locate-threshold requires experiment.zeta_hi".into()))?;
    let width = config.experiment.width.unwrap_or(0.02);
    let settings = config.continuation_settings()?;
    let p = config.params();
    let result = locate_threshold(&p, (lo, hi), width, config.grid.n, &settings)
        .map_err(RunError::Numerical)?;
    out.write(
        "threshold.json",
        serde_json::to_vec_pretty(&result).unwrap().as_slice(),
    )?;
    Ok(false)
}
