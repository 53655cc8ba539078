//! JSON run configurations, command dispatch and artifact writing for the
//! `magdrift` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::{self, ActionGrid};
use crate::asymptotics::{self, SweepPlan};
use crate::dynamics::{self, PhasePoint, Trajectory};
use crate::model::catalog::{self, CatalogParams};
use crate::model::{self, DomainBox, HalfSpace, ModelSpec, OperatorKind};
use crate::poly::ScalarSpec;
use crate::spectral::{self, ApproxMethod, CountResult, ExactMethod, IsotropicParams, SecondTermOptions};
use crate::{Error, Result};

pub const COMMANDS: [&str; 10] =
    ["simulate", "driftline", "magline", "guiding", "billiard", "action", "classify", "count", "sweep", "check"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Driftline,
    Magline,
    Guiding,
    Billiard,
    Action,
    Classify,
    Count,
    Sweep,
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineModel {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    /// Inverse metric rows; Euclidean when absent.
    #[serde(default)]
    pub metric: Option<Vec<Vec<ScalarSpec>>>,
    pub vecpot: Vec<ScalarSpec>,
    pub scalpot: ScalarSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Catalog(String),
    Inline(InlineModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateSource {
    Named(String),
    Plan(SweepPlan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub model: Option<ModelSource>,
    #[serde(default)]
    pub params: CatalogParams,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub h: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub kind: OperatorKind,
    #[serde(default)]
    pub domain: Option<DomainBox>,
    #[serde(default)]
    pub boundary: Option<HalfSpace>,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Recorded in the manifest; every computation here is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Canonical momentum `ξ` at `x0`.
    #[serde(default)]
    pub xi0: Option<Vec<f64>>,
    /// Kinetic momentum `ξ − μV(x0)`; used when `xi0` is absent.
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_reflections")]
    pub n_reflections: usize,
    /// Cells per axis of `x′` grids.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
    #[serde(default)]
    pub gammabar: Option<Vec<f64>>,
    #[serde(default)]
    pub h_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub mu_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub template: Option<TemplateSource>,
    #[serde(default)]
    pub second_term: Option<SecondTermOptions>,
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub record_timing: bool,
}

fn one() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-9
}
fn default_reflections() -> usize {
    100
}
fn default_grid() -> usize {
    64
}
fn default_eps() -> f64 {
    1e-3
}

/// Parse and validate a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
    match obj.get("command") {
        None => return Err(Error::Config("missing key \"command\"".into())),
        Some(Value::String(c)) if COMMANDS.contains(&c.as_str()) => {}
        Some(other) => return Err(Error::Config(format!("unknown command {other}"))),
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    if !(cfg.mu >= 1.0) {
        return Err(Error::Config(format!("mu must be at least 1, got {}", cfg.mu)));
    }
    if !(cfg.h > 0.0 && cfg.h <= 1.0) {
        return Err(Error::Config(format!("h must lie in (0, 1], got {}", cfg.h)));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {}", cfg.tol)));
    }
    if cfg.grid < 2 {
        return Err(Error::Config(format!("grid must be at least 2, got {}", cfg.grid)));
    }
    Ok(cfg)
}

fn model_name(cfg: &RunConfig) -> Option<&str> {
    match &cfg.model {
        Some(ModelSource::Catalog(n)) => Some(n),
        Some(ModelSource::Inline(m)) => m.name.as_deref(),
        None => None,
    }
}

/// Instantiate the configured model with `μ`, `h`, `τ`, kind and overrides.
pub fn build_model(cfg: &RunConfig) -> Result<ModelSpec> {
    let mut m = match &cfg.model {
        None => return Err(Error::Config("missing key \"model\"".into())),
        Some(ModelSource::Catalog(name)) => catalog::build(name, &cfg.params)?,
        Some(ModelSource::Inline(spec)) => {
            if !(spec.dim == 2 || spec.dim == 3) || spec.vecpot.len() != spec.dim {
                return Err(Error::InvalidModel("inline model needs dim 2 or 3 and dim vector-potential components".into()));
            }
            let mut vecpot = [crate::poly::ScalarMap::zero(), crate::poly::ScalarMap::zero(), crate::poly::ScalarMap::zero()];
            for (slot, s) in vecpot.iter_mut().zip(&spec.vecpot) {
                *slot = s.build()?;
            }
            let domain = DomainBox::new([-1.0; 3], [1.0; 3]);
            let mut m =
                ModelSpec::euclidean(spec.name.as_deref().unwrap_or("inline"), spec.dim, vecpot, spec.scalpot.build()?, domain);
            if let Some(rows) = &spec.metric {
                if rows.len() != spec.dim || rows.iter().any(|r| r.len() != spec.dim) {
                    return Err(Error::InvalidModel("metric must be dim x dim".into()));
                }
                for (j, row) in rows.iter().enumerate() {
                    for (k, s) in row.iter().enumerate() {
                        m.metric[j][k] = s.build()?;
                    }
                }
            }
            m
        }
    };
    m = m.with_params(cfg.mu, cfg.h, cfg.tau).with_kind(cfg.kind);
    if let Some(d) = cfg.domain {
        m.domain = d;
    }
    if let Some(b) = cfg.boundary {
        m.boundary = Some(b);
    }
    if let Some(c0) = cfg.c0 {
        m.thresholds.c0 = c0;
    }
    m.validate()?;
    Ok(m)
}

fn vec3(v: &[f64], what: &str) -> Result<[f64; 3]> {
    if v.is_empty() || v.len() > 3 {
        return Err(Error::Config(format!("{what} needs 2 or 3 components")));
    }
    let mut out = [0.0; 3];
    out[..v.len()].copy_from_slice(v);
    Ok(out)
}

fn initial_point(cfg: &RunConfig, m: &ModelSpec, x_default: [f64; 3], p_default: [f64; 3]) -> Result<PhasePoint> {
    let x = cfg.x0.as_deref().map(|v| vec3(v, "x0")).transpose()?.unwrap_or(x_default);
    if let Some(xi) = &cfg.xi0 {
        return Ok(PhasePoint::new(x, vec3(xi, "xi0")?));
    }
    let p = cfg.p0.as_deref().map(|v| vec3(v, "p0")).transpose()?.unwrap_or(p_default);
    Ok(PhasePoint::from_kinetic(m, x, p))
}

fn f(v: f64) -> String {
    format!("{v}")
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn trajectory_csv(a: &mut Artifacts, traj: &Trajectory) -> Result<()> {
    a.csv(
        "trajectory.csv",
        &["t", "x1", "x2", "x3", "xi1", "xi2", "xi3", "energy"],
        traj.times.iter().zip(&traj.points).zip(&traj.energies).map(|((t, p), e)| {
            vec![f(*t), f(p.x[0]), f(p.x[1]), f(p.x[2]), f(p.xi[0]), f(p.xi[1]), f(p.xi[2]), f(*e)]
        }),
    )
}

fn x_box(m: &ModelSpec) -> ([f64; 2], [f64; 2]) {
    ([m.domain.lo[0], m.domain.lo[1]], [m.domain.hi[0], m.domain.hi[1]])
}

fn r_values(cfg: &RunConfig, m: &ModelSpec) -> Result<Vec<f64>> {
    if let Some(r) = &cfg.r {
        return Ok(r.clone());
    }
    let (lo, hi) = x_box(m);
    let rb = spectral::max_rbar(m, lo, hi, cfg.grid + 1)?;
    Ok(spectral::model_ladder(m, rb).r_values)
}

fn action_grid_for(cfg: &RunConfig, m: &ModelSpec) -> Result<ActionGrid> {
    let (lo, hi) = x_box(m);
    // per-node failures become flags, but a field that is nowhere vertical
    // makes the whole grid meaningless
    let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    if let Err(e @ Error::FiberNotVertical { .. }) = action::fiber_profile(m, centre) {
        return Err(e);
    }
    let step = 1e-4 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    // an even cell count keeps the box centre on a node
    let n = cfg.grid + 1;
    action::action_grid(m, lo, hi, [n, n], &r_values(cfg, m)?, step)
}

fn action_csv(a: &mut Artifacts, g: &ActionGrid) -> Result<()> {
    let mut rows = Vec::with_capacity(g.eta.len());
    for (ri, r) in g.r_values.iter().enumerate() {
        for (i, x1) in g.x1.iter().enumerate() {
            for (j, x2) in g.x2.iter().enumerate() {
                let k = g.index(ri, i, j);
                let (d, hs) = (g.grad_eta[k], g.hess_eta[k]);
                rows.push(vec![
                    f(*x1),
                    f(*x2),
                    f(*r),
                    f(g.eta[k]),
                    f(g.period[k]),
                    f(d[0]),
                    f(d[1]),
                    f(hs[0][0]),
                    f(hs[0][1]),
                    f(hs[1][1]),
                    g.flags[k].to_string(),
                ]);
            }
        }
    }
    a.csv("action.csv", &["x1", "x2", "r", "eta", "T", "deta1", "deta2", "h11", "h12", "h22", "flags"], rows)
}

fn counts_csv(a: &mut Artifacts, rows: &[CountResult], timing: Option<f64>) -> Result<()> {
    let mut header =
        vec!["mu", "h", "tau", "kind", "n_exact", "n_approx", "remainder", "method_exact", "method_approx"];
    if timing.is_some() {
        header.push("wall_time_s");
    }
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                f(r.mu),
                f(r.h),
                f(r.tau),
                label(&r.kind),
                r.n_exact.to_string(),
                f(r.n_approx),
                f(r.remainder),
                label(&r.method_exact),
                label(&r.method_approx),
            ];
            if let Some(t) = timing {
                v.push(f(t));
            }
            v
        })
        .collect();
    a.csv("counts.csv", &header, out)
}

/// Serialised name of an enum value, e.g. `second_term/fiber_contour`.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(Value::Object(m)) => m.iter().map(|(k, v)| format!("{k}/{}", v.as_str().unwrap_or_default())).collect(),
        _ => String::new(),
    }
}

fn count_command(cfg: &RunConfig, a: &mut Artifacts, timing: Option<f64>) -> Result<Value> {
    let name = model_name(cfg).unwrap_or("");
    let p = &cfg.params;
    let row = match name {
        "ex-13-6-41" => {
            let (l, k) = (p.l.unwrap_or(1.0), p.k.unwrap_or(1.0));
            let n = spectral::lattice_count(l, k, cfg.mu, cfg.h, cfg.tau)?;
            let w = spectral::lattice_weyl(l, k, cfg.mu, cfg.h, cfg.tau);
            CountResult::new(cfg.mu, cfg.h, cfg.tau, cfg.kind, n, w, ExactMethod::Lattice, ApproxMethod::LatticeWeyl)
        }
        "ex-13-6-34-ii" => {
            let (l1, l2) = (p.l1.unwrap_or(1.0), p.l2.unwrap_or(1.0));
            if l1 != l2 {
                return Err(Error::Config("exact counts need l1 = l2 (rotational symmetry)".into()));
            }
            let ip = IsotropicParams { k: p.k.unwrap_or(1.0), l: l1.sqrt(), mu: cfg.mu, h: cfg.h, tau: cfg.tau, kind: cfg.kind };
            let opts = cfg.second_term.unwrap_or_default();
            let n = spectral::isotropic_exact_count(&ip)?;
            let approx = asymptotics::isotropic_second_term(&ip, &opts)?;
            CountResult::new(
                cfg.mu,
                cfg.h,
                cfg.tau,
                cfg.kind,
                n,
                approx,
                ExactMethod::IsotropicRadial,
                ApproxMethod::SecondTerm(opts.method),
            )
        }
        other => {
            return Err(Error::Config(format!(
                "count needs model \"ex-13-6-41\" or \"ex-13-6-34-ii\", got {other:?}"
            )))
        }
    };
    counts_csv(a, std::slice::from_ref(&row), timing)?;
    Ok(serde_json::to_value(&row)?)
}

fn sweep_plan(cfg: &RunConfig) -> Result<SweepPlan> {
    let p = &cfg.params;
    let (k, l) = (p.k.unwrap_or(1.0), p.l.unwrap_or(1.0));
    let mut plan = match &cfg.template {
        None => return Err(Error::Config("sweep needs key \"template\"".into())),
        Some(TemplateSource::Plan(plan)) => return Ok(plan.clone()),
        Some(TemplateSource::Named(n)) => match n.as_str() {
            "lattice" => SweepPlan::lattice(l, k, cfg.tau),
            "pauli" => SweepPlan::pauli(
                k,
                l,
                cfg.tau,
                cfg.mu * cfg.h,
                (3..=6).map(|e| 0.5f64.powi(e)).collect(),
                cfg.second_term.unwrap_or_default().method,
            ),
            "schrodinger" => SweepPlan::schrodinger(k, l, cfg.tau, cfg.h, (0..5).map(|e| 2f64.powi(e)).collect()),
            other => return Err(Error::Config(format!("unknown sweep template {other:?}"))),
        },
    };
    if let Some(h) = &cfg.h_grid {
        plan.h_grid = h.clone();
    }
    if let Some(mu) = &cfg.mu_grid {
        plan.mu_grid = mu.clone();
    }
    Ok(plan)
}

/// Run the configured command, writing artifacts into `out`. Returns the
/// JSON summary echoed into the manifest.
pub fn dispatch(cfg: &RunConfig, out: &Path) -> Result<(Value, Vec<String>)> {
    fs::create_dir_all(out)?;
    let mut a = Artifacts { dir: out.to_path_buf(), files: Vec::new() };
    let summary = match cfg.command {
        Command::Simulate => {
            let m = build_model(cfg)?;
            let p0 = initial_point(cfg, &m, [0.0; 3], [1.0, 0.0, 0.0])?;
            let traj = dynamics::integrate_flow(&m, p0, cfg.t_end.unwrap_or(2.0), cfg.tol)?;
            trajectory_csv(&mut a, &traj)?;
            json!({ "samples": traj.times.len(), "energy_drift": traj.energy_drift() })
        }
        Command::Guiding => {
            let m = build_model(cfg)?;
            let p0 = initial_point(cfg, &m, [0.0; 3], [1.0, 0.0, 0.0])?;
            let traj = dynamics::integrate_flow(&m, p0, cfg.t_end.unwrap_or(2.0), cfg.tol)?;
            let gc = dynamics::guiding_center(&traj, &m)?;
            trajectory_csv(&mut a, &traj)?;
            a.csv(
                "guiding.csv",
                &["t", "c1", "c2", "c3"],
                gc.window_times.iter().zip(&gc.centers).map(|(t, c)| vec![f(*t), f(c[0]), f(c[1]), f(c[2])]),
            )?;
            let x = p0.x;
            let pred = dynamics::predicted_drift_velocity(&m, &x)?;
            let s = json!({
                "period_meas": gc.period_meas,
                "predicted_period": dynamics::predicted_period(&m, &x),
                "drift_velocity_meas": gc.drift_velocity_meas,
                "drift_speed_meas": gc.drift_speed_meas,
                "predicted_drift": pred,
                "predicted_drift_speed": crate::linalg::norm(&pred, m.dim),
                "gyrations": gc.gyrations,
                "energy_drift": traj.energy_drift(),
            });
            a.json("guiding.json", &s)?;
            s
        }
        Command::Driftline => {
            let m = build_model(cfg)?;
            let x = cfg.x0.as_deref().map(|v| vec3(v, "x0")).transpose()?.unwrap_or([0.5, 0.5, 0.0]);
            let c = dynamics::integrate_drift_line_2d(&m, [x[0], x[1]], cfg.t_end.unwrap_or(10.0))?;
            let q: Vec<f64> = c.points.iter().map(|p| m.vf(p, m.tau)).collect::<Result<_>>()?;
            a.csv(
                "driftline.csv",
                &["t", "x1", "x2", "q"],
                c.times.iter().zip(&c.points).zip(&q).map(|((t, p), q)| vec![f(*t), f(p[0]), f(p[1]), f(*q)]),
            )?;
            let spread = q.iter().map(|v| (v - q[0]).abs()).fold(0.0, f64::max);
            json!({ "samples": c.points.len(), "level_spread": spread, "terminated_at": c.terminated_at })
        }
        Command::Magline => {
            let m = build_model(cfg)?;
            let x = cfg.x0.as_deref().map(|v| vec3(v, "x0")).transpose()?.unwrap_or([0.5, 0.0, 0.0]);
            let c = dynamics::integrate_magnetic_line_3d(&m, x, cfg.t_end.unwrap_or(5.0), None)?;
            a.csv(
                "magline.csv",
                &["t", "x1", "x2", "x3"],
                c.times.iter().zip(&c.points).map(|(t, p)| vec![f(*t), f(p[0]), f(p[1]), f(p[2])]),
            )?;
            json!({ "samples": c.points.len() })
        }
        Command::Billiard => {
            let m = build_model(cfg)?;
            let p0 = initial_point(cfg, &m, [0.0, 0.0, 1.0], [1.0, 0.0, -0.5])?;
            let traj = dynamics::billiard_flow(&m, p0, cfg.n_reflections, cfg.tol, cfg.t_end.unwrap_or(1e3))?;
            a.csv(
                "events.csv",
                &[
                    "t_hit", "rho", "sigma", "rho_out", "sigma_out", "xbar1", "xbar2", "xbar3", "xbar1_out", "xbar2_out",
                    "xbar3_out", "l_cos", "xbar2_jump",
                ],
                traj.events.iter().map(|e| {
                    vec![
                        f(e.t_hit),
                        f(e.rho),
                        f(e.sigma),
                        f(e.rho_out),
                        f(e.sigma_out),
                        f(e.xbar[0]),
                        f(e.xbar[1]),
                        f(e.xbar[2]),
                        f(e.xbar_out[0]),
                        f(e.xbar_out[1]),
                        f(e.xbar_out[2]),
                        f(e.l_cos),
                        f(e.xbar2_jump()),
                    ]
                }),
            )?;
            let mut s = json!({ "reflections": traj.events.len(), "energy_drift": traj.energy_drift() });
            if let Ok(w) = dynamics::wobble_statistics(&traj) {
                s["total_xbar2_shift"] = json!(w.total_xbar2_shift);
            }
            s
        }
        Command::Action => {
            let m = build_model(cfg)?;
            let g = action_grid_for(cfg, &m)?;
            action_csv(&mut a, &g)?;
            json!({ "r_values": g.r_values, "cells": g.eta.len() })
        }
        Command::Classify => {
            let m = build_model(cfg)?;
            let g = action_grid_for(cfg, &m)?;
            let rep = action::classify_nondegeneracy(&g, cfg.eps);
            let mut zones = Vec::new();
            for &gb in cfg.gammabar.as_deref().unwrap_or(&[]) {
                for &r in &g.r_values {
                    let z = action::critical_zone_measure(&m, r, gb)?;
                    zones.push(json!({ "r": r, "gammabar": gb, "area": z.area, "open_area": z.open_area, "degenerate": z.degenerate }));
                }
            }
            let s = json!({ "verdicts": rep, "critical_zones": zones });
            a.json("classify.json", &s)?;
            s
        }
        Command::Check => {
            let m = build_model(cfg)?;
            let n = cfg.grid.min(32) + 1;
            let grid = m.domain.grid([n, n, if m.dim == 3 { n } else { 1 }]);
            let rep = model::check_conditions(&m, &grid, cfg.eps)?;
            let mut s = json!({ "conditions": rep });
            if m.dim == 3 {
                let g = model::BoxGrid::with_step(m.domain.lo, m.domain.hi, 1.0 / 16.0, 3);
                s["solenoidal_residual"] = json!(model::solenoidal_residual(&m, &g));
            }
            a.json("conditions.json", &s)?;
            s
        }
        Command::Count => count_command(cfg, &mut a, None)?,
        Command::Sweep => {
            let plan = sweep_plan(cfg)?;
            let rep = asymptotics::run_sweep(&plan)?;
            counts_csv(&mut a, &rep.rows, None)?;
            a.json("sweep.json", &rep)?;
            json!({ "verdict": rep.verdict, "fitted_slope": rep.fitted_slope, "stderr": rep.stderr })
        }
    };
    Ok((summary, a.files))
}

/// Run one invocation end to end and return the process exit status.
/// A manifest is written to the output directory whatever the outcome;
/// `out` overrides the configured directory, which defaults to `out`.
pub fn run(command: &str, config_path: &Path, out: Option<&Path>) -> i32 {
    let start = Instant::now();
    let text = fs::read_to_string(config_path);
    let echo: Value = text.as_ref().ok().and_then(|t| serde_json::from_str(t).ok()).unwrap_or(Value::Null);
    let result = text
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))
        .and_then(|t| parse_config(&t))
        .and_then(|cfg| {
            let name = serde_json::to_value(cfg.command)?;
            if name.as_str() != Some(command) {
                return Err(Error::Config(format!("command line says {command:?} but the config says {name}")));
            }
            Ok(cfg)
        });
    let dir: PathBuf = match (out, &result) {
        (Some(o), _) => o.to_path_buf(),
        (None, Ok(RunConfig { output: Some(o), .. })) => o.clone(),
        _ => PathBuf::from("out"),
    };
    let timing = result.as_ref().map(|c| c.record_timing).unwrap_or(false);
    let outcome = result.and_then(|cfg| dispatch(&cfg, &dir));
    let (code, status) = match &outcome {
        Ok(_) => (0, json!("ok")),
        Err(e) => (e.exit_code(), json!(e.to_string())),
    };
    let mut manifest = json!({
        "command": command,
        "config": echo,
        "version": env!("CARGO_PKG_VERSION"),
        "exit_code": code,
        "status": status,
    });
    if let Ok((summary, files)) = &outcome {
        manifest["summary"] = summary.clone();
        manifest["outputs"] = json!(files);
    }
    if timing {
        manifest["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    }
    if fs::create_dir_all(&dir).is_ok() {
        if let Ok(text) = serde_json::to_string_pretty(&manifest) {
            let _ = fs::write(dir.join("manifest.json"), text + "\n");
        }
    }
    if let Err(e) = &outcome {
        eprintln!("magdrift: {e}");
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(r#"{"command":"guiding","model":"ex-13-6-3-i","mu":32,"h":0.01}"#).unwrap();
        assert_eq!(c.command, Command::Guiding);
        assert_eq!(c.tol, 1e-9);
        assert_eq!(c.grid, 64);
        assert_eq!(c.model, Some(ModelSource::Catalog("ex-13-6-3-i".into())));
    }

    #[test]
    fn schema_errors() {
        let e = parse_config(r#"{"command":"fly"}"#).unwrap_err();
        assert!(e.to_string().contains("unknown command"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = parse_config(r#"{"command":"count","bogus":1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        assert!(parse_config(r#"{"command":"count","mu":0.5}"#).is_err());
        assert!(parse_config(r#"{"command":"count","h":1.5}"#).is_err());
        assert!(parse_config("[1]").is_err());
    }

    #[test]
    fn inline_model() {
        let c = parse_config(
            r#"{"command":"check","model":{"dim":2,"vecpot":[{"poly":[[-0.5,0,1,0]]},{"poly":[[0.5,1,0,0]]}],"scalpot":{"poly":[[1,0,1,0]]}}}"#,
        )
        .unwrap();
        let m = build_model(&c).unwrap();
        assert_eq!(m.dim, 2);
        assert!((m.scalar_intensity(&[0.3, 0.1, 0.0]) - 1.0).abs() < 1e-14);
    }
}
