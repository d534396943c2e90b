//! Scenario runner behind the `sdcbf` binary: flag overrides, single runs,
//! static validation and parameter sweeps.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use sdcbf::controller::Gain;
use sdcbf::margin::initial_condition_bounds;
use sdcbf::scenario::ScenarioConfig;
use sdcbf::sim::{run_episode, ControllerKind, NoiseModel, SimLog, Summary, Timing};
use sdcbf::{Error, Result};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

/// Errors that stem from the scenario rather than from running it.
pub fn is_config_error(e: &Error) -> bool {
    !matches!(e, Error::InitialCondition(_) | Error::Divergence { .. } | Error::Convergence(_))
}

/// Scalar settings a flag may replace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub eps_x: Option<f64>,
    pub eps_u: Option<f64>,
    pub rate: Option<f64>,
    pub taylor_order: Option<u32>,
    pub pop_budget: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(v) = self.seed {
            cfg.noise.seed = v;
        }
        if let Some(v) = self.eps_x {
            cfg.noise.eps_x = v;
        }
        if let Some(v) = self.eps_u {
            cfg.system.eps_u = v;
        }
        if let Some(v) = self.taylor_order {
            cfg.margin.taylor_order = v;
        }
        if let Some(v) = self.pop_budget {
            cfg.margin.bnb_budget = v;
        }
        if let Some(v) = self.rate {
            cfg.set_rate(v)?;
        }
        Ok(())
    }
}

/// The scalar field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    EpsX,
    EpsU,
    Rate,
    Seed,
    TaylorOrder,
    PopBudget,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::EpsX, Axis::EpsU, Axis::Rate, Axis::Seed, Axis::TaylorOrder, Axis::PopBudget];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::EpsX => "eps-x",
            Axis::EpsU => "eps-u",
            Axis::Rate => "rate",
            Axis::Seed => "seed",
            Axis::TaylorOrder => "taylor-order",
            Axis::PopBudget => "pop-budget",
        }
    }

    /// The override that sets this axis to `value`; integer axes reject
    /// fractional or negative values.
    pub fn overrides(self, value: f64) -> Result<Overrides> {
        let int = || -> Result<u64> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(Error::Config { field: self.as_str().into(), message: format!("{value} is not a non-negative integer") })
            }
        };
        let mut o = Overrides::default();
        match self {
            Axis::EpsX => o.eps_x = Some(value),
            Axis::EpsU => o.eps_u = Some(value),
            Axis::Rate => o.rate = Some(value),
            Axis::Seed => o.seed = Some(int()?),
            Axis::TaylorOrder => o.taylor_order = Some(int()? as u32),
            Axis::PopBudget => o.pop_budget = Some(int()? as usize),
        }
        Ok(o)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Axis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown sweep axis `{s}` (expected one of eps-x, eps-u, rate, seed, taylor-order, pop-budget)"))
    }
}

/// Loads a scenario by path or bundled name and applies the overrides.
pub fn load_config(scenario: &str, overrides: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

/// A non-naive run fails when it leaves the safe set, cannot solve its
/// filter problem at some step, or stops early. The naive filter is expected
/// to violate, so its runs never fail.
pub fn run_failed(kind: ControllerKind, s: &Summary) -> bool {
    kind != ControllerKind::Naive && (s.violation || s.infeasible_steps > 0 || s.status != "completed")
}

/// Outcome of one episode written to disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub kind: ControllerKind,
    pub dir: PathBuf,
    pub summary: Summary,
    pub timing: Timing,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        run_failed(self.kind, &self.summary)
    }
}

/// Compiles, simulates and writes the artifacts of one episode into `out`.
pub fn run_to_dir(cfg: &ScenarioConfig, kind: ControllerKind, out: &Path) -> Result<RunOutcome> {
    let scn = cfg.compile::<f64>()?;
    let log: SimLog = run_episode(&scn, kind, &NoiseModel::from_config(cfg))?;
    log.write_dir(out)?;
    Ok(RunOutcome { kind, dir: out.to_path_buf(), timing: log.timing(), summary: log.summary })
}

/// One line per barrier plus the overall status.
pub fn describe_run(r: &RunOutcome) -> String {
    let s = &r.summary;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} / {}: status {}, {} of {} steps, {} infeasible",
        s.scenario, s.controller, s.status, s.steps_completed, s.steps_planned, s.infeasible_steps
    );
    for (i, name) in s.barriers.iter().enumerate() {
        let flag = if s.violations[i] { "  VIOLATION" } else { "" };
        let _ = writeln!(out, "  {name}: min h = {:.6e} at t = {:.3}{flag}", s.min_h[i], s.min_h_time[i]);
    }
    if let Some(m) = &s.message {
        let _ = writeln!(out, "  note: {m}");
    }
    let _ = writeln!(out, "  per-step compute: p50 {:.3e} s, p95 {:.3e} s", r.timing.p50_s, r.timing.p95_s);
    let _ = write!(out, "  artifacts: {}", r.dir.display());
    out
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub subject: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub scenario: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    fn push(&mut self, subject: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check { subject: subject.into(), ok, detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.scenario)?;
        for c in &self.checks {
            writeln!(f, "  [{}] {}: {}", if c.ok { "ok" } else { "FAIL" }, c.subject, c.detail)?;
        }
        write!(f, "{}", if self.ok() { "valid" } else { "invalid" })
    }
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", items.join(", "))
}

/// Static checks without running an episode: parsing, relative degree and
/// gains per barrier, the initial certificate and the shrunk input set.
/// Never fails; problems are recorded in the report.
pub fn validate(scenario: &str, overrides: &Overrides) -> ValidationReport {
    let mut rep = ValidationReport { scenario: scenario.to_string(), checks: Vec::new() };
    let cfg = match load_config(scenario, overrides) {
        Ok(c) => c,
        Err(e) => {
            rep.push("config", false, e.to_string());
            return rep;
        }
    };
    rep.scenario = cfg.name.clone();
    let scn = match cfg.compile::<f64>() {
        Ok(s) => s,
        Err(e @ Error::InfeasibleInputSet { .. }) => {
            rep.push("config", true, "parsed");
            rep.push("input set", false, format!("InfeasibleInputSet: {e}"));
            return rep;
        }
        Err(e) => {
            rep.push("config", false, e.to_string());
            return rep;
        }
    };
    rep.push("config", true, format!("{} states, {} inputs, {} barriers", scn.space.n_states(), scn.space.n_inputs(), scn.barriers.len()));
    match scn.system.shrunk_u_box() {
        Ok(b) => {
            let lo = b.lower();
            let hi = b.upper();
            let sides: Vec<String> = lo.iter().zip(&hi).map(|(l, h)| format!("[{l}, {h}]")).collect();
            rep.push("input set", true, format!("U shrunk by eps_u = {} is {}", cfg.system.eps_u, sides.join(" x ")));
        }
        Err(e) => rep.push("input set", false, format!("InfeasibleInputSet: {e}")),
    }
    for b in &scn.barriers {
        let r = b.relative_degree;
        let gain = match b.spec.gain() {
            Gain::Gamma(g) => format!("gamma = {g}"),
            Gain::Chain { a, lambdas } => format!("a = {}, lambda = {}", list(a), list(lambdas)),
        };
        rep.push(format!("barrier {}", b.name), true, format!("relative degree r = {r}, {gain}"));
        let bounds = initial_condition_bounds(&b.s_chain, &scn.x0, cfg.noise.eps_x, &scn.bnb);
        let ok = bounds.iter().all(|v| *v >= 0.0);
        let shown: Vec<String> = bounds.iter().enumerate().map(|(k, v)| format!("s{k} >= {v:.6e}")).collect();
        rep.push(
            format!("barrier {} initial", b.name),
            ok,
            format!(
                "s-chain over the eps_x = {} box at x0 {}: {}",
                cfg.noise.eps_x,
                if ok { "nonnegative" } else { "not certified" },
                shown.join(", ")
            ),
        );
    }
    rep
}

/// One cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: f64,
    pub kind: ControllerKind,
}

/// Result of one sweep cell; `Err` carries the message of a run that could
/// not start.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cell: SweepCell,
    pub outcome: std::result::Result<RunOutcome, String>,
}

impl SweepResult {
    pub fn failed(&self) -> bool {
        match &self.outcome {
            Ok(r) => r.failed(),
            Err(_) => self.cell.kind != ControllerKind::Naive,
        }
    }
}

fn value_label(v: f64) -> String {
    format!("{v}")
}

/// Validates every cell first so no run starts on a broken grid, then runs
/// the cross product `values x kinds` on a pool of `workers` threads.
/// Each cell writes into `out/<axis>-<value>/<controller>`.
pub fn sweep(
    cfg: &ScenarioConfig,
    axis: Axis,
    values: &[f64],
    kinds: &[ControllerKind],
    out: &Path,
    workers: usize,
) -> Result<Vec<SweepResult>> {
    if values.is_empty() {
        return Err(Error::Config { field: "values".into(), message: "sweep needs at least one value".into() });
    }
    if kinds.is_empty() {
        return Err(Error::Config { field: "controllers".into(), message: "sweep needs at least one controller".into() });
    }
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        axis.overrides(v)?.apply(&mut c)?;
        c.compile::<f64>()?;
        configs.push(c);
    }
    let cells: Vec<(usize, SweepCell)> = values
        .iter()
        .enumerate()
        .flat_map(|(i, &value)| kinds.iter().map(move |&kind| (i, SweepCell { value, kind })))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let results = pool.install(|| {
        cells
            .into_par_iter()
            .map(|(i, cell)| {
                let dir = out.join(format!("{}-{}", axis, value_label(cell.value))).join(cell.kind.as_str());
                let outcome = run_to_dir(&configs[i], cell.kind, &dir).map_err(|e| e.to_string());
                SweepResult { cell, outcome }
            })
            .collect::<Vec<_>>()
    });
    write_comparison(&out.join("comparison.csv"), &cfg.name, axis, &results)?;
    Ok(results)
}

pub const COMPARISON_HEADER: [&str; 17] = [
    "scenario",
    "axis",
    "value",
    "controller",
    "status",
    "seed",
    "eps_x",
    "eps_u",
    "dt",
    "steps_completed",
    "steps_planned",
    "min_h",
    "violation",
    "infeasible_steps",
    "min_phi",
    "p95_s",
    "dir",
];

/// `comparison.csv`: one row per cell in grid order.
pub fn write_comparison(path: &Path, scenario: &str, axis: Axis, results: &[SweepResult]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COMPARISON_HEADER)?;
    for r in results {
        let head = [scenario.to_string(), axis.to_string(), value_label(r.cell.value), r.cell.kind.to_string()];
        let tail: Vec<String> = match &r.outcome {
            Ok(o) => {
                let s = &o.summary;
                let min_phi = s.min_phi.iter().copied().fold(f64::INFINITY, f64::min);
                vec![
                    s.status.clone(),
                    s.seed.to_string(),
                    s.eps_x.to_string(),
                    s.eps_u.to_string(),
                    s.dt.to_string(),
                    s.steps_completed.to_string(),
                    s.steps_planned.to_string(),
                    s.min_h_overall.to_string(),
                    s.violation.to_string(),
                    s.infeasible_steps.to_string(),
                    if min_phi.is_finite() { min_phi.to_string() } else { String::new() },
                    o.timing.p95_s.to_string(),
                    o.dir.display().to_string(),
                ]
            }
            Err(msg) => {
                let mut v = vec![format!("error: {msg}")];
                v.resize(13, String::new());
                v
            }
        };
        w.write_record(head.iter().chain(&tail))?;
    }
    w.flush()?;
    Ok(())
}
