//! Episode records and their CSV / JSON serialization.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{ControllerKind, NoiseModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginRecord {
    pub phi: f64,
    pub remainder_lo: f64,
    pub poly_lo: f64,
    pub nodes: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpRecord {
    pub feasible: bool,
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub iterations: usize,
}

/// Wall-clock seconds spent in each stage of one filter evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepTiming {
    pub reach_s: f64,
    pub margin_s: f64,
    pub qp_s: f64,
    pub total_s: f64,
}

/// One sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// `x − x̂` after clamping, and its norm before.
    pub d: Vec<f64>,
    pub d_raw_norm: f64,
    pub u_nom: Vec<f64>,
    pub u_d: Vec<f64>,
    pub u_r: Vec<f64>,
    /// `u^r − u^d` after clamping, and its norm before.
    pub e: Vec<f64>,
    pub e_raw_norm: f64,
    /// Empty for the naive filter.
    pub margins: Vec<MarginRecord>,
    /// `row · u^d + rhs` per barrier.
    pub constraint_values: Vec<f64>,
    pub qp: QpRecord,
    pub reach_hull: Option<Vec<(f64, f64)>>,
    pub timing: StepTiming,
}

/// One ground-truth integration point.
#[derive(Debug, Clone, PartialEq)]
pub struct FineRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub h: Vec<f64>,
}

/// Deterministic outcome of an episode; contains no wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub controller: String,
    pub seed: u64,
    pub noise_mode: String,
    pub eps_x: f64,
    pub eps_u: f64,
    pub dt: f64,
    pub horizon: f64,
    pub steps_planned: usize,
    pub steps_completed: usize,
    pub barriers: Vec<String>,
    /// Minimum of each `h_i` over the fine grid.
    pub min_h: Vec<f64>,
    pub min_h_time: Vec<f64>,
    pub min_h_overall: f64,
    pub violation_tol: f64,
    /// Per barrier: `min_h < −violation_tol`.
    pub violations: Vec<bool>,
    pub violation: bool,
    pub infeasible_steps: usize,
    /// Per barrier, smallest margin used; empty for the naive filter.
    pub min_phi: Vec<f64>,
    pub max_kkt_residual: f64,
    /// `completed`, `infeasible`, `diverged` or `reach-failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Per-step compute time statistics, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub steps: usize,
    pub mean_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
    pub mean_reach_s: f64,
    pub mean_margin_s: f64,
    pub mean_qp_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub fine: Vec<FineRecord>,
    pub summary: Summary,
    pub infeasible_steps: usize,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl SimLog {
    pub(crate) fn new<T: Scalar>(scn: &Scenario<T>, kind: ControllerKind, noise: &NoiseModel<T>) -> Self {
        let nb = scn.barriers.len();
        let summary = Summary {
            scenario: scn.config.name.clone(),
            controller: kind.to_string(),
            seed: noise.seed,
            noise_mode: noise.mode.to_string(),
            eps_x: noise.eps_x.as_f64(),
            eps_u: noise.eps_u.as_f64(),
            dt: scn.dt.as_f64(),
            horizon: scn.config.sampling.horizon,
            steps_planned: scn.steps,
            steps_completed: 0,
            barriers: scn.barriers.iter().map(|b| b.name.clone()).collect(),
            min_h: vec![f64::INFINITY; nb],
            min_h_time: vec![0.0; nb],
            min_h_overall: f64::INFINITY,
            violation_tol: scn.config.filter.violation_tol,
            violations: vec![false; nb],
            violation: false,
            infeasible_steps: 0,
            min_phi: Vec::new(),
            max_kkt_residual: 0.0,
            status: "completed".into(),
            message: None,
        };
        Self {
            state_names: scn.space.state_names().to_vec(),
            input_names: scn.space.input_names().to_vec(),
            steps: Vec::new(),
            fine: Vec::new(),
            summary,
            infeasible_steps: 0,
        }
    }

    pub(crate) fn push_fine<T: Scalar>(&mut self, t: T, x: &[T], h: &[T]) {
        self.fine.push(FineRecord {
            t: t.as_f64(),
            x: x.iter().map(|v| v.as_f64()).collect(),
            h: h.iter().map(|v| v.as_f64()).collect(),
        });
    }

    pub(crate) fn push_step(&mut self, rec: StepRecord) {
        self.steps.push(rec);
    }

    /// Marks the latest sampling interval as integrated.
    pub(crate) fn complete_step(&mut self) {
        self.summary.steps_completed += 1;
    }

    pub(crate) fn terminate(&mut self, status: &str, message: String) {
        self.summary.status = status.into();
        self.summary.message = Some(message);
    }

    pub(crate) fn finish(&mut self) {
        let s = &mut self.summary;
        for r in &self.fine {
            for (i, h) in r.h.iter().enumerate() {
                if *h < s.min_h[i] {
                    s.min_h[i] = *h;
                    s.min_h_time[i] = r.t;
                }
            }
        }
        s.min_h_overall = s.min_h.iter().copied().fold(f64::INFINITY, f64::min);
        s.violations = s.min_h.iter().map(|h| *h < -s.violation_tol).collect();
        s.violation = s.violations.iter().any(|v| *v);
        s.infeasible_steps = self.infeasible_steps;
        if let Some(first) = self.steps.first().filter(|r| !r.margins.is_empty()) {
            let mut min_phi: Vec<f64> = first.margins.iter().map(|m| m.phi).collect();
            for r in &self.steps {
                for (acc, m) in min_phi.iter_mut().zip(&r.margins) {
                    *acc = acc.min(m.phi);
                }
            }
            s.min_phi = min_phi;
        }
        s.max_kkt_residual = self.steps.iter().map(|r| r.qp.kkt_residual).fold(0.0, f64::max);
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary is serializable") + "\n"
    }

    pub fn timing(&self) -> Timing {
        let mut totals: Vec<f64> = self.steps.iter().map(|r| r.timing.total_s).collect();
        totals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = self.steps.len().max(1) as f64;
        let mean = |f: fn(&StepTiming) -> f64| self.steps.iter().map(|r| f(&r.timing)).sum::<f64>() / n;
        Timing {
            steps: self.steps.len(),
            mean_s: mean(|t| t.total_s),
            p50_s: percentile(&totals, 50.0),
            p95_s: percentile(&totals, 95.0),
            max_s: totals.last().copied().unwrap_or(0.0),
            mean_reach_s: mean(|t| t.reach_s),
            mean_margin_s: mean(|t| t.margin_s),
            mean_qp_s: mean(|t| t.qp_s),
        }
    }

    pub fn timing_json(&self) -> String {
        serde_json::to_string_pretty(&self.timing()).expect("timing is serializable") + "\n"
    }

    /// Header: `t`, state names, barrier names. Times in seconds.
    pub fn write_trajectory_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain(self.state_names.iter().cloned())
            .chain(self.summary.barriers.iter().map(|b| format!("h_{b}")))
            .collect();
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.fine {
            let row: Vec<String> =
                std::iter::once(r.t).chain(r.x.iter().copied()).chain(r.h.iter().copied()).map(|v| v.to_string()).collect();
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn steps_header(&self) -> Vec<String> {
        let mut h = vec!["k".to_string(), "t".to_string()];
        for prefix in ["x", "xhat", "d"] {
            h.extend(self.state_names.iter().map(|s| format!("{prefix}_{s}")));
        }
        for prefix in ["unom", "ud", "ur", "e"] {
            h.extend(self.input_names.iter().map(|s| format!("{prefix}_{s}")));
        }
        for b in &self.summary.barriers {
            for prefix in ["phi", "remainder_lo", "poly_lo", "nodes", "constraint"] {
                h.push(format!("{prefix}_{b}"));
            }
        }
        h.extend(
            ["feasible", "active_set", "kkt_residual", "qp_iterations", "reach_s", "margin_s", "qp_s", "total_s"]
                .iter()
                .map(|s| s.to_string()),
        );
        h
    }

    /// One row per sampling instant; times in seconds, `active_set`
    /// semicolon-separated.
    pub fn write_steps_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.steps_header()).map_err(csv_err)?;
        let s = |v: f64| v.to_string();
        for r in &self.steps {
            let mut row = vec![r.k.to_string(), s(r.t)];
            for v in [&r.x, &r.x_hat, &r.d, &r.u_nom, &r.u_d, &r.u_r, &r.e] {
                row.extend(v.iter().map(|x| s(*x)));
            }
            for (i, c) in r.constraint_values.iter().enumerate() {
                match r.margins.get(i) {
                    Some(m) => row.extend([s(m.phi), s(m.remainder_lo), s(m.poly_lo), m.nodes.to_string()]),
                    None => row.extend(["0".into(), String::new(), String::new(), "0".into()]),
                }
                row.push(s(*c));
            }
            let active: Vec<String> = r.qp.active_set.iter().map(|a| a.to_string()).collect();
            row.extend([
                r.qp.feasible.to_string(),
                active.join(";"),
                s(r.qp.kkt_residual),
                r.qp.iterations.to_string(),
                s(r.timing.reach_s),
                s(r.timing.margin_s),
                s(r.timing.qp_s),
                s(r.timing.total_s),
            ]);
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `trajectory.csv`, `steps.csv`, `summary.json` and `timing.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_trajectory_csv(fs::File::create(dir.join("trajectory.csv"))?)?;
        self.write_steps_csv(fs::File::create(dir.join("steps.csv"))?)?;
        fs::write(dir.join("summary.json"), self.summary_json())?;
        fs::write(dir.join("timing.json"), self.timing_json())?;
        Ok(())
    }
}
