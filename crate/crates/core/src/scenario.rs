//! Declarative experiment descriptions (TOML) and their compiled form.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::{Barrier, CbfSpec, ControlAffineSystem};
use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::margin::BnbOptions;
use crate::poly::{MultiPoly, VarSpace};
use crate::reach::{PolyField, ReachOptions};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub initial_state: Vec<f64>,
    pub system: SystemConfig,
    pub barriers: Vec<BarrierConfig>,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub nominal: NominalConfig,
    #[serde(default)]
    pub margin: MarginConfig,
    #[serde(default)]
    pub filter: FilterConfig,
}

/// `ẋ = f(x) + g(x) u` with `u ∈ [u_min, u_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub f: Vec<String>,
    /// Row `i` holds `g_i1 .. g_im`.
    pub g: Vec<Vec<String>>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    #[serde(default)]
    pub eps_u: f64,
}

/// Either `gamma` (relative degree one) or `a` and/or `lambdas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub h: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    UniformBall,
    Adversarial,
    None,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-ball" => Ok(Self::UniformBall),
            "adversarial" => Ok(Self::Adversarial),
            "none" => Ok(Self::None),
            _ => Err(Error::config("noise.mode", format!("unknown mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::UniformBall => "uniform-ball",
            Self::Adversarial => "adversarial",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub eps_x: f64,
    #[serde(default = "default_mode")]
    pub mode: NoiseMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_mode() -> NoiseMode {
    NoiseMode::UniformBall
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { eps_x: 0.0, mode: NoiseMode::UniformBall, seed: 0 }
    }
}

/// Nominal (possibly unsafe) feedback, always saturated to `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NominalConfig {
    /// One polynomial in the states per input.
    Expression { u: Vec<String> },
    /// `u = r̈ + kp (r − p) + kd (ṙ − v)` for states ordered as positions
    /// then velocities, one position per input.
    Tracking { kp: f64, kd: f64, reference: ReferenceConfig },
}

/// `rᵢ(t) = centerᵢ + amplitudeᵢ · sin(2π · harmonicᵢ · t / period + phaseᵢ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub period: f64,
    pub center: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub harmonic: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phase: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginConfig {
    #[serde(default = "default_order")]
    pub taylor_order: u32,
    #[serde(default = "default_tol")]
    pub bnb_tol: f64,
    #[serde(default = "default_budget")]
    pub bnb_budget: usize,
    #[serde(default = "default_expm")]
    pub expm_order: usize,
    #[serde(default = "default_cap")]
    pub generator_cap: usize,
}

fn default_order() -> u32 {
    2
}
fn default_tol() -> f64 {
    1e-6
}
fn default_budget() -> usize {
    20_000
}
fn default_expm() -> usize {
    6
}
fn default_cap() -> usize {
    64
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self {
            taylor_order: default_order(),
            bnb_tol: default_tol(),
            bnb_budget: default_budget(),
            expm_order: default_expm(),
            generator_cap: default_cap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfeasiblePolicy {
    /// Terminate the episode and record the failure.
    Abort,
    /// Apply the least-violation input and continue.
    LeastViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Tighten each uncertain constraint by `eps_u · ‖row‖₂` so it holds for
    /// the applied input, not only the requested one.
    #[serde(default = "default_true")]
    pub actuation_tightening: bool,
    #[serde(default = "default_policy")]
    pub on_infeasible: InfeasiblePolicy,
    /// `min h < −violation_tol` counts as a violation.
    #[serde(default = "default_violation_tol")]
    pub violation_tol: f64,
}

fn default_true() -> bool {
    true
}
fn default_policy() -> InfeasiblePolicy {
    InfeasiblePolicy::Abort
}
fn default_violation_tol() -> f64 {
    1e-4
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { actuation_tightening: true, on_infeasible: InfeasiblePolicy::Abort, violation_tol: default_violation_tol() }
    }
}

const BUNDLED: [(&str, &str); 3] = [
    ("example1", include_str!("../scenarios/example1.cfg")),
    ("example2", include_str!("../scenarios/example2.cfg")),
    ("example3", include_str!("../scenarios/example3.cfg")),
];

/// Names of the scenarios shipped with the library.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Source text of a shipped scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".cfg").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == stem).map(|(_, s)| *s)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be non-negative and finite, got {v}")))
    }
}

fn expect_len(field: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::config(field, format!("expected {expected} entries, found {found}")))
    }
}

fn finite(field: &str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(Error::config(field, format!("non-finite value {x}"))),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "file".into());
            Error::config(location, e.message().to_string())
        })?;
        cfg.check_fields()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// A file path, or the name of a bundled scenario.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.exists() {
            return Self::from_path(path);
        }
        match bundled_source(path.file_name().and_then(|s| s.to_str()).unwrap_or(spec)) {
            Some(src) => Self::from_toml(src),
            None => Err(Error::Io(format!("{spec}: no such file or bundled scenario"))),
        }
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let src = bundled_source(name).ok_or_else(|| Error::config("scenario", format!("no bundled scenario `{name}`")))?;
        Self::from_toml(src)
    }

    /// Canonical serialization; `from_toml(to_toml())` reproduces `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// Number of sampling intervals in the horizon.
    pub fn steps(&self) -> usize {
        (self.sampling.horizon / self.sampling.dt).round() as usize
    }

    /// Sets the sampling interval to `1 / rate`.
    pub fn set_rate(&mut self, hz: f64) -> Result<()> {
        positive("rate", hz)?;
        self.sampling.dt = 1.0 / hz;
        self.check_fields()
    }

    /// Numeric checks that do not need the polynomial machinery.
    fn check_fields(&self) -> Result<()> {
        let s = &self.system;
        let (n, m) = (s.states.len(), s.inputs.len());
        if n == 0 {
            return Err(Error::config("system.states", "at least one state is required"));
        }
        if m == 0 {
            return Err(Error::config("system.inputs", "at least one input is required"));
        }
        expect_len("system.f", n, s.f.len())?;
        expect_len("system.g", n, s.g.len())?;
        for (i, row) in s.g.iter().enumerate() {
            expect_len(&format!("system.g[{i}]"), m, row.len())?;
        }
        expect_len("system.u_min", m, s.u_min.len())?;
        expect_len("system.u_max", m, s.u_max.len())?;
        finite("system.u_min", &s.u_min)?;
        finite("system.u_max", &s.u_max)?;
        for j in 0..m {
            if s.u_min[j] > s.u_max[j] {
                return Err(Error::config(format!("system.u_min[{j}]"), "lower bound exceeds upper bound"));
            }
        }
        non_negative("system.eps_u", s.eps_u)?;
        expect_len("initial_state", n, self.initial_state.len())?;
        finite("initial_state", &self.initial_state)?;
        if self.barriers.is_empty() {
            return Err(Error::config("barriers", "at least one barrier is required"));
        }
        for (i, b) in self.barriers.iter().enumerate() {
            let field = format!("barriers[{i}]");
            match (b.gamma, &b.a, &b.lambdas) {
                (Some(g), None, None) => positive(&format!("{field}.gamma"), g)?,
                (None, Some(_), _) | (None, None, Some(_)) => {}
                (None, None, None) => return Err(Error::config(field, "needs gamma, a or lambdas")),
                _ => return Err(Error::config(field, "gamma excludes a and lambdas")),
            }
        }
        positive("sampling.dt", self.sampling.dt)?;
        positive("sampling.horizon", self.sampling.horizon)?;
        if self.sampling.horizon < self.sampling.dt {
            return Err(Error::config("sampling.horizon", "must be at least one sampling interval"));
        }
        if self.sampling.substeps == 0 {
            return Err(Error::config("sampling.substeps", "must be at least 1"));
        }
        non_negative("noise.eps_x", self.noise.eps_x)?;
        match &self.nominal {
            NominalConfig::Expression { u } => expect_len("nominal.u", m, u.len())?,
            NominalConfig::Tracking { kp, kd, reference } => {
                if n != 2 * m {
                    return Err(Error::config("nominal", "tracking needs one position and one velocity per input"));
                }
                non_negative("nominal.kp", *kp)?;
                non_negative("nominal.kd", *kd)?;
                positive("nominal.reference.period", reference.period)?;
                expect_len("nominal.reference.center", m, reference.center.len())?;
                expect_len("nominal.reference.amplitude", m, reference.amplitude.len())?;
                expect_len("nominal.reference.harmonic", m, reference.harmonic.len())?;
                if !reference.phase.is_empty() {
                    expect_len("nominal.reference.phase", m, reference.phase.len())?;
                }
            }
        }
        let mc = &self.margin;
        if mc.taylor_order == 0 {
            return Err(Error::config("margin.taylor_order", "must be at least 1"));
        }
        positive("margin.bnb_tol", mc.bnb_tol)?;
        if mc.bnb_budget == 0 {
            return Err(Error::config("margin.bnb_budget", "must be at least 1"));
        }
        if mc.generator_cap < n {
            return Err(Error::config("margin.generator_cap", format!("must be at least the state dimension {n}")));
        }
        non_negative("filter.violation_tol", self.filter.violation_tol)?;
        Ok(())
    }

    /// Full validation: parses every expression and derives the barrier data.
    pub fn compile<T: Scalar>(&self) -> Result<Scenario<T>> {
        Scenario::new(self.clone())
    }
}

/// Nominal law in compiled form.
#[derive(Debug, Clone)]
pub enum Nominal<T: Scalar> {
    Expression(Vec<MultiPoly<T>>),
    Tracking { kp: T, kd: T, reference: ReferenceConfig },
}

impl<T: Scalar> Nominal<T> {
    /// Unsaturated nominal input at measured state `x` and time `t`.
    pub fn eval(&self, x: &[T], t: T) -> Vec<T> {
        match self {
            Nominal::Expression(u) => {
                let m = u.first().map_or(0, |p| p.space().n_inputs());
                let z: Vec<T> = x.iter().copied().chain(std::iter::repeat_n(T::zero(), m)).collect();
                u.iter().map(|p| p.eval_unchecked(&z)).collect()
            }
            Nominal::Tracking { kp, kd, reference } => {
                let m = reference.center.len();
                let t = t.as_f64();
                (0..m)
                    .map(|i| {
                        let w = std::f64::consts::TAU * reference.harmonic[i] / reference.period;
                        let arg = w * t + reference.phase.get(i).copied().unwrap_or(0.0);
                        let a = reference.amplitude[i];
                        let r = T::lit(reference.center[i] + a * arg.sin());
                        let rd = T::lit(a * w * arg.cos());
                        let rdd = T::lit(-a * w * w * arg.sin());
                        rdd + *kp * (r - x[i]) + *kd * (rd - x[m + i])
                    })
                    .collect()
            }
        }
    }
}

/// A validated scenario ready to simulate.
#[derive(Clone)]
pub struct Scenario<T: Scalar> {
    pub config: ScenarioConfig,
    pub space: Arc<VarSpace>,
    pub system: ControlAffineSystem<T>,
    pub barriers: Vec<Barrier<T>>,
    pub nominal: Nominal<T>,
    pub x0: Vec<T>,
    pub dt: T,
    pub steps: usize,
    pub substeps: usize,
    pub bnb: BnbOptions,
    pub reach: ReachOptions,
}

/// `x0` and a fixed scatter around it, for relative-degree cross-checks.
fn probe_points<T: Scalar>(x0: &[T]) -> Vec<Vec<T>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = vec![x0.to_vec()];
    for _ in 0..8 {
        out.push(x0.iter().map(|v| *v + T::lit(rng.random_range(-1.0..1.0))).collect());
    }
    out
}

fn parse_field<T: Scalar>(space: &Arc<VarSpace>, field: &str, text: &str) -> Result<MultiPoly<T>> {
    MultiPoly::parse(space, text).map_err(|e| Error::config(field, e.to_string()))
}

impl<T: Scalar> Scenario<T> {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.check_fields()?;
        let s = &config.system;
        let space = VarSpace::new(s.states.clone(), s.inputs.clone()).map_err(|e| Error::config("system", e.to_string()))?;
        let state_only = |field: &str, p: MultiPoly<T>| -> Result<MultiPoly<T>> {
            if p.input_degree() > 0 {
                return Err(Error::config(field, "must not depend on the inputs"));
            }
            Ok(p)
        };
        let f = s
            .f
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let field = format!("system.f[{i}]");
                state_only(&field, parse_field(&space, &field, t)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let g = s
            .g
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, t)| {
                        let field = format!("system.g[{i}][{j}]");
                        state_only(&field, parse_field(&space, &field, t)?)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let lit = |v: &[f64]| -> Vec<T> { v.iter().map(|x| T::lit(*x)).collect() };
        let field = PolyField::new(&space, f, g)?;
        let u_box = IntervalVector::from_bounds(&lit(&s.u_min), &lit(&s.u_max))?;
        let system = ControlAffineSystem::new(field, u_box, T::lit(s.eps_u))?;
        let x0 = lit(&config.initial_state);
        let probes = probe_points(&x0);
        let barriers = config
            .barriers
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let field = format!("barriers[{i}]");
                let h = state_only(&format!("{field}.h"), parse_field(&space, &format!("{field}.h"), &b.h)?)?;
                let spec = match (b.gamma, &b.a, &b.lambdas) {
                    (Some(g), _, _) => CbfSpec::from_gamma(h, T::lit(g)),
                    (None, Some(a), None) => CbfSpec::from_a(h, lit(a)),
                    (None, None, Some(l)) => CbfSpec::from_lambdas(h, lit(l)),
                    (None, Some(a), Some(l)) => CbfSpec::from_chain(h, lit(a), lit(l)),
                    (None, None, None) => unreachable!("checked above"),
                };
                let spec = spec.map_err(|e| Error::config(&field, e.to_string()))?;
                let name = b.name.clone().unwrap_or_else(|| format!("h{}", i + 1));
                Barrier::new(name, spec, &system, &probes).map_err(|e| match e {
                    Error::RelativeDegree(msg) => Error::RelativeDegree(format!("{field}: {msg}")),
                    other => Error::config(&field, other.to_string()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let nominal = match &config.nominal {
            NominalConfig::Expression { u } => Nominal::Expression(
                u.iter()
                    .enumerate()
                    .map(|(j, t)| {
                        let field = format!("nominal.u[{j}]");
                        state_only(&field, parse_field(&space, &field, t)?)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            NominalConfig::Tracking { kp, kd, reference } => {
                Nominal::Tracking { kp: T::lit(*kp), kd: T::lit(*kd), reference: reference.clone() }
            }
        };
        let mc = &config.margin;
        let bnb = BnbOptions { tol: mc.bnb_tol, budget: mc.bnb_budget, deadline: None };
        let reach = ReachOptions { expm_order: mc.expm_order, generator_cap: mc.generator_cap, ..ReachOptions::default() };
        Ok(Self {
            space,
            system,
            barriers,
            nominal,
            x0,
            dt: T::lit(config.sampling.dt),
            steps: config.steps(),
            substeps: config.sampling.substeps,
            bnb,
            reach,
            config,
        })
    }

    /// `h_i(x)` for every barrier.
    pub fn barrier_values(&self, x: &[T]) -> Vec<T> {
        let m = self.space.n_inputs();
        let z: Vec<T> = x.iter().copied().chain(std::iter::repeat_n(T::zero(), m)).collect();
        self.barriers.iter().map(|b| b.h().eval_unchecked(&z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_compile_and_round_trip() {
        for name in bundled_names() {
            let cfg = ScenarioConfig::bundled(name).unwrap();
            let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, again, "{name}");
            cfg.compile::<f64>().unwrap();
        }
    }

    #[test]
    fn bundled_parameters() {
        let e1 = ScenarioConfig::bundled("example1").unwrap();
        assert_eq!(e1.barriers[0].gamma, Some(3.0));
        assert_eq!((e1.sampling.dt, e1.sampling.horizon), (0.02, 10.0));
        assert_eq!(e1.initial_state, vec![-2.0, 1.0]);
        assert_eq!((e1.noise.eps_x, e1.system.eps_u), (0.1, 0.1));
        assert_eq!((e1.system.u_min.clone(), e1.system.u_max.clone()), (vec![-1.0], vec![1.0]));
        let s1 = e1.compile::<f64>().unwrap();
        assert_eq!(s1.barriers[0].relative_degree, 1);

        let e2 = ScenarioConfig::bundled("example2").unwrap();
        assert_eq!(e2.barriers[0].a, Some(vec![20.0, 100.0]));
        assert_eq!(e2.initial_state, vec![0.5, -1.0]);
        assert_eq!((e2.system.u_min.clone(), e2.system.u_max.clone()), (vec![-10.0], vec![10.0]));
        assert_eq!(e2.system.eps_u, 0.1);
        let s2 = e2.compile::<f64>().unwrap();
        assert_eq!(s2.barriers[0].relative_degree, 2);
        assert_eq!(s2.barriers[0].spec.lambdas(), vec![10.0, 10.0]);
        let u = s2.nominal.eval(&[0.2, 0.4], 0.0);
        assert!((u[0] + 0.9).abs() < 1e-15);

        let e3 = ScenarioConfig::bundled("example3").unwrap();
        assert_eq!((e3.noise.eps_x, e3.system.eps_u), (0.02, 0.01));
        let s3 = e3.compile::<f64>().unwrap();
        assert_eq!(s3.barriers.len(), 6);
        for b in &s3.barriers {
            assert_eq!(b.relative_degree, 2);
            assert_eq!(b.spec.a(), vec![6.0, 8.0]);
        }
        let h = s3.barrier_values(&[0.0; 6]);
        assert_eq!(h, vec![0.5, 0.5, 0.5, 0.5, 0.6, 0.0]);
    }

    #[test]
    fn validation_reports_the_field() {
        let base = ScenarioConfig::bundled("example1").unwrap();
        let mut c = base.clone();
        c.sampling.dt = 0.0;
        assert!(matches!(c.compile::<f64>(), Err(Error::Config { field, .. }) if field == "sampling.dt"));
        let mut c = base.clone();
        c.sampling.horizon = 0.01;
        assert!(matches!(c.compile::<f64>(), Err(Error::Config { field, .. }) if field == "sampling.horizon"));
        let mut c = base.clone();
        c.barriers[0].h = "x3 + 1".into();
        assert!(matches!(c.compile::<f64>(), Err(Error::Config { field, .. }) if field == "barriers[0].h"));
        let mut c = base.clone();
        c.system.eps_u = 0.9;
        assert!(matches!(c.compile::<f64>(), Err(Error::InfeasibleInputSet { .. })));
        let mut c = base.clone();
        c.barriers[0].a = Some(vec![1.0]);
        assert!(c.compile::<f64>().is_err());
        let bad = "name = 1";
        assert!(matches!(ScenarioConfig::from_toml(bad), Err(Error::Config { field, .. }) if field.starts_with("line")));
        let mut text = base.to_toml();
        text.push_str("\n[extra]\nkey = 1\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn rate_overrides_dt() {
        let mut c = ScenarioConfig::bundled("example3").unwrap();
        c.set_rate(100.0).unwrap();
        assert_eq!(c.sampling.dt, 0.01);
        assert_eq!(c.steps(), 2000);
        assert!(c.set_rate(0.0).is_err());
    }

    #[test]
    fn tracking_reference_feedforward() {
        let c = ScenarioConfig::bundled("example3").unwrap();
        let s = c.compile::<f64>().unwrap();
        let NominalConfig::Tracking { reference, .. } = &c.nominal else { panic!() };
        // On the reference with matching velocity the law returns r̈.
        let t = 1.3;
        let w: Vec<f64> = (0..3).map(|i| std::f64::consts::TAU * reference.harmonic[i] / reference.period).collect();
        let arg = |i: usize| w[i] * t + reference.phase.get(i).copied().unwrap_or(0.0);
        let x: Vec<f64> = (0..3)
            .map(|i| reference.center[i] + reference.amplitude[i] * arg(i).sin())
            .chain((0..3).map(|i| reference.amplitude[i] * w[i] * arg(i).cos()))
            .collect();
        let u = s.nominal.eval(&x, t);
        for i in 0..3 {
            let rdd = -reference.amplitude[i] * w[i] * w[i] * arg(i).sin();
            assert!((u[i] - rdd).abs() < 1e-12);
        }
    }
}
