//! Sampled-data closed loop: zero-order hold, ground-truth integration,
//! bounded measurement and actuation noise, and the three safety filters.

mod log;

pub use log::{FineRecord, MarginRecord, QpRecord, SimLog, StepRecord, StepTiming, Summary, Timing};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::controller::{make_constraint, solve_safety_qp, Constraint, QpResult};
use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::margin::{ball_box, check_initial_condition, compute_margin, MarginRequest, MarginResult};
use crate::reach::{reach_step, PolyField, ReachResult, Zonotope};
use crate::scalar::Scalar;
use crate::scenario::{InfeasiblePolicy, NoiseMode, Scenario, ScenarioConfig};

/// Which condition the filter enforces at each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    /// Continuous-time condition at the sample, no margin.
    Naive,
    /// Sampled-data margin, measurement and actuation taken as exact.
    Sdcbf,
    /// Sampled-data margin over the measurement ball, shrunk inputs.
    Usdcbf,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Naive, ControllerKind::Sdcbf, ControllerKind::Usdcbf];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Naive => "naive",
            ControllerKind::Sdcbf => "sdcbf",
            ControllerKind::Usdcbf => "usdcbf",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("controller", format!("unknown controller `{s}` (naive, sdcbf, usdcbf)")))
    }
}

/// Bounds and realization of the measurement error `d = x − x̂` and the
/// actuation error `e = u^r − u^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    pub eps_x: T,
    pub eps_u: T,
    pub mode: NoiseMode,
    pub seed: u64,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn none() -> Self {
        Self { eps_x: T::zero(), eps_u: T::zero(), mode: NoiseMode::None, seed: 0 }
    }

    /// The bounds, mode and seed a scenario file declares.
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self { eps_x: T::lit(cfg.noise.eps_x), eps_u: T::lit(cfg.system.eps_u), mode: cfg.noise.mode, seed: cfg.noise.seed }
    }

    /// Measurement and actuation streams, independent of each other.
    pub fn streams(&self) -> (ChaCha8Rng, ChaCha8Rng) {
        let mut meas = ChaCha8Rng::seed_from_u64(self.seed);
        meas.set_stream(1);
        let mut act = ChaCha8Rng::seed_from_u64(self.seed);
        act.set_stream(2);
        (meas, act)
    }
}

/// A drawn disturbance with its norm before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance<T> {
    pub value: Vec<T>,
    pub raw_norm: T,
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt()
}

/// Scales `v` into the closed `eps` ball.
fn clamp_to_ball<T: Scalar>(mut v: Vec<T>, eps: T) -> Vec<T> {
    for _ in 0..4 {
        let n = norm2(&v);
        if n <= eps {
            return v;
        }
        let s = (eps / n).next_down();
        v.iter_mut().for_each(|x| *x = *x * s);
    }
    vec![T::zero(); v.len()]
}

/// Uniform draw from the `eps` Euclidean ball in `dim` dimensions.
pub fn uniform_ball<T: Scalar>(rng: &mut ChaCha8Rng, dim: usize, eps: T) -> Vec<T> {
    if eps == T::zero() || dim == 0 {
        return vec![T::zero(); dim];
    }
    let dir: Vec<f64> = loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if g.iter().any(|v| *v != 0.0) {
            break g;
        }
    };
    let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = eps.as_f64() * rng.random_range(0.0f64..1.0).powf(1.0 / dim as f64);
    dir.iter().map(|v| T::lit(v / n * radius)).collect()
}

/// Draw along `-direction` (adversarial) or uniformly in the ball.
fn sample_bounded<T: Scalar>(mode: NoiseMode, eps: T, direction: &[T], rng: &mut ChaCha8Rng) -> Disturbance<T> {
    let dim = direction.len();
    let raw = match mode {
        NoiseMode::None => vec![T::zero(); dim],
        NoiseMode::Adversarial if eps > T::zero() && norm2(direction) > T::zero() => {
            let n = norm2(direction);
            direction.iter().map(|g| -eps * *g / n).collect()
        }
        NoiseMode::Adversarial | NoiseMode::UniformBall => uniform_ball(rng, dim, eps),
    };
    let raw_norm = norm2(&raw);
    Disturbance { value: clamp_to_ball(raw, eps), raw_norm }
}

/// Measurement error `d = x − x̂`. Adversarial mode places the estimate
/// up the barrier gradient, where the state looks safer than it is.
pub fn sample_measurement_noise<T: Scalar>(noise: &NoiseModel<T>, grad_h: &[T], rng: &mut ChaCha8Rng) -> Disturbance<T> {
    sample_bounded(noise.mode, noise.eps_x, grad_h, rng)
}

/// Actuation error `e = u^r − u^d`. Adversarial mode pushes against the
/// gradient of the tightest constraint.
pub fn sample_actuation_noise<T: Scalar>(noise: &NoiseModel<T>, row: &[T], rng: &mut ChaCha8Rng) -> Disturbance<T> {
    sample_bounded(noise.mode, noise.eps_u, row, rng)
}

fn rk4_step<T: Scalar>(field: &PolyField<T>, x: &[T], u: &[T], h: T) -> Result<Vec<T>> {
    let two = T::lit(2.0);
    let axpy = |a: &[T], k: &[T], s: T| -> Vec<T> { a.iter().zip(k).map(|(x, k)| *x + s * *k).collect() };
    let k1 = field.eval(x, u)?;
    let k2 = field.eval(&axpy(x, &k1, h / two), u)?;
    let k3 = field.eval(&axpy(x, &k2, h / two), u)?;
    let k4 = field.eval(&axpy(x, &k3, h), u)?;
    Ok((0..x.len()).map(|i| x[i] + h / T::lit(6.0) * (k1[i] + two * k2[i] + two * k3[i] + k4[i])).collect())
}

/// Classical Runge–Kutta with `u` held constant. Returns `substeps + 1`
/// points `(t, x(t))`, times relative to the start, the first being `(0, x)`.
pub fn integrate_step<T: Scalar>(field: &PolyField<T>, x: &[T], u: &[T], dt: T, substeps: usize) -> Result<Vec<(T, Vec<T>)>> {
    if substeps == 0 {
        return Err(Error::config("substeps", "must be at least 1"));
    }
    let h = dt / <T as Scalar>::from_usize(substeps);
    let mut out = Vec::with_capacity(substeps + 1);
    out.push((T::zero(), x.to_vec()));
    let mut cur = x.to_vec();
    for j in 1..=substeps {
        cur = rk4_step(field, &cur, u, h)?;
        let t = dt * <T as Scalar>::from_usize(j) / <T as Scalar>::from_usize(substeps);
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: t.as_f64() });
        }
        out.push((t, cur.clone()));
    }
    Ok(out)
}

/// Everything computed at one sample, exposed to audits.
pub struct StepAudit<'a, T: Scalar> {
    pub scenario: &'a Scenario<T>,
    pub kind: ControllerKind,
    pub k: usize,
    pub t: T,
    /// True state at the sample.
    pub x: &'a [T],
    pub x_hat: &'a [T],
    /// Initial set of the reach step.
    pub reach_x0: Option<&'a Zonotope<T>>,
    pub reach: Option<&'a ReachResult<T>>,
    /// Input set assumed by reach and margins.
    pub u_box: &'a IntervalVector<T>,
    /// One per barrier, for the margin-based filters.
    pub margins: &'a [MarginResult<T>],
    pub constraints: &'a [Constraint<T>],
    pub u_applied: &'a [T],
    /// True trajectory over the sampling interval, absolute times.
    pub fine: &'a [(T, Vec<T>)],
}

struct Filtered<T: Scalar> {
    reach_x0: Option<Zonotope<T>>,
    reach: Option<ReachResult<T>>,
    margins: Vec<MarginResult<T>>,
    constraints: Vec<Constraint<T>>,
    qp: QpResult<T>,
    timing: StepTiming,
}

fn filter_step<T: Scalar>(scn: &Scenario<T>, kind: ControllerKind, x_hat: &[T], u_nom: &[T]) -> Result<Filtered<T>> {
    let start = Instant::now();
    let sys = &scn.system;
    let u_box = sys.u_box();
    let u_center = u_box.midpoint();
    let (x0, u_eff) = match kind {
        ControllerKind::Naive => (None, u_box.clone()),
        ControllerKind::Sdcbf => (Some(Zonotope::point(x_hat)), u_box.clone()),
        ControllerKind::Usdcbf => {
            let eps_x = T::lit(scn.config.noise.eps_x);
            (Some(Zonotope::from_box(&ball_box(x_hat, eps_x))), sys.shrunk_u_box()?)
        }
    };
    let reach = match &x0 {
        Some(z) => Some(reach_step(sys.field(), z, u_box, &u_center, scn.dt, &scn.reach)?),
        None => None,
    };
    let reach_done = Instant::now();
    let eps_x = if kind == ControllerKind::Usdcbf { T::lit(scn.config.noise.eps_x) } else { T::zero() };
    let mut margins = Vec::new();
    let mut constraints = Vec::with_capacity(scn.barriers.len());
    for b in &scn.barriers {
        let phi = match &reach {
            Some(r) => {
                let req = MarginRequest {
                    xi: &b.xi,
                    x_anchor: x_hat,
                    u_center: &u_center,
                    dt: scn.dt,
                    eps_x,
                    order: scn.config.margin.taylor_order,
                };
                let m = compute_margin(&req, r, u_box, &scn.bnb)?;
                let phi = m.phi;
                margins.push(m);
                phi
            }
            None => T::zero(),
        };
        let c = make_constraint(&b.xi, x_hat, phi)?;
        let c = if kind == ControllerKind::Usdcbf && scn.config.filter.actuation_tightening { c.robust(sys.eps_u()) } else { c };
        constraints.push(c);
    }
    let margin_done = Instant::now();
    let qp = solve_safety_qp(u_nom, &constraints, &u_eff)?;
    let end = Instant::now();
    let timing = StepTiming {
        reach_s: (reach_done - start).as_secs_f64(),
        margin_s: (margin_done - reach_done).as_secs_f64(),
        qp_s: (end - margin_done).as_secs_f64(),
        total_s: (end - start).as_secs_f64(),
    };
    Ok(Filtered { reach_x0: x0, reach, margins, constraints, qp, timing })
}

fn gradient_of_tightest<T: Scalar>(scn: &Scenario<T>, x: &[T]) -> Vec<T> {
    let h = scn.barrier_values(x);
    let (i, _) = h.iter().enumerate().fold((0, T::infinity()), |best, (i, v)| if *v < best.1 { (i, *v) } else { best });
    let m = scn.space.n_inputs();
    let z: Vec<T> = x.iter().copied().chain(std::iter::repeat_n(T::zero(), m)).collect();
    let hb = scn.barriers[i].h();
    (0..x.len()).map(|j| hb.diff(j).eval_unchecked(&z)).collect()
}

fn saturate<T: Scalar>(u: &[T], b: &IntervalVector<T>) -> Vec<T> {
    u.iter().zip(b.iter()).map(|(v, iv)| iv.lo().max(v.min(iv.hi()))).collect()
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Runs one episode.
pub fn run_episode<T: Scalar>(scn: &Scenario<T>, kind: ControllerKind, noise: &NoiseModel<T>) -> Result<SimLog> {
    run_episode_with(scn, kind, noise, |_| {})
}

/// Runs one episode, passing every step to `observe`.
///
/// Refuses to start (`InitialCondition`) when a margin-based filter cannot
/// certify `s_k >= 0` over the initial measurement ball. Infeasible filter
/// problems and divergence end the episode early; the log records why.
pub fn run_episode_with<T: Scalar>(
    scn: &Scenario<T>,
    kind: ControllerKind,
    noise: &NoiseModel<T>,
    mut observe: impl FnMut(&StepAudit<'_, T>),
) -> Result<SimLog> {
    let n = scn.space.n_states();
    let (mut meas_rng, mut act_rng) = noise.streams();
    let mut log = SimLog::new(scn, kind, noise);
    let mut x = scn.x0.clone();

    let d0 = sample_measurement_noise(noise, &gradient_of_tightest(scn, &x), &mut meas_rng);
    let mut pending_d = Some(d0);
    if kind != ControllerKind::Naive {
        let x_hat0: Vec<T> = (0..n).map(|i| x[i] - pending_d.as_ref().expect("drawn above").value[i]).collect();
        let eps = if kind == ControllerKind::Usdcbf { T::lit(scn.config.noise.eps_x) } else { T::zero() };
        for b in &scn.barriers {
            if !check_initial_condition(&b.s_chain, &x_hat0, eps, &scn.bnb) {
                return Err(Error::InitialCondition(format!(
                    "barrier `{}`: s-chain not certified nonnegative on the initial measurement ball",
                    b.name
                )));
            }
        }
    }

    log.push_fine(T::zero(), &x, &scn.barrier_values(&x));
    for k in 0..scn.steps {
        let t_k = scn.dt * <T as Scalar>::from_usize(k);
        let d = match pending_d.take() {
            Some(d) => d,
            None => sample_measurement_noise(noise, &gradient_of_tightest(scn, &x), &mut meas_rng),
        };
        let x_hat: Vec<T> = (0..n).map(|i| x[i] - d.value[i]).collect();
        let u_nom = saturate(&scn.nominal.eval(&x_hat, t_k), scn.system.u_box());
        let filtered = match filter_step(scn, kind, &x_hat, &u_nom) {
            Ok(f) => f,
            Err(e) => {
                log.terminate("reach-failed", format!("step {k}: {e}"));
                break;
            }
        };
        let qp = &filtered.qp;
        if !qp.feasible {
            log.infeasible_steps += 1;
        }
        let abort = !qp.feasible && kind != ControllerKind::Naive && scn.config.filter.on_infeasible == InfeasiblePolicy::Abort;
        let u_d = qp.u_star.clone();
        let tight = filtered
            .constraints
            .iter()
            .min_by(|a, b| a.value(&u_d).partial_cmp(&b.value(&u_d)).unwrap_or(std::cmp::Ordering::Equal))
            .map(|c| c.row.clone())
            .unwrap_or_else(|| vec![T::zero(); u_d.len()]);
        let e = sample_actuation_noise(noise, &tight, &mut act_rng);
        let u_r: Vec<T> = u_d.iter().zip(&e.value).map(|(a, b)| *a + *b).collect();

        let record = StepRecord {
            k,
            t: t_k.as_f64(),
            x: to_f64(&x),
            x_hat: to_f64(&x_hat),
            d: to_f64(&d.value),
            d_raw_norm: d.raw_norm.as_f64(),
            u_nom: to_f64(&u_nom),
            u_d: to_f64(&u_d),
            u_r: to_f64(&u_r),
            e: to_f64(&e.value),
            e_raw_norm: e.raw_norm.as_f64(),
            margins: filtered
                .margins
                .iter()
                .map(|m| MarginRecord {
                    phi: m.phi.as_f64(),
                    remainder_lo: m.remainder_lo.as_f64(),
                    poly_lo: m.poly_lo.as_f64(),
                    nodes: m.nodes,
                    converged: m.converged,
                })
                .collect(),
            constraint_values: filtered.constraints.iter().map(|c| c.value(&u_d).as_f64()).collect(),
            qp: QpRecord {
                feasible: qp.feasible,
                active_set: qp.active_set.clone(),
                kkt_residual: qp.kkt_residual.as_f64(),
                max_violation: qp.max_violation.as_f64(),
                iterations: qp.iterations,
            },
            reach_hull: filtered.reach.as_ref().map(|r| r.hull.iter().map(|iv| (iv.lo().as_f64(), iv.hi().as_f64())).collect()),
            timing: filtered.timing,
        };
        log.push_step(record);
        if abort {
            log.terminate("infeasible", format!("step {k}: no admissible input (largest violation {})", qp.max_violation));
            break;
        }

        let fine_rel = match integrate_step(scn.system.field(), &x, &u_r, scn.dt, scn.substeps) {
            Ok(f) => f,
            Err(e) => {
                log.terminate("diverged", format!("step {k}: {e}"));
                break;
            }
        };
        let fine: Vec<(T, Vec<T>)> = fine_rel.into_iter().map(|(t, xs)| (t_k + t, xs)).collect();
        for (t, xs) in &fine[1..] {
            log.push_fine(*t, xs, &scn.barrier_values(xs));
        }
        log.complete_step();
        observe(&StepAudit {
            scenario: scn,
            kind,
            k,
            t: t_k,
            x: &x,
            x_hat: &x_hat,
            reach_x0: filtered.reach_x0.as_ref(),
            reach: filtered.reach.as_ref(),
            u_box: scn.system.u_box(),
            margins: &filtered.margins,
            constraints: &filtered.constraints,
            u_applied: &u_r,
            fine: &fine,
        });
        x = fine.last().expect("at least one substep").1.clone();
    }
    log.finish();
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{MultiPoly, VarSpace};
    use crate::scenario::ScenarioConfig;

    fn field(n: usize, m: usize, f: &[&str], g: &[&[&str]]) -> PolyField<f64> {
        let s = VarSpace::standard(n, m);
        let p = |t: &str| MultiPoly::parse(&s, t).unwrap();
        PolyField::new(&s, f.iter().map(|t| p(t)).collect(), g.iter().map(|r| r.iter().map(|t| p(t)).collect()).collect()).unwrap()
    }

    #[test]
    fn zero_dynamics_stay_put() {
        let f = field(2, 1, &["0", "0"], &[&["0"], &["0"]]);
        let out = integrate_step(&f, &[0.3, -0.7], &[0.5], 0.02, 100).unwrap();
        assert_eq!(out.len(), 101);
        assert!(out.iter().all(|(_, x)| x == &[0.3, -0.7]));
        assert_eq!(out[100].0, 0.02);
    }

    #[test]
    fn double_integrator_closed_form() {
        let f = field(
            6,
            3,
            &["x4", "x5", "x6", "0", "0", "0"],
            &[&["0", "0", "0"], &["0", "0", "0"], &["0", "0", "0"], &["1", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]],
        );
        let out = integrate_step(&f, &[0.0; 6], &[1.0, 0.0, 0.0], 0.02, 100).unwrap();
        let x = &out.last().unwrap().1;
        let expect = [0.0002, 0.0, 0.0, 0.02, 0.0, 0.0];
        for (a, b) in x.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-12, "{x:?}");
        }
    }

    #[test]
    fn cubic_drift_is_converged_in_substeps() {
        let f = field(2, 1, &["-0.6*x1 - x2", "x1^3"], &[&["0"], &["x2"]]);
        let coarse = integrate_step(&f, &[-2.0, 1.0], &[0.0], 0.02, 100).unwrap();
        let fine = integrate_step(&f, &[-2.0, 1.0], &[0.0], 0.02, 1000).unwrap();
        for (a, b) in coarse.last().unwrap().1.iter().zip(&fine.last().unwrap().1) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let f = field(1, 1, &["x1^2"], &[&["0"]]);
        assert!(matches!(integrate_step(&f, &[1.0], &[0.0], 2.0, 10), Err(Error::Divergence { .. })));
    }

    #[test]
    fn measurement_noise_bounds_and_mean() {
        let noise = NoiseModel { eps_x: 0.1, eps_u: 0.0, mode: NoiseMode::UniformBall, seed: 4 };
        let (mut rng, _) = noise.streams();
        let dim = 2;
        let draws = 100_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            let d = sample_measurement_noise(&noise, &[1.0, 0.0], &mut rng);
            let n = norm2(&d.value);
            assert!(n <= 0.1);
            sum += n;
        }
        // E‖d‖ = eps · dim / (dim + 1) for the uniform ball.
        let expect = 0.1 * dim as f64 / (dim as f64 + 1.0);
        assert!((sum / draws as f64 - expect).abs() <= 0.05 * expect);
    }

    #[test]
    fn zero_radius_and_adversarial_noise() {
        let (mut rng, _) = NoiseModel::<f64>::none().streams();
        let zero = NoiseModel { eps_x: 0.0, eps_u: 0.0, mode: NoiseMode::UniformBall, seed: 0 };
        assert_eq!(sample_measurement_noise(&zero, &[1.0, 2.0], &mut rng).value, vec![0.0, 0.0]);
        let adv = NoiseModel { eps_x: 0.1, eps_u: 0.05, mode: NoiseMode::Adversarial, seed: 0 };
        assert_eq!(sample_measurement_noise(&adv, &[1.0, 0.0], &mut rng).value, vec![-0.1, 0.0]);
        let d = sample_measurement_noise(&adv, &[0.0, 0.0], &mut rng);
        assert!(norm2(&d.value) <= 0.1);
        assert_eq!(sample_actuation_noise(&adv, &[0.0, -2.0], &mut rng).value, vec![0.0, 0.05]);
    }

    #[test]
    fn clamping_enforces_the_bound() {
        let v = clamp_to_ball(vec![0.3, 0.4], 0.1);
        assert!(norm2(&v) <= 0.1);
        assert_eq!(clamp_to_ball(vec![0.03, 0.04], 0.1), vec![0.03, 0.04]);
    }

    #[test]
    fn frozen_system_episode_is_constant() {
        let mut cfg = ScenarioConfig::bundled("example1").unwrap();
        cfg.system.f = vec!["0".into(), "0".into()];
        cfg.system.g = vec![vec!["0".into()], vec!["x2".into()]];
        cfg.nominal = crate::scenario::NominalConfig::Expression { u: vec!["0".into()] };
        cfg.sampling.horizon = 0.2;
        cfg.noise.eps_x = 0.0;
        cfg.system.eps_u = 0.0;
        let scn = cfg.compile::<f64>().unwrap();
        let log = run_episode(&scn, ControllerKind::Naive, &NoiseModel::none()).unwrap();
        assert_eq!(log.summary.status, "completed");
        assert!(log.fine.iter().all(|r| r.x == vec![-2.0, 1.0] && r.h == vec![2.0]));
        assert_eq!(log.fine.len(), 10 * 100 + 1);
        assert_eq!(log.summary.min_h, vec![2.0]);
    }

    #[test]
    fn zero_order_hold_and_noise_bounds_in_episode() {
        let mut cfg = ScenarioConfig::bundled("example3").unwrap();
        cfg.sampling.horizon = 0.4;
        let scn = cfg.compile::<f64>().unwrap();
        let noise = NoiseModel { eps_x: 0.02, eps_u: 0.01, mode: NoiseMode::UniformBall, seed: 3 };
        let mut held = Vec::new();
        let log = run_episode_with(&scn, ControllerKind::Usdcbf, &noise, |a| held.push(a.u_applied.to_vec())).unwrap();
        assert_eq!(log.steps.len(), 20);
        assert_eq!(held.len(), 20);
        for (s, u) in log.steps.iter().zip(&held) {
            assert_eq!(&s.u_r, u);
            assert!(norm2(&s.d) <= 0.02 && norm2(&s.e) <= 0.01);
            assert!(s.qp.feasible);
            assert!(scn.system.shrunk_u_box().unwrap().contains_point(&s.u_d));
        }
        let again = run_episode(&scn, ControllerKind::Usdcbf, &noise).unwrap();
        assert_eq!(log.summary_json(), again.summary_json());
        for i in 0..scn.barriers.len() {
            let fine_min = log.fine.iter().map(|r| r.h[i]).fold(f64::INFINITY, f64::min);
            assert_eq!(log.summary.min_h[i], fine_min);
        }
    }

    #[test]
    fn episode_refused_on_unsafe_start() {
        let mut cfg = ScenarioConfig::bundled("example3").unwrap();
        cfg.initial_state = vec![0.0; 6];
        let scn = cfg.compile::<f64>().unwrap();
        let noise = NoiseModel { eps_x: 0.02, eps_u: 0.01, mode: NoiseMode::UniformBall, seed: 1 };
        assert!(matches!(run_episode(&scn, ControllerKind::Usdcbf, &noise), Err(Error::InitialCondition(_))));
    }

    #[test]
    fn controller_names_parse() {
        for k in ControllerKind::ALL {
            assert_eq!(k.as_str().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("cbf".parse::<ControllerKind>().is_err());
    }
}
