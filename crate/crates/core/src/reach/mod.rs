//! One-step reachable tubes of polynomial control-affine systems.
//!
//! The field `F(x, u) = f(x) + g(x) u` is linearized at `(x*, u*)` with a
//! Lagrange remainder enclosed through an interval Hessian, giving the
//! differential inclusion `ẋ ∈ A(x − x*) + B(u − u*) + c + L`. The tube of
//! the inclusion over `[0, Δ]` is enclosed with a truncated, rigorously
//! bounded matrix exponential. In shifted coordinates `y = x − x*`:
//!
//! * homogeneous part: `CH(Y₀, [Φ]Y₀) ⊕ F·Y₀`, with `F` the curvature
//!   correction of the exponential over the interval;
//! * particular part: `Σᵢ [0, Δ^{i+1}/(i+1)!]·AⁱW` plus the series tail,
//!   where `W = B(U − u*) + c + L` may vary in time.
//!
//! The linearization box is found by a checked fixed point: the tube is
//! computed assuming the state stays in a seed box, and the seed is
//! accepted only if it contains the resulting tube.

mod zonotope;

use crate::error::{Error, Result};
use crate::interval::{round, Interval, IntervalMatrix, IntervalVector};
use crate::poly::{MultiPoly, VarSpace};
use crate::scalar::Scalar;

use std::sync::Arc;

pub use zonotope::Zonotope;

/// Tuning knobs of the tube construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachOptions {
    /// Truncation order `p` of the matrix exponential series.
    pub expm_order: usize,
    pub generator_cap: usize,
    pub max_rounds: usize,
    /// Growth factor of the linearization box between rounds.
    pub inflation: f64,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self { expm_order: 6, generator_cap: 64, max_rounds: 5, inflation: 2.0 }
    }
}

/// Polynomial vector field `F = f + g u` with its derivatives precomputed.
#[derive(Clone)]
pub struct PolyField<T: Scalar> {
    space: Arc<VarSpace>,
    f: Vec<MultiPoly<T>>,
    g: Vec<Vec<MultiPoly<T>>>,
    field: Vec<MultiPoly<T>>,
    jacobian: Vec<Vec<MultiPoly<T>>>,
    /// `hessian[i][j][k]` for `j <= k`, over the joint variables.
    hessian: Vec<Vec<Vec<MultiPoly<T>>>>,
}

impl<T: Scalar> PolyField<T> {
    /// `f` has `n` entries and `g` is `n × m`, all state-only polynomials.
    pub fn new(space: &Arc<VarSpace>, f: Vec<MultiPoly<T>>, g: Vec<Vec<MultiPoly<T>>>) -> Result<Self> {
        let (n, m) = (space.n_states(), space.n_inputs());
        if f.len() != n {
            return Err(Error::dims(n, f.len()));
        }
        if g.len() != n {
            return Err(Error::dims(n, g.len()));
        }
        if let Some(row) = g.iter().find(|row| row.len() != m) {
            return Err(Error::dims(m, row.len()));
        }
        for p in f.iter().chain(g.iter().flatten()) {
            if p.input_degree() > 0 {
                return Err(Error::config("dynamics", format!("f and g must not depend on inputs: {p}")));
            }
        }
        let field: Vec<MultiPoly<T>> = (0..n)
            .map(|i| {
                (0..m).fold(f[i].clone(), |acc, j| &acc + &(&g[i][j] * &MultiPoly::var(space, space.input_index(j))))
            })
            .collect();
        let dim = space.dim();
        let jacobian: Vec<Vec<MultiPoly<T>>> = field.iter().map(|fi| (0..dim).map(|j| fi.diff(j)).collect()).collect();
        let hessian = jacobian
            .iter()
            .map(|row| (0..dim).map(|j| (0..dim).map(|k| if k < j { MultiPoly::zero(space) } else { row[j].diff(k) }).collect()).collect())
            .collect();
        Ok(Self { space: Arc::clone(space), f, g, field, jacobian, hessian })
    }

    pub fn space(&self) -> &Arc<VarSpace> {
        &self.space
    }

    pub fn f(&self) -> &[MultiPoly<T>] {
        &self.f
    }

    pub fn g(&self) -> &[Vec<MultiPoly<T>>] {
        &self.g
    }

    /// Components of `F(x, u)` as joint-space polynomials.
    pub fn field(&self) -> &[MultiPoly<T>] {
        &self.field
    }

    /// `F(x, u)` at a point.
    pub fn eval(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        let z = self.space.join(x, u)?;
        Ok(self.field.iter().map(|p| p.eval_unchecked(&z)).collect())
    }

    /// Whether every component of `F` has total degree at most one.
    pub fn is_affine(&self) -> bool {
        self.field.iter().all(|p| p.degree() <= 1)
    }

    pub fn linearize(
        &self,
        x_star: &[T],
        u_star: &[T],
        state_box: &IntervalVector<T>,
        input_box: &IntervalVector<T>,
    ) -> Result<LinearizedSystem<T>> {
        let (n, m) = (self.space.n_states(), self.space.n_inputs());
        let z_star = self.space.join(x_star, u_star)?;
        if state_box.dim() != n {
            return Err(Error::dims(n, state_box.dim()));
        }
        if input_box.dim() != m {
            return Err(Error::dims(m, input_box.dim()));
        }
        let joint = state_box.product(input_box);
        let zp = IntervalVector::from_point(&z_star);
        let d = joint.shift(&z_star)?;
        let dmag: Vec<T> = d.iter().map(Interval::mag).collect();
        let mut a = vec![vec![T::zero(); n]; n];
        let mut b = vec![vec![T::zero(); m]; n];
        let mut c = vec![T::zero(); n];
        let mut rem = Vec::with_capacity(n);
        for i in 0..n {
            let ci = self.field[i].eval_iv(&zp)?;
            c[i] = ci.midpoint();
            let mut slack = ci.radius();
            for j in 0..n + m {
                let jij = self.jacobian[i][j].eval_iv(&zp)?;
                let mid = jij.midpoint();
                if j < n {
                    a[i][j] = mid;
                } else {
                    b[i][j - n] = mid;
                }
                slack = round::add_up(slack, round::mul_up(jij.radius(), dmag[j]));
            }
            let mut quad = Interval::zero();
            for j in 0..n + m {
                for k in j..n + m {
                    let h = &self.hessian[i][j][k];
                    if h.is_zero() {
                        continue;
                    }
                    let hv = h.eval_iv(&joint)?;
                    quad = if j == k {
                        quad + hv * d[j].sqr()
                    } else {
                        quad + hv * d[j] * d[k] * Interval::point(T::lit(2.0))
                    };
                }
            }
            rem.push(quad * Interval::point(T::lit(0.5)) + Interval::symmetric(slack));
        }
        Ok(LinearizedSystem {
            a,
            b,
            c,
            remainder: IntervalVector::new(rem)?,
            x_star: x_star.to_vec(),
            u_star: u_star.to_vec(),
        })
    }
}

/// `ẋ ∈ A(x − x*) + B(u − u*) + c + L` over the linearization box.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem<T: Scalar> {
    pub a: Vec<Vec<T>>,
    pub b: Vec<Vec<T>>,
    pub c: Vec<T>,
    pub remainder: IntervalVector<T>,
    pub x_star: Vec<T>,
    pub u_star: Vec<T>,
}

/// Free-function form of [`PolyField::linearize`].
pub fn linearize<T: Scalar>(
    f: &[MultiPoly<T>],
    g: &[Vec<MultiPoly<T>>],
    x_star: &[T],
    u_star: &[T],
    state_box: &IntervalVector<T>,
    input_box: &IntervalVector<T>,
) -> Result<LinearizedSystem<T>> {
    let space = f.first().ok_or_else(|| Error::dims(1, 0))?.space().clone();
    PolyField::new(&space, f.to_vec(), g.to_vec())?.linearize(x_star, u_star, state_box, input_box)
}

/// Enclosures of the reachable set over one sampling interval.
#[derive(Debug, Clone)]
pub struct ReachResult<T: Scalar> {
    /// All states reached on `[0, Δ]`.
    pub tube: Zonotope<T>,
    /// States reached at `Δ`.
    pub endpoint: Zonotope<T>,
    /// Interval hull of `tube`.
    pub hull: IntervalVector<T>,
    /// Verified linearization box (contains `hull`).
    pub domain: IntervalVector<T>,
    pub rounds: usize,
}

fn point_matrix<T: Scalar>(rows: &[Vec<T>], cols: usize) -> Result<IntervalMatrix<T>> {
    let flat: Vec<T> = rows.iter().flatten().copied().collect();
    IntervalMatrix::from_point(rows.len(), cols, &flat)
}

fn factorial<T: Scalar>(k: usize) -> Interval<T> {
    (1..=k).fold(Interval::one(), |acc, i| acc * Interval::point(<T as Scalar>::from_usize(i)))
}

/// `Δⁱ / i!` enclosed.
fn taylor_coeff<T: Scalar>(dt: T, i: usize) -> Interval<T> {
    Interval::point(dt).powi(i as u32).checked_div(&factorial(i)).expect("factorial is positive")
}

/// Powers `Aⁱ` for `i = 0..=p`, plus the bound `e` on the series tail
/// `‖Σ_{i>p} (AΔ)ⁱ/i!‖∞`.
fn exponential_terms<T: Scalar>(a: &IntervalMatrix<T>, dt: T, p: usize) -> Result<(Vec<IntervalMatrix<T>>, T)> {
    let nd = round::mul_up(a.norm_inf(), dt);
    let eps = round::div_up(nd, <T as Scalar>::from_usize(p + 2));
    if !(eps < T::one()) {
        return Err(Error::Convergence(format!(
            "matrix exponential tail diverges (‖A‖·Δ = {nd}); use a smaller sampling interval"
        )));
    }
    let tail_den = round::mul_down(factorial::<T>(p + 1).lo(), round::sub_down(T::one(), eps));
    let e = round::div_up(round::pow_up(nd, (p + 1) as u32), tail_den);
    let mut powers = vec![IntervalMatrix::identity(a.rows())];
    for i in 1..=p {
        let next = powers[i - 1].mul(a)?;
        powers.push(next);
    }
    Ok((powers, e))
}

/// Tube of the linearized inclusion from `x0` under inputs in `u_box`,
/// held constant or not, over `[0, dt]`.
pub fn reach_tube<T: Scalar>(
    sys: &LinearizedSystem<T>,
    x0: &Zonotope<T>,
    u_box: &IntervalVector<T>,
    dt: T,
    opts: &ReachOptions,
) -> Result<ReachResult<T>> {
    let n = sys.c.len();
    let m = sys.u_star.len();
    if x0.dim() != n {
        return Err(Error::dims(n, x0.dim()));
    }
    if u_box.dim() != m {
        return Err(Error::dims(m, u_box.dim()));
    }
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("sampling interval must be positive, got {dt}")));
    }
    let p = opts.expm_order;
    let a = point_matrix(&sys.a, n)?;
    let (powers, e) = exponential_terms(&a, dt, p)?;
    let tail = IntervalMatrix::zeros(n, n).inflate(e);

    let mut phi = tail.clone();
    for (i, ai) in powers.iter().enumerate() {
        phi = phi.add(&ai.scale(taylor_coeff(dt, i)))?;
    }
    let mut curvature = tail;
    for (i, ai) in powers.iter().enumerate().skip(2) {
        let fi = i as f64;
        let gap = fi.powf(-fi / (fi - 1.0)) - fi.powf(-1.0 / (fi - 1.0));
        let lo = T::lit(gap * (1.0 + 1e-12)).next_down();
        let weight = Interval::new(lo, T::zero())? * taylor_coeff(dt, i);
        curvature = curvature.add(&ai.scale(weight))?;
    }

    let neg_star: Vec<T> = sys.x_star.iter().map(|v| -*v).collect();
    let y0 = x0.translate(&neg_star)?;
    let y0_hull = y0.interval_hull();

    let b = point_matrix(&sys.b, m)?;
    let w = b
        .mul_vec(&u_box.shift(&sys.u_star)?)?
        .add(&IntervalVector::from_point(&sys.c))?
        .add(&sys.remainder)?;
    let tail_radius = round::mul_up(round::mul_up(dt, e), w.mag_inf());
    let mut part_tube = IntervalVector::zeros(n).inflate(tail_radius);
    let mut part_end = part_tube.clone();
    for (i, ai) in powers.iter().enumerate() {
        let aw = ai.mul_vec(&w)?;
        let s = taylor_coeff(dt, i + 1);
        part_end = part_end.add(&aw.scale(s))?;
        part_tube = part_tube.add(&aw.scale(Interval::new(T::zero(), s.hi())?))?;
    }

    let homogeneous = y0.convex_hull_with_map(&phi)?.add_box(&curvature.mul_vec(&y0_hull)?)?;
    let tube = homogeneous.add_box(&part_tube)?.translate(&sys.x_star)?.reduce(opts.generator_cap);
    let endpoint = y0.linear_map(&phi)?.add_box(&part_end)?.translate(&sys.x_star)?.reduce(opts.generator_cap);
    let hull = tube.interval_hull();
    Ok(ReachResult { tube, endpoint, domain: hull.clone(), hull, rounds: 1 })
}

/// Tube of the true nonlinear system from `x0` under inputs in `u_box`,
/// linearized at the centre of `x0` and `u_star`.
pub fn reach_step<T: Scalar>(
    field: &PolyField<T>,
    x0: &Zonotope<T>,
    u_box: &IntervalVector<T>,
    u_star: &[T],
    dt: T,
    opts: &ReachOptions,
) -> Result<ReachResult<T>> {
    let n = field.space().n_states();
    if x0.dim() != n {
        return Err(Error::dims(n, x0.dim()));
    }
    let x_star = x0.center().to_vec();
    let speed = IntervalVector::from_point(&x_star).product(u_box);
    let mut seed = {
        let h = x0.interval_hull();
        let comps = field
            .field()
            .iter()
            .zip(h.iter())
            .map(|(fi, hi)| Ok(hi.inflate(round::mul_up(T::lit(2.0), round::mul_up(dt, fi.eval_iv(&speed)?.mag())))))
            .collect::<Result<Vec<_>>>()?;
        IntervalVector::new(comps)?
    };
    let factor = T::lit(opts.inflation);
    for round_no in 1..=opts.max_rounds {
        let lin = field.linearize(&x_star, u_star, &seed, u_box)?;
        let mut res = reach_tube(&lin, x0, u_box, dt, opts)?;
        if seed.encloses(&res.hull) {
            res.domain = seed;
            res.rounds = round_no;
            return Ok(res);
        }
        seed = seed.hull(&res.hull)?.blow_up(factor);
    }
    Err(Error::Convergence(format!(
        "linearization domain not verified after {} rounds; use a smaller sampling interval",
        opts.max_rounds
    )))
}
