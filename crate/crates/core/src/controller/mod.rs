//! Barrier-function machinery: relative degree, the affine-in-input
//! condition ξ, the s-chain, input-set shrinking and the safety filter QP.

mod qp;

pub use qp::{solve_safety_qp, Constraint, QpResult};

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::interval::{round, Interval, IntervalVector};
use crate::poly::{MultiPoly, VarSpace};
use crate::reach::PolyField;
use crate::scalar::Scalar;

/// Class-K gain of a barrier: linear for relative degree one, a Hurwitz
/// chain `Π(λ + λᵢ) = λʳ + a₁λʳ⁻¹ + … + aᵣ` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Gain<T> {
    Gamma(T),
    Chain { a: Vec<T>, lambdas: Vec<T> },
}

#[derive(Debug, Clone)]
pub struct CbfSpec<T: Scalar> {
    h: MultiPoly<T>,
    gain: Gain<T>,
}

/// Relative tolerance on the agreement of `a` with the expanded `lambdas`.
const CHAIN_TOL: f64 = 1e-9;

/// Coefficients `a₁..aᵣ` of `Π(λ + λᵢ)`.
pub fn chain_coefficients(lambdas: &[f64]) -> Vec<f64> {
    // poly[k] is the coefficient of λ^(deg − k).
    let mut poly = vec![1.0];
    for &l in lambdas {
        let mut next = vec![0.0; poly.len() + 1];
        for (k, &c) in poly.iter().enumerate() {
            next[k] += c;
            next[k + 1] += c * l;
        }
        poly = next;
    }
    poly[1..].to_vec()
}

/// Roots of the monic polynomial `λʳ + a₁λʳ⁻¹ + … + aᵣ` (Durand–Kerner).
fn monic_roots(a: &[f64]) -> Vec<Complex64> {
    let r = a.len();
    let eval = |z: Complex64| a.iter().fold(Complex64::new(1.0, 0.0), |acc, &c| acc * z + c);
    let radius = 1.0 + a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..r)
        .scan(Complex64::new(radius, 0.0), |p, _| {
            *p *= seed;
            Some(*p)
        })
        .collect();
    for _ in 0..5_000 {
        let mut delta = 0.0f64;
        for i in 0..r {
            let denom = (0..r).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            if denom.norm() == 0.0 {
                z[i] += Complex64::new(1e-9 * radius, 1e-9 * radius);
                continue;
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta <= 1e-15 * radius {
            break;
        }
    }
    z
}

/// Newton refinement of a root of the `k`-th derivative of the monic
/// polynomial with coefficients `a`.
fn polish(a: &[f64], x0: f64, k: usize) -> f64 {
    // Descending coefficients of the monic polynomial, differentiated k times.
    let mut c: Vec<f64> = std::iter::once(1.0).chain(a.iter().copied()).collect();
    for _ in 0..k {
        let deg = c.len() - 1;
        c = c[..deg].iter().enumerate().map(|(i, v)| v * (deg - i) as f64).collect();
    }
    let deg = c.len() - 1;
    let dc: Vec<f64> = c[..deg].iter().enumerate().map(|(i, v)| v * (deg - i) as f64).collect();
    let horner = |q: &[f64], x: f64| q.iter().fold(0.0, |acc, v| acc * x + v);
    let mut x = x0;
    for _ in 0..8 {
        let d = horner(&dc, x);
        if d == 0.0 {
            break;
        }
        let next = x - horner(&c, x) / d;
        if !next.is_finite() || (next - x0).abs() > 1e-3 * (1.0 + x0.abs()) {
            break;
        }
        x = next;
    }
    x
}

/// `λᵢ > 0` with `Π(λ + λᵢ)` matching `a`, sorted in decreasing order.
pub fn chain_lambdas(a: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::config("a", "at least one coefficient is required"));
    }
    let mut roots = monic_roots(a);
    let scale = 1.0 + a.iter().fold(0.0f64, |m, c| m.max(c.abs())).powf(1.0 / a.len() as f64);
    // A root of multiplicity k converges only to about ε^(1/k). A cluster is
    // replaced by its mean, polished by Newton on the (k−1)-th derivative,
    // where the root is simple.
    let tol = 10.0 * f64::EPSILON.powf(1.0 / a.len() as f64) * scale;
    roots.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
    let mut lambdas = Vec::with_capacity(roots.len());
    let mut i = 0;
    while i < roots.len() {
        let mut j = i + 1;
        while j < roots.len() && (roots[j] - roots[i]).norm() <= tol {
            j += 1;
        }
        let k = (j - i) as f64;
        let re = roots[i..j].iter().map(|z| z.re).sum::<f64>() / k;
        let im = roots[i..j].iter().map(|z| z.im).sum::<f64>() / k;
        if im.abs() > tol {
            return Err(Error::config("a", format!("characteristic polynomial has a complex root {re:.6}{im:+.6}i")));
        }
        let root = polish(a, re, j - i - 1);
        if !(root < 0.0) {
            return Err(Error::config("a", format!("characteristic polynomial has a non-negative root {root}")));
        }
        lambdas.extend(std::iter::repeat_n(-root, j - i));
        i = j;
    }
    lambdas.sort_by(|x, y| y.partial_cmp(x).unwrap());
    check_chain(a, &lambdas)?;
    Ok(lambdas)
}

fn check_chain(a: &[f64], lambdas: &[f64]) -> Result<()> {
    if a.len() != lambdas.len() {
        return Err(Error::config("lambdas", format!("expected {} values, found {}", a.len(), lambdas.len())));
    }
    for (i, (&ai, &ei)) in a.iter().zip(&chain_coefficients(lambdas)).enumerate() {
        if (ai - ei).abs() > CHAIN_TOL * ai.abs().max(1.0) {
            return Err(Error::config("a", format!("a{} = {ai} disagrees with the expanded lambdas ({ei})", i + 1)));
        }
    }
    Ok(())
}

impl<T: Scalar> CbfSpec<T> {
    fn checked_h(h: MultiPoly<T>) -> Result<MultiPoly<T>> {
        if h.input_degree() > 0 {
            return Err(Error::config("h", "barrier must depend on the state only"));
        }
        Ok(h)
    }

    pub fn from_gamma(h: MultiPoly<T>, gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::config("gamma", format!("must be positive and finite, got {gamma}")));
        }
        Ok(Self { h: Self::checked_h(h)?, gain: Gain::Gamma(gamma) })
    }

    /// Derives the `λᵢ` as the negated roots of the characteristic polynomial.
    pub fn from_a(h: MultiPoly<T>, a: Vec<T>) -> Result<Self> {
        let af: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
        let lambdas = chain_lambdas(&af)?.into_iter().map(T::lit).collect();
        Ok(Self { h: Self::checked_h(h)?, gain: Gain::Chain { a, lambdas } })
    }

    pub fn from_lambdas(h: MultiPoly<T>, lambdas: Vec<T>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::config("lambdas", "at least one value is required"));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l > T::zero()) || !l.is_finite()) {
            return Err(Error::config("lambdas", format!("must be positive and finite, got {l}")));
        }
        let lf: Vec<f64> = lambdas.iter().map(|v| v.as_f64()).collect();
        let a = chain_coefficients(&lf).into_iter().map(T::lit).collect();
        Ok(Self { h: Self::checked_h(h)?, gain: Gain::Chain { a, lambdas } })
    }

    /// Both forms given; they must agree.
    pub fn from_chain(h: MultiPoly<T>, a: Vec<T>, lambdas: Vec<T>) -> Result<Self> {
        let spec = Self::from_lambdas(h, lambdas)?;
        let Gain::Chain { lambdas, .. } = spec.gain else { unreachable!() };
        let af: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
        let lf: Vec<f64> = lambdas.iter().map(|v| v.as_f64()).collect();
        check_chain(&af, &lf)?;
        Ok(Self { h: spec.h, gain: Gain::Chain { a, lambdas } })
    }

    pub fn h(&self) -> &MultiPoly<T> {
        &self.h
    }

    pub fn gain(&self) -> &Gain<T> {
        &self.gain
    }

    /// Coefficients `a₁..aᵣ`; a linear gain reads as `a = (γ)`.
    pub fn a(&self) -> Vec<T> {
        match &self.gain {
            Gain::Gamma(g) => vec![*g],
            Gain::Chain { a, .. } => a.clone(),
        }
    }

    pub fn lambdas(&self) -> Vec<T> {
        match &self.gain {
            Gain::Gamma(g) => vec![*g],
            Gain::Chain { lambdas, .. } => lambdas.clone(),
        }
    }
}

/// `ẋ = f(x) + g(x) u` with admissible inputs `U` and actuation error bound
/// `eps_u`.
#[derive(Clone)]
pub struct ControlAffineSystem<T: Scalar> {
    field: PolyField<T>,
    u_box: IntervalVector<T>,
    eps_u: T,
}

impl<T: Scalar> ControlAffineSystem<T> {
    pub fn new(field: PolyField<T>, u_box: IntervalVector<T>, eps_u: T) -> Result<Self> {
        let m = field.space().n_inputs();
        if u_box.dim() != m {
            return Err(Error::dims(m, u_box.dim()));
        }
        if !(eps_u >= T::zero()) || !eps_u.is_finite() {
            return Err(Error::config("eps_u", format!("must be non-negative and finite, got {eps_u}")));
        }
        for (j, iv) in u_box.iter().enumerate() {
            if !iv.lo().is_finite() || !iv.hi().is_finite() {
                return Err(Error::config("U", format!("input {} bounds must be finite", j + 1)));
            }
            if eps_u > T::zero() && eps_u >= iv.radius() / T::lit(2.0) {
                return Err(Error::InfeasibleInputSet { index: j, eps_u: eps_u.as_f64() });
            }
        }
        Ok(Self { field, u_box, eps_u })
    }

    pub fn field(&self) -> &PolyField<T> {
        &self.field
    }

    pub fn space(&self) -> &Arc<VarSpace> {
        self.field.space()
    }

    pub fn u_box(&self) -> &IntervalVector<T> {
        &self.u_box
    }

    pub fn eps_u(&self) -> T {
        self.eps_u
    }

    /// `U ⊖ B_{eps_u}(0)`.
    pub fn shrunk_u_box(&self) -> Result<IntervalVector<T>> {
        shrink_input_box(&self.u_box, self.eps_u)
    }

    /// `L_f p` along the drift.
    pub fn lie_f(&self, p: &MultiPoly<T>) -> MultiPoly<T> {
        p.lie_derivative(self.field.f()).expect("drift has n components")
    }

    /// `L_{g_j} p` for every input column `j`.
    pub fn lie_g(&self, p: &MultiPoly<T>) -> Vec<MultiPoly<T>> {
        let n = self.space().n_states();
        (0..self.space().n_inputs())
            .map(|j| {
                let col: Vec<MultiPoly<T>> = (0..n).map(|i| self.field.g()[i][j].clone()).collect();
                p.lie_derivative(&col).expect("input column has n components")
            })
            .collect()
    }
}

/// Smallest `r` with `L_g L_f^{r−1} h` not identically zero, checked
/// symbolically and required to be nonzero at one probe at least.
pub fn relative_degree<T: Scalar>(h: &MultiPoly<T>, sys: &ControlAffineSystem<T>, probes: &[Vec<T>]) -> Result<usize> {
    if probes.is_empty() {
        return Err(Error::RelativeDegree("probe set is empty".into()));
    }
    let space = sys.space();
    let n = space.n_states();
    let zero_u = vec![T::zero(); space.n_inputs()];
    let mut lf = h.clone();
    for r in 1..=n {
        let lg = sys.lie_g(&lf);
        if lg.iter().any(|p| !p.is_zero()) {
            let mut seen = false;
            for x in probes {
                let z = space.join(x, &zero_u)?;
                seen |= lg.iter().any(|p| p.eval_unchecked(&z) != T::zero());
            }
            if !seen {
                return Err(Error::RelativeDegree(format!("L_g L_f^{} h vanishes at every probe point", r - 1)));
            }
            return Ok(r);
        }
        lf = sys.lie_f(&lf);
    }
    Err(Error::RelativeDegree(format!("no input appears within {n} derivatives")))
}

/// `[h, L_f h, …, L_f^k h]`.
fn drift_derivatives<T: Scalar>(h: &MultiPoly<T>, sys: &ControlAffineSystem<T>, k: usize) -> Vec<MultiPoly<T>> {
    let mut out = vec![h.clone()];
    for _ in 0..k {
        let next = sys.lie_f(out.last().expect("nonempty"));
        out.push(next);
    }
    out
}

/// `ξ(x, u) = L_g L_f^{r−1}h u + L_f^r h + Σ aᵢ L_f^{r−i} h`, a joint-space
/// polynomial affine in `u`. For `r = 1` this is `L_f h + L_g h u + γ h`.
pub fn build_xi<T: Scalar>(spec: &CbfSpec<T>, sys: &ControlAffineSystem<T>, r: usize) -> Result<MultiPoly<T>> {
    let a = match (&spec.gain, r) {
        (_, 0) => return Err(Error::RelativeDegree("relative degree must be at least one".into())),
        (Gain::Gamma(g), 1) => vec![*g],
        (Gain::Gamma(_), _) => {
            return Err(Error::config("gamma", format!("relative degree {r} needs a_vec or lambdas")));
        }
        (Gain::Chain { a, .. }, _) if a.len() == r => a.clone(),
        (Gain::Chain { a, .. }, _) => {
            return Err(Error::config("a", format!("relative degree {r} needs {r} coefficients, found {}", a.len())));
        }
    };
    let eta = drift_derivatives(&spec.h, sys, r - 1);
    let mut xi = eta[r - 1].lie_derivative(sys.field().field())?;
    for (i, ai) in a.iter().enumerate() {
        xi = &xi + &eta[r - 1 - i].scale(ai);
    }
    if xi.input_degree() > 1 {
        return Err(Error::RelativeDegree("condition is not affine in the input".into()));
    }
    Ok(xi)
}

/// `s₀ = h`, `s_k = L_f s_{k−1} + λ_k s_{k−1}` for `k < r`.
pub fn build_s_chain<T: Scalar>(spec: &CbfSpec<T>, sys: &ControlAffineSystem<T>, r: usize) -> Result<Vec<MultiPoly<T>>> {
    let lambdas = spec.lambdas();
    if lambdas.len() < r.saturating_sub(1) {
        return Err(Error::config("lambdas", format!("relative degree {r} needs {} values", r - 1)));
    }
    let mut chain = vec![spec.h.clone()];
    for k in 1..r {
        let prev = &chain[k - 1];
        // Along the full field so an input entering too early is detected.
        let d = prev.lie_derivative(sys.field().field())?;
        if d.input_degree() > 0 {
            return Err(Error::RelativeDegree(format!("s{k} depends on the input")));
        }
        chain.push(&d + &prev.scale(&lambdas[k - 1]));
    }
    Ok(chain)
}

/// A barrier with its relative degree and derived polynomials.
#[derive(Debug, Clone)]
pub struct Barrier<T: Scalar> {
    pub name: String,
    pub spec: CbfSpec<T>,
    pub relative_degree: usize,
    pub xi: MultiPoly<T>,
    /// `s₀..s_{r−1}`; just `[h]` for relative degree one.
    pub s_chain: Vec<MultiPoly<T>>,
}

impl<T: Scalar> Barrier<T> {
    pub fn new(name: impl Into<String>, spec: CbfSpec<T>, sys: &ControlAffineSystem<T>, probes: &[Vec<T>]) -> Result<Self> {
        let r = relative_degree(spec.h(), sys, probes)?;
        let xi = build_xi(&spec, sys, r)?;
        let s_chain = build_s_chain(&spec, sys, r)?;
        Ok(Self { name: name.into(), spec, relative_degree: r, xi, s_chain })
    }

    pub fn h(&self) -> &MultiPoly<T> {
        self.spec.h()
    }
}

/// Pontryagin difference of a box and a Euclidean ball: each side moves in
/// by `eps_u`, rounded inward.
pub fn shrink_input_box<T: Scalar>(u_box: &IntervalVector<T>, eps_u: T) -> Result<IntervalVector<T>> {
    if !(eps_u >= T::zero()) {
        return Err(Error::config("eps_u", format!("must be non-negative, got {eps_u}")));
    }
    if eps_u == T::zero() {
        return Ok(u_box.clone());
    }
    let mut out = Vec::with_capacity(u_box.dim());
    for (index, iv) in u_box.iter().enumerate() {
        let lo = round::add_up(iv.lo(), eps_u);
        let hi = round::sub_down(iv.hi(), eps_u);
        if lo > hi {
            return Err(Error::InfeasibleInputSet { index, eps_u: eps_u.as_f64() });
        }
        out.push(Interval::raw(lo, hi));
    }
    Ok(IntervalVector::from_vec(out))
}

/// `row · u + rhs >= 0` equivalent to `ξ(anchor, u) + phi >= 0`, with the
/// input-free part rounded down.
pub fn make_constraint<T: Scalar>(xi: &MultiPoly<T>, anchor: &[T], phi: T) -> Result<Constraint<T>> {
    let space = xi.space();
    let m = space.n_inputs();
    let z = space.join(anchor, &vec![T::zero(); m])?;
    let row = (0..m).map(|j| xi.input_coefficient(j).eval_unchecked(&z)).collect();
    let rhs = round::add_down(xi.eval_point_iv(&z)?.lo(), phi);
    Ok(Constraint { row, rhs })
}
