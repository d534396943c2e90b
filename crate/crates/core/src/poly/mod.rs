//! Sparse multivariate polynomials over the stacked state/input vector
//! `z = (x, u)`.
//!
//! A [`MultiPoly`] is generic over its coefficient ring: plain scalars for
//! dynamics and barrier functions, [`Interval`] coefficients when a
//! transformation (recentering, substitution) has to be carried out
//! rigorously.

mod parse;
pub mod taylor;

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalVector};
use crate::scalar::Scalar;

pub use taylor::TaylorModel;

/// Ordered variable names: `n` states followed by `m` inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarSpace {
    states: Vec<String>,
    inputs: Vec<String>,
}

impl VarSpace {
    pub fn new(states: Vec<String>, inputs: Vec<String>) -> Result<Arc<Self>> {
        let mut seen = std::collections::BTreeSet::new();
        for name in states.iter().chain(&inputs) {
            if !is_identifier(name) {
                return Err(Error::config("variables", format!("`{name}` is not a valid identifier")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::config("variables", format!("duplicate variable `{name}`")));
            }
        }
        if states.is_empty() {
            return Err(Error::config("variables", "at least one state is required"));
        }
        Ok(Arc::new(Self { states, inputs }))
    }

    /// States `x1..xn` and inputs `u1..um`.
    pub fn standard(n: usize, m: usize) -> Arc<Self> {
        let states = (1..=n).map(|i| format!("x{i}")).collect();
        let inputs = (1..=m).map(|i| format!("u{i}")).collect();
        Self::new(states, inputs).expect("standard names are valid")
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.states.len() + self.inputs.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .or_else(|| self.inputs.iter().position(|s| s == name).map(|j| self.states.len() + j))
    }

    pub fn name(&self, i: usize) -> &str {
        if i < self.states.len() {
            &self.states[i]
        } else {
            &self.inputs[i - self.states.len()]
        }
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    #[inline]
    pub fn input_index(&self, j: usize) -> usize {
        self.states.len() + j
    }

    /// Joins a state and an input into one point of the joint space.
    pub fn join<T: Copy>(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_states() {
            return Err(Error::dims(self.n_states(), x.len()));
        }
        if u.len() != self.n_inputs() {
            return Err(Error::dims(self.n_inputs(), u.len()));
        }
        Ok(x.iter().chain(u).copied().collect())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Coefficient ring of a polynomial.
pub trait Coeff:
    Clone
    + PartialEq
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn ring_zero() -> Self;
    fn ring_one() -> Self;
    fn is_ring_zero(&self) -> bool;
    fn ring_from_u64(n: u64) -> Self;
    fn ring_powi(&self, k: u32) -> Self;
}

macro_rules! impl_coeff_float {
    ($t:ty) => {
        impl Coeff for $t {
            #[inline]
            fn ring_zero() -> Self {
                0.0
            }
            #[inline]
            fn ring_one() -> Self {
                1.0
            }
            #[inline]
            fn is_ring_zero(&self) -> bool {
                *self == 0.0
            }
            #[inline]
            fn ring_from_u64(n: u64) -> Self {
                n as $t
            }
            #[inline]
            fn ring_powi(&self, k: u32) -> Self {
                <$t>::powi(*self, k as i32)
            }
        }
    };
}

impl_coeff_float!(f64);
impl_coeff_float!(f32);

impl<T: Scalar> Coeff for Interval<T> {
    #[inline]
    fn ring_zero() -> Self {
        Interval::zero()
    }
    #[inline]
    fn ring_one() -> Self {
        Interval::one()
    }
    #[inline]
    fn is_ring_zero(&self) -> bool {
        self.lo() == T::zero() && self.hi() == T::zero()
    }
    fn ring_from_u64(n: u64) -> Self {
        let v = T::from_u64(n).expect("integer coefficient");
        if v.to_u64() == Some(n) {
            Interval::point(v)
        } else {
            Interval::point(v).inflate(v.next_up() - v)
        }
    }
    #[inline]
    fn ring_powi(&self, k: u32) -> Self {
        Interval::powi(self, k)
    }
}

/// Exponent vector over the joint space.
pub type Monomial = Vec<u32>;

/// Sparse polynomial: a map from exponent vectors to nonzero coefficients.
#[derive(Clone, PartialEq)]
pub struct MultiPoly<C> {
    space: Arc<VarSpace>,
    terms: BTreeMap<Monomial, C>,
}

/// Polynomial with rigorous interval coefficients.
pub type IntervalPoly<T> = MultiPoly<Interval<T>>;

impl<C: Coeff> MultiPoly<C> {
    pub fn zero(space: &Arc<VarSpace>) -> Self {
        Self { space: Arc::clone(space), terms: BTreeMap::new() }
    }

    pub fn constant(space: &Arc<VarSpace>, c: C) -> Self {
        let mut p = Self::zero(space);
        p.add_term(vec![0; space.dim()], c);
        p
    }

    /// The polynomial `z_i`.
    pub fn var(space: &Arc<VarSpace>, i: usize) -> Self {
        assert!(i < space.dim(), "variable index {i} out of range");
        let mut e = vec![0; space.dim()];
        e[i] = 1;
        let mut p = Self::zero(space);
        p.add_term(e, C::ring_one());
        p
    }

    pub fn from_terms(space: &Arc<VarSpace>, terms: impl IntoIterator<Item = (Monomial, C)>) -> Result<Self> {
        let mut p = Self::zero(space);
        for (e, c) in terms {
            if e.len() != space.dim() {
                return Err(Error::dims(space.dim(), e.len()));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    #[inline]
    pub fn space(&self) -> &Arc<VarSpace> {
        &self.space
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> C {
        self.terms.get(e).cloned().unwrap_or_else(C::ring_zero)
    }

    /// Accumulates `c * z^e`, dropping the term if it cancels to zero.
    pub fn add_term(&mut self, e: Monomial, c: C) {
        if c.is_ring_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_ring_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    /// Maximum total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Maximum combined degree over the variables selected by `mask`.
    pub fn degree_in(&self, mask: impl Fn(usize) -> bool) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().enumerate().filter(|(i, _)| mask(*i)).map(|(_, &k)| k).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn state_degree(&self) -> u32 {
        let n = self.space.n_states();
        self.degree_in(|i| i < n)
    }

    pub fn input_degree(&self) -> u32 {
        let n = self.space.n_states();
        self.degree_in(|i| i >= n)
    }

    pub fn depends_on(&self, i: usize) -> bool {
        self.terms.keys().any(|e| e[i] > 0)
    }

    /// Indices of variables that appear in some term.
    pub fn support(&self) -> Vec<usize> {
        (0..self.space.dim()).filter(|&i| self.depends_on(i)).collect()
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.clone() * s.clone());
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> MultiPoly<D> {
        let mut out = MultiPoly::<D>::zero(&self.space);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out
    }

    fn assert_same_space(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space,
            "polynomials live in different variable spaces"
        );
    }

    /// Exact partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Self {
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.add_term(e2, c.clone() * C::ring_from_u64(e[i] as u64));
        }
        out
    }

    pub fn diff_by_name(&self, name: &str) -> Result<Self> {
        let i = self.space.index_of(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        Ok(self.diff(i))
    }

    /// `∂h/∂x · field` for a field of length `n`.
    pub fn lie_derivative(&self, field: &[Self]) -> Result<Self> {
        let n = self.space.n_states();
        if field.len() != n {
            return Err(Error::dims(n, field.len()));
        }
        let mut out = Self::zero(&self.space);
        for (i, fi) in field.iter().enumerate() {
            if !self.depends_on(i) || fi.is_zero() {
                continue;
            }
            out = &out + &(&self.diff(i) * fi);
        }
        Ok(out)
    }

    /// Fixes the variables listed in `assign` to the given values.
    pub fn substitute(&self, assign: &[(usize, C)]) -> Self {
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            let mut coef = c.clone();
            for (i, v) in assign {
                if e2[*i] > 0 {
                    coef = coef * v.ring_powi(e2[*i]);
                    e2[*i] = 0;
                }
            }
            out.add_term(e2, coef);
        }
        out
    }

    /// Substitutes `z = z_star + w`; the result is a polynomial in `w`.
    pub fn recenter_with(&self, z_star: &[C]) -> Result<Self> {
        let dim = self.space.dim();
        if z_star.len() != dim {
            return Err(Error::dims(dim, z_star.len()));
        }
        let max_deg: Vec<u32> = (0..dim).map(|i| self.terms.keys().map(|e| e[i]).max().unwrap_or(0)).collect();
        // shifted[i][k] = (z*_i + w_i)^k, expanded with exact binomials.
        let shifted: Vec<Vec<Self>> = (0..dim)
            .map(|i| {
                let mut pows = vec![Self::constant(&self.space, C::ring_one())];
                if max_deg[i] == 0 {
                    return pows;
                }
                let lin = &Self::constant(&self.space, z_star[i].clone()) + &Self::var(&self.space, i);
                for k in 1..=max_deg[i] as usize {
                    let mut next = Self::zero(&self.space);
                    for j in 0..=k {
                        let binom = C::ring_from_u64(binomial(k as u64, j as u64));
                        let c = binom * z_star[i].ring_powi((k - j) as u32);
                        let mut e = vec![0; dim];
                        e[i] = j as u32;
                        next.add_term(e, c);
                    }
                    debug_assert!(k > 1 || next == lin);
                    pows.push(next);
                }
                pows
            })
            .collect();
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            let mut acc = Self::constant(&self.space, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    acc = &acc * &shifted[i][k as usize];
                }
            }
            out = &out + &acc;
        }
        Ok(out)
    }

    /// Splits into the part of total degree `<= order` and the rest.
    pub fn split_at_degree(&self, order: u32) -> (Self, Self) {
        let mut low = Self::zero(&self.space);
        let mut high = Self::zero(&self.space);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() <= order {
                low.add_term(e.clone(), c.clone());
            } else {
                high.add_term(e.clone(), c.clone());
            }
        }
        (low, high)
    }

    /// Drops every term whose exponents over `mask`-selected variables are all zero.
    pub fn retain_terms(&self, keep: impl Fn(&[u32]) -> bool) -> Self {
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            if keep(e) {
                out.add_term(e.clone(), c.clone());
            }
        }
        out
    }

    /// Evaluates with per-variable factoring: `Σ_k z_v^k · q_k(z_{v+1}, ...)`.
    pub(crate) fn eval_factored<V: Coeff>(&self, z: &[V], lift: &impl Fn(&C) -> V) -> V {
        let terms: Vec<(&Monomial, &C)> = self.terms.iter().collect();
        eval_rec(&terms, 0, z, lift)
    }
}

fn eval_rec<C, V: Coeff>(terms: &[(&Monomial, &C)], var: usize, z: &[V], lift: &impl Fn(&C) -> V) -> V {
    if terms.is_empty() {
        return V::ring_zero();
    }
    if var == z.len() {
        // All exponents are exhausted: a single constant term remains.
        return terms.iter().fold(V::ring_zero(), |acc, (_, c)| acc + lift(c));
    }
    if let [(e, c)] = terms {
        // A lone monomial has nothing left to factor.
        return e[var..].iter().zip(&z[var..]).fold(lift(c), |acc, (&k, zi)| if k == 0 { acc } else { acc * zi.ring_powi(k) });
    }
    let mut acc = V::ring_zero();
    let mut start = 0;
    while start < terms.len() {
        let k = terms[start].0[var];
        let mut end = start + 1;
        while end < terms.len() && terms[end].0[var] == k {
            end += 1;
        }
        let inner = eval_rec(&terms[start..end], var + 1, z, lift);
        acc = if k == 0 { acc + inner } else { acc + z[var].ring_powi(k) * inner };
        start = end;
    }
    acc
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

impl<T: Scalar> MultiPoly<T> {
    /// Point evaluation.
    pub fn eval(&self, z: &[T]) -> Result<T> {
        if z.len() != self.space.dim() {
            return Err(Error::dims(self.space.dim(), z.len()));
        }
        Ok(self.eval_unchecked(z))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, z: &[T]) -> T {
        let mut acc = T::zero();
        for (e, c) in &self.terms {
            let mut t = *c;
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t * z[i].powi(k as i32);
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Enclosure of `{p(z) | z in box}`.
    pub fn eval_iv(&self, b: &IntervalVector<T>) -> Result<Interval<T>> {
        if b.dim() != self.space.dim() {
            return Err(Error::dims(self.space.dim(), b.dim()));
        }
        Ok(self.eval_factored(b.as_slice(), &|c: &T| Interval::point(*c)))
    }

    /// Rigorous enclosure of the value at a point.
    pub fn eval_point_iv(&self, z: &[T]) -> Result<Interval<T>> {
        self.eval_iv(&IntervalVector::from_point(z))
    }

    pub fn to_interval(&self) -> IntervalPoly<T> {
        self.map_coeffs(|c| Interval::point(*c))
    }

    /// Floating-point recentering `q(w) = p(z_star + w)`.
    pub fn recenter(&self, z_star: &[T]) -> Result<Self> {
        self.recenter_with(z_star)
    }

    /// Coefficient of `u_j` in a polynomial affine in the inputs, as a
    /// state-only polynomial.
    pub fn input_coefficient(&self, j: usize) -> Self {
        let idx = self.space.input_index(j);
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            if e[idx] == 1 {
                let mut e2 = e.clone();
                e2[idx] = 0;
                out.add_term(e2, *c);
            }
        }
        out
    }

    /// Parses an infix expression over the space's variable names.
    pub fn parse(space: &Arc<VarSpace>, text: &str) -> Result<Self> {
        parse::parse(space, text)
    }
}

impl<T: Scalar> IntervalPoly<T> {
    pub fn eval_iv(&self, b: &IntervalVector<T>) -> Result<Interval<T>> {
        if b.dim() != self.space.dim() {
            return Err(Error::dims(self.space.dim(), b.dim()));
        }
        Ok(self.eval_factored(b.as_slice(), &|c: &Interval<T>| *c))
    }

    /// Rigorous recentering at a point.
    pub fn recenter_point(&self, z_star: &[T]) -> Result<Self> {
        let zs: Vec<Interval<T>> = z_star.iter().map(|&v| Interval::point(v)).collect();
        self.recenter_with(&zs)
    }

    /// Polynomial of coefficient midpoints together with the deviation
    /// polynomial `self - mid`.
    pub fn split_midpoint(&self) -> (MultiPoly<T>, Self) {
        let mut mid = MultiPoly::<T>::zero(&self.space);
        let mut dev = Self::zero(&self.space);
        for (e, c) in &self.terms {
            let m = c.midpoint();
            mid.add_term(e.clone(), m);
            dev.add_term(e.clone(), *c - Interval::point(m));
        }
        (mid, dev)
    }
}

impl<'a, C: Coeff> Add for &'a MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn add(self, rhs: Self) -> MultiPoly<C> {
        self.assert_same_space(rhs);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl<'a, C: Coeff> Sub for &'a MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn sub(self, rhs: Self) -> MultiPoly<C> {
        self.assert_same_space(rhs);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl<'a, C: Coeff> Mul for &'a MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn mul(self, rhs: Self) -> MultiPoly<C> {
        self.assert_same_space(rhs);
        let mut out = MultiPoly::zero(&self.space);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Monomial = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca.clone() * cb.clone());
            }
        }
        out
    }
}

impl<'a, C: Coeff> Neg for &'a MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn neg(self) -> MultiPoly<C> {
        self.map_coeffs(|c| -c.clone())
    }
}

impl<T: Scalar> std::fmt::Display for MultiPoly<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        parse::write_poly(f, self)
    }
}

impl<T: Scalar> Debug for MultiPoly<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MultiPoly({self})")
    }
}

impl<T: Scalar> Debug for IntervalPoly<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sp2() -> Arc<VarSpace> {
        VarSpace::standard(2, 1)
    }

    fn p(space: &Arc<VarSpace>, s: &str) -> MultiPoly<f64> {
        MultiPoly::parse(space, s).unwrap()
    }

    #[test]
    fn var_space_rejects_duplicates() {
        assert!(VarSpace::new(vec!["x1".into(), "x1".into()], vec![]).is_err());
        assert!(VarSpace::new(vec!["1x".into()], vec![]).is_err());
        let s = sp2();
        assert_eq!(s.index_of("u1"), Some(2));
        assert_eq!(s.index_of("x3"), None);
    }

    #[test]
    fn evaluation_examples() {
        let s = VarSpace::standard(1, 1);
        assert_eq!(p(&s, "x1^2 + u1").eval(&[2.0, 3.0]).unwrap(), 7.0);
        let s2 = VarSpace::standard(2, 0);
        let h = p(&s2, "-x2^2 - x1 + 1");
        assert_eq!(h.eval(&[-2.0, 1.0]).unwrap(), 2.0);
        assert!(matches!(h.eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn interval_evaluation_of_even_power_is_tight() {
        let s = VarSpace::standard(1, 0);
        let q = p(&s, "x1^2");
        let b = IntervalVector::from_bounds(&[-1.0], &[2.0]).unwrap();
        let r = q.eval_iv(&b).unwrap();
        assert_eq!(r, Interval::new(0.0, 4.0).unwrap());
    }

    #[test]
    fn differentiation_examples() {
        let s = sp2();
        assert_eq!(p(&s, "x1^2*x2").diff(0), p(&s, "2*x1*x2"));
        assert!(p(&s, "x1").diff(2).is_zero());
        let s1 = VarSpace::standard(1, 0);
        let h = p(&s1, "10 - 25*(x1 - 0.5)^2");
        assert_eq!(h.diff(0).eval(&[0.5]).unwrap(), 0.0);
        assert!(matches!(h.diff_by_name("y"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn lie_derivatives_of_the_cubic_system() {
        let s = sp2();
        let h = p(&s, "-x2^2 - x1 + 1");
        let f = [p(&s, "-0.6*x1 - x2"), p(&s, "x1^3")];
        let g = [MultiPoly::zero(&s), p(&s, "x2")];
        assert_eq!(h.lie_derivative(&f).unwrap(), p(&s, "0.6*x1 + x2 - 2*x1^3*x2"));
        assert_eq!(h.lie_derivative(&g).unwrap(), p(&s, "-2*x2^2"));
        let simple = p(&s, "x1");
        assert_eq!(simple.lie_derivative(&[p(&s, "x2"), MultiPoly::zero(&s)]).unwrap(), p(&s, "x2"));
        assert!(h.lie_derivative(&f[..1]).is_err());
    }

    #[test]
    fn recentering_examples() {
        let s = VarSpace::standard(1, 0);
        assert_eq!(p(&s, "x1^2").recenter(&[1.0]).unwrap(), p(&s, "1 + 2*x1 + x1^2"));
        let lin = p(&s, "3*x1 - 7");
        let q = lin.recenter(&[4.25]).unwrap();
        assert_eq!(q.coeff(&[1]), 3.0);
    }

    #[test]
    fn recentering_matches_direct_evaluation() {
        let s = VarSpace::standard(3, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut base = MultiPoly::zero(&s);
        for a in 0..=3u32 {
            for b in 0..=(3 - a) {
                for c in 0..=(3 - a - b) {
                    base.add_term(vec![a, b, c], rng.random_range(-3.0..3.0));
                }
            }
        }
        let zs = [0.3, -0.7, 1.1];
        let q = base.recenter(&zs).unwrap();
        for _ in 0..1000 {
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w: Vec<f64> = z.iter().zip(&zs).map(|(a, b)| a - b).collect();
            let direct = base.eval(&z).unwrap();
            let shifted = q.eval(&w).unwrap();
            assert!((direct - shifted).abs() <= 1e-9, "{direct} vs {shifted}");
        }
    }

    #[test]
    fn interval_recentering_encloses_the_shifted_polynomial() {
        let s = VarSpace::standard(2, 0);
        let base = p(&s, "0.1*x1^3*x2 - 0.3*x2^2 + 1.7*x1 - 0.9");
        let zs = [0.37, -1.13];
        let q = base.to_interval().recenter_point(&zs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let z = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let direct = base.eval_point_iv(&z).unwrap();
            let w = IntervalVector::from_point(&z).shift(&zs).unwrap();
            assert!(q.eval_iv(&w).unwrap().intersects(&direct));
        }
    }

    #[test]
    fn substitution_and_input_coefficients() {
        let s = sp2();
        let xi = p(&s, "x1*u1 + x2^2 + 3*u1");
        let sub = xi.substitute(&[(0, 2.0), (1, 1.0)]);
        assert_eq!(sub, p(&s, "5*u1 + 1"));
        assert_eq!(xi.input_coefficient(0), p(&s, "x1 + 3"));
        assert_eq!(xi.input_degree(), 1);
        assert_eq!(xi.state_degree(), 2);
    }

    fn arb_poly(space: Arc<VarSpace>) -> impl Strategy<Value = MultiPoly<f64>> {
        let dim = space.dim();
        proptest::collection::vec((proptest::collection::vec(0u32..3, dim), -5.0f64..5.0), 0..8)
            .prop_map(move |terms| MultiPoly::from_terms(&space, terms).unwrap())
    }

    proptest! {
        #[test]
        fn lie_derivative_is_linear(h1 in arb_poly(VarSpace::standard(2, 1)),
                                    h2 in arb_poly(VarSpace::standard(2, 1)),
                                    a in -3i32..3, b in -3i32..3) {
            let s = h1.space().clone();
            let field = [MultiPoly::parse(&s, "x2 - x1^2").unwrap(), MultiPoly::parse(&s, "x1*u1").unwrap()];
            let (a, b) = (a as f64, b as f64);
            let combo = &h1.scale(&a) + &h2.scale(&b);
            let lhs = combo.lie_derivative(&field).unwrap();
            let rhs = &h1.lie_derivative(&field).unwrap().scale(&a) + &h2.lie_derivative(&field).unwrap().scale(&b);
            // Small-integer weights keep every coefficient operation exact.
            let diff = &lhs - &rhs;
            for (_, c) in diff.terms() {
                prop_assert!(c.abs() <= 1e-12 * (1.0 + lhs.terms().map(|(_, v)| v.abs()).fold(0.0, f64::max)));
            }
        }

        #[test]
        fn recenter_then_inverse_shift_is_identity(q in arb_poly(VarSpace::standard(2, 1)),
                                                   c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
            let back = q.recenter(&[c0, c1, c2]).unwrap().recenter(&[-c0, -c1, -c2]).unwrap();
            let scale = 1.0 + q.terms().map(|(_, v)| v.abs()).fold(0.0, f64::max);
            for (e, c) in q.terms() {
                prop_assert!((back.coeff(e) - c).abs() <= 1e-9 * scale * 50.0);
            }
            for (e, c) in back.terms() {
                prop_assert!((q.coeff(e) - c).abs() <= 1e-9 * scale * 50.0);
            }
        }
    }
}
