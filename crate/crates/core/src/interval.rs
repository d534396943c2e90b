//! Closed real intervals with outward rounding, plus interval vectors and
//! matrices.
//!
//! Endpoint arithmetic uses error-free transformations (two-sum and fused
//! multiply-add residuals) to find out on which side of the rounded result
//! the exact value lies; an endpoint is moved by one ulp only when the
//! rounding went the wrong way. Results therefore enclose the exact real
//! result set and are exact whenever the endpoint operation is.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) mod round {
    use crate::scalar::Scalar;

    #[inline]
    fn two_sum_err<T: Scalar>(a: T, b: T, s: T) -> T {
        let bp = s - a;
        let ap = s - bp;
        (a - ap) + (b - bp)
    }

    #[inline]
    pub fn add_down<T: Scalar>(a: T, b: T) -> T {
        let s = a + b;
        if !s.is_finite() {
            return if s == T::infinity() && a.is_finite() && b.is_finite() {
                T::max_value()
            } else {
                s
            };
        }
        if two_sum_err(a, b, s) < T::zero() {
            s.next_down()
        } else {
            s
        }
    }

    #[inline]
    pub fn add_up<T: Scalar>(a: T, b: T) -> T {
        -add_down(-a, -b)
    }

    #[inline]
    pub fn sub_down<T: Scalar>(a: T, b: T) -> T {
        add_down(a, -b)
    }

    #[inline]
    pub fn sub_up<T: Scalar>(a: T, b: T) -> T {
        add_up(a, -b)
    }

    #[inline]
    pub fn mul_down<T: Scalar>(a: T, b: T) -> T {
        if a == T::zero() || b == T::zero() {
            return T::zero();
        }
        let p = a * b;
        if !p.is_finite() {
            return if p == T::infinity() && a.is_finite() && b.is_finite() {
                T::max_value()
            } else {
                p
            };
        }
        if p.abs() < T::tiny_threshold() {
            return p.next_down();
        }
        if a.mul_add(b, -p) < T::zero() {
            p.next_down()
        } else {
            p
        }
    }

    #[inline]
    pub fn mul_up<T: Scalar>(a: T, b: T) -> T {
        -mul_down(-a, b)
    }

    #[inline]
    pub fn div_down<T: Scalar>(a: T, b: T) -> T {
        if a == T::zero() {
            return T::zero();
        }
        let q = a / b;
        if !q.is_finite() {
            return if q == T::infinity() && a.is_finite() {
                T::max_value()
            } else {
                q
            };
        }
        if q.abs() < T::tiny_threshold() || a.abs() < T::tiny_threshold() {
            return q.next_down();
        }
        // a - q*b is exact; the exact quotient lies below q iff r/b < 0.
        let r = (-q).mul_add(b, a);
        if r != T::zero() && ((r < T::zero()) != (b < T::zero())) {
            q.next_down()
        } else {
            q
        }
    }

    #[inline]
    pub fn div_up<T: Scalar>(a: T, b: T) -> T {
        -div_down(-a, b)
    }

    /// `x^k` rounded down, for `x >= 0`.
    pub fn pow_down<T: Scalar>(x: T, k: u32) -> T {
        let mut acc = T::one();
        for _ in 0..k {
            acc = mul_down(acc, x);
        }
        acc
    }

    /// `x^k` rounded up, for `x >= 0`.
    pub fn pow_up<T: Scalar>(x: T, k: u32) -> T {
        let mut acc = T::one();
        for _ in 0..k {
            acc = mul_up(acc, x);
        }
        acc
    }
}

/// A closed interval `[lo, hi]` of reals.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInterval { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(Self { lo, hi })
    }

    /// Caller guarantees `lo <= hi`.
    #[inline]
    pub(crate) fn raw(lo: T, hi: T) -> Self {
        debug_assert!(lo <= hi, "raw interval with lo > hi");
        Self { lo, hi }
    }

    #[inline]
    pub fn point(x: T) -> Self {
        Self { lo: x, hi: x }
    }

    /// `[-r, r]` for `r >= 0`.
    #[inline]
    pub fn symmetric(r: T) -> Self {
        let r = r.abs();
        Self { lo: -r, hi: r }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::point(T::zero())
    }

    #[inline]
    pub fn one() -> Self {
        Self::point(T::one())
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> T {
        self.hi
    }

    /// Upper bound on `hi - lo`.
    #[inline]
    pub fn width(&self) -> T {
        round::sub_up(self.hi, self.lo)
    }

    /// Upper bound on the half-width.
    #[inline]
    pub fn radius(&self) -> T {
        let m = self.midpoint();
        round::sub_up(self.hi, m).max(round::sub_up(m, self.lo))
    }

    /// A representable point inside the interval, close to the centre.
    #[inline]
    pub fn midpoint(&self) -> T {
        if self.lo == self.hi {
            return self.lo;
        }
        let half = T::lit(0.5);
        let m = self.lo * half + self.hi * half;
        m.max(self.lo).min(self.hi)
    }

    /// Upper bound on `max |x|` over the interval.
    #[inline]
    pub fn mag(&self) -> T {
        self.lo.abs().max(self.hi.abs())
    }

    /// Lower bound on `min |x|` over the interval.
    #[inline]
    pub fn mig(&self) -> T {
        if self.contains_zero() {
            T::zero()
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    #[inline]
    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn contains_zero(&self) -> bool {
        self.contains(T::zero())
    }

    /// `other ⊆ self`.
    #[inline]
    pub fn encloses(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    #[inline]
    pub fn intersects(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    #[inline]
    pub fn hull(&self, other: &Self) -> Self {
        Self { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    /// Hull with a single point.
    #[inline]
    pub fn hull_point(&self, x: T) -> Self {
        Self { lo: self.lo.min(x), hi: self.hi.max(x) }
    }

    /// Widens both ends by `r >= 0` (rounded outward).
    #[inline]
    pub fn inflate(&self, r: T) -> Self {
        let r = r.abs();
        Self { lo: round::sub_down(self.lo, r), hi: round::add_up(self.hi, r) }
    }

    /// Interval of `self - c` for a point `c`.
    #[inline]
    pub fn shift(&self, c: T) -> Self {
        *self - Self::point(c)
    }

    /// Multiplication by a point scalar.
    #[inline]
    pub fn scale(&self, c: T) -> Self {
        *self * Self::point(c)
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        if rhs.contains_zero() {
            return Err(Error::Domain(format!(
                "division by interval [{}, {}] containing zero",
                rhs.lo, rhs.hi
            )));
        }
        let (a, b) = (*self, *rhs);
        let lo = round::div_down(a.lo, b.lo)
            .min(round::div_down(a.lo, b.hi))
            .min(round::div_down(a.hi, b.lo))
            .min(round::div_down(a.hi, b.hi));
        let hi = round::div_up(a.lo, b.lo)
            .max(round::div_up(a.lo, b.hi))
            .max(round::div_up(a.hi, b.lo))
            .max(round::div_up(a.hi, b.hi));
        Ok(Self { lo, hi })
    }

    /// Enclosure of `{x^k | x in self}`; tight for even powers of
    /// sign-straddling intervals.
    pub fn powi(&self, k: u32) -> Self {
        if k == 0 {
            return Self::one();
        }
        if k == 1 {
            return *self;
        }
        let (lo, hi) = (self.lo, self.hi);
        if k % 2 == 1 {
            let down = |x: T| if x >= T::zero() { round::pow_down(x, k) } else { -round::pow_up(-x, k) };
            let up = |x: T| if x >= T::zero() { round::pow_up(x, k) } else { -round::pow_down(-x, k) };
            Self { lo: down(lo), hi: up(hi) }
        } else if lo >= T::zero() {
            Self { lo: round::pow_down(lo, k), hi: round::pow_up(hi, k) }
        } else if hi <= T::zero() {
            Self { lo: round::pow_down(-hi, k), hi: round::pow_up(-lo, k) }
        } else {
            Self { lo: T::zero(), hi: round::pow_up(self.mag(), k) }
        }
    }

    #[inline]
    pub fn sqr(&self) -> Self {
        self.powi(2)
    }

    /// Splits at the midpoint.
    pub fn bisect(&self) -> (Self, Self) {
        let m = self.midpoint();
        (Self { lo: self.lo, hi: m }, Self { lo: m, hi: self.hi })
    }
}

impl<T: Scalar> Add for Interval<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self { lo: round::add_down(self.lo, rhs.lo), hi: round::add_up(self.hi, rhs.hi) }
    }
}

impl<T: Scalar> Sub for Interval<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self { lo: round::sub_down(self.lo, rhs.hi), hi: round::sub_up(self.hi, rhs.lo) }
    }
}

impl<T: Scalar> Neg for Interval<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }
}

impl<T: Scalar> Mul for Interval<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        use round::{mul_down as dn, mul_up as up};
        let (a, b) = (self, rhs);
        let z = T::zero();
        // Sign cases: only when both factors straddle zero are more than
        // two endpoint products needed.
        let (lo, hi) = if a.lo >= z {
            if b.lo >= z {
                (dn(a.lo, b.lo), up(a.hi, b.hi))
            } else if b.hi <= z {
                (dn(a.hi, b.lo), up(a.lo, b.hi))
            } else {
                (dn(a.hi, b.lo), up(a.hi, b.hi))
            }
        } else if a.hi <= z {
            if b.lo >= z {
                (dn(a.lo, b.hi), up(a.hi, b.lo))
            } else if b.hi <= z {
                (dn(a.hi, b.hi), up(a.lo, b.lo))
            } else {
                (dn(a.lo, b.hi), up(a.lo, b.lo))
            }
        } else if b.lo >= z {
            (dn(a.lo, b.hi), up(a.hi, b.hi))
        } else if b.hi <= z {
            (dn(a.hi, b.lo), up(a.lo, b.lo))
        } else {
            (dn(a.lo, b.hi).min(dn(a.hi, b.lo)), up(a.lo, b.lo).max(up(a.hi, b.hi)))
        };
        Self { lo, hi }
    }
}

impl<T: Scalar> fmt::Debug for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// A box in `IR^n`.
#[derive(Clone, PartialEq)]
pub struct IntervalVector<T> {
    comps: Vec<Interval<T>>,
}

impl<T: Scalar> IntervalVector<T> {
    pub fn new(comps: Vec<Interval<T>>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::dims(1, 0));
        }
        Ok(Self { comps })
    }

    pub(crate) fn from_vec(comps: Vec<Interval<T>>) -> Self {
        Self { comps }
    }

    pub fn from_point(x: &[T]) -> Self {
        Self { comps: x.iter().map(|&v| Interval::point(v)).collect() }
    }

    pub fn from_bounds(lo: &[T], hi: &[T]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dims(lo.len(), hi.len()));
        }
        let comps = lo.iter().zip(hi).map(|(&l, &h)| Interval::new(l, h)).collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    /// Box `x ± r` in every coordinate.
    pub fn around(x: &[T], r: T) -> Self {
        Self { comps: x.iter().map(|&v| Interval::point(v).inflate(r)).collect() }
    }

    pub fn zeros(n: usize) -> Self {
        Self { comps: vec![Interval::zero(); n] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Interval<T>] {
        &self.comps
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval<T>> {
        self.comps.iter()
    }

    pub fn set(&mut self, i: usize, v: Interval<T>) {
        self.comps[i] = v;
    }

    pub fn midpoint(&self) -> Vec<T> {
        self.comps.iter().map(Interval::midpoint).collect()
    }

    pub fn lower(&self) -> Vec<T> {
        self.comps.iter().map(Interval::lo).collect()
    }

    pub fn upper(&self) -> Vec<T> {
        self.comps.iter().map(Interval::hi).collect()
    }

    pub fn widths(&self) -> Vec<T> {
        self.comps.iter().map(Interval::width).collect()
    }

    pub fn max_width(&self) -> T {
        self.comps.iter().map(Interval::width).fold(T::zero(), T::max)
    }

    /// Upper bound on the infinity norm of any member.
    pub fn mag_inf(&self) -> T {
        self.comps.iter().map(Interval::mag).fold(T::zero(), T::max)
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim() != other {
            return Err(Error::dims(self.dim(), other));
        }
        Ok(())
    }

    pub fn contains_point(&self, x: &[T]) -> bool {
        x.len() == self.dim() && self.comps.iter().zip(x).all(|(c, &v)| c.contains(v))
    }

    /// `other ⊆ self`.
    pub fn encloses(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.comps.iter().zip(&other.comps).all(|(a, b)| a.encloses(b))
    }

    pub fn hull(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.hull(b)).collect() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| *a + *b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| *a - *b).collect() })
    }

    /// Coordinatewise `self - c` for a point `c`.
    pub fn shift(&self, c: &[T]) -> Result<Self> {
        self.check_dim(c.len())?;
        Ok(Self { comps: self.comps.iter().zip(c).map(|(a, &v)| a.shift(v)).collect() })
    }

    pub fn scale(&self, s: Interval<T>) -> Self {
        Self { comps: self.comps.iter().map(|a| *a * s).collect() }
    }

    /// Widens every coordinate by `r`.
    pub fn inflate(&self, r: T) -> Self {
        Self { comps: self.comps.iter().map(|a| a.inflate(r)).collect() }
    }

    /// Scales each coordinate's radius about its midpoint by `factor >= 1`.
    pub fn blow_up(&self, factor: T) -> Self {
        Self {
            comps: self
                .comps
                .iter()
                .map(|a| {
                    let extra = round::mul_up(a.radius(), factor - T::one());
                    a.inflate(extra)
                })
                .collect(),
        }
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &Self) -> Self {
        let mut comps = self.comps.clone();
        comps.extend_from_slice(&other.comps);
        Self { comps }
    }

    /// Halves along coordinate `i`.
    pub fn bisect(&self, i: usize) -> (Self, Self) {
        let (a, b) = self.comps[i].bisect();
        let mut left = self.clone();
        let mut right = self.clone();
        left.comps[i] = a;
        right.comps[i] = b;
        (left, right)
    }
}

impl<T> Index<usize> for IntervalVector<T> {
    type Output = Interval<T>;
    fn index(&self, i: usize) -> &Interval<T> {
        &self.comps[i]
    }
}

impl<T: Scalar> fmt::Debug for IntervalVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.comps.iter()).finish()
    }
}

/// Row-major matrix of intervals.
#[derive(Clone, PartialEq)]
pub struct IntervalMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Interval<T>>,
}

impl<T: Scalar> IntervalMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Interval::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Interval::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Interval<T>>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::dims(1, 0));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dims(c, row.len()));
            }
            data.extend(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    /// Degenerate interval matrix from a row-major point matrix.
    pub fn from_point(rows: usize, cols: usize, values: &[T]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dims(rows * cols, values.len()));
        }
        Ok(Self { rows, cols, data: values.iter().map(|&v| Interval::point(v)).collect() })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Interval<T> {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Interval<T>) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(self.cols, other.rows));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Interval::zero();
                for k in 0..self.cols {
                    acc = acc + self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &IntervalVector<T>) -> Result<IntervalVector<T>> {
        if self.cols != v.dim() {
            return Err(Error::dims(self.cols, v.dim()));
        }
        let comps = (0..self.rows)
            .map(|i| (0..self.cols).fold(Interval::zero(), |acc, k| acc + self.get(i, k) * v[k]))
            .collect();
        Ok(IntervalVector::from_vec(comps))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(self.rows * self.cols, other.rows * other.cols));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        })
    }

    pub fn scale(&self, s: Interval<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| *a * s).collect() }
    }

    /// Adds `[-r, r]` to every entry.
    pub fn inflate(&self, r: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.inflate(r)).collect() }
    }

    /// Upper bound on the induced infinity norm over all contained matrices.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |acc, j| round::add_up(acc, self.get(i, j).mag())))
            .fold(T::zero(), T::max)
    }

    pub fn midpoint(&self) -> Vec<T> {
        self.data.iter().map(Interval::midpoint).collect()
    }
}

impl<T: Scalar> fmt::Debug for IntervalMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<_> = (0..self.rows).map(|i| &self.data[i * self.cols..(i + 1) * self.cols]).collect();
        f.debug_list().entries(rows).finish()
    }
}
