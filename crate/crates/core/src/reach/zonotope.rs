use rand::Rng;

use crate::error::{Error, Result};
use crate::interval::{round, Interval, IntervalMatrix, IntervalVector};
use crate::scalar::Scalar;

/// `{c + Σ βᵢ gᵢ | βᵢ ∈ [−1, 1]}`.
///
/// Operations that involve rounding return a superset: the rounding error
/// is collected into axis-aligned generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope<T> {
    center: Vec<T>,
    generators: Vec<Vec<T>>,
}

impl<T: Scalar> Zonotope<T> {
    pub fn new(center: Vec<T>, generators: Vec<Vec<T>>) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.len() != center.len()) {
            return Err(Error::dims(center.len(), g.len()));
        }
        Ok(Self { center, generators })
    }

    pub fn point(x: &[T]) -> Self {
        Self { center: x.to_vec(), generators: Vec::new() }
    }

    /// Exact representation of a box, rounded outward.
    pub fn from_box(b: &IntervalVector<T>) -> Self {
        Self::enclose(b.clone(), Vec::new())
    }

    /// Encloses `{c + Σ βᵢ gᵢ | c ∈ [c], gᵢ ∈ [gᵢ]}` by taking midpoints
    /// and collecting all radii into one box.
    pub fn enclose(center: IntervalVector<T>, generators: Vec<IntervalVector<T>>) -> Self {
        let n = center.dim();
        let mut slack: Vec<T> = center.iter().map(Interval::radius).collect();
        let mut gens = Vec::with_capacity(generators.len() + n);
        for g in &generators {
            let mid = g.midpoint();
            for (s, c) in slack.iter_mut().zip(g.iter()) {
                *s = round::add_up(*s, c.radius());
            }
            if mid.iter().any(|v| *v != T::zero()) {
                gens.push(mid);
            }
        }
        for (i, s) in slack.into_iter().enumerate() {
            if s > T::zero() {
                let mut e = vec![T::zero(); n];
                e[i] = s;
                gens.push(e);
            }
        }
        Self { center: center.midpoint(), generators: gens }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn generators(&self) -> &[Vec<T>] {
        &self.generators
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    fn interval_parts(&self) -> (IntervalVector<T>, Vec<IntervalVector<T>>) {
        (IntervalVector::from_point(&self.center), self.generators.iter().map(|g| IntervalVector::from_point(g)).collect())
    }

    /// `{M z | M ∈ [M], z ∈ Z}`.
    pub fn linear_map(&self, m: &IntervalMatrix<T>) -> Result<Self> {
        if m.cols() != self.dim() {
            return Err(Error::dims(m.cols(), self.dim()));
        }
        let (c, gs) = self.interval_parts();
        let c = m.mul_vec(&c)?;
        let gs = gs.iter().map(|g| m.mul_vec(g)).collect::<Result<Vec<_>>>()?;
        Ok(Self::enclose(c, gs))
    }

    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::dims(self.dim(), other.dim()));
        }
        let c = IntervalVector::from_point(&self.center).add(&IntervalVector::from_point(&other.center))?;
        let gs = self.generators.iter().chain(&other.generators).map(|g| IntervalVector::from_point(g)).collect();
        Ok(Self::enclose(c, gs))
    }

    pub fn add_box(&self, b: &IntervalVector<T>) -> Result<Self> {
        self.minkowski_sum(&Self::from_box(b))
    }

    pub fn translate(&self, x: &[T]) -> Result<Self> {
        self.minkowski_sum(&Self::point(x))
    }

    /// Encloses the convex hull of `Z` and `[Φ] Z`.
    pub fn convex_hull_with_map(&self, phi: &IntervalMatrix<T>) -> Result<Self> {
        let half = Interval::point(T::lit(0.5));
        let (c, gs) = self.interval_parts();
        let pc = phi.mul_vec(&c)?;
        let mut parts = Vec::with_capacity(2 * gs.len() + 1);
        parts.push(c.sub(&pc)?.scale(half));
        for g in &gs {
            let pg = phi.mul_vec(g)?;
            parts.push(g.add(&pg)?.scale(half));
            parts.push(g.sub(&pg)?.scale(half));
        }
        Ok(Self::enclose(c.add(&pc)?.scale(half), parts))
    }

    /// Smallest enclosing box: `c ± Σ |gᵢ|`, rounded outward.
    pub fn interval_hull(&self) -> IntervalVector<T> {
        let comps = (0..self.dim())
            .map(|i| {
                let r = self.generators.iter().fold(T::zero(), |acc, g| round::add_up(acc, g[i].abs()));
                Interval::point(self.center[i]).inflate(r)
            })
            .collect();
        IntervalVector::new(comps).expect("nonempty zonotope")
    }

    /// Caps the generator count: the smallest generators are replaced by
    /// their interval hull, which is a sound over-approximation.
    pub fn reduce(&self, cap: usize) -> Self {
        let n = self.dim();
        if self.generators.len() <= cap {
            return self.clone();
        }
        if cap <= n {
            return Self::from_box(&self.interval_hull());
        }
        let score = |g: &Vec<T>| {
            let l1 = g.iter().fold(T::zero(), |a, v| a + v.abs());
            let linf = g.iter().fold(T::zero(), |a, v| a.max(v.abs()));
            l1 - linf
        };
        let mut order: Vec<usize> = (0..self.generators.len()).collect();
        order.sort_by(|&a, &b| score(&self.generators[a]).partial_cmp(&score(&self.generators[b])).unwrap().then(a.cmp(&b)));
        let n_boxed = self.generators.len() - (cap - n);
        let mut boxed = vec![T::zero(); n];
        for &k in &order[..n_boxed] {
            for (b, v) in boxed.iter_mut().zip(&self.generators[k]) {
                *b = round::add_up(*b, v.abs());
            }
        }
        let mut keep: Vec<usize> = order[n_boxed..].to_vec();
        keep.sort_unstable();
        let mut gens: Vec<Vec<T>> = keep.into_iter().map(|k| self.generators[k].clone()).collect();
        for (i, b) in boxed.into_iter().enumerate() {
            if b > T::zero() {
                let mut e = vec![T::zero(); n];
                e[i] = b;
                gens.push(e);
            }
        }
        Self { center: self.center.clone(), generators: gens }
    }

    /// A random member, with coefficients `β` drawn uniformly.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        let mut x = self.center.clone();
        for g in &self.generators {
            let beta = T::lit(rng.random_range(-1.0..=1.0));
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi = *xi + beta * *gi;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zono(c: &[f64], gs: &[&[f64]]) -> Zonotope<f64> {
        Zonotope::new(c.to_vec(), gs.iter().map(|g| g.to_vec()).collect()).unwrap()
    }

    fn grid_points(z: &Zonotope<f64>, steps: usize) -> Vec<Vec<f64>> {
        let k = z.n_generators();
        let total = (steps + 1).pow(k as u32);
        (0..total)
            .map(|mut idx| {
                let mut x = z.center().to_vec();
                for g in z.generators() {
                    let beta = -1.0 + 2.0 * (idx % (steps + 1)) as f64 / steps as f64;
                    idx /= steps + 1;
                    for (xi, gi) in x.iter_mut().zip(g) {
                        *xi += beta * gi;
                    }
                }
                x
            })
            .collect()
    }

    #[test]
    fn identity_map_is_a_no_op() {
        let z = zono(&[1.0, -2.0], &[&[1.0, 0.5], &[0.0, 2.0]]);
        assert_eq!(z.linear_map(&IntervalMatrix::identity(2)).unwrap(), z);
    }

    #[test]
    fn sum_of_unit_boxes() {
        let b = IntervalVector::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let z = Zonotope::from_box(&b);
        let s = z.minkowski_sum(&z).unwrap();
        assert_eq!(s.interval_hull(), IntervalVector::from_bounds(&[-2.0, -2.0], &[2.0, 2.0]).unwrap());
    }

    #[test]
    fn hull_matches_beta_grid() {
        let z = zono(&[1.0, 1.0], &[&[1.0, 0.0], &[1.0, 1.0]]);
        let h = z.interval_hull();
        assert_eq!(h, IntervalVector::from_bounds(&[-1.0, 0.0], &[3.0, 2.0]).unwrap());
        let pts = grid_points(&z, 2);
        for i in 0..2 {
            let lo = pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!((lo, hi), (h[i].lo(), h[i].hi()));
        }
    }

    #[test]
    fn operations_match_brute_force_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..=3);
            let k = rng.random_range(0..=4);
            let rand_vec = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
            let z = Zonotope::new(rand_vec(&mut rng), (0..k).map(|_| rand_vec(&mut rng)).collect()).unwrap();
            let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mi = IntervalMatrix::from_point(n, n, &m).unwrap();
            let mapped = z.linear_map(&mi).unwrap().interval_hull();
            let hull = z.interval_hull();
            for p in grid_points(&z, 4) {
                assert!(hull.contains_point(&p));
                let mp: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i * n + j] * p[j]).sum()).collect();
                let slack = IntervalVector::from_point(&mp);
                assert!(mapped.inflate(1e-12).encloses(&slack), "{mapped:?} misses {mp:?}");
            }
            let other = Zonotope::new(rand_vec(&mut rng), vec![rand_vec(&mut rng)]).unwrap();
            let sum = z.minkowski_sum(&other).unwrap().interval_hull();
            for p in grid_points(&z, 2) {
                for q in grid_points(&other, 2) {
                    let s: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
                    assert!(sum.inflate(1e-12).contains_point(&s));
                }
            }
            let zz = z.minkowski_sum(&z).unwrap();
            let red = zz.reduce(n + 1);
            assert!(red.n_generators() <= n + 1);
            assert!(red.interval_hull().inflate(1e-12).encloses(&zz.interval_hull()));
        }
    }

    #[test]
    fn convex_hull_contains_both_sets() {
        let z = zono(&[0.5, -0.5], &[&[0.2, 0.1], &[0.0, 0.3]]);
        let phi = IntervalMatrix::from_point(2, 2, &[0.9, 0.2, -0.3, 1.1]).unwrap();
        let ch = z.convex_hull_with_map(&phi).unwrap().interval_hull();
        let mapped = z.linear_map(&phi).unwrap().interval_hull();
        assert!(ch.encloses(&z.interval_hull()));
        assert!(ch.encloses(&mapped));
    }

    #[test]
    fn samples_lie_in_the_hull() {
        let z = zono(&[0.0, 1.0, 2.0], &[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 0.0]]);
        let h = z.interval_hull();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            assert!(h.contains_point(&z.sample(&mut rng)));
        }
    }
}
