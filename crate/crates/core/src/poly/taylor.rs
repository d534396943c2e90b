//! Interval Taylor models `(P, I)` of polynomials.
//!
//! For a polynomial `p`, an expansion point `z*` and a box `S ∋ z*`, the
//! model satisfies `p(z) ∈ P(z − z*) + I` for every `z ∈ S`. Recentering is
//! carried out with interval coefficients, so `P` holds the coefficient
//! midpoints of all terms of degree `<= n` and `I` absorbs both the
//! discarded tail and the coefficient rounding errors.

use super::{IntervalPoly, MultiPoly};
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalVector};
use crate::scalar::Scalar;

#[derive(Clone)]
pub struct TaylorModel<T: Scalar> {
    center: Vec<T>,
    domain: IntervalVector<T>,
    poly: MultiPoly<T>,
    remainder: Interval<T>,
    order: u32,
}

impl<T: Scalar> TaylorModel<T> {
    /// Builds the order-`order` model of `p` around `z_star` over `domain`.
    pub fn build(p: &MultiPoly<T>, z_star: &[T], domain: &IntervalVector<T>, order: u32) -> Result<Self> {
        check_center(p.space().dim(), z_star, domain)?;
        let q = p.to_interval().recenter_point(z_star)?;
        Self::from_recentered(&q, z_star, domain, order)
    }

    /// Builds a model from a polynomial already expressed in `w = z − z_star`.
    pub(crate) fn from_recentered(q: &IntervalPoly<T>, z_star: &[T], domain: &IntervalVector<T>, order: u32) -> Result<Self> {
        check_center(q.space().dim(), z_star, domain)?;
        let w = domain.shift(z_star)?;
        let (low, high) = q.split_at_degree(order);
        let (poly, deviation) = low.split_midpoint();
        let remainder = high.eval_iv(&w)? + deviation.eval_iv(&w)?;
        Ok(Self { center: z_star.to_vec(), domain: domain.clone(), poly, remainder, order })
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn domain(&self) -> &IntervalVector<T> {
        &self.domain
    }

    /// The truncated polynomial `P`, in shifted coordinates `w = z − z*`.
    pub fn poly(&self) -> &MultiPoly<T> {
        &self.poly
    }

    pub fn remainder(&self) -> Interval<T> {
        self.remainder
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Rigorous enclosure of `P(z − z*) + I` at a point of the domain.
    pub fn enclosure_at(&self, z: &[T]) -> Result<Interval<T>> {
        let w = IntervalVector::from_point(z).shift(&self.center)?;
        Ok(self.poly.eval_iv(&w)? + self.remainder)
    }
}

fn check_center<T: Scalar>(dim: usize, z_star: &[T], domain: &IntervalVector<T>) -> Result<()> {
    if z_star.len() != dim {
        return Err(Error::dims(dim, z_star.len()));
    }
    if domain.dim() != dim {
        return Err(Error::dims(dim, domain.dim()));
    }
    match z_star.iter().zip(domain.iter()).position(|(z, d)| !d.contains(*z)) {
        Some(index) => Err(Error::PointOutsideDomain { index }),
        None => Ok(()),
    }
}

/// Free-function form of [`TaylorModel::build`].
pub fn build_taylor_model<T: Scalar>(
    p: &MultiPoly<T>,
    z_star: &[T],
    domain: &IntervalVector<T>,
    order: u32,
) -> Result<TaylorModel<T>> {
    TaylorModel::build(p, z_star, domain, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::VarSpace;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_box(rng: &mut ChaCha8Rng, b: &IntervalVector<f64>) -> Vec<f64> {
        b.iter().map(|c| if c.is_point() { c.lo() } else { rng.random_range(c.lo()..=c.hi()) }).collect()
    }

    fn assert_contains(p: &MultiPoly<f64>, tm: &TaylorModel<f64>, samples: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let z = sample_box(&mut rng, tm.domain());
            let exact = p.eval_point_iv(&z).unwrap();
            let model = tm.enclosure_at(&z).unwrap();
            assert!(model.intersects(&exact), "p({z:?}) = {exact} outside {model}");
        }
    }

    #[test]
    fn linear_polynomials_have_zero_remainder() {
        let s = VarSpace::standard(2, 1);
        let p = MultiPoly::parse(&s, "3*x1 - 2*x2 + u1 + 4").unwrap();
        let dom = IntervalVector::from_bounds(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]).unwrap();
        for order in 1..4 {
            let tm = build_taylor_model(&p, &[0.0, 0.5, 0.0], &dom, order).unwrap();
            assert_eq!(tm.remainder(), Interval::zero());
        }
    }

    #[test]
    fn square_at_order_one_moves_into_remainder() {
        let s = VarSpace::standard(1, 0);
        let p = MultiPoly::parse(&s, "x1^2").unwrap();
        let dom = IntervalVector::from_bounds(&[-1.0], &[1.0]).unwrap();
        let tm = build_taylor_model(&p, &[0.0], &dom, 1).unwrap();
        assert!(tm.poly().is_zero());
        assert!(tm.remainder().encloses(&Interval::new(0.0, 1.0).unwrap()));
    }

    #[test]
    fn center_outside_domain_is_rejected() {
        let s = VarSpace::standard(2, 0);
        let p = MultiPoly::parse(&s, "x1*x2").unwrap();
        let dom = IntervalVector::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(build_taylor_model(&p, &[0.0, 2.0], &dom, 2).err(), Some(Error::PointOutsideDomain { index: 1 }));
    }

    #[test]
    fn cubic_system_model_contains_samples() {
        let s = VarSpace::standard(2, 1);
        let xi = MultiPoly::parse(&s, "0.6*x1 + x2 - 2*x1^3*x2 - 2*x2^2*u1 + 3*(1 - x1 - x2^2)").unwrap();
        let dom = IntervalVector::from_bounds(&[-2.1, 0.9, -1.0], &[-1.9, 1.1, 1.0]).unwrap();
        let tm = build_taylor_model(&xi, &[-2.0, 1.0, 0.0], &dom, 2).unwrap();
        assert!(tm.remainder().width() > 0.0);
        assert_contains(&xi, &tm, 10_000, 3);
    }

    fn arb_poly() -> impl Strategy<Value = MultiPoly<f64>> {
        let s = VarSpace::standard(2, 1);
        proptest::collection::vec((proptest::collection::vec(0u32..4, 3), -5.0f64..5.0), 1..10)
            .prop_map(move |terms| MultiPoly::from_terms(&s, terms).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn containment_holds(p in arb_poly(), order in 0u32..4, c in proptest::collection::vec(-1.0f64..1.0, 3),
                             r in 0.01f64..1.0, seed in 0u64..1000) {
            let dom = IntervalVector::around(&c, r);
            let tm = build_taylor_model(&p, &c, &dom, order).unwrap();
            assert_contains(&p, &tm, 200, seed);
        }

        #[test]
        fn remainder_shrinks_with_order(p in arb_poly(), c in proptest::collection::vec(-1.0f64..1.0, 3),
                                        r in 0.01f64..0.3, order in 0u32..3) {
            prop_assume!(p.degree() > order + 1);
            let dom = IntervalVector::around(&c, r);
            let lo = build_taylor_model(&p, &c, &dom, order).unwrap();
            let hi = build_taylor_model(&p, &c, &dom, order + 1).unwrap();
            prop_assert!(hi.remainder().width() <= lo.remainder().width() * (1.0 + 1e-9) + 1e-12,
                "{} vs {}", hi.remainder(), lo.remainder());
        }
    }
}
