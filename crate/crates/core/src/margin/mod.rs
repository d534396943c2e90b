//! The sampled-data margin `φ = I̲ + φ̲`.
//!
//! `Δξ(x, u) = ξ(x, u) − ξ(x_anchor, u)` is expanded around
//! `z* = (x_anchor, u_c)` over `Z = hull(tube) × U`. `I̲` is the lower end of
//! the Taylor remainder and `φ̲` a branch-and-bound lower bound of the
//! Taylor polynomial over `Z − z*`, so `φ <= Δξ` on all of `Z`.

mod bnb;

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::interval::{round, Interval, IntervalVector};
use crate::poly::{MultiPoly, TaylorModel};
use crate::reach::ReachResult;
use crate::scalar::Scalar;

pub use bnb::{lower_bound_poly, minimize_poly, BnbOptions, Bound};

/// One margin query.
#[derive(Debug, Clone, Copy)]
pub struct MarginRequest<'a, T: Scalar> {
    pub xi: &'a MultiPoly<T>,
    /// `x_k`, or the estimate `x̂_k` under measurement noise.
    pub x_anchor: &'a [T],
    /// Centre of the input box.
    pub u_center: &'a [T],
    pub dt: T,
    /// Measurement radius already accounted for in the reach step.
    pub eps_x: T,
    pub order: u32,
}

#[derive(Clone)]
pub struct MarginResult<T: Scalar> {
    pub phi: T,
    pub remainder_lo: T,
    pub poly_lo: T,
    pub zk_hull: IntervalVector<T>,
    pub nodes: usize,
    pub converged: bool,
    pub wall_time: Duration,
    pub model: TaylorModel<T>,
}

/// `ξ(x, u) − ξ(x_anchor, u)` in floating point.
pub fn delta_xi<T: Scalar>(xi: &MultiPoly<T>, x_anchor: &[T]) -> MultiPoly<T> {
    let assign: Vec<(usize, T)> = x_anchor.iter().copied().enumerate().collect();
    xi - &xi.substitute(&assign)
}

/// Box enclosure of the 2-norm ball `B_eps(x)`.
pub fn ball_box<T: Scalar>(x: &[T], eps: T) -> IntervalVector<T> {
    IntervalVector::around(x, eps)
}

/// `Z_k = hull(tube) × U`.
pub fn assemble_zk<T: Scalar>(reach: &ReachResult<T>, u_box: &IntervalVector<T>) -> IntervalVector<T> {
    reach.hull.product(u_box)
}

/// Margin of one constraint for one sampling step.
pub fn compute_margin<T: Scalar>(
    req: &MarginRequest<'_, T>,
    reach: &ReachResult<T>,
    u_box: &IntervalVector<T>,
    opts: &BnbOptions,
) -> Result<MarginResult<T>> {
    let start = Instant::now();
    let space = req.xi.space();
    let n = space.n_states();
    if req.x_anchor.len() != n {
        return Err(Error::dims(n, req.x_anchor.len()));
    }
    let z_star = space.join(req.x_anchor, req.u_center)?;
    let zk = assemble_zk(reach, u_box);
    // In w = z − z*, Δξ(z* + w) is exactly the recentred ξ without the
    // terms free of state variables.
    let shifted = req.xi.to_interval().recenter_point(&z_star)?;
    let dxi = shifted.retain_terms(|e| e[..n].iter().any(|&k| k > 0));
    let model = TaylorModel::from_recentered(&dxi, &z_star, &zk, req.order)?;
    let w = zk.shift(&z_star)?;
    let bound = minimize_poly(model.poly(), &w, opts);
    let remainder_lo = model.remainder().lo();
    let poly_lo = bound.lower;
    let phi = round::add_down(remainder_lo, poly_lo);
    Ok(MarginResult {
        phi,
        remainder_lo,
        poly_lo,
        zk_hull: zk,
        nodes: bound.nodes,
        converged: bound.converged,
        wall_time: start.elapsed(),
        model,
    })
}

/// Whether every `s_k` is nonnegative on the box around `B_eps(x0_hat)`.
pub fn check_initial_condition<T: Scalar>(s_chain: &[MultiPoly<T>], x0_hat: &[T], eps_x: T, opts: &BnbOptions) -> bool {
    s_chain.iter().all(|s| {
        let m = s.space().n_inputs();
        let bx = ball_box(x0_hat, eps_x).product(&IntervalVector::zeros(m));
        minimize_poly(s, &bx, opts).lower >= T::zero()
    })
}

/// Smallest `s_k` lower bound over the ball box, for reporting.
pub fn initial_condition_bounds<T: Scalar>(s_chain: &[MultiPoly<T>], x0_hat: &[T], eps_x: T, opts: &BnbOptions) -> Vec<T> {
    s_chain
        .iter()
        .map(|s| {
            let m = s.space().n_inputs();
            let bx = ball_box(x0_hat, eps_x).product(&IntervalVector::zeros(m));
            minimize_poly(s, &bx, opts).lower
        })
        .collect()
}

/// Rigorous enclosure of `Δξ` at a point, for audits.
pub fn delta_xi_enclosure<T: Scalar>(xi: &MultiPoly<T>, x: &[T], u: &[T], x_anchor: &[T]) -> Result<Interval<T>> {
    let space = xi.space();
    let a = xi.eval_point_iv(&space.join(x, u)?)?;
    let b = xi.eval_point_iv(&space.join(x_anchor, u)?)?;
    Ok(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::VarSpace;
    use crate::reach::{reach_step, PolyField, ReachOptions, Zonotope};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    struct Cubic {
        space: Arc<VarSpace>,
        field: PolyField<f64>,
        xi: MultiPoly<f64>,
    }

    fn cubic() -> Cubic {
        let s = VarSpace::standard(2, 1);
        let p = |t: &str| MultiPoly::parse(&s, t).unwrap();
        let field = PolyField::new(&s, vec![p("-0.6*x1 - x2"), p("x1^3")], vec![vec![p("0")], vec![p("x2")]]).unwrap();
        let h = p("-x2^2 - x1 + 1");
        let lf = h.lie_derivative(field.f()).unwrap();
        let lg = h.lie_derivative(&[p("0"), p("x2")]).unwrap();
        let xi = &(&lf + &(&lg * &p("u1"))) + &h.scale(&3.0);
        Cubic { space: s, field, xi }
    }

    fn margin_at(c: &Cubic, x: &[f64], dt: f64, eps_x: f64) -> MarginResult<f64> {
        let u_box = IntervalVector::around(&[0.0], 1.0);
        let x0 = Zonotope::from_box(&ball_box(x, eps_x));
        let reach = reach_step(&c.field, &x0, &u_box, &[0.0], dt, &ReachOptions::default()).unwrap();
        let req = MarginRequest { xi: &c.xi, x_anchor: x, u_center: &[0.0], dt, eps_x, order: 2 };
        compute_margin(&req, &reach, &u_box, &BnbOptions::default()).unwrap()
    }

    #[test]
    fn delta_xi_vanishes_at_the_anchor() {
        let c = cubic();
        let d = delta_xi(&c.xi, &[-2.0, 1.0]);
        let s = d.substitute(&[(0, -2.0), (1, 1.0)]);
        assert!(s.is_zero(), "{s}");
        let state_free = MultiPoly::parse(&c.space, "u1^2 + 3*u1").unwrap();
        assert!(delta_xi(&state_free, &[0.3, 0.1]).is_zero());
    }

    #[test]
    fn delta_xi_matches_direct_evaluation() {
        let c = cubic();
        let anchor = [-2.0, 1.0];
        let d = delta_xi(&c.xi, &anchor);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x = [rng.random_range(-3.0..1.0), rng.random_range(-2.0..2.0)];
            let u = [rng.random_range(-1.0..1.0)];
            let direct = c.xi.eval(&[x[0], x[1], u[0]]).unwrap() - c.xi.eval(&[anchor[0], anchor[1], u[0]]).unwrap();
            assert!((d.eval(&[x[0], x[1], u[0]]).unwrap() - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn state_free_xi_has_zero_margin() {
        let c = cubic();
        let xi = MultiPoly::parse(&c.space, "2*u1 + 1").unwrap();
        let u_box = IntervalVector::around(&[0.0], 1.0);
        let reach = reach_step(&c.field, &Zonotope::point(&[-2.0, 1.0]), &u_box, &[0.0], 0.02, &ReachOptions::default()).unwrap();
        let req = MarginRequest { xi: &xi, x_anchor: &[-2.0, 1.0], u_center: &[0.0], dt: 0.02, eps_x: 0.0, order: 2 };
        let r = compute_margin(&req, &reach, &u_box, &BnbOptions::default()).unwrap();
        assert_eq!(r.phi, 0.0);
    }

    #[test]
    fn input_coordinate_of_zk_is_the_input_box() {
        let c = cubic();
        let r = margin_at(&c, &[-2.0, 1.0], 0.02, 0.0);
        assert_eq!(r.zk_hull[2], Interval::new(-1.0, 1.0).unwrap());
        assert_eq!(r.phi, round::add_down(r.remainder_lo, r.poly_lo));
    }

    #[test]
    fn ball_samples_lie_in_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = [0.3, -1.2, 2.0];
        let eps = 0.1;
        let bx = ball_box(&x, eps);
        for _ in 0..10_000 {
            let d: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 || norm == 0.0 {
                continue;
            }
            let p: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
            assert!(bx.contains_point(&p));
        }
    }

    #[test]
    fn margin_vanishes_as_the_interval_shrinks() {
        let c = cubic();
        // |Δξ| on Z_k is first order in dt: sup|∂ξ/∂x₂|·sup|ẋ₂| = 15·9 here.
        for dt in [1e-5, 1e-6, 1e-7] {
            let r = margin_at(&c, &[-2.0, 1.0], dt, 0.0);
            assert!(r.phi <= 0.0 && r.phi.abs() <= 150.0 * dt, "dt {dt}: {}", r.phi);
        }
        assert!(margin_at(&c, &[-2.0, 1.0], 5e-6, 0.0).phi.abs() <= 1e-3);
    }

    #[test]
    fn margin_is_a_lower_bound_of_delta_xi() {
        let c = cubic();
        let anchor = [-2.0, 1.0];
        let r = margin_at(&c, &anchor, 0.02, 0.0);
        let d = delta_xi(&c.xi, &anchor);
        let zk = &r.zk_hull;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100_000 {
            let z: Vec<f64> = zk.iter().map(|c| rng.random_range(c.lo()..=c.hi())).collect();
            assert!(r.phi <= d.eval(&z).unwrap());
        }
        assert!(r.model.remainder().width() > 0.0);
    }

    #[test]
    fn margin_is_monotone_in_uncertainty_and_interval() {
        let c = cubic();
        let anchor = [-1.5, 0.8];
        let mut prev = f64::INFINITY;
        for eps in [0.0, 0.05, 0.1, 0.15] {
            let phi = margin_at(&c, &anchor, 0.02, eps).phi;
            assert!(phi <= prev + 1e-5, "eps {eps}: {phi} > {prev}");
            prev = phi;
        }
        let mut prev = f64::INFINITY;
        for dt in [0.005, 0.01, 0.02] {
            let phi = margin_at(&c, &anchor, dt, 0.05).phi;
            assert!(phi <= prev + 1e-5, "dt {dt}: {phi} > {prev}");
            prev = phi;
        }
    }

    #[test]
    fn linear_field_and_linear_xi_give_exact_polynomial_bound() {
        let s = VarSpace::standard(2, 1);
        let p = |t: &str| MultiPoly::parse(&s, t).unwrap();
        let field = PolyField::new(&s, vec![p("x2"), p("0")], vec![vec![p("0")], vec![p("1")]]).unwrap();
        let xi = p("u1 + 8*x2 + 6*(0.5 - x1)");
        let u_box = IntervalVector::around(&[0.0], 3.0);
        let x0 = Zonotope::from_box(&ball_box(&[0.1, 0.2], 0.02));
        let reach = reach_step(&field, &x0, &u_box, &[0.0], 0.02, &ReachOptions::default()).unwrap();
        let req = MarginRequest { xi: &xi, x_anchor: &[0.1, 0.2], u_center: &[0.0], dt: 0.02, eps_x: 0.02, order: 2 };
        let r = compute_margin(&req, &reach, &u_box, &BnbOptions::default()).unwrap();
        assert_eq!(r.model.remainder(), Interval::zero());
        assert_eq!(r.phi, r.poly_lo);
        assert_eq!(r.nodes, 1);
    }

    #[test]
    fn initial_condition_checks() {
        let s = VarSpace::standard(2, 0);
        let h = MultiPoly::parse(&s, "x1").unwrap();
        let opts = BnbOptions::default();
        assert!(check_initial_condition(std::slice::from_ref(&h), &[0.05, 0.0], 0.0, &opts));
        assert!(!check_initial_condition(std::slice::from_ref(&h), &[0.05, 0.0], 0.1, &opts));
        let s2 = VarSpace::standard(2, 1);
        let h2 = MultiPoly::parse(&s2, "10 - 25*(x1 - 0.5)^2").unwrap();
        assert_eq!(h2.eval(&[0.5, -1.0, 0.0]).unwrap(), 10.0);
        assert!(check_initial_condition(&[h2], &[0.5, -1.0], 0.0, &opts));
    }
}
