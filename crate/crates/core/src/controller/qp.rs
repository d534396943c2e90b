//! Dual active-set solver (Goldfarb–Idnani) for
//! `min ½‖u − u_nom‖²  s.t.  nᵢᵀu >= bᵢ`, specialised to an identity Hessian.

use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::scalar::Scalar;

/// `row · u + rhs >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub row: Vec<T>,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn value(&self, u: &[T]) -> T {
        self.row.iter().zip(u).fold(self.rhs, |acc, (r, v)| acc + *r * *v)
    }

    /// Tightens by `eps · ‖row‖₂` so the constraint holds under any
    /// perturbation of `u` of norm at most `eps`.
    pub fn robust(&self, eps: T) -> Self {
        let norm = self.row.iter().fold(T::zero(), |acc, r| acc + *r * *r).sqrt();
        Self { row: self.row.clone(), rhs: self.rhs - eps * norm }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult<T> {
    pub u_star: Vec<T>,
    /// Active constraints: `0..k` are the safety constraints, `k + 2j` and
    /// `k + 2j + 1` the lower and upper bounds of input `j`.
    pub active_set: Vec<usize>,
    pub kkt_residual: T,
    pub feasible: bool,
    /// Largest violation of a safety constraint (zero when feasible).
    pub max_violation: T,
    pub iterations: usize,
}

/// Solution of one dense problem in standard form.
struct Solution<T> {
    x: Vec<T>,
    active: Vec<usize>,
    lambda: Vec<T>,
    iterations: usize,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Solves the symmetric positive definite system `M y = v` (small, dense).
fn solve_dense<T: Scalar>(mut m: Vec<Vec<T>>, mut v: Vec<T>) -> Option<Vec<T>> {
    let k = v.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[piv][col].abs() <= T::epsilon() * T::lit(1e3) {
            return None;
        }
        m.swap(col, piv);
        v.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            for c in col..k {
                let t = m[col][c];
                m[r][c] = m[r][c] - f * t;
            }
            let t = v[col];
            v[r] = v[r] - f * t;
        }
    }
    let mut y = vec![T::zero(); k];
    for r in (0..k).rev() {
        let s = (r + 1..k).fold(v[r], |acc, c| acc - m[r][c] * y[c]);
        y[r] = s / m[r][r];
    }
    Some(y)
}

/// Returns `(z, r)` with `z = (I − N(NᵀN)⁻¹Nᵀ) n_p` and `r = (NᵀN)⁻¹Nᵀ n_p`.
fn directions<T: Scalar>(normals: &[Vec<T>], active: &[usize], np: &[T]) -> (Vec<T>, Vec<T>) {
    if active.is_empty() {
        return (np.to_vec(), Vec::new());
    }
    let gram: Vec<Vec<T>> = active.iter().map(|&a| active.iter().map(|&b| dot(&normals[a], &normals[b])).collect()).collect();
    let rhs: Vec<T> = active.iter().map(|&a| dot(&normals[a], np)).collect();
    let r = solve_dense(gram, rhs).expect("active normals stay linearly independent");
    let mut z = np.to_vec();
    for (&a, &ra) in active.iter().zip(&r) {
        for (zi, ni) in z.iter_mut().zip(&normals[a]) {
            *zi = *zi - ra * *ni;
        }
    }
    (z, r)
}

/// Goldfarb–Idnani on `min ½‖x − x0‖² s.t. Nx >= b`. `None` if infeasible.
fn dual_active_set<T: Scalar>(x0: &[T], normals: &[Vec<T>], b: &[T]) -> Option<Solution<T>> {
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<T> = Vec::new();
    let scale = |i: usize| T::one() + b[i].abs() + normals[i].iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let viol_tol = T::epsilon() * T::lit(64.0);
    let mut iterations = 0;
    let max_iter = 50 * (normals.len() + dim + 1);
    loop {
        // Most violated constraint; the lowest index wins ties.
        let mut pick: Option<(usize, T)> = None;
        for i in 0..normals.len() {
            if active.contains(&i) {
                continue;
            }
            let s = dot(&normals[i], &x) - b[i];
            if s < -viol_tol * scale(i) && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((i, s));
            }
        }
        let Some((p, _)) = pick else {
            return Some(Solution { x, active, lambda, iterations });
        };
        let mut lambda_p = T::zero();
        loop {
            iterations += 1;
            if iterations > max_iter {
                return None;
            }
            let np = &normals[p];
            let (z, r) = directions(normals, &active, np);
            let zn = dot(&z, np);
            let z_zero = zn <= T::epsilon() * T::lit(1e3) * dot(np, np);
            let mut t1 = T::infinity();
            let mut drop = None;
            for (j, (&rj, &lj)) in r.iter().zip(&lambda).enumerate() {
                if rj > T::zero() {
                    let t = lj / rj;
                    if t < t1 || (t == t1 && drop.is_none_or(|d: usize| active[j] < active[d])) {
                        t1 = t;
                        drop = Some(j);
                    }
                }
            }
            let s_p = dot(np, &x) - b[p];
            let t2 = if z_zero { T::infinity() } else { -s_p / zn };
            if t1.is_infinite() && t2.is_infinite() {
                return None;
            }
            let t = t1.min(t2);
            if !z_zero {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi = *xi + t * *zi;
                }
            }
            for (lj, &rj) in lambda.iter_mut().zip(&r) {
                *lj = *lj - t * rj;
            }
            lambda_p = lambda_p + t;
            if t2 <= t1 {
                active.push(p);
                lambda.push(lambda_p);
                break;
            }
            let j = drop.expect("partial step has a blocking constraint");
            active.remove(j);
            lambda.remove(j);
        }
    }
}

fn box_rows<T: Scalar>(m: usize, u_box: &IntervalVector<T>) -> (Vec<Vec<T>>, Vec<T>) {
    let mut normals = Vec::with_capacity(2 * m);
    let mut b = Vec::with_capacity(2 * m);
    for j in 0..m {
        let mut lo = vec![T::zero(); m];
        lo[j] = T::one();
        normals.push(lo);
        b.push(u_box[j].lo());
        let mut hi = vec![T::zero(); m];
        hi[j] = -T::one();
        normals.push(hi);
        b.push(-u_box[j].hi());
    }
    (normals, b)
}

fn kkt_residual<T: Scalar>(x0: &[T], normals: &[Vec<T>], b: &[T], sol: &Solution<T>) -> T {
    let mut res = T::zero();
    for i in 0..x0.len() {
        let mut g = sol.x[i] - x0[i];
        for (&a, &l) in sol.active.iter().zip(&sol.lambda) {
            g = g - l * normals[a][i];
        }
        res = res.max(g.abs());
    }
    for (&a, &l) in sol.active.iter().zip(&sol.lambda) {
        res = res.max((-l).max(T::zero()));
        res = res.max((l * (dot(&normals[a], &sol.x) - b[a])).abs());
    }
    for (ni, bi) in normals.iter().zip(b) {
        res = res.max((*bi - dot(ni, &sol.x)).max(T::zero()));
    }
    res
}

/// Weight of the squared slack in the least-violation problem.
const SLACK_WEIGHT: f64 = 1e6;

/// Closest input to `u_nom` in `u_box` satisfying every constraint. If no
/// such input exists the least-violation point is returned, flagged.
pub fn solve_safety_qp<T: Scalar>(u_nom: &[T], constraints: &[Constraint<T>], u_box: &IntervalVector<T>) -> Result<QpResult<T>> {
    let m = u_nom.len();
    if u_box.dim() != m {
        return Err(Error::dims(m, u_box.dim()));
    }
    if let Some(c) = constraints.iter().find(|c| c.row.len() != m) {
        return Err(Error::dims(m, c.row.len()));
    }
    let k = constraints.len();
    let (bn, bb) = box_rows(m, u_box);
    let mut normals: Vec<Vec<T>> = constraints.iter().map(|c| c.row.clone()).collect();
    let mut b: Vec<T> = constraints.iter().map(|c| -c.rhs).collect();
    normals.extend(bn.iter().cloned());
    b.extend(bb.iter().copied());

    if let Some(sol) = dual_active_set(u_nom, &normals, &b) {
        let kkt = kkt_residual(u_nom, &normals, &b, &sol);
        let mut active = sol.active.clone();
        active.sort_unstable();
        return Ok(QpResult { u_star: sol.x, active_set: active, kkt_residual: kkt, feasible: true, max_violation: T::zero(), iterations: sol.iterations });
    }

    // Least violation: variables (u, s') with s = s'/√W, so the Hessian stays
    // the identity.
    let w = T::lit(SLACK_WEIGHT.sqrt());
    let mut soft_normals = Vec::with_capacity(normals.len() + k);
    let mut soft_b = Vec::with_capacity(normals.len() + k);
    for (i, c) in constraints.iter().enumerate() {
        let mut row = c.row.clone();
        row.extend((0..k).map(|j| if j == i { T::one() / w } else { T::zero() }));
        soft_normals.push(row);
        soft_b.push(-c.rhs);
    }
    for (n, bi) in bn.iter().zip(&bb) {
        let mut row = n.clone();
        row.extend(std::iter::repeat_n(T::zero(), k));
        soft_normals.push(row);
        soft_b.push(*bi);
    }
    for i in 0..k {
        let mut row = vec![T::zero(); m + k];
        row[m + i] = T::one();
        soft_normals.push(row);
        soft_b.push(T::zero());
    }
    let mut x0 = u_nom.to_vec();
    x0.extend(std::iter::repeat_n(T::zero(), k));
    let sol = dual_active_set(&x0, &soft_normals, &soft_b)
        .ok_or_else(|| Error::Convergence("least-violation problem failed".into()))?;
    let kkt = kkt_residual(&x0, &soft_normals, &soft_b, &sol);
    let u_star: Vec<T> = (0..m).map(|j| u_box[j].lo().max(sol.x[j].min(u_box[j].hi()))).collect();
    let max_violation = constraints.iter().fold(T::zero(), |acc, c| acc.max(-c.value(&u_star)));
    let mut active: Vec<usize> = sol.active.iter().filter(|&&a| a < k + 2 * m).copied().collect();
    active.sort_unstable();
    Ok(QpResult { u_star, active_set: active, kkt_residual: kkt, feasible: false, max_violation, iterations: sol.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box(m: usize) -> IntervalVector<f64> {
        IntervalVector::around(&vec![0.0; m], 1.0)
    }

    #[test]
    fn feasible_nominal_is_returned_unchanged() {
        let c = Constraint { row: vec![1.0, -0.5], rhs: 2.0 };
        let r = solve_safety_qp(&[0.3, 0.7], &[c], &unit_box(2)).unwrap();
        assert_eq!(r.u_star, vec![0.3, 0.7]);
        assert!(r.feasible && r.active_set.is_empty());
        assert_eq!(r.kkt_residual, 0.0);
    }

    #[test]
    fn projection_onto_a_half_line() {
        let c = Constraint { row: vec![1.0], rhs: -0.5 };
        let r = solve_safety_qp(&[0.0], &[c], &unit_box(1)).unwrap();
        assert_eq!(r.u_star, vec![0.5]);
        assert_eq!(r.active_set, vec![0]);
        assert!(r.kkt_residual <= 1e-12);
    }

    #[test]
    fn box_clipping_and_corner() {
        let r = solve_safety_qp(&[3.0, -4.0], &[], &unit_box(2)).unwrap();
        assert_eq!(r.u_star, vec![1.0, -1.0]);
        assert_eq!(r.active_set, vec![1, 2]);
    }

    #[test]
    fn degenerate_duplicate_constraints() {
        let c = Constraint { row: vec![1.0, 1.0], rhs: -1.0 };
        let r = solve_safety_qp(&[0.0, 0.0], &[c.clone(), c.clone(), c], &unit_box(2)).unwrap();
        assert!((r.u_star[0] - 0.5).abs() < 1e-14 && (r.u_star[1] - 0.5).abs() < 1e-14);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn infeasible_problem_returns_least_violation() {
        let a = Constraint { row: vec![1.0], rhs: -2.0 };
        let r = solve_safety_qp(&[0.0], &[a], &unit_box(1)).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.u_star, vec![1.0]);
        assert!((r.max_violation - 1.0).abs() < 1e-12);
        let lo = Constraint { row: vec![1.0], rhs: -0.5 };
        let hi = Constraint { row: vec![-1.0], rhs: 0.0 };
        let r = solve_safety_qp(&[0.9], &[lo, hi], &unit_box(1)).unwrap();
        assert!(!r.feasible);
        assert!((r.u_star[0] - 0.25).abs() < 1e-5, "{:?}", r.u_star);
    }

    #[test]
    fn robust_tightening_covers_perturbations() {
        let c: Constraint<f64> = Constraint { row: vec![3.0, -4.0], rhs: 1.0 };
        let t = c.robust(0.1);
        assert!((t.rhs - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let u = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if t.value(&u) < 0.0 {
                continue;
            }
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let e = [0.1 * a.cos(), 0.1 * a.sin()];
            assert!(c.value(&[u[0] + e[0], u[1] + e[1]]) >= -1e-12);
        }
    }

    #[test]
    fn random_instances_satisfy_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..500 {
            let m = rng.random_range(1..=3);
            let k = rng.random_range(0..=12);
            let feasible_pt: Vec<f64> = (0..m).map(|_| rng.random_range(-0.9..0.9)).collect();
            let cons: Vec<Constraint<f64>> = (0..k)
                .map(|_| {
                    let row: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let slack = rng.random_range(0.0..0.5);
                    let rhs = -dot(&row, &feasible_pt) + slack;
                    Constraint { row, rhs }
                })
                .collect();
            let u_nom: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let r = solve_safety_qp(&u_nom, &cons, &unit_box(m)).unwrap();
            assert!(r.feasible);
            assert!(r.kkt_residual <= 1e-8, "{}", r.kkt_residual);
            for c in &cons {
                assert!(c.value(&r.u_star) >= -1e-8);
            }
        }
    }
}
