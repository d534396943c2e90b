//! Interval branch and bound for rigorous lower bounds of polynomials over
//! boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::interval::IntervalVector;
use crate::poly::MultiPoly;
use crate::scalar::Scalar;

/// Stopping rules. The lower bound is sound under every setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbOptions {
    /// Absolute gap between incumbent and lower bound that ends the search.
    pub tol: f64,
    /// Maximum number of boxes evaluated.
    pub budget: usize,
    /// Optional wall-clock limit.
    pub deadline: Option<Instant>,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self { tol: 1e-6, budget: 20_000, deadline: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound<T> {
    /// `lower <= min p` over the box.
    pub lower: T,
    /// Value attained at some point of the box, rounded up.
    pub upper: T,
    pub nodes: usize,
    /// Whether the search stopped on the gap criterion.
    pub converged: bool,
}

struct Node<T> {
    lb: T,
    seq: usize,
    bx: IntervalVector<T>,
}

impl<T: Scalar> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Node<T> {}

impl<T: Scalar> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Max-heap order: smallest lower bound first, then oldest node.
impl<T: Scalar> Ord for Node<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.lb.partial_cmp(&self.lb).unwrap_or(Ordering::Equal).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Bounder<'a, T: Scalar> {
    p: &'a MultiPoly<T>,
    support: Vec<usize>,
    grad: Vec<MultiPoly<T>>,
}

impl<T: Scalar> Bounder<'_, T> {
    /// Larger of the natural extension and the mean-value form.
    fn lower(&self, b: &IntervalVector<T>) -> T {
        let natural = self.p.eval_iv(b).expect("dimension checked").lo();
        if self.p.degree() <= 1 {
            return natural;
        }
        let mid = b.midpoint();
        let mut mv = self.p.eval_point_iv(&mid).expect("dimension checked");
        for (&i, g) in self.support.iter().zip(&self.grad) {
            let gi = g.eval_iv(b).expect("dimension checked");
            mv = mv + gi * b[i].shift(mid[i]);
        }
        natural.max(mv.lo())
    }

    fn upper_at_mid(&self, b: &IntervalVector<T>) -> T {
        self.p.eval_point_iv(&b.midpoint()).expect("dimension checked").hi()
    }

    fn split_coordinate(&self, b: &IntervalVector<T>) -> usize {
        let mut best = self.support[0];
        let mut best_w = T::neg_infinity();
        for &i in &self.support {
            let w = b[i].width();
            if w > best_w {
                best = i;
                best_w = w;
            }
        }
        best
    }
}

/// Rigorous lower bound of `p` over `bx`, with search statistics.
pub fn minimize_poly<T: Scalar>(p: &MultiPoly<T>, bx: &IntervalVector<T>, opts: &BnbOptions) -> Bound<T> {
    assert_eq!(bx.dim(), p.space().dim(), "box dimension must match the polynomial");
    let whole = p.eval_iv(bx).expect("dimension checked");
    let support = p.support();
    if p.degree() <= 1 || support.iter().all(|&i| bx[i].is_point()) {
        // Each variable occurs at most once, or none varies: the natural
        // extension is already exact up to rounding.
        let upper = p.eval_point_iv(&bx.midpoint()).expect("dimension checked").hi();
        return Bound { lower: whole.lo(), upper: upper.max(whole.lo()), nodes: 1, converged: true };
    }
    let grad = support.iter().map(|&i| p.diff(i)).collect();
    let bounder = Bounder { p, support, grad };
    let tol = T::lit(opts.tol);
    let mut upper = bounder.upper_at_mid(bx);
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node { lb: bounder.lower(bx), seq, bx: bx.clone() });
    let mut nodes = 1;
    loop {
        let Some(node) = heap.pop() else {
            // Unreachable in exact arithmetic: the box holding the minimiser is never pruned.
            return Bound { lower: whole.lo(), upper, nodes, converged: false };
        };
        let gap_closed = upper - node.lb <= tol;
        let out_of_time = opts.deadline.is_some_and(|d| Instant::now() >= d);
        if gap_closed || nodes + 2 > opts.budget || out_of_time {
            return Bound { lower: node.lb, upper, nodes, converged: gap_closed };
        }
        let i = bounder.split_coordinate(&node.bx);
        if node.bx[i].width() <= T::zero() || node.bx[i].bisect().0 == node.bx[i] {
            // Cannot split further; keep its bound as final.
            return Bound { lower: node.lb, upper, nodes, converged: false };
        }
        let (left, right) = node.bx.bisect(i);
        for child in [left, right] {
            nodes += 1;
            upper = upper.min(bounder.upper_at_mid(&child));
            let lb = bounder.lower(&child).max(node.lb);
            if lb <= upper {
                seq += 1;
                heap.push(Node { lb, seq, bx: child });
            }
        }
    }
}

/// Sound lower bound of `p` over `bx`; tightness degrades, never soundness,
/// when the budget is exhausted.
pub fn lower_bound_poly<T: Scalar>(p: &MultiPoly<T>, bx: &IntervalVector<T>, tol: f64, budget: usize) -> T {
    minimize_poly(p, bx, &BnbOptions { tol, budget, deadline: None }).lower
}
