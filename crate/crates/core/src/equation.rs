//! Per-node MSE equations.
//!
//! Every node carries four coefficient vectors such that replacing the node
//! output `o` gives a whole-tree error of
//!
//! ```text
//! MSE(o) = 1/N * sum_i ((a_i * o_i - b_i) / (c_i * o_i - d_i))^2
//! ```
//!
//! together with the forbidden set of outputs that would break an ancestor
//! division. The root starts from `(1, t, 0, -1)` and each operator rewrites
//! its parent's coefficients for both children.

use crate::eval::EvaluatedTree;
use crate::forbidden::{ForbiddenSet, Side};
use crate::tree::BinaryOp;

/// Denominators smaller than this in magnitude reject a candidate.
pub const DENOMINATOR_GUARD: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeEquation {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub forbidden: ForbiddenSet,
}

pub fn root_equation(targets: &[f64]) -> NodeEquation {
    let n = targets.len();
    NodeEquation {
        a: vec![1.0; n],
        b: targets.to_vec(),
        c: vec![0.0; n],
        d: vec![-1.0; n],
        forbidden: ForbiddenSet::empty(),
    }
}

impl NodeEquation {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Equation of the child at `side` of an `op` node, where `sibling` is
    /// the semantics of the other child.
    pub fn child(&self, op: BinaryOp, side: Side, sibling: &[f64]) -> NodeEquation {
        let n = self.len();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            let (ai, bi, ci, di, s) = (self.a[i], self.b[i], self.c[i], self.d[i], sibling[i]);
            let (na, nb, nc, nd) = match (op, side) {
                (BinaryOp::Add, _) => (ai, bi - ai * s, ci, di - ci * s),
                (BinaryOp::Sub, Side::First) => (ai, bi + ai * s, ci, di + ci * s),
                (BinaryOp::Sub, Side::Second) => (ai, ai * s - bi, ci, ci * s - di),
                (BinaryOp::Mul, _) => (ai * s, bi, ci * s, di),
                (BinaryOp::Div, Side::First) => (ai, bi * s, ci, di * s),
                (BinaryOp::Div, Side::Second) => (bi, ai * s, di, ci * s),
            };
            a.push(na);
            b.push(nb);
            c.push(nc);
            d.push(nd);
        }
        NodeEquation { a, b, c, d, forbidden: self.forbidden.for_child(op, side, sibling) }
    }

    /// Error of the tree if this node produced `candidate`, ignoring the
    /// forbidden set. `None` when a denominator vanishes or the sum
    /// overflows.
    pub fn mse_unchecked(&self, candidate: &[f64]) -> Option<f64> {
        let mut sum = 0.0;
        for i in 0..self.len() {
            let o = candidate[i];
            let den = self.c[i] * o - self.d[i];
            if den.abs() < DENOMINATOR_GUARD {
                return None;
            }
            let r = (self.a[i] * o - self.b[i]) / den;
            sum += r * r;
        }
        let m = sum / self.len() as f64;
        m.is_finite().then_some(m)
    }

    /// Error for the candidate output, or `None` if it is rejected.
    pub fn mse(&self, candidate: &[f64]) -> Option<f64> {
        if !self.forbidden.allows(candidate) {
            return None;
        }
        self.mse_unchecked(candidate)
    }

    /// Error for the constant output `(k, ..., k)`, or `None` if rejected.
    pub fn constant_mse(&self, k: f64) -> Option<f64> {
        if !self.forbidden.allows_constant(k) {
            return None;
        }
        self.constant_mse_unchecked(k)
    }

    pub(crate) fn constant_mse_unchecked(&self, k: f64) -> Option<f64> {
        let mut sum = 0.0;
        for i in 0..self.len() {
            let den = self.c[i] * k - self.d[i];
            if den.abs() < DENOMINATOR_GUARD {
                return None;
            }
            let r = (self.a[i] * k - self.b[i]) / den;
            sum += r * r;
        }
        let m = sum / self.len() as f64;
        m.is_finite().then_some(m)
    }
}

/// Equations of both children of an `op` node with child semantics
/// `left` and `right`.
pub fn derive_child_equations(
    parent: &NodeEquation,
    op: BinaryOp,
    left: &[f64],
    right: &[f64],
) -> (NodeEquation, NodeEquation) {
    (parent.child(op, Side::First, right), parent.child(op, Side::Second, left))
}

/// See [`NodeEquation::mse`].
pub fn equation_mse(eq: &NodeEquation, candidate: &[f64]) -> Option<f64> {
    eq.mse(candidate)
}

/// Equations for every node, indexed by pre-order id.
pub fn propagate_equations(tree: &EvaluatedTree, targets: &[f64]) -> Vec<NodeEquation> {
    let t = tree.tree();
    let mut eqs: Vec<Option<NodeEquation>> = vec![None; t.len()];
    eqs[0] = Some(root_equation(targets));
    for id in 0..t.len() {
        if let (crate::tree::Node::Op(op), Some((l, r))) = (t.node(id), t.children(id)) {
            let parent = eqs[id].as_ref().expect("parents precede children in pre-order");
            let (el, er) = derive_child_equations(parent, op, tree.semantics(l), tree.semantics(r));
            eqs[l] = Some(el);
            eqs[r] = Some(er);
        }
    }
    eqs.into_iter().map(Option::unwrap).collect()
}

/// Equation of a single node, derived along its root path only.
pub fn equation_at(tree: &EvaluatedTree, targets: &[f64], id: usize) -> NodeEquation {
    let t = tree.tree();
    let mut eq = root_equation(targets);
    let mut cur = 0;
    while cur != id {
        let crate::tree::Node::Op(op) = t.node(cur) else { unreachable!() };
        let (l, r) = t.children(cur).unwrap();
        if id < r {
            eq = eq.child(op, Side::First, tree.semantics(r));
            cur = l;
        } else {
            eq = eq.child(op, Side::Second, tree.semantics(l));
            cur = r;
        }
    }
    eq
}
