//! Bottom-up evaluation with per-node semantics caching.

use std::sync::Arc;

use crate::data::Dataset;
use crate::error::EvalError;
use crate::tree::{BinaryOp, ExprTree, Node};

/// Outputs of one node for every pattern.
pub type Semantics = Arc<[f64]>;

/// A tree together with the semantics of each of its nodes on one dataset.
#[derive(Clone, Debug)]
pub struct EvaluatedTree {
    tree: ExprTree,
    semantics: Vec<Semantics>,
}

pub fn mse(outputs: &[f64], targets: &[f64]) -> f64 {
    let sse: f64 = outputs.iter().zip(targets).map(|(o, t)| (o - t) * (o - t)).sum();
    sse / targets.len() as f64
}

fn leaf_semantics(node: Node, data: &Dataset, id: usize) -> Result<Semantics, EvalError> {
    match node {
        Node::Constant(k) => Ok(vec![k; data.num_patterns()].into()),
        Node::Variable(v) => {
            if v >= data.num_variables() {
                return Err(EvalError::InvalidVariable { index: v, count: data.num_variables() });
            }
            Ok(data.variable(v).into())
        }
        Node::Op(_) => unreachable!("operator at {id} treated as a leaf"),
    }
}

/// Element-wise `op`, rejecting exact-zero denominators and non-finite output.
pub fn combine(op: BinaryOp, x: &[f64], y: &[f64], node: usize) -> Result<Semantics, EvalError> {
    let mut out = Vec::with_capacity(x.len());
    for (pattern, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        if op == BinaryOp::Div && yi == 0.0 {
            return Err(EvalError::DivisionByZero { node, pattern });
        }
        let v = op.apply(xi, yi);
        if !v.is_finite() {
            return Err(EvalError::NonFiniteResult { node, pattern });
        }
        out.push(v);
    }
    Ok(out.into())
}

fn evaluate_nodes(tree: &ExprTree, data: &Dataset) -> Result<Vec<Semantics>, EvalError> {
    let n = tree.len();
    let mut sems: Vec<Option<Semantics>> = vec![None; n];
    for id in (0..n).rev() {
        let s = match tree.node(id) {
            Node::Op(op) => {
                let (l, r) = tree.children(id).unwrap();
                let (x, y) = (sems[l].as_ref().unwrap(), sems[r].as_ref().unwrap());
                combine(op, x, y, id)?
            }
            leaf => leaf_semantics(leaf, data, id)?,
        };
        sems[id] = Some(s);
    }
    Ok(sems.into_iter().map(Option::unwrap).collect())
}

/// Evaluates every node of `tree` on `data`.
pub fn evaluate_tree(tree: &ExprTree, data: &Dataset) -> Result<EvaluatedTree, EvalError> {
    let semantics = evaluate_nodes(tree, data)?;
    Ok(EvaluatedTree { tree: tree.clone(), semantics })
}

impl EvaluatedTree {
    pub fn tree(&self) -> &ExprTree {
        &self.tree
    }

    pub fn semantics(&self, id: usize) -> &Semantics {
        &self.semantics[id]
    }

    pub fn all_semantics(&self) -> &[Semantics] {
        &self.semantics
    }

    pub fn root(&self) -> &[f64] {
        &self.semantics[0]
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn mse(&self, targets: &[f64]) -> f64 {
        mse(self.root(), targets)
    }

    /// Substitutes the subtree at `id`, re-evaluating only the replacement
    /// and the ancestors of `id`. Semantics of every other node are reused.
    pub fn replace(&self, id: usize, replacement: &ExprTree, data: &Dataset) -> Result<EvaluatedTree, EvalError> {
        let tree = self.tree.replace_subtree(id, replacement)?;
        let old_size = self.tree.subtree_size(id);

        let mut semantics = Vec::with_capacity(tree.len());
        semantics.extend_from_slice(&self.semantics[..id]);
        semantics.extend(evaluate_nodes(replacement, data)?);
        semantics.extend_from_slice(&self.semantics[id + old_size..]);

        for &a in self.tree.ancestors(id).iter().rev() {
            let Node::Op(op) = tree.node(a) else { unreachable!() };
            let (l, r) = tree.children(a).unwrap();
            semantics[a] = combine(op, &semantics[l], &semantics[r], a)?;
        }
        Ok(EvaluatedTree { tree, semantics })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{default_names, parse_expression};

    fn x3_data() -> Dataset {
        Dataset::new(vec![vec![0.0; 3], vec![0.0; 3], vec![1.0, 4.0, -2.0]], vec![5.0, 4.0, 1.0]).unwrap()
    }

    fn figure_one() -> ExprTree {
        parse_expression("(2 / ((3 / (1 - (2 / x3))) + 1))", &default_names(3)).unwrap()
    }

    #[test]
    fn figure_one_semantics() {
        let e = evaluate_tree(&figure_one(), &x3_data()).unwrap();
        let root = e.root();
        assert_eq!(root[0], -1.0);
        assert!((root[1] - 0.286).abs() < 5e-4);
        assert!((root[2] - 0.8).abs() < 1e-12);
        assert_eq!(&e.semantics(1)[..], &[2.0, 2.0, 2.0]);
        assert_eq!(&e.semantics(2)[..], &[-2.0, 7.0, 2.5]);
        assert_eq!(&e.semantics(5)[..], &[-1.0, 0.5, 2.0]);
        assert_eq!(&e.semantics(9)[..], &[1.0, 4.0, -2.0]);
    }

    #[test]
    fn variable_and_constant_leaves() {
        let d = x3_data();
        let e = evaluate_tree(&ExprTree::variable(2), &d).unwrap();
        assert_eq!(e.root(), &[1.0, 4.0, -2.0]);
        let e = evaluate_tree(&ExprTree::constant(2.0), &d).unwrap();
        assert_eq!(e.root(), &[2.0, 2.0, 2.0]);
        assert!(matches!(
            evaluate_tree(&ExprTree::variable(3), &d),
            Err(EvalError::InvalidVariable { index: 3, .. })
        ));
    }

    #[test]
    fn division_by_zero_detected() {
        let d = x3_data();
        let t = parse_expression("(1 / x1)", &default_names(3)).unwrap();
        assert_eq!(evaluate_tree(&t, &d).unwrap_err(), EvalError::DivisionByZero { node: 0, pattern: 0 });
    }

    #[test]
    fn overflow_detected() {
        let d = x3_data();
        let t = parse_expression("(1e300 * 1e300)", &default_names(3)).unwrap();
        assert!(matches!(evaluate_tree(&t, &d), Err(EvalError::NonFiniteResult { node: 0, .. })));
    }

    #[test]
    fn replace_recomputes_only_root_path() {
        let d = x3_data();
        let e = evaluate_tree(&figure_one(), &d).unwrap();
        let r = e.replace(0, &ExprTree::constant(5.0), &d).unwrap();
        assert_eq!(r.root(), &[5.0, 5.0, 5.0]);

        // node 8 (1-based) is (2 / x3); replacing it with 1 gives 3 / (1 - 1).
        let err = e.replace(7, &ExprTree::constant(1.0), &d).unwrap_err();
        assert_eq!(err, EvalError::DivisionByZero { node: 3, pattern: 0 });

        let r = e.replace(6, &ExprTree::constant(3.0), &d).unwrap();
        let fresh = evaluate_tree(r.tree(), &d).unwrap();
        for id in 0..r.len() {
            assert_eq!(r.semantics(id), fresh.semantics(id));
        }
        // nodes off the root path keep their cached vectors
        assert!(Arc::ptr_eq(r.semantics(1), e.semantics(1)));
        assert!(Arc::ptr_eq(r.semantics(10), e.semantics(10)));
    }

    #[test]
    fn deletion_by_zero_constant() {
        let d = Dataset::new(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 7.0]], vec![0.0; 3]).unwrap();
        let t = parse_expression("((2 * x1) + (3 * x2))", &default_names(2)).unwrap();
        let e = evaluate_tree(&t, &d).unwrap();
        let r = e.replace(4, &ExprTree::constant(0.0), &d).unwrap();
        assert_eq!(r.tree().to_text(), "((2 * x1) + 0)");
        assert_eq!(r.root(), &[2.0, 4.0, 6.0]);
    }
}
