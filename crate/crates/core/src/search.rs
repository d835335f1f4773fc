//! The four improvement searches.
//!
//! Each search evaluates candidate replacements of one node against that
//! node's equation and reports the best predicted MSE reduction. Nothing is
//! applied here; the engine picks among outcomes and re-validates.

use std::cmp::Ordering;

use crate::constant::minimize_constant;
use crate::data::Dataset;
use crate::equation::NodeEquation;
use crate::eval::EvaluatedTree;
use crate::forbidden::Side;
use crate::tree::{BinaryOp, ExprTree, Node};

/// Declaration order is the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SearchKind {
    Constant,
    Variable,
    ConstantVariable,
    ConstantExpression,
}

impl SearchKind {
    pub fn label(self) -> &'static str {
        match self {
            SearchKind::Constant => "constant",
            SearchKind::Variable => "variable",
            SearchKind::ConstantVariable => "constant-variable",
            SearchKind::ConstantExpression => "constant-expression",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub node_id: usize,
    pub replacement: ExprTree,
    pub predicted_reduction: f64,
    pub predicted_mse: f64,
    pub kind: SearchKind,
    pub variable: Option<usize>,
    pub op: Option<BinaryOp>,
}

fn op_rank(op: Option<BinaryOp>) -> usize {
    op.map_or(0, |o| BinaryOp::ALL.iter().position(|&x| x == o).unwrap() + 1)
}

/// Best first: larger reduction, then kind, node, variable and op order.
pub fn compare_outcomes(x: &SearchOutcome, y: &SearchOutcome) -> Ordering {
    y.predicted_reduction
        .total_cmp(&x.predicted_reduction)
        .then(x.kind.cmp(&y.kind))
        .then(x.node_id.cmp(&y.node_id))
        .then(x.variable.cmp(&y.variable))
        .then(op_rank(x.op).cmp(&op_rank(y.op)))
}

/// Keeps the better of two candidates under [`compare_outcomes`].
fn keep_best(best: &mut Option<SearchOutcome>, candidate: SearchOutcome) {
    if best.as_ref().is_none_or(|b| compare_outcomes(&candidate, b) == Ordering::Less) {
        *best = Some(candidate);
    }
}

fn outcome(
    node_id: usize,
    current_mse: f64,
    predicted_mse: f64,
    replacement: ExprTree,
    kind: SearchKind,
    variable: Option<usize>,
    op: Option<BinaryOp>,
) -> Option<SearchOutcome> {
    let predicted_reduction = current_mse - predicted_mse;
    (predicted_reduction > 0.0).then_some(SearchOutcome {
        node_id,
        replacement,
        predicted_reduction,
        predicted_mse,
        kind,
        variable,
        op,
    })
}

/// Replaces the node with the single constant minimizing its equation.
pub fn constant_search(node_id: usize, eq: &NodeEquation, current_mse: f64) -> Option<SearchOutcome> {
    let fit = minimize_constant(eq)?;
    outcome(node_id, current_mse, fit.fitted_mse, ExprTree::constant(fit.k), SearchKind::Constant, None, None)
}

/// Replaces the node with the input variable that fits its equation best.
/// Constant-valued variables and the variable already at the node are skipped.
pub fn variable_search(
    node_id: usize,
    node: Node,
    eq: &NodeEquation,
    data: &Dataset,
    current_mse: f64,
) -> Option<SearchOutcome> {
    if eq.forbidden.is_all_forbidden() {
        return None;
    }
    let mut best = None;
    for v in 0..data.num_variables() {
        if node == Node::Variable(v) || data.is_constant_variable(v) {
            continue;
        }
        let Some(m) = eq.mse(data.variable(v)) else { continue };
        if let Some(o) = outcome(node_id, current_mse, m, ExprTree::variable(v), SearchKind::Variable, Some(v), None) {
            keep_best(&mut best, o);
        }
    }
    best
}

/// Replaces the node with `(k op x)` for every variable `x` and operator.
pub fn constant_variable_search(
    node_id: usize,
    subtree: &ExprTree,
    eq: &NodeEquation,
    data: &Dataset,
    current_mse: f64,
) -> Option<SearchOutcome> {
    if eq.forbidden.is_all_forbidden() {
        return None;
    }
    // (op, k, x) already at the node: a new constant there would only hide a
    // constant change
    let existing = match (subtree.len(), subtree.nodes()) {
        (3, [Node::Op(op), Node::Constant(_), Node::Variable(v)]) => Some((*op, *v)),
        _ => None,
    };
    let mut best = None;
    for v in 0..data.num_variables() {
        if data.is_constant_variable(v) {
            continue;
        }
        let x = data.variable(v);
        let has_zero = x.contains(&0.0);
        for op in BinaryOp::ALL {
            if existing == Some((op, v)) || (op == BinaryOp::Div && has_zero) {
                continue;
            }
            let child = eq.child(op, Side::First, x);
            let Some(fit) = minimize_constant(&child) else { continue };
            let replacement = ExprTree::binary(op, ExprTree::constant(fit.k), ExprTree::variable(v));
            let kind = SearchKind::ConstantVariable;
            if let Some(o) = outcome(node_id, current_mse, fit.fitted_mse, replacement, kind, Some(v), Some(op)) {
                keep_best(&mut best, o);
            }
        }
    }
    best
}

/// Grows a non-terminal node `p` into `(k + p)` or `(k * p)`.
pub fn constant_expression_search(
    node_id: usize,
    subtree: &ExprTree,
    semantics: &[f64],
    eq: &NodeEquation,
    current_mse: f64,
) -> Option<SearchOutcome> {
    let Node::Op(node_op) = subtree.node(0) else { return None };
    if eq.forbidden.is_all_forbidden() {
        return None;
    }
    let (l, r) = subtree.children(0).unwrap();
    let has_constant_child = subtree.node(l).is_constant() || subtree.node(r).is_constant();
    let mut best = None;
    for op in [BinaryOp::Add, BinaryOp::Mul] {
        let hidden = has_constant_child
            && match op {
                BinaryOp::Add => matches!(node_op, BinaryOp::Add | BinaryOp::Sub),
                _ => matches!(node_op, BinaryOp::Mul | BinaryOp::Div),
            };
        if hidden {
            continue;
        }
        let child = eq.child(op, Side::First, semantics);
        let Some(fit) = minimize_constant(&child) else { continue };
        let replacement = ExprTree::binary(op, ExprTree::constant(fit.k), subtree.clone());
        let kind = SearchKind::ConstantExpression;
        if let Some(o) = outcome(node_id, current_mse, fit.fitted_mse, replacement, kind, None, Some(op)) {
            keep_best(&mut best, o);
        }
    }
    best
}

/// Which nodes a search runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeFilter {
    pub constants: bool,
    pub variables: bool,
    pub operators: bool,
}

impl NodeFilter {
    pub const ALL: NodeFilter = NodeFilter { constants: true, variables: true, operators: true };
    pub const CONSTANTS: NodeFilter = NodeFilter { constants: true, variables: false, operators: false };
    pub const TERMINALS: NodeFilter = NodeFilter { constants: true, variables: true, operators: false };
    pub const OPERATORS: NodeFilter = NodeFilter { constants: false, variables: false, operators: true };
    pub const VARIABLES_AND_OPERATORS: NodeFilter = NodeFilter { constants: false, variables: true, operators: true };

    pub fn accepts(self, node: Node) -> bool {
        match node {
            Node::Constant(_) => self.constants,
            Node::Variable(_) => self.variables,
            Node::Op(_) => self.operators,
        }
    }
}

/// Everything the searches need about the current tree.
pub struct SearchContext<'a> {
    pub data: &'a Dataset,
    pub tree: &'a EvaluatedTree,
    pub equations: &'a [NodeEquation],
    pub current_mse: f64,
    pub max_nodes: Option<usize>,
}

impl SearchContext<'_> {
    /// Runs `kind` on every node accepted by `filter`, returning the best
    /// outcome per node. Growth searches respect the node limit.
    pub fn run(&self, kind: SearchKind, filter: NodeFilter) -> Vec<SearchOutcome> {
        let tree = self.tree.tree();
        let total = tree.len();
        let mut found = Vec::new();
        for id in 0..total {
            let node = tree.node(id);
            if !filter.accepts(node) {
                continue;
            }
            let eq = &self.equations[id];
            let size = tree.subtree_size(id);
            let result = match kind {
                SearchKind::Constant => constant_search(id, eq, self.current_mse),
                SearchKind::Variable => variable_search(id, node, eq, self.data, self.current_mse),
                SearchKind::ConstantVariable => {
                    if self.max_nodes.is_some_and(|n| n + size < total + 3) {
                        continue;
                    }
                    constant_variable_search(id, &tree.subtree(id), eq, self.data, self.current_mse)
                }
                SearchKind::ConstantExpression => {
                    if node.is_terminal() || self.max_nodes.is_some_and(|n| n < total + 2) {
                        continue;
                    }
                    constant_expression_search(id, &tree.subtree(id), self.tree.semantics(id), eq, self.current_mse)
                }
            };
            found.extend(result);
        }
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::propagate_equations;
    use crate::eval::evaluate_tree;
    use crate::forbidden::{ExtValue, ForbiddenSet};
    use crate::tree::{default_names, parse_expression};

    fn data(vars: Vec<Vec<f64>>, targets: Vec<f64>) -> Dataset {
        Dataset::new(vars, targets).unwrap()
    }

    fn context_parts(text: &str, d: &Dataset) -> (EvaluatedTree, Vec<NodeEquation>, f64) {
        let t = parse_expression(text, &default_names(d.num_variables())).unwrap();
        let e = evaluate_tree(&t, d).unwrap();
        let eqs = propagate_equations(&e, d.targets());
        let m = e.mse(d.targets());
        (e, eqs, m)
    }

    #[test]
    fn constant_search_fixes_offset() {
        let x = vec![1.0, 2.0, 4.0];
        let d = data(vec![x.clone()], x.iter().map(|v| v + 3.0).collect());
        let (_, eqs, m) = context_parts("(2.5 + x1)", &d);
        let o = constant_search(1, &eqs[1], m).unwrap();
        assert_eq!(o.replacement.node(0), Node::Constant(3.0));
        assert!((o.predicted_reduction - 0.25).abs() < 1e-12);
        assert_eq!(o.predicted_mse, 0.0);

        let (_, eqs, m) = context_parts("(3 + x1)", &d);
        assert_eq!(constant_search(1, &eqs[1], m), None);
    }

    #[test]
    fn constant_search_deletes_branch() {
        let x1 = vec![1.0, 2.0, 3.0];
        let x2 = vec![4.0, 5.0, 7.0];
        let d = data(vec![x1.clone(), x2], x1.iter().map(|v| 2.0 * v).collect());
        let (_, eqs, m) = context_parts("((2 * x1) + (3 * x2))", &d);
        let o = constant_search(4, &eqs[4], m).unwrap();
        assert_eq!(o.replacement.node(0), Node::Constant(0.0));
        assert_eq!(o.predicted_mse, 0.0);
    }

    #[test]
    fn variable_search_picks_target_variable() {
        let d = data(vec![vec![4.0, 1.5, 2.5], vec![5.0, 1.0, 2.0], vec![4.0; 3]], vec![5.0, 1.0, 2.0]);
        let (_, eqs, m) = context_parts("2.6666666666666665", &d);
        let o = variable_search(0, Node::Constant(0.0), &eqs[0], &d, m).unwrap();
        assert_eq!(o.variable, Some(1));
        assert_eq!(o.predicted_mse, 0.0);

        // x2 forbidden: falls back to x1, never the constant x3
        let mut eq = eqs[0].clone();
        eq.forbidden = ForbiddenSet::Members(vec![d.variable(1).iter().map(|&v| ExtValue::Real(v)).collect()]);
        let o = variable_search(0, Node::Constant(0.0), &eq, &d, m).unwrap();
        assert_eq!(o.variable, Some(0));
    }

    #[test]
    fn constant_variable_search_finds_linear_term() {
        let x = vec![1.0, 2.0, 3.0, 5.0];
        let d = data(vec![x.clone()], x.iter().map(|v| 3.0 * v).collect());
        let (_, eqs, m) = context_parts("7.5", &d);
        let o = constant_variable_search(0, &ExprTree::constant(7.5), &eqs[0], &d, m).unwrap();
        assert_eq!(o.op, Some(BinaryOp::Mul));
        assert_eq!(o.replacement.node(1), Node::Constant(3.0));
        assert!(o.predicted_mse < 1e-20);
    }

    #[test]
    fn constant_variable_hiding_guard_and_zero_divisor() {
        let x1 = vec![1.0, 2.0, 3.0];
        let x2 = vec![0.0, 1.0, 2.0];
        let d = data(vec![x1.clone(), x2], x1.iter().map(|v| 3.2 + v).collect());
        let (e, eqs, m) = context_parts("(3.1 + x1)", &d);
        let sub = e.tree().subtree(0);
        if let Some(o) = constant_variable_search(0, &sub, &eqs[0], &d, m) {
            assert_ne!((o.op, o.variable), (Some(BinaryOp::Add), Some(0)));
            assert!(!(o.op == Some(BinaryOp::Div) && o.variable == Some(1)));
        }
    }

    #[test]
    fn constant_expression_structure_and_guards() {
        let x2 = vec![1.0, 2.0, 4.0];
        let t: Vec<f64> = x2.iter().map(|v| 3.4 + 2.5 / (3.0 + v)).collect();
        let d = data(vec![vec![0.5, 0.25, 0.125], x2], t);
        let (e, eqs, m) = context_parts("(2.5 / (3 + x2))", &d);
        let o = constant_expression_search(0, &e.tree().subtree(0), e.semantics(0), &eqs[0], m).unwrap();
        assert_eq!(o.op, Some(BinaryOp::Add));
        assert!((o.replacement.node(1).constant().unwrap() - 3.4).abs() < 1e-12);
        assert_eq!(o.replacement.len(), 7);

        // (3 + x2): + with a constant child hides (k + p)
        let (e, eqs, m) = context_parts("(3 + x2)", &d);
        if let Some(o) = constant_expression_search(0, &e.tree().subtree(0), e.semantics(0), &eqs[0], m) {
            assert_eq!(o.op, Some(BinaryOp::Mul));
        }
    }

    #[test]
    fn tie_break_order() {
        let base = SearchOutcome {
            node_id: 3,
            replacement: ExprTree::constant(1.0),
            predicted_reduction: 1.0,
            predicted_mse: 0.0,
            kind: SearchKind::Variable,
            variable: Some(2),
            op: None,
        };
        let mut other = base.clone();
        other.kind = SearchKind::Constant;
        assert_eq!(compare_outcomes(&other, &base), Ordering::Less);
        other = base.clone();
        other.predicted_reduction = 1.5;
        other.kind = SearchKind::ConstantExpression;
        assert_eq!(compare_outcomes(&other, &base), Ordering::Less);
        other = base.clone();
        other.node_id = 1;
        assert_eq!(compare_outcomes(&other, &base), Ordering::Less);
        other = base.clone();
        other.variable = Some(0);
        assert_eq!(compare_outcomes(&other, &base), Ordering::Less);
    }

    #[test]
    fn node_limit_gates_growth() {
        let x = vec![1.0, 2.0, 3.0];
        let d = data(vec![x.clone()], x.iter().map(|v| v * v).collect());
        let (e, eqs, m) = context_parts("(1 + x1)", &d);
        let ctx = |max_nodes| SearchContext { data: &d, tree: &e, equations: &eqs, current_mse: m, max_nodes };
        // 3 nodes, limit 4: a leaf can grow by 2 only if 4 - 3 + 1 >= 3
        assert!(ctx(Some(4)).run(SearchKind::ConstantVariable, NodeFilter::TERMINALS).is_empty());
        assert!(!ctx(Some(5)).run(SearchKind::ConstantVariable, NodeFilter::TERMINALS).is_empty());
        // the root itself can always be swapped for a 3-node subtree
        assert!(!ctx(Some(3)).run(SearchKind::ConstantVariable, NodeFilter::OPERATORS).is_empty());
        assert!(ctx(Some(4)).run(SearchKind::ConstantExpression, NodeFilter::ALL).is_empty());
        assert!(!ctx(Some(5)).run(SearchKind::ConstantExpression, NodeFilter::ALL).is_empty());
    }
}
