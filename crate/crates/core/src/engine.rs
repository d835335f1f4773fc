//! The improvement loop: start from the target mean and repeatedly apply the
//! best search result chosen by a strategy until a stopping rule fires.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::equation::{equation_at, propagate_equations};
use crate::error::FitError;
use crate::eval::{evaluate_tree, EvaluatedTree};
use crate::search::{compare_outcomes, constant_search, NodeFilter, SearchContext, SearchKind, SearchOutcome};
use crate::tree::ExprTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Strategy {
    /// All four searches on all nodes, best one applied.
    AllSearches,
    /// As [`Strategy::AllSearches`] without constant search on constants,
    /// followed by constant optimization.
    AllSearchesOptimized,
    /// Cheap searches first, wider ones only on failure, then constant
    /// optimization.
    Cascade,
    /// Constant refinement first, then the cascade without optimization.
    RefineThenCascade,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::AllSearches, Strategy::AllSearchesOptimized, Strategy::Cascade, Strategy::RefineThenCascade];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl From<Strategy> for u8 {
    fn from(s: Strategy) -> u8 {
        s.number()
    }
}

impl TryFrom<u8> for Strategy {
    type Error = FitError;

    fn try_from(n: u8) -> Result<Self, FitError> {
        match n {
            1..=4 => Ok(Strategy::ALL[n as usize - 1]),
            _ => Err(FitError::InvalidHyperparameter(format!("strategy must be 1 to 4, got {n}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// `None` runs until another stopping rule fires.
    pub max_iterations: Option<usize>,
    pub goal_mse: f64,
    /// Relative MSE decrease a search must exceed to count as successful.
    pub min_improvement: f64,
    pub max_nodes: Option<usize>,
    pub strategy: Strategy,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self { max_iterations: None, goal_mse: 0.0, min_improvement: 1e-6, max_nodes: None, strategy: Strategy::AllSearches }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: String| Err(FitError::InvalidHyperparameter(m));
        if !(self.min_improvement > 0.0 && self.min_improvement < 1.0) {
            return bad(format!("min_improvement must be in (0, 1), got {}", self.min_improvement));
        }
        if !(self.goal_mse >= 0.0) || self.goal_mse.is_infinite() {
            return bad(format!("goal_mse must be finite and >= 0, got {}", self.goal_mse));
        }
        if self.max_nodes == Some(0) {
            return bad("max_nodes must be at least 1".into());
        }
        Ok(())
    }
}

/// Single constant node at the target mean.
pub fn initial_tree(targets: &[f64]) -> ExprTree {
    ExprTree::constant(targets.iter().sum::<f64>() / targets.len() as f64)
}

fn accepts(old_mse: f64, new_mse: f64, min_improvement: f64) -> bool {
    new_mse.is_finite() && old_mse - new_mse > old_mse * min_improvement
}

/// Constant-node equation source for [`optimize_constants_with`].
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquationMode {
    /// Derive only along the root path of the node being refined.
    RootPath,
    /// Recompute every node's equation before each refinement.
    Full,
}

/// Upper bound on cyclic passes; each accepted step already shrinks the MSE
/// geometrically, so this only guards against float stalls.
pub const MAX_CONSTANT_PASSES: usize = 10_000;

/// Refines each constant in pre-order with a constant search, cycling until
/// a full pass changes nothing. Returns the new tree and the number of
/// constants changed.
pub fn optimize_constants(tree: &EvaluatedTree, data: &Dataset, min_improvement: f64) -> (EvaluatedTree, usize) {
    optimize_constants_with(tree, data, min_improvement, EquationMode::RootPath)
}

#[doc(hidden)]
pub fn optimize_constants_with(
    tree: &EvaluatedTree,
    data: &Dataset,
    min_improvement: f64,
    mode: EquationMode,
) -> (EvaluatedTree, usize) {
    let targets = data.targets();
    let constants = tree.tree().ids_where(|n| n.is_constant());
    let mut current = tree.clone();
    let mut mse = current.mse(targets);
    let mut changes = 0;
    for _ in 0..MAX_CONSTANT_PASSES {
        let mut changed = false;
        for &id in &constants {
            if mse == 0.0 {
                return (current, changes);
            }
            let eq = match mode {
                EquationMode::RootPath => equation_at(&current, targets, id),
                EquationMode::Full => propagate_equations(&current, targets).swap_remove(id),
            };
            let Some(o) = constant_search(id, &eq, mse) else { continue };
            if o.predicted_reduction <= mse * min_improvement {
                continue;
            }
            let Ok(next) = current.replace(id, &o.replacement, data) else { continue };
            let next_mse = next.mse(targets);
            if accepts(mse, next_mse, min_improvement) {
                current = next;
                mse = next_mse;
                changes += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (current, changes)
}

/// Alternative refinement: each round applies only the single best constant
/// change over all constants. Kept for comparison in tests.
#[doc(hidden)]
pub fn optimize_constants_greedy(tree: &EvaluatedTree, data: &Dataset, min_improvement: f64) -> (EvaluatedTree, usize) {
    let targets = data.targets();
    let mut current = tree.clone();
    let mut mse = current.mse(targets);
    let mut changes = 0;
    while changes < MAX_CONSTANT_PASSES && mse > 0.0 {
        let eqs = propagate_equations(&current, targets);
        let mut found: Vec<SearchOutcome> = current
            .tree()
            .ids_where(|n| n.is_constant())
            .into_iter()
            .filter_map(|id| constant_search(id, &eqs[id], mse))
            .collect();
        found.sort_by(compare_outcomes);
        match try_apply(&current, data, mse, min_improvement, None, found) {
            Some((next, next_mse, _)) => {
                current = next;
                mse = next_mse;
                changes += 1;
            }
            None => break,
        }
    }
    (current, changes)
}

/// Applies the best candidate whose real effect clears the threshold.
/// Candidates must already be sorted best first.
fn try_apply(
    tree: &EvaluatedTree,
    data: &Dataset,
    mse: f64,
    min_improvement: f64,
    max_nodes: Option<usize>,
    candidates: Vec<SearchOutcome>,
) -> Option<(EvaluatedTree, f64, SearchOutcome)> {
    for o in candidates {
        if o.predicted_reduction <= mse * min_improvement {
            // sorted, so nothing further clears the threshold either
            return None;
        }
        let Ok(next) = tree.replace(o.node_id, &o.replacement, data) else { continue };
        if max_nodes.is_some_and(|n| next.len() > n) {
            continue;
        }
        let next_mse = next.mse(data.targets());
        if accepts(mse, next_mse, min_improvement) {
            return Some((next, next_mse, o));
        }
    }
    None
}

/// What an iteration changed.
#[derive(Clone, Debug, PartialEq)]
pub struct Modification {
    pub kind: SearchKind,
    pub node_id: usize,
    /// Text of the subtree that was replaced.
    pub replaced: String,
    /// Constants changed by the optimization that followed, if any.
    pub constants_optimized: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IterationOutcome {
    Modified(Modification),
    NotModified,
}

/// The tree being fitted and its training error.
pub struct FitState<'a> {
    data: &'a Dataset,
    hp: Hyperparameters,
    tree: EvaluatedTree,
    mse: f64,
}

impl<'a> FitState<'a> {
    pub fn new(data: &'a Dataset, hp: Hyperparameters) -> Result<Self, FitError> {
        hp.validate()?;
        Self::from_tree(data, hp, &initial_tree(data.targets()))
    }

    pub fn from_tree(data: &'a Dataset, hp: Hyperparameters, tree: &ExprTree) -> Result<Self, FitError> {
        hp.validate()?;
        let tree = evaluate_tree(tree, data)?;
        let mse = tree.mse(data.targets());
        Ok(Self { data, hp, tree, mse })
    }

    pub fn tree(&self) -> &EvaluatedTree {
        &self.tree
    }

    pub fn mse(&self) -> f64 {
        self.mse
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    fn search(&self, ctx: &SearchContext, plan: &[(SearchKind, NodeFilter)]) -> Vec<SearchOutcome> {
        let mut found: Vec<SearchOutcome> = plan.iter().flat_map(|&(kind, filter)| ctx.run(kind, filter)).collect();
        found.sort_by(compare_outcomes);
        found
    }

    /// Runs the searches in `plan` against the current tree and applies the
    /// best one that succeeds.
    fn step(&mut self, plan: &[(SearchKind, NodeFilter)]) -> Option<Modification> {
        let eqs = propagate_equations(&self.tree, self.data.targets());
        let ctx = SearchContext {
            data: self.data,
            tree: &self.tree,
            equations: &eqs,
            current_mse: self.mse,
            max_nodes: self.hp.max_nodes,
        };
        let found = self.search(&ctx, plan);
        let (next, next_mse, o) =
            try_apply(&self.tree, self.data, self.mse, self.hp.min_improvement, self.hp.max_nodes, found)?;
        let replaced = self.tree.tree().subtree(o.node_id).display(self.data.names()).to_string();
        self.tree = next;
        self.mse = next_mse;
        Some(Modification { kind: o.kind, node_id: o.node_id, replaced, constants_optimized: 0 })
    }

    /// Tries each stage in turn, stopping at the first that modifies the tree.
    fn cascade(&mut self) -> Option<Modification> {
        use NodeFilter as F;
        use SearchKind as K;
        let stages: [&[(K, F)]; 4] = [
            &[(K::Variable, F::CONSTANTS)],
            &[(K::ConstantExpression, F::OPERATORS)],
            &[(K::ConstantVariable, F::TERMINALS)],
            &[
                (K::Constant, F::VARIABLES_AND_OPERATORS),
                (K::Variable, F::VARIABLES_AND_OPERATORS),
                (K::ConstantVariable, F::OPERATORS),
            ],
        ];
        stages.iter().find_map(|plan| self.step(plan))
    }

    fn optimize_after(&mut self, mut m: Modification) -> Modification {
        let (tree, changes) = optimize_constants(&self.tree, self.data, self.hp.min_improvement);
        self.mse = tree.mse(self.data.targets());
        self.tree = tree;
        m.constants_optimized = changes;
        m
    }

    /// One iteration of the configured strategy.
    pub fn run_strategy_iteration(&mut self) -> IterationOutcome {
        use NodeFilter as F;
        use SearchKind as K;
        let modification = match self.hp.strategy {
            Strategy::AllSearches => self.step(&[
                (K::Constant, F::ALL),
                (K::Variable, F::ALL),
                (K::ConstantVariable, F::ALL),
                (K::ConstantExpression, F::OPERATORS),
            ]),
            Strategy::AllSearchesOptimized => self
                .step(&[
                    (K::Constant, F::VARIABLES_AND_OPERATORS),
                    (K::Variable, F::ALL),
                    (K::ConstantVariable, F::ALL),
                    (K::ConstantExpression, F::OPERATORS),
                ])
                .map(|m| self.optimize_after(m)),
            Strategy::Cascade => self.cascade().map(|m| self.optimize_after(m)),
            Strategy::RefineThenCascade => self.step(&[(K::Constant, F::CONSTANTS)]).or_else(|| self.cascade()),
        };
        match modification {
            Some(m) => IterationOutcome::Modified(m),
            None => IterationOutcome::NotModified,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GoalReached,
    NoImprovement,
    MaxIterations,
}

impl StopReason {
    pub fn label(self) -> &'static str {
        match self {
            StopReason::GoalReached => "goal-reached",
            StopReason::NoImprovement => "no-improvement",
            StopReason::MaxIterations => "max-iterations",
        }
    }
}

/// One row per tree change; row 0 is the initial tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub search: Option<String>,
    pub node_id: Option<usize>,
    pub replaced: Option<String>,
    pub expression: String,
    pub mse: f64,
    pub node_count: usize,
    pub constants_optimized: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub expression: String,
    /// Pre-order form with `x1..xn` names, parseable back into a tree.
    pub canonical: String,
    pub train_mse: f64,
    pub iterations: usize,
    pub modifications: usize,
    pub stop_reason: StopReason,
    pub node_count: usize,
    pub height: usize,
    pub hyperparameters: Hyperparameters,
    pub trace: Vec<TraceRow>,
    /// Wall-clock time, the only field that differs between identical runs.
    /// Left out of serialized reports so they compare byte for byte.
    #[serde(skip_serializing)]
    pub seconds: f64,
    #[serde(skip)]
    pub tree: ExprTree,
}

impl FitReport {
    /// Same report with the timing field zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> FitReport {
        FitReport { seconds: 0.0, ..self.clone() }
    }
}

/// Fits a tree to `data`.
pub fn fit(data: &Dataset, hp: &Hyperparameters) -> Result<FitReport, FitError> {
    let start = Instant::now();
    let mut state = FitState::new(data, hp.clone())?;
    let names = data.names();
    let row = |state: &FitState, iteration, m: Option<&Modification>| TraceRow {
        iteration,
        search: m.map(|m| m.kind.label().to_string()),
        node_id: m.map(|m| m.node_id),
        replaced: m.map(|m| m.replaced.clone()),
        expression: state.tree.tree().display(names).to_string(),
        mse: state.mse,
        node_count: state.tree.len(),
        constants_optimized: m.map_or(0, |m| m.constants_optimized),
    };
    let mut trace = vec![row(&state, 0, None)];
    let mut iterations = 0;
    let stop_reason = loop {
        if state.mse <= hp.goal_mse {
            break StopReason::GoalReached;
        }
        if hp.max_iterations.is_some_and(|m| iterations >= m) {
            break StopReason::MaxIterations;
        }
        iterations += 1;
        match state.run_strategy_iteration() {
            IterationOutcome::Modified(m) => trace.push(row(&state, iterations, Some(&m))),
            IterationOutcome::NotModified => break StopReason::NoImprovement,
        }
    };
    let tree = state.tree.tree().clone();
    let metrics = tree.metrics();
    Ok(FitReport {
        expression: tree.display(names).to_string(),
        canonical: tree.to_text(),
        train_mse: state.mse,
        iterations,
        modifications: trace.len() - 1,
        stop_reason,
        node_count: metrics.node_count,
        height: metrics.height,
        hyperparameters: hp.clone(),
        trace,
        seconds: start.elapsed().as_secs_f64(),
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{default_names, parse_expression, Node};

    fn linear_data() -> Dataset {
        let x1: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
        let x2: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 + 1.0).collect();
        let t = x1.iter().map(|v| 2.0 * v + 3.0).collect();
        Dataset::new(vec![x1, x2], t).unwrap()
    }

    #[test]
    fn initial_tree_is_mean() {
        assert_eq!(initial_tree(&[5.0, 4.0, 1.0]).node(0), Node::Constant(10.0 / 3.0));
    }

    #[test]
    fn constant_target_stops_immediately() {
        let d = Dataset::new(vec![vec![1.0, 2.0, 3.0]], vec![7.0; 3]).unwrap();
        let r = fit(&d, &Hyperparameters::default()).unwrap();
        assert_eq!((r.iterations, r.train_mse, r.stop_reason), (0, 0.0, StopReason::GoalReached));
        assert_eq!(r.expression, "7");

        // asked directly, an iteration on a perfect tree changes nothing
        let mut s = FitState::new(&d, Hyperparameters::default()).unwrap();
        assert_eq!(s.run_strategy_iteration(), IterationOutcome::NotModified);
    }

    #[test]
    fn variable_target_takes_one_iteration() {
        let d = linear_data();
        let d = Dataset::new(d.variables().to_vec(), d.variable(1).to_vec()).unwrap();
        let r = fit(&d, &Hyperparameters::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.expression, "x2");
        assert_eq!(r.trace[1].search.as_deref(), Some("variable"));
    }

    #[test]
    fn linear_target_recovered_by_every_strategy() {
        let d = linear_data();
        for s in Strategy::ALL {
            let hp = Hyperparameters { strategy: s, ..Default::default() };
            let r = fit(&d, &hp).unwrap();
            assert!(r.train_mse < 1e-12, "strategy {}: {} {}", s.number(), r.expression, r.train_mse);
            if s == Strategy::AllSearches {
                assert_eq!(r.modifications, 2, "{}", r.expression);
            }
        }
    }

    #[test]
    fn single_node_limit_allows_no_growth() {
        let d = linear_data();
        let hp = Hyperparameters { max_nodes: Some(1), ..Default::default() };
        let r = fit(&d, &hp).unwrap();
        assert_eq!(r.node_count, 1);
        assert!(r.trace.iter().all(|row| row.node_count == 1));
    }

    #[test]
    fn trace_is_strictly_decreasing() {
        let d = linear_data();
        let t: Vec<f64> = d.variable(0).iter().zip(d.variable(1)).map(|(a, b)| a * a / b + 0.3 * b).collect();
        let d = Dataset::new(d.variables().to_vec(), t).unwrap();
        for s in Strategy::ALL {
            let hp = Hyperparameters { strategy: s, max_nodes: Some(15), max_iterations: Some(40), ..Default::default() };
            let r = fit(&d, &hp).unwrap();
            for w in r.trace.windows(2) {
                assert!(w[0].mse - w[1].mse > w[0].mse * hp.min_improvement);
            }
            assert!(r.trace.iter().all(|row| row.node_count <= 15));
        }
    }

    #[test]
    fn constant_optimization_converges() {
        let x: Vec<f64> = vec![1.0, 2.0, 3.0, 5.0];
        let d = Dataset::new(vec![x.clone()], x.iter().map(|v| v + 5.0).collect()).unwrap();
        let t = parse_expression("(2 + (3.5 + x1))", &default_names(1)).unwrap();
        let e = evaluate_tree(&t, &d).unwrap();
        let (opt, changes) = optimize_constants(&e, &d, 1e-6);
        assert!(opt.mse(d.targets()) < 1e-12);
        assert!(changes >= 1);
        let (full, _) = optimize_constants_with(&e, &d, 1e-6, EquationMode::Full);
        assert!(full.tree().identical(opt.tree()));

        let (greedy, _) = optimize_constants_greedy(&e, &d, 1e-6);
        assert!(greedy.mse(d.targets()) < 1e-12);

        let single = evaluate_tree(&parse_expression("(2 * x1)", &default_names(1)).unwrap(), &d).unwrap();
        let (_, changes) = optimize_constants(&single, &d, 1e-6);
        assert!(changes <= 1);
        let none = evaluate_tree(&ExprTree::variable(0), &d).unwrap();
        let (same, changes) = optimize_constants(&none, &d, 1e-6);
        assert_eq!(changes, 0);
        assert!(same.tree().identical(none.tree()));
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let d = linear_data();
        for hp in [
            Hyperparameters { min_improvement: 0.0, ..Default::default() },
            Hyperparameters { min_improvement: 1.0, ..Default::default() },
            Hyperparameters { goal_mse: -1.0, ..Default::default() },
            Hyperparameters { max_nodes: Some(0), ..Default::default() },
        ] {
            assert!(matches!(fit(&d, &hp), Err(FitError::InvalidHyperparameter(_))));
        }
        assert!(Strategy::try_from(5).is_err());
        assert_eq!(Strategy::try_from(3).unwrap(), Strategy::Cascade);
    }

    #[test]
    fn repeated_fits_identical() {
        let d = linear_data();
        let hp = Hyperparameters { strategy: Strategy::Cascade, ..Default::default() };
        assert_eq!(fit(&d, &hp).unwrap().without_timing(), fit(&d, &hp).unwrap().without_timing());
    }
}
