//! Browser demo. Each operation takes plain strings and numbers and returns
//! a JSON document, so the same functions run natively in tests and behind
//! the wasm exports at the bottom of this file.

use semreg::constant::minimize_constant;
use semreg::equation::propagate_equations;
use semreg::tree::{format_constant, Node};
use semreg::{
    evaluate_tree, fit, parse_expression, read_dataset, Dataset, ExtValue, ForbiddenSet, Hyperparameters, LoadOptions,
    Strategy,
};
use serde::Serialize;

/// Fits stop here so a careless setting cannot hang the page.
pub const MAX_ITERATIONS: usize = 2000;
pub const MAX_LANDSCAPE_POINTS: usize = 4001;

fn parse_data(csv_text: &str) -> Result<Dataset, String> {
    let options = LoadOptions { has_header: true, ..LoadOptions::default() };
    read_dataset(csv_text.as_bytes(), &options).map_err(|e| e.to_string())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("demo output serializes")
}

#[derive(Serialize)]
struct Step {
    iteration: usize,
    search: Option<String>,
    expression: String,
    mse: f64,
    node_count: usize,
}

#[derive(Serialize)]
struct FitOutput {
    expression: String,
    train_mse: f64,
    iterations: usize,
    stop_reason: &'static str,
    node_count: usize,
    height: usize,
    steps: Vec<Step>,
    /// First variable, targets and fitted outputs, for plotting.
    x: Vec<f64>,
    x_name: String,
    targets: Vec<f64>,
    outputs: Vec<f64>,
}

/// Fits the CSV data (header row, target last). `max_nodes = 0` means no
/// limit; `goal_mean` uses the mean target as the goal MSE.
pub fn fit_demo(csv_text: &str, strategy: u8, min_improvement: f64, max_nodes: usize, goal_mean: bool) -> Result<String, String> {
    let data = parse_data(csv_text)?;
    let hp = Hyperparameters {
        max_iterations: Some(MAX_ITERATIONS),
        goal_mse: if goal_mean { data.target_mean() } else { 0.0 },
        min_improvement,
        max_nodes: (max_nodes > 0).then_some(max_nodes),
        strategy: Strategy::try_from(strategy).map_err(|e| e.to_string())?,
    };
    let report = fit(&data, &hp).map_err(|e| e.to_string())?;
    let outputs = evaluate_tree(&report.tree, &data).map_err(|e| e.to_string())?.root().to_vec();
    let steps = report
        .trace
        .iter()
        .map(|r| Step {
            iteration: r.iteration,
            search: r.search.clone(),
            expression: r.expression.clone(),
            mse: r.mse,
            node_count: r.node_count,
        })
        .collect();
    Ok(to_json(&FitOutput {
        expression: report.expression,
        train_mse: report.train_mse,
        iterations: report.iterations,
        stop_reason: report.stop_reason.label(),
        node_count: report.node_count,
        height: report.height,
        steps,
        x: data.variable(0).to_vec(),
        x_name: data.names()[0].clone(),
        targets: data.targets().to_vec(),
        outputs,
    }))
}

#[derive(Serialize)]
#[serde(untagged)]
enum Cell {
    Real(f64),
    Mark(&'static str),
}

fn cell(v: ExtValue) -> Cell {
    match v {
        ExtValue::Real(x) => Cell::Real(x),
        ExtValue::AnyAllowed => Cell::Mark("any"),
        ExtValue::NoneAllowed => Cell::Mark("none"),
    }
}

#[derive(Serialize)]
struct NodeRow {
    id: usize,
    depth: usize,
    label: String,
    subtree: String,
    semantics: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    /// `null` when every value is forbidden.
    forbidden: Option<Vec<Vec<Cell>>>,
    /// Whole-tree MSE from this node's equation at its own semantics.
    equation_mse: Option<f64>,
}

#[derive(Serialize)]
struct NodeTable {
    expression: String,
    mse: f64,
    nodes: Vec<NodeRow>,
}

/// Semantics, equation coefficients and forbidden set of every node of
/// `expression` on the CSV data, in pre-order.
pub fn node_table(csv_text: &str, expression: &str) -> Result<String, String> {
    let data = parse_data(csv_text)?;
    let tree = parse_expression(expression, data.names()).map_err(|e| e.to_string())?;
    let evaluated = evaluate_tree(&tree, &data).map_err(|e| e.to_string())?;
    let equations = propagate_equations(&evaluated, data.targets());
    let names = data.names();
    let nodes = (0..tree.len())
        .map(|id| {
            let eq = &equations[id];
            let sem = evaluated.semantics(id);
            let label = match tree.node(id) {
                Node::Constant(k) => format_constant(k),
                Node::Variable(v) => names[v].clone(),
                Node::Op(op) => op.symbol().to_string(),
            };
            let forbidden = match &eq.forbidden {
                ForbiddenSet::AllForbidden => None,
                set => Some(set.members().iter().map(|m| m.iter().copied().map(cell).collect()).collect()),
            };
            NodeRow {
                id,
                depth: tree.ancestors(id).len(),
                label,
                subtree: tree.subtree(id).display(names).to_string(),
                semantics: sem.to_vec(),
                a: eq.a.clone(),
                b: eq.b.clone(),
                c: eq.c.clone(),
                d: eq.d.clone(),
                forbidden,
                equation_mse: eq.mse_unchecked(sem).and_then(finite),
            }
        })
        .collect();
    Ok(to_json(&NodeTable {
        expression: tree.display(names).to_string(),
        mse: evaluated.mse(data.targets()),
        nodes,
    }))
}

#[derive(Serialize)]
struct Landscape {
    node: usize,
    subtree: String,
    /// Output of the node when it is a constant.
    current: Option<f64>,
    ks: Vec<f64>,
    /// Whole-tree MSE if the node were replaced by `k`; `null` where a
    /// denominator vanishes or the value is forbidden.
    mse: Vec<Option<f64>>,
    best_k: Option<f64>,
    best_mse: Option<f64>,
    case: Option<String>,
}

/// Whole-tree MSE as a function of a constant placed at node `node`, over
/// `points` evenly spaced values in `[lo, hi]`, plus the minimizer's pick.
pub fn constant_landscape(csv_text: &str, expression: &str, node: usize, lo: f64, hi: f64, points: usize) -> Result<String, String> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("need a finite range with lo < hi, got [{lo}, {hi}]"));
    }
    if !(2..=MAX_LANDSCAPE_POINTS).contains(&points) {
        return Err(format!("points must be in 2..={MAX_LANDSCAPE_POINTS}, got {points}"));
    }
    let data = parse_data(csv_text)?;
    let tree = parse_expression(expression, data.names()).map_err(|e| e.to_string())?;
    if node >= tree.len() {
        return Err(format!("node {node} out of range for a tree of {} nodes", tree.len()));
    }
    let evaluated = evaluate_tree(&tree, &data).map_err(|e| e.to_string())?;
    let eq = &propagate_equations(&evaluated, data.targets())[node];
    let ks: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let mse = ks.iter().map(|&k| eq.constant_mse(k).and_then(finite)).collect();
    let fit = minimize_constant(eq);
    Ok(to_json(&Landscape {
        node,
        subtree: tree.subtree(node).display(data.names()).to_string(),
        current: tree.node(node).constant(),
        ks,
        mse,
        best_k: fit.map(|f| f.k),
        best_mse: fit.map(|f| f.fitted_mse),
        case: fit.map(|f| format!("{:?}", f.case_used)),
    }))
}

#[cfg(target_arch = "wasm32")]
mod exports {
    use wasm_bindgen::prelude::*;

    fn js(r: Result<String, String>) -> Result<String, JsError> {
        r.map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn fit_demo(csv_text: &str, strategy: u8, min_improvement: f64, max_nodes: usize, goal_mean: bool) -> Result<String, JsError> {
        js(super::fit_demo(csv_text, strategy, min_improvement, max_nodes, goal_mean))
    }

    #[wasm_bindgen]
    pub fn node_table(csv_text: &str, expression: &str) -> Result<String, JsError> {
        js(super::node_table(csv_text, expression))
    }

    #[wasm_bindgen]
    pub fn constant_landscape(
        csv_text: &str,
        expression: &str,
        node: usize,
        lo: f64,
        hi: f64,
        points: usize,
    ) -> Result<String, JsError> {
        js(super::constant_landscape(csv_text, expression, node, lo, hi, points))
    }
}
