//! Hyperparameter grids and the tabular reports written by the CLI.
//!
//! Every table has a fixed column set (see the `*_COLUMNS` constants). Reals
//! are written in shortest round-trip form (scientific outside 1e-5..1e17),
//! so a value read back parses to the same `f64`. Undefined test errors are written as
//! `undefined`, failed grid cells as `error`.

use serde::Serialize;

use crate::data::Dataset;
use crate::engine::{FitReport, Hyperparameters, Strategy};
use crate::error::FitError;
use crate::harness::{run_cv, CvResult, CvSummary};
use crate::tree::format_constant;

pub const TRACE_COLUMNS: [&str; 8] =
    ["iteration", "search", "node_id", "replaced", "expression", "mse", "node_count", "constants_optimized"];
pub const CV_FOLD_COLUMNS: [&str; 10] = [
    "fold",
    "train_patterns",
    "test_patterns",
    "train_mse",
    "test_mse",
    "node_count",
    "height",
    "iterations",
    "stop_reason",
    "expression",
];
pub const TIMING_COLUMNS: [&str; 2] = ["scope", "seconds"];
pub const GRID_LONG_COLUMNS: [&str; 5] = ["strategy", "min_improvement", "max_nodes", "metric", "value"];
pub const GRID_BEST_COLUMNS: [&str; 9] = [
    "strategy",
    "selected_by",
    "min_improvement",
    "max_nodes",
    "mean_train_mse",
    "std_train_mse",
    "mean_test_mse",
    "std_test_mse",
    "median_test_mse",
];

/// Metrics of the long grid table, in emission order.
pub const GRID_METRICS: [&str; 9] = [
    "mean_train_mse",
    "std_train_mse",
    "mean_test_mse",
    "std_test_mse",
    "median_test_mse",
    "undefined_test_folds",
    "mean_node_count",
    "mean_height",
    "mean_seconds",
];

pub const UNDEFINED: &str = "undefined";
pub const ERROR: &str = "error";

/// Minimum-improvement values of the housing experiments: 1e-1 down to 1e-10.
pub fn decade_improvements() -> Vec<f64> {
    (1..=10).map(|e| 10f64.powi(-e)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub strategies: Vec<Strategy>,
    pub min_improvements: Vec<f64>,
    pub max_nodes: Vec<usize>,
}

impl GridSpec {
    /// Sorts and deduplicates each axis and rejects empty axes.
    pub fn new(mut strategies: Vec<Strategy>, mut min_improvements: Vec<f64>, mut max_nodes: Vec<usize>) -> Result<Self, FitError> {
        let bad = |m: &str| Err(FitError::InvalidHyperparameter(m.to_string()));
        if strategies.is_empty() || min_improvements.is_empty() || max_nodes.is_empty() {
            return bad("grid axes must be non-empty");
        }
        strategies.sort();
        strategies.dedup();
        min_improvements.sort_by(f64::total_cmp);
        min_improvements.dedup();
        max_nodes.sort();
        max_nodes.dedup();
        Ok(Self { strategies, min_improvements, max_nodes })
    }

    /// Cells in enumeration order: strategy, then min_improvement, then
    /// max_nodes, each ascending.
    pub fn cells(&self) -> Vec<(Strategy, f64, usize)> {
        let mut out = vec![];
        for &s in &self.strategies {
            for &m in &self.min_improvements {
                for &n in &self.max_nodes {
                    out.push((s, m, n));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.strategies.len() * self.min_improvements.len() * self.max_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub strategy: Strategy,
    pub min_improvement: f64,
    pub max_nodes: usize,
    pub cv: Option<CvResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridReport {
    pub k: usize,
    pub spec: GridSpec,
    /// Settings shared by every cell (goal, iteration cap).
    pub base: Hyperparameters,
    pub cells: Vec<GridCell>,
}

/// Best cell of one strategy under one selection rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestCell {
    pub strategy: Strategy,
    pub selected_by: &'static str,
    pub min_improvement: f64,
    pub max_nodes: usize,
    pub summary: CvSummary,
}

/// Runs one cross-validation per cell. A failing cell is recorded with its
/// message and the run continues. `on_cell` sees each cell as it finishes.
pub fn run_grid(
    data: &Dataset,
    k: usize,
    spec: &GridSpec,
    base: &Hyperparameters,
    mut on_cell: impl FnMut(usize, &GridCell),
) -> GridReport {
    let mut cells = Vec::with_capacity(spec.len());
    for (i, (strategy, min_improvement, max_nodes)) in spec.cells().into_iter().enumerate() {
        let hp = Hyperparameters { strategy, min_improvement, max_nodes: Some(max_nodes), ..base.clone() };
        let (cv, error) = match run_cv(data, k, &hp) {
            Ok(cv) => (Some(cv), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let cell = GridCell { strategy, min_improvement, max_nodes, cv, error };
        on_cell(i, &cell);
        cells.push(cell);
    }
    GridReport { k, spec: spec.clone(), base: base.clone(), cells }
}

impl GridReport {
    /// Per strategy: the cell with the lowest mean training MSE, then the
    /// cell with the lowest mean test MSE. Ties keep the earlier cell.
    pub fn best_cells(&self) -> Vec<BestCell> {
        let mut out = vec![];
        for &strategy in &self.spec.strategies {
            let ok: Vec<(&GridCell, &CvSummary)> = self
                .cells
                .iter()
                .filter(|c| c.strategy == strategy)
                .filter_map(|c| c.cv.as_ref().map(|cv| (c, &cv.summary)))
                .collect();
            let pick = |key: &dyn Fn(&CvSummary) -> Option<f64>| {
                let mut best: Option<(&GridCell, &CvSummary, f64)> = None;
                for &(c, s) in &ok {
                    if let Some(v) = key(s) {
                        if best.map_or(true, |b| v < b.2) {
                            best = Some((c, s, v));
                        }
                    }
                }
                best
            };
            let rules: [(&'static str, &dyn Fn(&CvSummary) -> Option<f64>); 2] =
                [("train", &|s| Some(s.mean_train_mse)), ("test", &|s| s.mean_test_mse)];
            for (name, key) in rules {
                if let Some((c, s, _)) = pick(key) {
                    out.push(BestCell {
                        strategy,
                        selected_by: name,
                        min_improvement: c.min_improvement,
                        max_nodes: c.max_nodes,
                        summary: s.clone(),
                    });
                }
            }
        }
        out
    }
}

fn real(v: f64) -> String {
    format_constant(v)
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), real)
}

fn table<const C: usize>(columns: [&str; C], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(columns).expect("write to memory");
    for r in rows {
        debug_assert_eq!(r.len(), C);
        w.write_record(&r).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

pub fn trace_csv(report: &FitReport) -> String {
    let rows = report
        .trace
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                r.search.clone().unwrap_or_default(),
                r.node_id.map(|n| n.to_string()).unwrap_or_default(),
                r.replaced.clone().unwrap_or_default(),
                r.expression.clone(),
                real(r.mse),
                r.node_count.to_string(),
                r.constants_optimized.to_string(),
            ]
        })
        .collect();
    table(TRACE_COLUMNS, rows)
}

/// One row per fold plus a final `aggregate` row holding the means.
pub fn cv_folds_csv(cv: &CvResult) -> String {
    let mut rows: Vec<Vec<String>> = cv
        .folds
        .iter()
        .map(|f| {
            vec![
                f.fold.to_string(),
                f.train_patterns.to_string(),
                f.test_patterns.to_string(),
                real(f.train_mse),
                opt_real(f.test_mse),
                f.node_count.to_string(),
                f.height.to_string(),
                f.iterations.to_string(),
                f.stop_reason.label().to_string(),
                f.expression.clone(),
            ]
        })
        .collect();
    let s = &cv.summary;
    rows.push(vec![
        "aggregate".into(),
        String::new(),
        String::new(),
        real(s.mean_train_mse),
        opt_real(s.mean_test_mse),
        real(s.mean_node_count),
        real(s.mean_height),
        String::new(),
        String::new(),
        String::new(),
    ]);
    table(CV_FOLD_COLUMNS, rows)
}

/// Wall-clock times, kept apart from the deterministic tables.
pub fn cv_timing_csv(cv: &CvResult) -> String {
    let mut rows: Vec<Vec<String>> = cv.folds.iter().map(|f| vec![format!("fold {}", f.fold), real(f.seconds)]).collect();
    rows.push(vec!["mean".into(), real(cv.summary.mean_seconds)]);
    table(TIMING_COLUMNS, rows)
}

pub fn fit_timing_csv(report: &FitReport) -> String {
    table(TIMING_COLUMNS, vec![vec!["fit".into(), real(report.seconds)]])
}

fn metric_values(s: &CvSummary) -> [String; 9] {
    [
        real(s.mean_train_mse),
        real(s.std_train_mse),
        opt_real(s.mean_test_mse),
        opt_real(s.std_test_mse),
        opt_real(s.median_test_mse),
        s.undefined_test_folds.to_string(),
        real(s.mean_node_count),
        real(s.mean_height),
        real(s.mean_seconds),
    ]
}

/// Long format: one row per cell per metric, cells in enumeration order.
pub fn grid_long_csv(report: &GridReport) -> String {
    let mut rows = vec![];
    for c in &report.cells {
        let values = match &c.cv {
            Some(cv) => metric_values(&cv.summary),
            None => std::array::from_fn(|_| ERROR.to_string()),
        };
        for (metric, value) in GRID_METRICS.iter().zip(values) {
            rows.push(vec![
                c.strategy.number().to_string(),
                real(c.min_improvement),
                c.max_nodes.to_string(),
                metric.to_string(),
                value,
            ]);
        }
    }
    table(GRID_LONG_COLUMNS, rows)
}

pub fn grid_best_csv(report: &GridReport) -> String {
    let rows = report
        .best_cells()
        .into_iter()
        .map(|b| {
            vec![
                b.strategy.number().to_string(),
                b.selected_by.to_string(),
                real(b.min_improvement),
                b.max_nodes.to_string(),
                real(b.summary.mean_train_mse),
                real(b.summary.std_train_mse),
                opt_real(b.summary.mean_test_mse),
                opt_real(b.summary.std_test_mse),
                opt_real(b.summary.median_test_mse),
            ]
        })
        .collect();
    table(GRID_BEST_COLUMNS, rows)
}
