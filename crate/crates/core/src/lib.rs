//! Symbolic regression by semantic backpropagation.
//!
//! A model is a binary expression tree over `+ - * /`, constants and input
//! variables. Each fitting step derives, for every node, the whole-tree error
//! as a closed-form function of that node's output, then replaces the
//! subtree whose best replacement lowers the error the most.

pub mod constant;
pub mod data;
pub mod engine;
pub mod equation;
pub mod error;
pub mod eval;
pub mod forbidden;
pub mod harness;
pub mod newton;
pub mod report;
pub mod search;
pub mod tree;

pub use constant::{minimize_constant, ConstantCase, ConstantFit};
pub use data::{load_dataset, read_dataset, Dataset, LoadOptions};
pub use equation::{derive_child_equations, equation_mse, propagate_equations, root_equation, NodeEquation};
pub use engine::{fit, FitReport, Hyperparameters, StopReason, Strategy};
pub use error::{DataError, EvalError, FitError, TreeError};
pub use eval::{evaluate_tree, mse, EvaluatedTree, Semantics};
pub use forbidden::{ExtValue, ForbiddenSet};
pub use harness::{kfold_split, run_cv, run_cv_detailed, CvResult, FoldSplit};
pub use newton::newton_dataset;
pub use report::{run_grid, GridCell, GridReport, GridSpec};
pub use search::{SearchKind, SearchOutcome};
pub use tree::{parse_expression, BinaryOp, ExprTree, Node};
