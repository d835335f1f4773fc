use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("node id {id} out of range for a tree of {len} nodes")]
    InvalidNodeId { id: usize, len: usize },
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("malformed tree: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero at node {node}, pattern {pattern}")]
    DivisionByZero { node: usize, pattern: usize },
    #[error("non-finite value at node {node}, pattern {pattern}")]
    NonFiniteResult { node: usize, pattern: usize },
    #[error("variable index {index} out of range ({count} variables)")]
    InvalidVariable { index: usize, count: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("k = {k} folds requested for {n} patterns")]
    KTooLarge { k: usize, n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("initial tree failed to evaluate: {0}")]
    Eval(#[from] EvalError),
}
