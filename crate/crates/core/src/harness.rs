//! k-fold cross-validation.
//!
//! Pattern `i` goes to fold `i mod k`. There is no shuffling, so a split
//! depends only on `(N, k)` and never changes between runs or versions.

use serde::Serialize;

use crate::data::Dataset;
use crate::engine::{fit, FitReport, Hyperparameters, StopReason};
use crate::error::{DataError, FitError};
use crate::eval::{evaluate_tree, mse};
use crate::tree::ExprTree;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
}

pub fn kfold_split(n: usize, k: usize) -> Result<FoldSplit, DataError> {
    if k < 2 {
        return Err(DataError::Invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(DataError::KTooLarge { k, n });
    }
    Ok(FoldSplit { k, assignments: (0..n).map(|i| i % k).collect() })
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Train and test MSE of `tree`. Test MSE is `None` when the tree cannot be
/// evaluated on some test pattern (zero denominator or overflow).
pub fn evaluate_fold(tree: &ExprTree, train: &Dataset, test: &Dataset) -> Result<(f64, Option<f64>), FitError> {
    let train_mse = evaluate_tree(tree, train)?.mse(train.targets());
    let test_mse = evaluate_tree(tree, test)
        .ok()
        .map(|e| mse(e.root(), test.targets()))
        .filter(|m| m.is_finite());
    Ok((train_mse, test_mse))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_patterns: usize,
    pub test_patterns: usize,
    pub train_mse: f64,
    /// `None` marks an undefined test error.
    pub test_mse: Option<f64>,
    pub expression: String,
    pub node_count: usize,
    pub height: usize,
    pub iterations: usize,
    pub stop_reason: StopReason,
    #[serde(skip_serializing)]
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvSummary {
    pub folds: usize,
    pub mean_train_mse: f64,
    pub std_train_mse: f64,
    /// Aggregates over folds with a defined test MSE; `None` if there are none.
    pub mean_test_mse: Option<f64>,
    pub std_test_mse: Option<f64>,
    pub median_test_mse: Option<f64>,
    pub undefined_test_folds: usize,
    pub mean_node_count: f64,
    pub mean_height: f64,
    #[serde(skip_serializing)]
    pub mean_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub k: usize,
    pub folds: Vec<FoldResult>,
    pub summary: CvSummary,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn summarize(folds: &[FoldResult]) -> CvSummary {
    let train: Vec<f64> = folds.iter().map(|f| f.train_mse).collect();
    let test: Vec<f64> = folds.iter().filter_map(|f| f.test_mse).collect();
    let defined = !test.is_empty();
    let avg = |f: fn(&FoldResult) -> f64| mean(&folds.iter().map(f).collect::<Vec<_>>());
    CvSummary {
        folds: folds.len(),
        mean_train_mse: mean(&train),
        std_train_mse: sample_std(&train),
        mean_test_mse: defined.then(|| mean(&test)),
        std_test_mse: defined.then(|| sample_std(&test)),
        median_test_mse: defined.then(|| median(&test)),
        undefined_test_folds: folds.len() - test.len(),
        mean_node_count: avg(|f| f.node_count as f64),
        mean_height: avg(|f| f.height as f64),
        mean_seconds: avg(|f| f.seconds),
    }
}

/// Fits every fold's training patterns and scores the held-out ones.
pub fn run_cv(data: &Dataset, k: usize, hp: &Hyperparameters) -> Result<CvResult, FitError> {
    run_cv_detailed(data, k, hp).map(|(cv, _)| cv)
}

/// [`run_cv`] that also returns each fold's full fit report.
pub fn run_cv_detailed(data: &Dataset, k: usize, hp: &Hyperparameters) -> Result<(CvResult, Vec<FitReport>), FitError> {
    hp.validate()?;
    let split = kfold_split(data.num_patterns(), k)?;
    let mut folds = Vec::with_capacity(k);
    let mut reports = Vec::with_capacity(k);
    for fold in 0..k {
        let train = data.subset(&split.train_indices(fold))?;
        let test = data.subset(&split.test_indices(fold))?;
        let report = fit(&train, hp)?;
        let (train_mse, test_mse) = evaluate_fold(&report.tree, &train, &test)?;
        folds.push(FoldResult {
            fold,
            train_patterns: train.num_patterns(),
            test_patterns: test.num_patterns(),
            train_mse,
            test_mse,
            expression: report.expression.clone(),
            node_count: report.node_count,
            height: report.height,
            iterations: report.iterations,
            stop_reason: report.stop_reason,
            seconds: report.seconds,
        });
        reports.push(report);
    }
    let summary = summarize(&folds);
    Ok((CvResult { k, folds, summary }, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{default_names, parse_expression};

    #[test]
    fn split_rules() {
        let s = kfold_split(10, 10).unwrap();
        assert_eq!(s.fold_sizes(), vec![1; 10]);
        let s = kfold_split(506, 10).unwrap();
        let sizes = s.fold_sizes();
        assert_eq!(sizes.iter().filter(|&&n| n == 51).count(), 6);
        assert_eq!(sizes.iter().filter(|&&n| n == 50).count(), 4);
        assert!(matches!(kfold_split(5, 6), Err(DataError::KTooLarge { k: 6, n: 5 })));
        assert!(kfold_split(5, 1).is_err());
    }

    #[test]
    fn folds_cover_and_are_disjoint() {
        let s = kfold_split(23, 4).unwrap();
        let mut all: Vec<usize> = (0..4).flat_map(|f| s.test_indices(f)).collect();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for f in 0..4 {
            assert_eq!(s.train_indices(f).len() + s.test_indices(f).len(), 23);
        }
    }

    #[test]
    fn fold_evaluation() {
        let train = Dataset::new(vec![vec![1.0, 2.0, 3.0]], vec![1.0, 2.0, 4.0]).unwrap();
        let test = Dataset::new(vec![vec![0.0, 5.0]], vec![2.0, 1.0]).unwrap();
        let k = ExprTree::constant(2.0);
        assert_eq!(evaluate_fold(&k, &train, &test).unwrap(), (5.0 / 3.0, Some(0.5)));
        let inv = parse_expression("(1 / x1)", &default_names(1)).unwrap();
        assert_eq!(evaluate_fold(&inv, &train, &test).unwrap().1, None);
        let (a, b) = evaluate_fold(&k, &train, &train).unwrap();
        assert_eq!(Some(a), b);
    }

    #[test]
    fn aggregates() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - 1.2909944487358056).abs() < 1e-15);
    }

    #[test]
    fn linear_cv_recovers_each_fold() {
        // Two training patterns per fold. Strategy 1 interpolates them with a
        // nonlinear chain, so the cascade is used here.
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let d = Dataset::new(vec![x.clone()], x.iter().map(|v| 2.0 * v + 1.0).collect()).unwrap();
        let hp = Hyperparameters { strategy: crate::engine::Strategy::Cascade, ..Hyperparameters::default() };
        let r = run_cv(&d, 2, &hp).unwrap();
        for f in &r.folds {
            assert!(f.train_mse < 1e-20 && f.test_mse.unwrap() < 1e-20, "{f:?}");
        }
        assert_eq!(r.summary.undefined_test_folds, 0);
    }
}
