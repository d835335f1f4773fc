//! Datasets in variable-major layout: one row per variable, one column per
//! pattern, so each variable row is directly a point in semantic space.

use std::path::Path;

use crate::error::DataError;
use crate::tree::default_names;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    variables: Vec<Vec<f64>>,
    targets: Vec<f64>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(variables: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, DataError> {
        let names = default_names(variables.len());
        Self::with_names(variables, targets, names)
    }

    pub fn with_names(
        variables: Vec<Vec<f64>>,
        targets: Vec<f64>,
        names: Vec<String>,
    ) -> Result<Self, DataError> {
        if targets.is_empty() || variables.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        if names.len() != variables.len() {
            return Err(DataError::Invalid(format!(
                "{} names for {} variables",
                names.len(),
                variables.len()
            )));
        }
        let n = targets.len();
        for (i, row) in variables.iter().enumerate() {
            if row.len() != n {
                return Err(DataError::Invalid(format!(
                    "variable {} has {} values, expected {n}",
                    names[i],
                    row.len()
                )));
            }
        }
        if variables.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite value".into()));
        }
        Ok(Self { variables, targets, names })
    }

    /// Builds a dataset from pattern-major rows.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self, DataError> {
        let width = rows.first().map_or(0, Vec::len);
        let variables = (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::new(variables, targets)
    }

    pub fn num_patterns(&self) -> usize {
        self.targets.len()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variable(&self, index: usize) -> &[f64] {
        &self.variables[index]
    }

    pub fn variables(&self) -> &[Vec<f64>] {
        &self.variables
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn target_mean(&self) -> f64 {
        self.targets.iter().sum::<f64>() / self.targets.len() as f64
    }

    /// Patterns at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset, DataError> {
        let variables = self.variables.iter().map(|row| indices.iter().map(|&i| row[i]).collect()).collect();
        let targets = indices.iter().map(|&i| self.targets[i]).collect();
        Dataset::with_names(variables, targets, self.names.clone())
    }

    /// A variable whose value is the same for every pattern.
    pub fn is_constant_variable(&self, index: usize) -> bool {
        let row = &self.variables[index];
        row.iter().all(|&v| v == row[0])
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// 0-based target column; `None` means the last column.
    pub target_column: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { delimiter: b',', has_header: false, target_column: None }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, options)
}

/// Reads delimited text (LF or CRLF). Every cell must be a finite number.
pub fn read_dataset(reader: impl std::io::Read, options: &LoadOptions) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row_number = r + 1 + usize::from(options.has_header);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| DataError::Parse {
                row: row_number,
                column: c + 1,
                message: format!("not a number: '{cell}'"),
            })?;
            if !value.is_finite() {
                return Err(DataError::Parse {
                    row: row_number,
                    column: c + 1,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let width = rows[0].len();
    if width < 2 {
        return Err(DataError::Invalid("need at least one variable and a target column".into()));
    }
    let target_col = options.target_column.unwrap_or(width - 1);
    if target_col >= width {
        return Err(DataError::Invalid(format!("target column {} out of range", target_col + 1)));
    }

    let mut variables = vec![Vec::with_capacity(rows.len()); width - 1];
    let mut targets = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut slot = 0;
        for (c, &value) in row.iter().enumerate() {
            if c == target_col {
                targets.push(value);
            } else {
                variables[slot].push(value);
                slot += 1;
            }
        }
    }
    let names = match header {
        Some(h) => h.into_iter().enumerate().filter(|(c, _)| *c != target_col).map(|(_, n)| n).collect(),
        None => default_names(width - 1),
    };
    Dataset::with_names(variables, targets, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, options: &LoadOptions) -> Result<Dataset, DataError> {
        read_dataset(text.as_bytes(), options)
    }

    #[test]
    fn target_defaults_to_last_column() {
        let d = read("1,2,3\n4,5,6\n7,8,9\n10,11,12\n", &LoadOptions::default()).unwrap();
        assert_eq!(d.num_variables(), 2);
        assert_eq!(d.num_patterns(), 4);
        assert_eq!(d.variable(1), &[2.0, 5.0, 8.0, 11.0]);
        assert_eq!(d.targets(), &[3.0, 6.0, 9.0, 12.0]);
        assert_eq!(d.names(), &["x1", "x2"]);
    }

    #[test]
    fn header_names_and_crlf() {
        let opts = LoadOptions { has_header: true, ..Default::default() };
        let d = read("x1,x2,y\r\n1,2,3\r\n4,5,6\r\n", &opts).unwrap();
        assert_eq!(d.names(), &["x1", "x2"]);
        assert_eq!(d.targets(), &[3.0, 6.0]);
    }

    #[test]
    fn explicit_target_column_and_delimiter() {
        let opts = LoadOptions { delimiter: b';', target_column: Some(0), ..Default::default() };
        let d = read("9;1;2\n8;3;4\n", &opts).unwrap();
        assert_eq!(d.targets(), &[9.0, 8.0]);
        assert_eq!(d.variable(0), &[1.0, 3.0]);
    }

    #[test]
    fn rejects_bad_cells() {
        let err = read("1,2\n3,inf\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Parse { row: 2, column: 2, .. }), "{err}");
        let err = read("1,2\n3,abc\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Parse { row: 2, column: 2, .. }), "{err}");
        assert!(matches!(read("", &LoadOptions::default()), Err(DataError::EmptyDataset)));
    }

    #[test]
    fn constant_variable_detection() {
        let d = Dataset::new(vec![vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 1.0]], vec![0.0; 3]).unwrap();
        assert!(d.is_constant_variable(0));
        assert!(!d.is_constant_variable(1));
    }
}
