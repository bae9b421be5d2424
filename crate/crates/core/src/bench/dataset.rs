//! Numeric CSV data sets with optional per-column z-scoring.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("line {row}, column {column}: {message}")]
    ParseError { row: usize, column: usize, message: String },
    #[error("line {row}, column {column}: `{value}` is not a finite number")]
    NonNumericCell { row: usize, column: usize, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Row-major values.
    pub rows: Vec<f64>,
    pub dim: usize,
    pub columns: Vec<String>,
    /// Per-column (mean, standard deviation) removed from `rows`, if any.
    pub standardization: Option<Vec<(f64, f64)>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Per-column mean and population standard deviation.
    pub fn column_moments(&self) -> Vec<(f64, f64)> {
        let count = self.len() as f64;
        (0..self.dim)
            .map(|j| {
                let mean = self.rows.iter().skip(j).step_by(self.dim).sum::<f64>() / count;
                let var = self.rows.iter().skip(j).step_by(self.dim).map(|v| (v - mean).powi(2)).sum::<f64>() / count;
                (mean, var.sqrt())
            })
            .collect()
    }

    /// Z-scores every column. Constant columns are centred with scale 1.
    pub fn standardize(&mut self) {
        if self.standardization.is_some() {
            return;
        }
        let params: Vec<(f64, f64)> =
            self.column_moments().into_iter().map(|(m, s)| (m, if s > 0.0 { s } else { 1.0 })).collect();
        for row in self.rows.chunks_exact_mut(self.dim) {
            for (v, (m, s)) in row.iter_mut().zip(&params) {
                *v = (*v - m) / s;
            }
        }
        self.standardization = Some(params);
    }

    /// Rows mapped back to the original units.
    pub fn destandardize(&self) -> Vec<f64> {
        match &self.standardization {
            None => self.rows.clone(),
            Some(params) => self
                .rows
                .chunks_exact(self.dim)
                .flat_map(|row| row.iter().zip(params).map(|(v, (m, s))| v * s + m))
                .collect(),
        }
    }

    pub fn parse<R: Read>(input: R) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| DatasetError::ParseError { row: 1, column: 0, message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let dim = columns.len();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| DatasetError::ParseError { row: line, column: 0, message: e.to_string() })?;
            for (j, cell) in record.iter().enumerate() {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => rows.push(v),
                    _ => {
                        return Err(DatasetError::NonNumericCell { row: line, column: j + 1, value: cell.to_string() })
                    }
                }
            }
        }
        if rows.is_empty() || dim == 0 {
            return Err(DatasetError::EmptyFile);
        }
        Ok(Dataset { rows, dim, columns, standardization: None })
    }
}

/// Reads a numeric CSV with a header row, optionally standardizing.
pub fn load_dataset(path: &Path, standardize: bool) -> Result<Dataset, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    let mut data = Dataset::parse(file)?;
    if standardize {
        data.standardize();
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_row_file() {
        let d = Dataset::parse("a,b\n0,0\n2,2\n".as_bytes()).unwrap();
        assert_eq!((d.dim, d.len()), (2, 2));
        assert_eq!(d.rows, vec![0.0, 0.0, 2.0, 2.0]);
        assert_eq!(d.columns, vec!["a", "b"]);
        let mut s = d.clone();
        s.standardize();
        assert_eq!(s.rows, vec![-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(s.destandardize(), d.rows);
    }

    #[test]
    fn constant_column_keeps_unit_scale() {
        let mut d = Dataset::parse("a,b\n3,1\n3,2\n".as_bytes()).unwrap();
        d.standardize();
        assert_eq!(d.rows, vec![0.0, -1.0, 0.0, 1.0]);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(Dataset::parse("a,b\n".as_bytes()), Err(DatasetError::EmptyFile)));
        assert!(matches!(Dataset::parse("".as_bytes()), Err(DatasetError::EmptyFile)));
        assert!(matches!(
            Dataset::parse("a,b\n1,2\n3,x\n".as_bytes()),
            Err(DatasetError::NonNumericCell { row: 3, column: 2, .. })
        ));
        assert!(matches!(
            Dataset::parse("a,b\n1,2\n3\n".as_bytes()),
            Err(DatasetError::ParseError { row: 3, .. })
        ));
        assert!(matches!(Dataset::parse("a\nNaN\n".as_bytes()), Err(DatasetError::NonNumericCell { .. })));
    }
}
