//! CSV ingestion: header-driven column roles, numeric parsing, and optional
//! mean/mode imputation with missingness indicators.

use crate::data::Dataset;
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct ColumnRoles {
    pub treatment: String,
    pub outcome: String,
    /// When absent, every remaining column is a covariate.
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub n_rows: usize,
    /// Missing-cell count per covariate column (only imputed columns appear).
    pub missing_counts: BTreeMap<String, usize>,
    /// Names of appended missingness-indicator columns.
    pub indicator_columns: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::CsvCell {
        row,
        column: column.to_string(),
        message: format!("cannot parse {cell:?} as a number"),
    })
}

/// Load a dataset from CSV. Treatment and outcome cells must be present;
/// missing covariate cells are an error unless `impute` is set, in which case
/// they are filled with the column mean (mode for 0/1 columns) and a
/// `<name>_missing` indicator column is appended per affected covariate.
pub fn load_csv(path: &Path, roles: &ColumnRoles, impute: bool) -> Result<(Dataset, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let t_idx = find(&roles.treatment)?;
    let y_idx = find(&roles.outcome)?;
    let cov_names: Vec<String> = match &roles.covariates {
        Some(names) => {
            for name in names {
                find(name)?;
            }
            names.clone()
        }
        None => headers
            .iter()
            .filter(|h| **h != roles.treatment && **h != roles.outcome)
            .cloned()
            .collect(),
    };
    let cov_idx: Vec<usize> = cov_names.iter().map(|n| find(n).unwrap()).collect();

    let mut a = Vec::new();
    let mut y = Vec::new();
    // covariate cells as Option to defer imputation until means are known
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1; // 1-based data rows for messages
        let t_cell = record.get(t_idx).unwrap_or("");
        if is_missing(t_cell) {
            return Err(Error::MissingRequired {
                column: roles.treatment.clone(),
                row,
            });
        }
        let t_val = parse_cell(t_cell, row, &roles.treatment)?;
        if t_val < 0.0 || t_val.fract() != 0.0 {
            return Err(Error::CsvCell {
                row,
                column: roles.treatment.clone(),
                message: format!("treatment must be a nonnegative integer, got {t_cell:?}"),
            });
        }
        a.push(t_val as usize);
        let y_cell = record.get(y_idx).unwrap_or("");
        if is_missing(y_cell) {
            return Err(Error::MissingRequired {
                column: roles.outcome.clone(),
                row,
            });
        }
        y.push(parse_cell(y_cell, row, &roles.outcome)?);
        let mut row_cells = Vec::with_capacity(cov_idx.len());
        for (j, &c) in cov_idx.iter().enumerate() {
            let cell = record.get(c).unwrap_or("");
            if is_missing(cell) {
                if !impute {
                    return Err(Error::MissingRequired {
                        column: cov_names[j].clone(),
                        row,
                    });
                }
                row_cells.push(None);
            } else {
                row_cells.push(Some(parse_cell(cell, row, &cov_names[j])?));
            }
        }
        cells.push(row_cells);
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }

    // impute per column and collect indicators
    let p = cov_names.len();
    let mut missing_counts = BTreeMap::new();
    let mut indicator_columns = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut indicators: Vec<Vec<f64>> = Vec::new();
    for j in 0..p {
        let observed: Vec<f64> = cells.iter().filter_map(|row| row[j]).collect();
        let n_missing = n - observed.len();
        let fill = if n_missing > 0 {
            if observed.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "covariate {} has no observed values",
                    cov_names[j]
                )));
            }
            let binary = observed.iter().all(|&v| v == 0.0 || v == 1.0);
            if binary {
                // mode of a 0/1 column
                let ones = observed.iter().filter(|&&v| v == 1.0).count();
                f64::from(u8::from(2 * ones >= observed.len()))
            } else {
                observed.iter().sum::<f64>() / observed.len() as f64
            }
        } else {
            0.0
        };
        columns.push(
            cells
                .iter()
                .map(|row| row[j].unwrap_or(fill))
                .collect(),
        );
        if n_missing > 0 {
            missing_counts.insert(cov_names[j].clone(), n_missing);
            indicator_columns.push(format!("{}_missing", cov_names[j]));
            indicators.push(
                cells
                    .iter()
                    .map(|row| f64::from(u8::from(row[j].is_none())))
                    .collect(),
            );
        }
    }

    let total_cols = p + indicators.len();
    let mut w = Array2::<f64>::zeros((n, total_cols));
    for (j, col) in columns.iter().chain(indicators.iter()).enumerate() {
        for i in 0..n {
            w[[i, j]] = col[i];
        }
    }
    let mut names = cov_names.clone();
    names.extend(indicator_columns.iter().cloned());
    let ds = Dataset::from_raw(w, a, &y, names)?;
    Ok((
        ds,
        IngestReport {
            n_rows: n,
            missing_counts,
            indicator_columns,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn roles() -> ColumnRoles {
        ColumnRoles {
            treatment: "a".into(),
            outcome: "y".into(),
            covariates: None,
        }
    }

    #[test]
    fn clean_file_loads_unchanged() {
        let f = write_csv("w1,w2,a,y\n0.1,1,0,2.0\n0.2,0,1,3.0\n0.3,1,1,4.0\n");
        let (ds, rep) = load_csv(f.path(), &roles(), false).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.n_covariates(), 2);
        assert_eq!(ds.names, vec!["w1", "w2"]);
        assert_eq!(ds.a, vec![0, 1, 1]);
        assert!(rep.missing_counts.is_empty());
        assert!(rep.indicator_columns.is_empty());
    }

    #[test]
    fn mean_imputation_with_indicator() {
        // w1 missing in rows 2 and 5 of 10; observed mean fills in
        let mut text = String::from("w1,a,y\n");
        let vals = ["1.0", "", "3.0", "4.0", "", "6.0", "7.0", "8.0", "9.0", "10.0"];
        for (i, v) in vals.iter().enumerate() {
            text.push_str(&format!("{v},{},{}\n", i % 2, i as f64));
        }
        let f = write_csv(&text);
        let (ds, rep) = load_csv(f.path(), &roles(), true).unwrap();
        assert_eq!(rep.missing_counts.get("w1"), Some(&2));
        assert_eq!(rep.indicator_columns, vec!["w1_missing"]);
        assert_eq!(ds.n_covariates(), 2);
        let observed_mean = (1.0 + 3.0 + 4.0 + 6.0 + 7.0 + 8.0 + 9.0 + 10.0) / 8.0;
        assert_abs_diff_eq!(ds.w[[1, 0]], observed_mean, epsilon = 1e-12);
        assert_abs_diff_eq!(ds.w[[4, 0]], observed_mean, epsilon = 1e-12);
        // indicator has exactly two ones, at the missing rows
        let ind: Vec<f64> = (0..10).map(|i| ds.w[[i, 1]]).collect();
        assert_eq!(ind.iter().filter(|&&v| v == 1.0).count(), 2);
        assert_eq!(ind[1], 1.0);
        assert_eq!(ind[4], 1.0);
    }

    #[test]
    fn binary_column_mode_imputation() {
        let f = write_csv("w1,a,y\n1,0,1.0\n1,1,2.0\n0,0,3.0\n,1,4.0\n1,0,5.0\n");
        let (ds, _) = load_csv(f.path(), &roles(), true).unwrap();
        // observed values 1,1,0,1 -> mode 1
        assert_eq!(ds.w[[3, 0]], 1.0);
    }

    #[test]
    fn missing_outcome_is_hard_error() {
        let f = write_csv("w1,a,y\n0.1,0,1.0\n0.2,1,\n");
        let err = load_csv(f.path(), &roles(), true);
        assert!(matches!(err, Err(Error::MissingRequired { ref column, row: 2 }) if column == "y"));
    }

    #[test]
    fn missing_treatment_is_hard_error() {
        let f = write_csv("w1,a,y\n0.1,,1.0\n");
        let err = load_csv(f.path(), &roles(), true);
        assert!(matches!(err, Err(Error::MissingRequired { ref column, .. }) if column == "a"));
    }

    #[test]
    fn missing_covariate_without_impute_errors() {
        let f = write_csv("w1,a,y\n,0,1.0\n0.2,1,2.0\n");
        assert!(load_csv(f.path(), &roles(), false).is_err());
        assert!(load_csv(f.path(), &roles(), true).is_ok());
    }

    #[test]
    fn bad_column_name_and_bad_cell() {
        let f = write_csv("w1,a,y\n0.1,0,1.0\n");
        let bad_roles = ColumnRoles {
            treatment: "arm".into(),
            outcome: "y".into(),
            covariates: None,
        };
        assert!(matches!(
            load_csv(f.path(), &bad_roles, false),
            Err(Error::MissingColumn(ref c)) if c == "arm"
        ));
        let f2 = write_csv("w1,a,y\noops,0,1.0\n");
        assert!(matches!(
            load_csv(f2.path(), &roles(), false),
            Err(Error::CsvCell { row: 1, ref column, .. }) if column == "w1"
        ));
    }

    #[test]
    fn fractional_treatment_rejected() {
        let f = write_csv("w1,a,y\n0.1,0.5,1.0\n");
        assert!(matches!(
            load_csv(f.path(), &roles(), false),
            Err(Error::CsvCell { ref column, .. }) if column == "a"
        ));
    }

    #[test]
    fn explicit_covariate_subset() {
        let f = write_csv("w1,w2,extra,a,y\n0.1,1,9,0,2.0\n0.2,0,9,1,3.0\n");
        let r = ColumnRoles {
            treatment: "a".into(),
            outcome: "y".into(),
            covariates: Some(vec!["w1".into()]),
        };
        let (ds, _) = load_csv(f.path(), &r, false).unwrap();
        assert_eq!(ds.n_covariates(), 1);
        assert_eq!(ds.names, vec!["w1"]);
    }
}
