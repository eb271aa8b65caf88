//! Observed-data records: covariates, treatment labels, and the outcome on a
//! unit-interval working scale.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Affine map applied to the raw outcome so the stored outcome lies in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeScale {
    pub y_min: f64,
    pub y_max: f64,
    pub applied: bool,
}

impl OutcomeScale {
    pub fn identity() -> Self {
        OutcomeScale {
            y_min: 0.0,
            y_max: 1.0,
            applied: false,
        }
    }

    pub fn range(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// A scaled outcome vector together with its scaling record.
#[derive(Debug, Clone)]
pub struct ScaledOutcome {
    pub y_scaled: Vec<f64>,
    pub scale: OutcomeScale,
    /// Set when the raw outcome was constant and no affine map exists.
    pub degenerate: bool,
}

/// Min-max scale a raw outcome into [0, 1].
///
/// An all-equal input has no invertible map; the scaled outcome is set to the
/// constant 0.5 and flagged degenerate.
pub fn scale_outcome(y_raw: &[f64]) -> Result<ScaledOutcome> {
    if y_raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y_raw.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite outcome value".into()));
    }
    let min = y_raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = y_raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        let range = max - min;
        Ok(ScaledOutcome {
            y_scaled: y_raw.iter().map(|y| (y - min) / range).collect(),
            scale: OutcomeScale {
                y_min: min,
                y_max: max,
                applied: true,
            },
            degenerate: false,
        })
    } else {
        Ok(ScaledOutcome {
            y_scaled: vec![0.5; y_raw.len()],
            scale: OutcomeScale {
                y_min: min,
                y_max: max,
                applied: false,
            },
            degenerate: true,
        })
    }
}

/// Map a point estimate on the [0, 1] working scale back to the raw outcome scale.
pub fn unscale_estimate(psi_scaled: f64, scale: &OutcomeScale) -> f64 {
    if scale.applied {
        psi_scaled * scale.range() + scale.y_min
    } else {
        psi_scaled
    }
}

/// Observed data: covariate matrix, integer treatment labels, and an outcome
/// stored on the unit interval. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub w: Array2<f64>,
    pub a: Vec<usize>,
    pub y: Array1<f64>,
    pub y_scale: OutcomeScale,
    pub names: Vec<String>,
    /// Number of treatment arms; labels are 0..n_arms.
    pub n_arms: usize,
}

impl Dataset {
    /// Build a dataset from raw parts, scaling the outcome into [0, 1].
    pub fn from_raw(w: Array2<f64>, a: Vec<usize>, y_raw: &[f64], names: Vec<String>) -> Result<Dataset> {
        let n = w.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if a.len() != n || y_raw.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "w has {} rows, a has {}, y has {}",
                n,
                a.len(),
                y_raw.len()
            )));
        }
        let scaled = scale_outcome(y_raw)?;
        let n_arms = a.iter().max().map(|m| m + 1).unwrap_or(1).max(2);
        let names = if names.is_empty() {
            (0..w.ncols()).map(|j| format!("w{}", j + 1)).collect()
        } else {
            names
        };
        Ok(Dataset {
            w,
            a,
            y: Array1::from(scaled.y_scaled),
            y_scale: scaled.scale,
            names,
            n_arms,
        })
    }

    /// Build from an outcome already in [0, 1], with no scaling applied.
    pub fn from_unit_outcome(w: Array2<f64>, a: Vec<usize>, y: Vec<f64>, names: Vec<String>) -> Result<Dataset> {
        let n = w.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument("outcome outside [0,1] with keep_unit_interval".into()));
        }
        let n_arms = a.iter().max().map(|m| m + 1).unwrap_or(1).max(2);
        let names = if names.is_empty() {
            (0..w.ncols()).map(|j| format!("w{}", j + 1)).collect()
        } else {
            names
        };
        Ok(Dataset {
            w,
            a,
            y: Array1::from(y),
            y_scale: OutcomeScale::identity(),
            names,
            n_arms,
        })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_covariates(&self) -> usize {
        self.w.ncols()
    }

    /// Binary indicator of membership in `arm`.
    pub fn arm_indicator(&self, arm: usize) -> Vec<f64> {
        self.a.iter().map(|&ai| if ai == arm { 1.0 } else { 0.0 }).collect()
    }

    /// A copy with binary labels swapped (a -> 1 - a). Panics if not binary.
    pub fn relabeled_binary(&self) -> Dataset {
        assert!(self.a.iter().all(|&ai| ai <= 1), "relabeling requires binary treatment");
        let mut out = self.clone();
        out.a = self.a.iter().map(|&ai| 1 - ai).collect();
        out
    }
}

/// Summary produced by [`validate_dataset`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub arm_counts: Vec<usize>,
    pub empty_arms: Vec<usize>,
    pub zero_variance_columns: Vec<String>,
    pub warnings: Vec<String>,
}

/// Inspect a dataset for degenerate arms and constant covariate columns.
pub fn validate_dataset(ds: &Dataset) -> Result<ValidationReport> {
    if ds.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut arm_counts = vec![0usize; ds.n_arms];
    for &ai in &ds.a {
        if ai >= arm_counts.len() {
            arm_counts.resize(ai + 1, 0);
        }
        arm_counts[ai] += 1;
    }
    let empty_arms: Vec<usize> = arm_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(k, _)| k)
        .collect();
    let mut zero_variance_columns = Vec::new();
    for j in 0..ds.n_covariates() {
        let col = ds.w.column(j);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            zero_variance_columns.push(ds.names[j].clone());
        }
    }
    let mut warnings = Vec::new();
    for &k in &empty_arms {
        warnings.push(format!("arm {k} empty"));
    }
    for name in &zero_variance_columns {
        warnings.push(format!("covariate {name} has zero variance"));
    }
    Ok(ValidationReport {
        n: ds.n(),
        arm_counts,
        empty_arms,
        zero_variance_columns,
        warnings,
    })
}
