//! Natural cubic spline basis with knots at empirical quantiles.

use crate::error::{Error, Result};
use crate::stats::quantile;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// A natural cubic spline basis: linear tails beyond the boundary knots,
/// cubic between them. `df` basis columns come from `df + 1` knots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NaturalSpline {
    pub knots: Vec<f64>,
    /// Set when the requested df had to be reduced for lack of distinct values.
    pub df_reduced: bool,
}

impl NaturalSpline {
    /// Place `df + 1` knots at equally spaced quantiles of `x` (boundary knots
    /// at the extremes). Falls back to a lower df when there are too few
    /// distinct values; errors if `x` is constant.
    pub fn from_data(x: &[f64], df: usize) -> Result<NaturalSpline> {
        if df < 1 {
            return Err(Error::InvalidArgument("spline df must be >= 1".into()));
        }
        let mut sorted: Vec<f64> = x.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::InvalidArgument("spline input is constant".into()));
        }
        let mut df_eff = df.min(distinct.len() - 1);
        loop {
            let k = df_eff + 1;
            let mut knots: Vec<f64> = (0..k)
                .map(|i| quantile(&sorted, i as f64 / (k as f64 - 1.0)))
                .collect();
            knots.dedup();
            if knots.len() == k {
                return Ok(NaturalSpline {
                    knots,
                    df_reduced: df_eff < df,
                });
            }
            if df_eff == 1 {
                // boundary knots are distinct by the check above
                return Ok(NaturalSpline {
                    knots: vec![distinct[0], *distinct.last().unwrap()],
                    df_reduced: df > 1,
                });
            }
            df_eff -= 1;
        }
    }

    pub fn df(&self) -> usize {
        self.knots.len() - 1
    }

    /// Evaluate the basis at new points: column 0 is x itself, remaining
    /// columns are the truncated-power natural spline functions
    /// d_k(x) - d_{K-1}(x).
    pub fn basis(&self, x: &[f64]) -> Array2<f64> {
        let k = self.knots.len();
        let df = k - 1;
        let mut out = Array2::<f64>::zeros((x.len(), df));
        for (i, &xi) in x.iter().enumerate() {
            out[[i, 0]] = xi;
            for j in 1..df {
                out[[i, j]] = self.d(j - 1, xi) - self.d(k - 2, xi);
            }
        }
        out
    }

    fn d(&self, k_idx: usize, x: f64) -> f64 {
        let last = *self.knots.last().unwrap();
        let xi_k = self.knots[k_idx];
        let pos = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
        (pos(x - xi_k) - pos(x - last)) / (last - xi_k)
    }
}

/// Convenience wrapper producing the basis matrix for the observed data.
pub fn natural_spline_basis(x: &[f64], df: usize) -> Result<(Array2<f64>, NaturalSpline)> {
    let spline = NaturalSpline::from_data(x, df)?;
    let basis = spline.basis(x);
    Ok((basis, spline))
}

/// Column rank of a matrix via Gram-matrix eigenvalues; used by tests and
/// diagnostics.
pub fn column_rank(m: &Array2<f64>) -> usize {
    let gram = m.t().dot(m);
    let (_, rank) = crate::linalg::pinv_sym(&gram);
    rank
}

/// Prepend an intercept column.
pub fn with_intercept(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let p = m.ncols();
    let mut out = Array2::<f64>::ones((n, p + 1));
    for i in 0..n {
        for j in 0..p {
            out[[i, j + 1]] = m[[i, j]];
        }
    }
    out
}

#[allow(dead_code)]
pub fn intercept_only(n: usize) -> Array2<f64> {
    Array2::<f64>::ones((n, 1))
}

pub fn linear_beyond_boundary(spline: &NaturalSpline, probe: f64) -> bool {
    // second difference of the basis vanishes outside the boundary knots
    let hi = *spline.knots.last().unwrap();
    let pts = [hi + probe, hi + probe + 0.1, hi + probe + 0.2];
    let b = spline.basis(&pts);
    (0..b.ncols()).all(|j| {
        let second = b[[2, j]] - 2.0 * b[[1, j]] + b[[0, j]];
        second.abs() < 1e-8
    })
}
