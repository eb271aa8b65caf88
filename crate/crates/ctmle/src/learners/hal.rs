//! Zero-order indicator basis over quantile knots, with interactions.
//!
//! A desk-scale stand-in for a fully adaptive indicator learner: columns are
//! 1{w_j >= knot} at per-dimension quantile knots plus products of such
//! indicators over covariate subsets up to a configured interaction order.

use crate::error::{Error, Result};
use crate::stats::quantile;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalBasisConfig {
    pub max_interaction: usize,
    pub max_knots_per_dim: usize,
    /// Knot truncation kicks in when the pre-dedup column count would exceed this.
    pub max_columns: usize,
}

impl Default for HalBasisConfig {
    fn default() -> Self {
        HalBasisConfig {
            max_interaction: 2,
            max_knots_per_dim: 10,
            max_columns: 2000,
        }
    }
}

/// One basis column: a product of per-dimension threshold indicators.
type Term = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct HalBasis {
    pub terms: Vec<Term>,
    pub truncated: bool,
}

impl HalBasis {
    /// Build the basis from training covariates, deduplicating columns that
    /// are identical (or constant) on the training data.
    pub fn from_data(w: ArrayView2<f64>, config: &HalBasisConfig) -> Result<HalBasis> {
        if config.max_interaction < 1 {
            return Err(Error::InvalidArgument("max_interaction must be >= 1".into()));
        }
        let n = w.nrows();
        let p = w.ncols();
        if n == 0 || p == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut knots_per_dim = config.max_knots_per_dim.max(1);
        let mut truncated = false;
        loop {
            let knots = dim_knots(w, knots_per_dim);
            let count = projected_columns(&knots, config.max_interaction, p);
            if count <= config.max_columns || knots_per_dim == 1 {
                let terms = enumerate_terms(&knots, config.max_interaction, p);
                let terms = dedup_terms(w, terms);
                return Ok(HalBasis { terms, truncated });
            }
            truncated = true;
            knots_per_dim -= 1;
        }
    }

    pub fn n_columns(&self) -> usize {
        self.terms.len()
    }

    /// Evaluate the indicator design at (possibly new) covariates.
    pub fn transform(&self, w: ArrayView2<f64>) -> Array2<f64> {
        let n = w.nrows();
        let mut out = Array2::<f64>::zeros((n, self.terms.len()));
        for (c, term) in self.terms.iter().enumerate() {
            for i in 0..n {
                let mut v = 1.0;
                for &(dim, knot) in term {
                    if w[[i, dim]] < knot {
                        v = 0.0;
                        break;
                    }
                }
                out[[i, c]] = v;
            }
        }
        out
    }
}

fn dim_knots(w: ArrayView2<f64>, k: usize) -> Vec<Vec<f64>> {
    let p = w.ncols();
    let mut all = Vec::with_capacity(p);
    for j in 0..p {
        let mut col: Vec<f64> = w.column(j).to_vec();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut knots: Vec<f64> = (0..k)
            .map(|i| quantile(&col, (i as f64 + 1.0) / (k as f64 + 1.0)))
            .collect();
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        all.push(knots);
    }
    all
}

fn projected_columns(knots: &[Vec<f64>], max_order: usize, p: usize) -> usize {
    let mut total = 0usize;
    let mut stack: Vec<(usize, usize, usize)> = (0..p).map(|j| (j, 1, knots[j].len())).collect();
    while let Some((j, order, prod)) = stack.pop() {
        total += prod;
        if order < max_order {
            for j2 in (j + 1)..p {
                stack.push((j2, order + 1, prod * knots[j2].len()));
            }
        }
    }
    total
}

fn enumerate_terms(knots: &[Vec<f64>], max_order: usize, p: usize) -> Vec<Term> {
    let mut terms = Vec::new();
    // depth-first over covariate subsets in lexicographic order
    fn recurse(
        knots: &[Vec<f64>],
        p: usize,
        max_order: usize,
        start: usize,
        current: &mut Term,
        terms: &mut Vec<Term>,
    ) {
        for j in start..p {
            for &knot in &knots[j] {
                current.push((j, knot));
                terms.push(current.clone());
                if current.len() < max_order {
                    recurse(knots, p, max_order, j + 1, current, terms);
                }
                current.pop();
            }
        }
    }
    let mut current = Vec::new();
    recurse(knots, p, max_order, 0, &mut current, &mut terms);
    terms
}

fn dedup_terms(w: ArrayView2<f64>, terms: Vec<Term>) -> Vec<Term> {
    let n = w.nrows();
    let mut seen: HashMap<Vec<u8>, ()> = HashMap::new();
    let mut kept = Vec::new();
    for term in terms {
        let mut sig = Vec::with_capacity(n);
        let mut any_zero = false;
        let mut any_one = false;
        for i in 0..n {
            let mut v = 1u8;
            for &(dim, knot) in &term {
                if w[[i, dim]] < knot {
                    v = 0;
                    break;
                }
            }
            if v == 0 {
                any_zero = true;
            } else {
                any_one = true;
            }
            sig.push(v);
        }
        // constant columns carry no signal (an all-ones column duplicates the intercept)
        if !(any_zero && any_one) {
            continue;
        }
        if seen.insert(sig, ()).is_none() {
            kept.push(term);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn cfg(order: usize, knots: usize) -> HalBasisConfig {
        HalBasisConfig {
            max_interaction: order,
            max_knots_per_dim: knots,
            max_columns: 10_000,
        }
    }

    #[test]
    fn one_covariate_two_knots_order_one() {
        let w = Array2::from_shape_vec((6, 1), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let basis = HalBasis::from_data(w.view(), &cfg(1, 2)).unwrap();
        assert_eq!(basis.n_columns(), 2);
    }

    #[test]
    fn binary_covariate_dedups_to_one_column() {
        let w = Array2::from_shape_vec((6, 1), vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let basis = HalBasis::from_data(w.view(), &cfg(1, 5)).unwrap();
        assert_eq!(basis.n_columns(), 1);
        let x = basis.transform(w.view());
        assert_eq!(x.column(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn two_covariates_three_knots_order_two_counts() {
        // 8x8 grid: every main effect and product indicator has a distinct
        // pattern, so nothing dedups: 2*3 main + 3*3 pairwise = 15
        let n = 64;
        let mut v = Vec::with_capacity(n * 2);
        for i in 0..n {
            v.push((i % 8) as f64);
            v.push((i / 8) as f64);
        }
        let w = Array2::from_shape_vec((n, 2), v).unwrap();
        let basis = HalBasis::from_data(w.view(), &cfg(2, 3)).unwrap();
        assert_eq!(basis.n_columns(), 15);
    }

    #[test]
    fn column_budget_truncates_knots() {
        let n = 50;
        let mut v = Vec::with_capacity(n * 3);
        for i in 0..n {
            v.push(i as f64 * 0.7 % 5.0);
            v.push(i as f64 * 1.3 % 7.0);
            v.push(i as f64 * 2.1 % 3.0);
        }
        let w = Array2::from_shape_vec((n, 3), v).unwrap();
        let config = HalBasisConfig {
            max_interaction: 2,
            max_knots_per_dim: 10,
            max_columns: 40,
        };
        let basis = HalBasis::from_data(w.view(), &config).unwrap();
        assert!(basis.truncated);
    }

    #[test]
    fn transform_consistent_on_new_rows() {
        let w = Array2::from_shape_vec((5, 1), vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let basis = HalBasis::from_data(w.view(), &cfg(1, 2)).unwrap();
        let new = Array2::from_shape_vec((2, 1), vec![0.0, 10.0]).unwrap();
        let x = basis.transform(new.view());
        // below all knots -> all zeros; above all knots -> all ones
        assert!(x.row(0).iter().all(|&v| v == 0.0));
        assert!(x.row(1).iter().all(|&v| v == 1.0));
    }
}
