//! Regression primitives: GLMs, spline bases, an indicator-basis lasso, and
//! the cross-validation machinery shared by the estimators.

pub mod folds;
pub mod glm;
pub mod hal;
pub mod lasso;
pub mod spline;

pub use folds::FoldScheme;
pub use glm::{fit_glm, fit_glm_with_policy, GlmFit, Link, SeparationPolicy};
pub use hal::{HalBasis, HalBasisConfig};
pub use lasso::{default_lambda_grid, fit_lasso_logistic, lambda_max, LassoFit};
pub use spline::{natural_spline_basis, NaturalSpline};

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// A learner specification: how to turn (x, y) into a fitted regression.
/// Named in config files by the `name` field in the CLI layer.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum LearnerSpec {
    /// Intercept-only fit (the grand mean on the link scale).
    InterceptOnly { link: Link },
    /// GLM on the raw columns plus intercept.
    Glm { link: Link },
    /// GLM on natural spline expansions of each column plus intercept.
    GlmSpline { link: Link, df: usize },
    /// Indicator-basis lasso with CV-selected penalty (logit link).
    HalLasso {
        max_interaction: usize,
        max_knots_per_dim: usize,
        n_lambda: usize,
        cv_folds: usize,
    },
}

impl LearnerSpec {
    pub fn hal_default() -> LearnerSpec {
        LearnerSpec::HalLasso {
            max_interaction: 2,
            max_knots_per_dim: 10,
            n_lambda: 20,
            cv_folds: 5,
        }
    }

    /// Fit the learner. `seed` drives any internal cross-validation split.
    pub fn fit(&self, x: ArrayView2<f64>, y: &[f64], seed: u64) -> Result<FittedLearner> {
        self.fit_with_policy(x, y, seed, SeparationPolicy::Error)
    }

    pub fn fit_with_policy(
        &self,
        x: ArrayView2<f64>,
        y: &[f64],
        seed: u64,
        policy: SeparationPolicy,
    ) -> Result<FittedLearner> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch("learner response length".into()));
        }
        let yv = Array1::from(y.to_vec());
        match self {
            LearnerSpec::InterceptOnly { link } => {
                let design = Array2::<f64>::ones((n, 1));
                let fit = glm::fit_glm_with_policy(&design, &yv, *link, None, None, policy)?;
                Ok(FittedLearner::Glm {
                    fit,
                    transform: Transform::Intercept,
                })
            }
            LearnerSpec::Glm { link } => {
                let design = spline::with_intercept(&x.to_owned());
                let fit = glm::fit_glm_with_policy(&design, &yv, *link, None, None, policy)?;
                Ok(FittedLearner::Glm {
                    fit,
                    transform: Transform::Raw,
                })
            }
            LearnerSpec::GlmSpline { link, df } => {
                let mut splines = Vec::with_capacity(x.ncols());
                let mut parts: Vec<Array2<f64>> = Vec::with_capacity(x.ncols());
                let mut any_constant = true;
                for j in 0..x.ncols() {
                    let col: Vec<f64> = x.column(j).to_vec();
                    match NaturalSpline::from_data(&col, *df) {
                        Ok(s) => {
                            parts.push(s.basis(&col));
                            splines.push(Some(s));
                            any_constant = false;
                        }
                        Err(_) => splines.push(None), // constant column: contributes nothing
                    }
                }
                if any_constant {
                    // every column constant: intercept-only fallback
                    let design = Array2::<f64>::ones((n, 1));
                    let fit = glm::fit_glm_with_policy(&design, &yv, *link, None, None, policy)?;
                    return Ok(FittedLearner::Glm {
                        fit,
                        transform: Transform::Intercept,
                    });
                }
                let design = spline::with_intercept(&hstack(&parts));
                let fit = glm::fit_glm_with_policy(&design, &yv, *link, None, None, policy)?;
                Ok(FittedLearner::Glm {
                    fit,
                    transform: Transform::Spline(splines),
                })
            }
            LearnerSpec::HalLasso {
                max_interaction,
                max_knots_per_dim,
                n_lambda,
                cv_folds,
            } => {
                let config = HalBasisConfig {
                    max_interaction: *max_interaction,
                    max_knots_per_dim: *max_knots_per_dim,
                    ..Default::default()
                };
                let basis = HalBasis::from_data(x, &config)?;
                let design = basis.transform(x);
                let grid = default_lambda_grid(design.view(), y, *n_lambda);
                let v = (*cv_folds).min(n).max(2);
                let folds = FoldScheme::new(n, v, seed)?;
                let fit = fit_lasso_logistic(design.view(), y, &grid, &folds)?;
                Ok(FittedLearner::Lasso { fit, basis })
            }
        }
    }
}

fn hstack(parts: &[Array2<f64>]) -> Array2<f64> {
    let n = parts[0].nrows();
    let total: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Array2::<f64>::zeros((n, total));
    let mut c = 0;
    for p in parts {
        for j in 0..p.ncols() {
            for i in 0..n {
                out[[i, c]] = p[[i, j]];
            }
            c += 1;
        }
    }
    out
}

/// Feature construction recorded by a fitted GLM, replayed at prediction time.
#[derive(Debug, Clone)]
pub enum Transform {
    Intercept,
    Raw,
    /// Per input column; `None` marks a column that was constant at fit time.
    Spline(Vec<Option<NaturalSpline>>),
}

/// A fitted regression exposing prediction on new covariates.
#[derive(Debug, Clone)]
pub enum FittedLearner {
    Glm { fit: GlmFit, transform: Transform },
    Lasso { fit: LassoFit, basis: HalBasis },
}

impl FittedLearner {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        match self {
            FittedLearner::Glm { fit, transform } => {
                let design = match transform {
                    Transform::Intercept => Array2::<f64>::ones((x.nrows(), 1)),
                    Transform::Raw => spline::with_intercept(&x.to_owned()),
                    Transform::Spline(splines) => {
                        let mut parts = Vec::new();
                        for (j, s) in splines.iter().enumerate() {
                            if let Some(s) = s {
                                let col: Vec<f64> = x.column(j).to_vec();
                                parts.push(s.basis(&col));
                            }
                        }
                        spline::with_intercept(&hstack(&parts))
                    }
                };
                fit.predict(&design)
            }
            FittedLearner::Lasso { fit, basis } => fit.predict(basis.transform(x).view()),
        }
    }

    pub fn separation(&self) -> bool {
        match self {
            FittedLearner::Glm { fit, .. } => fit.separation,
            FittedLearner::Lasso { .. } => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    Squared,
    NegLogLik,
}

fn validation_risk(pred: &[f64], truth: &[f64], loss: Loss) -> f64 {
    let n = pred.len() as f64;
    match loss {
        Loss::Squared => pred
            .iter()
            .zip(truth)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n,
        Loss::NegLogLik => pred
            .iter()
            .zip(truth)
            .map(|(p, t)| {
                let m = p.clamp(1e-12, 1.0 - 1e-12);
                -(t * m.ln() + (1.0 - t) * (1.0 - m).ln())
            })
            .sum::<f64>()
            / n,
    }
}

/// Cross-validated risk table for a set of candidate learners.
#[derive(Debug, Clone, Serialize)]
pub struct CvSelection {
    pub chosen: usize,
    pub risks: Vec<f64>,
}

/// Discrete cross-validation selection: fit every candidate per fold, score
/// held-out risk, return the minimizer (ties broken by list order). A
/// candidate failing on any fold gets infinite risk.
pub fn cv_select(
    candidates: &[LearnerSpec],
    x: ArrayView2<f64>,
    y: &[f64],
    folds: &FoldScheme,
    loss: Loss,
) -> Result<CvSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate learners".into()));
    }
    let mut risks = vec![0.0f64; candidates.len()];
    let mut failed = vec![false; candidates.len()];
    for fold in 0..folds.v {
        let train = folds.training_indices(fold);
        let val = folds.validation_indices(fold);
        let xt = select_rows(x, &train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv = select_rows(x, &val);
        let yv: Vec<f64> = val.iter().map(|&i| y[i]).collect();
        for (c, spec) in candidates.iter().enumerate() {
            if failed[c] {
                continue;
            }
            match spec.fit(xt.view(), &yt, folds.seed.wrapping_add(fold as u64)) {
                Ok(fit) => {
                    let pred = fit.predict(xv.view());
                    risks[c] += validation_risk(pred.as_slice().unwrap(), &yv, loss) * yv.len() as f64;
                }
                Err(_) => failed[c] = true,
            }
        }
    }
    let n = x.nrows() as f64;
    for c in 0..risks.len() {
        risks[c] = if failed[c] { f64::INFINITY } else { risks[c] / n };
    }
    if risks.iter().all(|r| !r.is_finite()) {
        return Err(Error::AllCandidatesFailed);
    }
    let chosen = risks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(CvSelection { chosen, risks })
}

/// Out-of-fold predictions: observation i is predicted by a model trained
/// without fold(i). `train_filter`, when given, restricts training rows (e.g.
/// to treated units); a fold whose filtered training part is empty is an error.
pub fn cross_fit(
    spec: &LearnerSpec,
    x: ArrayView2<f64>,
    y: &[f64],
    folds: &FoldScheme,
    train_filter: Option<&[bool]>,
) -> Result<Array1<f64>> {
    let n = x.nrows();
    let mut out = Array1::<f64>::zeros(n);
    for fold in 0..folds.v {
        let mut train = folds.training_indices(fold);
        if let Some(filter) = train_filter {
            train.retain(|&i| filter[i]);
        }
        if train.is_empty() {
            return Err(Error::FoldWithoutTreated { fold });
        }
        let val = folds.validation_indices(fold);
        let xt = select_rows(x, &train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let fit = spec
            .fit(xt.view(), &yt, folds.seed.wrapping_add(fold as u64))
            .map_err(|e| Error::FoldFailure {
                fold,
                source: Box::new(e),
            })?;
        let xv = select_rows(x, &val);
        let pred = fit.predict(xv.view());
        for (k, &i) in val.iter().enumerate() {
            out[i] = pred[k];
        }
    }
    Ok(out)
}

pub(crate) fn select_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), x.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        for j in 0..x.ncols() {
            out[[r, j]] = x[[i, j]];
        }
    }
    out
}
