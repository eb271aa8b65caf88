//! Treatment-effect estimators: standard TMLE and one-step, their
//! collaborative counterparts built on the adaptive propensity score
//! (treatment regressed on the estimated outcome regression), a direct-ATE
//! collaborative TMLE, cross-validated CTMLE, and multi-arm means.

mod ate;
mod cv_ctmle;
mod multiarm;
mod tsm;

pub use ate::{ate_by_relabeling, collab_onestep_ate, ctmle_ate_direct, onestep_ate, tmle_ate};
pub use cv_ctmle::cv_ctmle_tsm;
pub use multiarm::{multiarm_means, multiarm_ps_decomposition, MultiarmReport};
pub use tsm::{collab_onestep_tsm, ctmle_tsm, onestep_tsm, tmle_tsm};

use crate::error::{Error, Result};
use crate::learners::{FittedLearner, FoldScheme, LearnerSpec, Link, SeparationPolicy};
use crate::stats::{expit, logit};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Bound on the fluctuation coefficient; matches the GLM separation bound.
pub const EPSILON_BOUND: f64 = 30.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Lower clip applied to propensity predictions before division.
    pub ps_floor: f64,
    /// Clip on OR predictions before taking logits.
    pub or_logit_clip: f64,
    pub ci_level: f64,
    /// Folds for the cross-validated influence-function variance; 1 means
    /// in-sample variance.
    pub variance_folds: usize,
    pub seed: u64,
    /// Targeting/adaptive-PS alternations; 1 is the non-iterative procedure.
    pub ps_iterations: usize,
    /// Skip variance estimation entirely (SE and CI reported as NaN).
    pub compute_se: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            ps_floor: 1e-6,
            or_logit_clip: 1e-6,
            ci_level: 0.95,
            variance_folds: 5,
            seed: 0,
            ps_iterations: 1,
            compute_se: true,
        }
    }
}

/// Default smoother for the adaptive PS: logistic GLM on a df=2 natural
/// spline of the OR predictions.
pub fn default_smoother() -> LearnerSpec {
    LearnerSpec::GlmSpline {
        link: Link::Logit,
        df: 2,
    }
}

/// Fitted nuisance predictions for one estimator run.
#[derive(Debug, Clone, Serialize)]
pub enum PsKind {
    Standard,
    Adaptive,
    AdaptiveBivariate,
}

#[derive(Debug, Clone)]
pub struct NuisanceBundle {
    pub or_pred: Vec<f64>,
    pub ps_pred: Vec<f64>,
    pub ps_kind: PsKind,
    pub folds: Option<FoldScheme>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub eif_mean: f64,
    pub ps_range: (f64, f64),
    pub separation_flags: Vec<String>,
    pub warnings: Vec<String>,
}

/// Point estimate with inference, on both the working [0,1] scale and the
/// original outcome scale.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub psi: f64,
    pub psi_scaled: f64,
    pub epsilon: Vec<f64>,
    #[serde(skip)]
    pub eif_values: Vec<f64>,
    pub se: f64,
    pub se_scaled: f64,
    pub ci: (f64, f64),
    pub n: usize,
    pub diagnostics: Diagnostics,
}

/// Result of regressing treatment on OR predictions.
#[derive(Debug, Clone)]
pub struct AdaptivePsFit {
    pub predictions: Vec<f64>,
    pub fitted: Option<FittedLearner>,
    pub separation: bool,
    pub warnings: Vec<String>,
}

impl AdaptivePsFit {
    /// Predict at new OR-prediction points, clipped to [floor, 1].
    pub fn predict(&self, or_pred: ArrayView2<f64>, floor: f64) -> Vec<f64> {
        match &self.fitted {
            Some(f) => f
                .predict(or_pred)
                .iter()
                .map(|&g| g.clamp(floor, 1.0))
                .collect(),
            None => vec![self.predictions[0]; or_pred.nrows()],
        }
    }
}

/// Fit the adaptive propensity score: regress the treatment indicator on the
/// OR predictions (one column for the treatment-specific mean, two for the
/// direct-ATE variant).
///
/// Degenerate cases fall back rather than fail: a constant treatment yields
/// constant predictions clipped at the floor, a constant OR prediction yields
/// an intercept-only fit, and separation caps the fit with a warning.
pub fn fit_adaptive_ps(
    a: &[f64],
    or_pred: ArrayView2<f64>,
    smoother: &LearnerSpec,
    floor: f64,
    seed: u64,
) -> Result<AdaptivePsFit> {
    let n = a.len();
    if or_pred.nrows() != n {
        return Err(Error::DimensionMismatch("adaptive PS input lengths".into()));
    }
    if or_pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite OR prediction".into()));
    }
    let mean_a: f64 = a.iter().sum::<f64>() / n as f64;
    if mean_a == 0.0 || mean_a == 1.0 {
        let g = mean_a.clamp(floor, 1.0);
        return Ok(AdaptivePsFit {
            predictions: vec![g; n],
            fitted: None,
            separation: false,
            warnings: vec!["treatment indicator is constant; adaptive PS is degenerate".into()],
        });
    }
    let constant_or = {
        let first = or_pred[[0, 0]];
        or_pred.iter().all(|&v| (v - first).abs() < 1e-14)
    };
    let spec = if constant_or {
        LearnerSpec::InterceptOnly { link: Link::Logit }
    } else {
        smoother.clone()
    };
    let fitted = spec.fit_with_policy(or_pred, a, seed, SeparationPolicy::Cap)?;
    let mut warnings = Vec::new();
    let separation = fitted.separation();
    if separation {
        warnings.push("adaptive PS fit hit the separation bound; predictions clipped".into());
    }
    if constant_or {
        warnings.push("OR predictions constant; adaptive PS reduced to intercept-only".into());
    }
    let predictions: Vec<f64> = fitted
        .predict(or_pred)
        .iter()
        .map(|&g| g.clamp(floor, 1.0))
        .collect();
    Ok(AdaptivePsFit {
        predictions,
        fitted: Some(fitted),
        separation,
        warnings,
    })
}

/// Fit a standard propensity score of the indicator on covariates, with
/// capped separation and floor clipping.
pub fn fit_standard_ps(
    a: &[f64],
    w: ArrayView2<f64>,
    ps_spec: &LearnerSpec,
    floor: f64,
    seed: u64,
) -> Result<AdaptivePsFit> {
    fit_adaptive_ps(a, w, ps_spec, floor, seed)
}

/// Solve for the fluctuation coefficient of the offset logistic working model
/// with covariate `h` (evaluated at the observed treatment): the root of
/// score(eps) = sum_i h_i (y_i - expit(offset_i + eps h_i)).
///
/// The score is strictly decreasing in eps, so a safeguarded Newton iteration
/// with a bisection bracket on [-EPSILON_BOUND, EPSILON_BOUND] is reliable.
pub fn solve_epsilon(offset: &[f64], h: &[f64], y: &[f64]) -> Result<f64> {
    let n = offset.len();
    assert_eq!(h.len(), n);
    assert_eq!(y.len(), n);
    let score = |eps: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            if h[i] != 0.0 {
                s += h[i] * (y[i] - expit(offset[i] + eps * h[i]));
            }
        }
        s
    };
    if h.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let tol = 1e-10 * n as f64;
    let mut lo = -EPSILON_BOUND;
    let mut hi = EPSILON_BOUND;
    let f_lo = score(lo);
    let f_hi = score(hi);
    let ps_min = h
        .iter()
        .filter(|&&v| v != 0.0)
        .map(|&v| 1.0 / v.abs())
        .fold(f64::INFINITY, f64::min);
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::EpsilonDiverged {
            bound: EPSILON_BOUND,
            ps_min,
        });
    }
    let mut eps = 0.0f64;
    for _ in 0..200 {
        let f = score(eps);
        if f.abs() <= tol {
            return Ok(eps);
        }
        if f > 0.0 {
            lo = eps;
        } else {
            hi = eps;
        }
        // Newton step with the exact derivative
        let mut d = 0.0;
        for i in 0..n {
            if h[i] != 0.0 {
                let mu = expit(offset[i] + eps * h[i]);
                d += h[i] * h[i] * mu * (1.0 - mu);
            }
        }
        let newton = if d > 0.0 { eps + f / d } else { f64::NAN };
        eps = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            break;
        }
    }
    let f = score(eps);
    if f.abs() <= tol.max(1e-8 * n as f64) {
        Ok(eps)
    } else {
        Err(Error::EpsilonDiverged {
            bound: EPSILON_BOUND,
            ps_min,
        })
    }
}

/// Targeting step for the treatment-specific mean: fluctuate the OR along the
/// clever covariate H(a, w) = a / g(w) and return the coefficient and the
/// targeted predictions evaluated at H(1, w).
pub fn target_or(
    or_pred: &[f64],
    ps_pred: &[f64],
    a: &[f64],
    y: &[f64],
    clip: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = or_pred.len();
    let offset: Vec<f64> = or_pred.iter().map(|&q| logit(q.clamp(clip, 1.0 - clip))).collect();
    let mut h_obs = vec![0.0; n];
    for i in 0..n {
        if a[i] != 0.0 {
            if ps_pred[i] <= 0.0 {
                return Err(Error::ZeroPropensity { row: i });
            }
            h_obs[i] = a[i] / ps_pred[i];
        }
    }
    let eps = solve_epsilon(&offset, &h_obs, y)?;
    let targeted: Vec<f64> = (0..n)
        .map(|i| expit(offset[i] + eps / ps_pred[i]))
        .collect();
    Ok((eps, targeted))
}

/// OR predictions clipped into [0, 1] for storage.
pub(crate) fn clip_unit(pred: impl IntoIterator<Item = f64>) -> Vec<f64> {
    pred.into_iter().map(|q| q.clamp(0.0, 1.0)).collect()
}

pub(crate) fn ps_range(g: &[f64]) -> (f64, f64) {
    let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Fit the outcome regression on the rows of one arm and predict all rows.
pub(crate) fn fit_or_on_arm(
    w: ArrayView2<f64>,
    a: &[f64],
    y: &[f64],
    or_spec: &LearnerSpec,
    seed: u64,
    arm: usize,
) -> Result<(FittedLearner, Vec<f64>)> {
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] != 0.0).collect();
    if rows.is_empty() {
        return Err(Error::EmptyArm { arm });
    }
    let wt = crate::learners::select_rows(w, &rows);
    let yt: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let fit = or_spec.fit(wt.view(), &yt, seed)?;
    let pred = clip_unit(fit.predict(w));
    Ok((fit, pred))
}

pub(crate) fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
}

pub(crate) fn two_columns(c1: &[f64], c2: &[f64]) -> Array2<f64> {
    let n = c1.len();
    let mut out = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        out[[i, 0]] = c1[i];
        out[[i, 1]] = c2[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_zero_when_score_already_zero() {
        // y equals the OR prediction for all treated units
        let or_pred = vec![0.3, 0.6, 0.8, 0.2];
        let ps = vec![0.5, 0.5, 0.5, 0.5];
        let a = vec![1.0, 1.0, 0.0, 0.0];
        let y = vec![0.3, 0.6, 0.1, 0.9];
        let (eps, targeted) = target_or(&or_pred, &ps, &a, &y, 1e-6).unwrap();
        assert_abs_diff_eq!(eps, 0.0, epsilon = 1e-8);
        for (t, q) in targeted.iter().zip(or_pred.iter()) {
            assert_abs_diff_eq!(t, q, epsilon = 1e-7);
        }
    }

    #[test]
    fn epsilon_closed_form_intercept_shift() {
        // or_pred = 0.5 and ps = 1 for all, treated outcome mean 0.75:
        // score(eps) = sum(y - expit(eps)) = 0 -> eps = logit(0.75)
        let n = 8;
        let or_pred = vec![0.5; n];
        let ps = vec![1.0; n];
        let a = vec![1.0; n];
        let y = vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.5, 0.5, 1.0];
        assert_abs_diff_eq!(y.iter().sum::<f64>() / n as f64, 0.75);
        let (eps, _) = target_or(&or_pred, &ps, &a, &y, 1e-6).unwrap();
        assert_abs_diff_eq!(eps, logit(0.75), epsilon = 1e-8);
    }

    /// Scalar Newton oracle on the offset likelihood, written independently.
    fn newton_epsilon_oracle(offset: &[f64], h: &[f64], y: &[f64]) -> f64 {
        let mut eps = 0.0f64;
        for _ in 0..500 {
            let mut f = 0.0;
            let mut d = 0.0;
            for i in 0..offset.len() {
                let mu = 1.0 / (1.0 + (-(offset[i] + eps * h[i])).exp());
                f += h[i] * (y[i] - mu);
                d -= h[i] * h[i] * mu * (1.0 - mu);
            }
            if f.abs() < 1e-14 {
                break;
            }
            eps -= f / d;
        }
        eps
    }

    #[test]
    fn epsilon_matches_newton_oracle_on_fixed_problem() {
        let or_pred = vec![0.2, 0.5, 0.7, 0.4, 0.9, 0.3];
        let ps = vec![0.3, 0.6, 0.8, 0.4, 0.5, 0.7];
        let a = vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let y = vec![0.5, 0.2, 0.9, 0.1, 0.8, 0.6];
        let (eps, _) = target_or(&or_pred, &ps, &a, &y, 1e-6).unwrap();
        let offset: Vec<f64> = or_pred.iter().map(|&q| logit(q)).collect();
        let h: Vec<f64> = (0..6).map(|i| a[i] / ps[i]).collect();
        let oracle = newton_epsilon_oracle(&offset, &h, &y);
        assert_abs_diff_eq!(eps, oracle, epsilon = 1e-8);
    }

    #[test]
    fn targeting_solves_eif_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let or_pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let ps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.9)).collect();
        let a: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 }).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (_, targeted) = target_or(&or_pred, &ps, &a, &y, 1e-6).unwrap();
        // post-targeting score at observed treatment
        let score: f64 = (0..n)
            .filter(|&i| a[i] == 1.0)
            .map(|i| (y[i] - targeted[i]) / ps[i])
            .sum();
        assert!((score / n as f64).abs() <= 1e-8);
    }

    #[test]
    fn adaptive_ps_recovers_marginal_under_independence() {
        // a independent of or_pred: predictions near mean(a)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4000;
        let or_pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
        let a: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < 0.4 { 1.0 } else { 0.0 }).collect();
        let fit = fit_adaptive_ps(&a, column(&or_pred).view(), &default_smoother(), 1e-6, 0).unwrap();
        let mean_a: f64 = a.iter().sum::<f64>() / n as f64;
        for g in &fit.predictions {
            assert!((g - mean_a).abs() < 0.05, "prediction {g} far from {mean_a}");
        }
    }

    #[test]
    fn adaptive_ps_constant_treatment() {
        let or_pred = vec![0.1, 0.5, 0.9];
        let a = vec![1.0, 1.0, 1.0];
        let fit = fit_adaptive_ps(&a, column(&or_pred).view(), &default_smoother(), 1e-6, 0).unwrap();
        assert!(fit.predictions.iter().all(|&g| g == 1.0));
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn adaptive_ps_separation_capped() {
        // a perfectly determined by an or_pred threshold
        let n = 40;
        let or_pred: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let a: Vec<f64> = or_pred.iter().map(|&q| if q > 0.5 { 1.0 } else { 0.0 }).collect();
        let fit = fit_adaptive_ps(
            &a,
            column(&or_pred).view(),
            &LearnerSpec::Glm { link: Link::Logit },
            1e-6,
            0,
        )
        .unwrap();
        assert!(fit.separation);
        assert!(fit.predictions.iter().all(|&g| (1e-6..=1.0).contains(&g)));
    }

    #[test]
    fn adaptive_ps_constant_or_pred_intercept_only() {
        let or_pred = vec![0.5; 20];
        let a: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let fit = fit_adaptive_ps(&a, column(&or_pred).view(), &default_smoother(), 1e-6, 0).unwrap();
        for g in &fit.predictions {
            assert_abs_diff_eq!(*g, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn epsilon_diverges_on_extreme_problem() {
        // tiny PS and outcomes pinned at 1 push epsilon past the bound
        let or_pred = vec![1e-6; 5];
        let ps = vec![1.0; 5];
        let a = vec![1.0; 5];
        let y = vec![1.0; 5];
        let err = target_or(&or_pred, &ps, &a, &y, 1e-6);
        assert!(matches!(err, Err(Error::EpsilonDiverged { .. })));
    }
}
