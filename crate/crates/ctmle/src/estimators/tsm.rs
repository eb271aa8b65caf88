//! Treatment-specific mean estimators: collaborative TMLE and one-step with
//! the adaptive propensity score, and the standard TMLE and one-step with a
//! covariate-based propensity score.

use super::{
    clip_unit, column, fit_adaptive_ps, fit_or_on_arm, ps_range, target_or, AdaptivePsFit,
    Diagnostics, EstimateReport, EstimatorConfig,
};
use crate::data::{unscale_estimate, Dataset};
use crate::eif::{eif_eval, plugin_estimate, EifInputs};
use crate::error::Result;
use crate::inference::{cv_if_variance, wald_ci, IfKind};
use crate::learners::LearnerSpec;

/// Assemble an [`EstimateReport`] from working-scale quantities, attaching the
/// cross-validated influence-function variance for the given nuisance kind.
pub(crate) fn finish_report(
    ds: &Dataset,
    estimator: &str,
    psi_scaled: f64,
    epsilon: Vec<f64>,
    eif: Vec<f64>,
    kind: Option<&IfKind>,
    config: &EstimatorConfig,
    g: &[f64],
    separation_flags: Vec<String>,
    mut warnings: Vec<String>,
    is_difference: bool,
) -> Result<EstimateReport> {
    let n = ds.n();
    let eif_mean = eif.iter().sum::<f64>() / n as f64;
    let se_scaled = match (config.compute_se, kind) {
        (true, Some(kind)) => cv_if_variance(ds, kind, config.variance_folds, config)?.se_scaled,
        _ => {
            if config.compute_se {
                warnings.push("no variance kind supplied; SE omitted".into());
            }
            f64::NAN
        }
    };
    let range = if ds.y_scale.applied { ds.y_scale.range() } else { 1.0 };
    let psi = if is_difference {
        psi_scaled * range
    } else {
        unscale_estimate(psi_scaled, &ds.y_scale)
    };
    let se = se_scaled * range;
    let ci = if se.is_finite() {
        wald_ci(psi, se, config.ci_level)?
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(EstimateReport {
        estimator: estimator.to_string(),
        psi,
        psi_scaled,
        epsilon,
        eif_values: eif,
        se,
        se_scaled,
        ci,
        n,
        diagnostics: Diagnostics {
            eif_mean,
            ps_range: ps_range(g),
            separation_flags,
            warnings,
        },
    })
}

struct TsmPieces {
    psi_scaled: f64,
    epsilon: Vec<f64>,
    eif: Vec<f64>,
    g: Vec<f64>,
    separation_flags: Vec<String>,
    warnings: Vec<String>,
}

/// Shared TSM computation once the propensity predictions are in hand.
fn tsm_with_ps(
    ds: &Dataset,
    ind: &[f64],
    or_pred: &[f64],
    ps: &AdaptivePsFit,
    config: &EstimatorConfig,
    target: bool,
) -> Result<TsmPieces> {
    let y: Vec<f64> = ds.y.to_vec();
    let mut separation_flags = Vec::new();
    let mut warnings = ps.warnings.clone();
    if ps.separation {
        separation_flags.push("propensity".into());
    }
    let g = ps.predictions.clone();
    let (epsilon, q_final) = if target {
        let (eps, targeted) = target_or(or_pred, &g, ind, &y, config.or_logit_clip)?;
        (vec![eps], targeted)
    } else {
        (vec![], or_pred.to_vec())
    };
    let plugin = plugin_estimate(&q_final)?;
    let psi_scaled = if target {
        plugin
    } else {
        // one-step: plug-in plus the mean influence-function correction
        let corr = eif_eval(&EifInputs {
            or_pred: &q_final,
            ps_pred: &g,
            a: ind,
            y: &y,
            psi: plugin,
        })?;
        plugin + corr.iter().sum::<f64>() / corr.len() as f64
    };
    let eif = eif_eval(&EifInputs {
        or_pred: &q_final,
        ps_pred: &g,
        a: ind,
        y: &y,
        psi: psi_scaled,
    })?;
    if !target {
        warnings.retain(|w| !w.is_empty());
    }
    Ok(TsmPieces {
        psi_scaled,
        epsilon,
        eif,
        g,
        separation_flags,
        warnings,
    })
}

pub(crate) fn tsm_estimate(
    ds: &Dataset,
    arm: usize,
    or_spec: &LearnerSpec,
    ps_spec: &LearnerSpec,
    config: &EstimatorConfig,
    adaptive: bool,
    target: bool,
) -> Result<EstimateReport> {
    let ind = ds.arm_indicator(arm);
    let (or_fit, mut or_pred) = fit_or_on_arm(ds.w.view(), &ind, &ds.y.to_vec(), or_spec, config.seed, arm)?;
    let mut separation_flags = Vec::new();
    if or_fit.separation() {
        separation_flags.push("outcome regression".into());
    }
    let mut ps = if adaptive {
        fit_adaptive_ps(&ind, column(&or_pred).view(), ps_spec, config.ps_floor, config.seed)?
    } else {
        fit_adaptive_ps(&ind, ds.w.view(), ps_spec, config.ps_floor, config.seed)?
    };
    // optional alternation: re-estimate the adaptive PS at the targeted OR
    if adaptive && target && config.ps_iterations > 1 {
        for _ in 1..config.ps_iterations {
            let (_, targeted) = target_or(&or_pred, &ps.predictions, &ind, &ds.y.to_vec(), config.or_logit_clip)?;
            or_pred = clip_unit(targeted);
            ps = fit_adaptive_ps(&ind, column(&or_pred).view(), ps_spec, config.ps_floor, config.seed)?;
        }
    }
    let mut pieces = tsm_with_ps(ds, &ind, &or_pred, &ps, config, target)?;
    pieces.separation_flags.extend(separation_flags);
    let name = match (adaptive, target) {
        (true, true) => "ctmle_tsm",
        (true, false) => "collab_onestep_tsm",
        (false, true) => "tmle_tsm",
        (false, false) => "onestep_tsm",
    };
    let kind = if adaptive {
        IfKind::TsmAdaptive {
            arm,
            or_spec,
            smoother: ps_spec,
        }
    } else {
        IfKind::TsmStandard {
            arm,
            or_spec,
            ps_spec,
        }
    };
    finish_report(
        ds,
        name,
        pieces.psi_scaled,
        pieces.epsilon,
        pieces.eif,
        Some(&kind),
        config,
        &pieces.g,
        pieces.separation_flags,
        pieces.warnings,
        false,
    )
}

/// Collaborative TMLE for the treatment-specific mean of `arm`: the
/// propensity score is the regression of the arm indicator on the estimated
/// outcome regression, followed by a logistic fluctuation along
/// H(a, w) = a / g(w).
pub fn ctmle_tsm(
    ds: &Dataset,
    arm: usize,
    or_spec: &LearnerSpec,
    smoother: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    tsm_estimate(ds, arm, or_spec, smoother, config, true, true)
}

/// Standard TMLE with a covariate-based propensity score.
pub fn tmle_tsm(
    ds: &Dataset,
    arm: usize,
    or_spec: &LearnerSpec,
    ps_spec: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    tsm_estimate(ds, arm, or_spec, ps_spec, config, false, true)
}

/// Standard one-step estimator: plug-in plus the empirical mean of the
/// influence function, with a covariate-based propensity score.
pub fn onestep_tsm(
    ds: &Dataset,
    arm: usize,
    or_spec: &LearnerSpec,
    ps_spec: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    tsm_estimate(ds, arm, or_spec, ps_spec, config, false, false)
}

/// Collaborative one-step estimator: the influence-function correction is
/// evaluated at the adaptive propensity score.
pub fn collab_onestep_tsm(
    ds: &Dataset,
    arm: usize,
    or_spec: &LearnerSpec,
    smoother: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    tsm_estimate(ds, arm, or_spec, smoother, config, true, false)
}
