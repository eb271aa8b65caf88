//! Cross-validated collaborative TMLE for the treatment-specific mean: the
//! outcome regression and adaptive propensity score are fit per training
//! split, a single pooled fluctuation coefficient solves the cross-validated
//! score equation, and the estimate averages the targeted validation means.

use super::tsm::finish_report;
use super::{column, fit_adaptive_ps, solve_epsilon, EstimateReport, EstimatorConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::IfKind;
use crate::learners::{select_rows, FoldScheme, LearnerSpec};
use crate::stats::{expit, logit};

/// CV-CTMLE for the mean of `arm` with `v` folds.
pub fn cv_ctmle_tsm(
    ds: &Dataset,
    arm: usize,
    or_spec: &LearnerSpec,
    smoother: &LearnerSpec,
    v: usize,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    let n = ds.n();
    if v < 2 || v > n {
        return Err(Error::InvalidArgument(format!(
            "cv folds {v} outside 2..=n"
        )));
    }
    let ind = ds.arm_indicator(arm);
    let y: Vec<f64> = ds.y.to_vec();
    let folds = FoldScheme::new(n, v, config.seed)?;

    // per-observation out-of-fold nuisances
    let mut q = vec![0.0f64; n];
    let mut g = vec![0.0f64; n];
    let mut separation_flags = Vec::new();
    let mut warnings = Vec::new();
    for f in 0..v {
        let train = folds.training_indices(f);
        let val = folds.validation_indices(f);
        let rows: Vec<usize> = train.iter().cloned().filter(|&i| ind[i] != 0.0).collect();
        if rows.is_empty() {
            return Err(Error::FoldWithoutTreated { fold: f });
        }
        let x_fit = select_rows(ds.w.view(), &rows);
        let y_fit: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let or_fit = or_spec
            .fit(x_fit.view(), &y_fit, config.seed.wrapping_add(f as u64))
            .map_err(|e| Error::FoldFailure {
                fold: f,
                source: Box::new(e),
            })?;
        if or_fit.separation() && !separation_flags.iter().any(|s| s == "outcome regression") {
            separation_flags.push("outcome regression".into());
        }
        let q_train: Vec<f64> = or_fit
            .predict(select_rows(ds.w.view(), &train).view())
            .iter()
            .map(|&p| p.clamp(0.0, 1.0))
            .collect();
        let a_train: Vec<f64> = train.iter().map(|&i| ind[i]).collect();
        let ps = fit_adaptive_ps(
            &a_train,
            column(&q_train).view(),
            smoother,
            config.ps_floor,
            config.seed.wrapping_add(f as u64),
        )
        .map_err(|e| Error::FoldFailure {
            fold: f,
            source: Box::new(e),
        })?;
        if ps.separation && !separation_flags.iter().any(|s| s == "propensity") {
            separation_flags.push("propensity".into());
        }
        warnings.extend(ps.warnings.iter().cloned());
        let q_val: Vec<f64> = or_fit
            .predict(select_rows(ds.w.view(), &val).view())
            .iter()
            .map(|&p| p.clamp(0.0, 1.0))
            .collect();
        let g_val = ps.predict(column(&q_val).view(), config.ps_floor);
        for (k, &i) in val.iter().enumerate() {
            q[i] = q_val[k];
            g[i] = g_val[k];
        }
    }

    // pooled fluctuation across validation splits
    let clip = config.or_logit_clip;
    let offset: Vec<f64> = q.iter().map(|&p| logit(p.clamp(clip, 1.0 - clip))).collect();
    let h_obs: Vec<f64> = (0..n).map(|i| ind[i] / g[i]).collect();
    let eps = solve_epsilon(&offset, &h_obs, &y)?;
    let targeted: Vec<f64> = (0..n).map(|i| expit(offset[i] + eps / g[i])).collect();

    // estimate: average of the per-split targeted validation means
    let mut psi_scaled = 0.0;
    for f in 0..v {
        let val = folds.validation_indices(f);
        psi_scaled += val.iter().map(|&i| targeted[i]).sum::<f64>() / val.len() as f64;
    }
    psi_scaled /= v as f64;

    // influence values centered at the pooled mean of targeted predictions so
    // the reported score stays at the solved estimating equation; with equal
    // fold sizes this center coincides with psi_scaled
    let center = targeted.iter().sum::<f64>() / n as f64;
    let eif: Vec<f64> = (0..n)
        .map(|i| h_obs[i] * (y[i] - targeted[i]) + targeted[i] - center)
        .collect();
    if (center - psi_scaled).abs() > 1e-12 {
        warnings.push("unequal fold sizes: influence centering differs from the split-averaged estimate".into());
    }

    let kind = IfKind::TsmAdaptive {
        arm,
        or_spec,
        smoother,
    };
    finish_report(
        ds,
        "cv_ctmle_tsm",
        psi_scaled,
        vec![eps],
        eif,
        Some(&kind),
        config,
        &g,
        separation_flags,
        warnings,
        false,
    )
}
