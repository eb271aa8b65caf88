//! Inference: cross-validated influence-function variance, Wald confidence
//! intervals, and a Wald test of equal arm means.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{fit_adaptive_ps, two_columns, EstimatorConfig};
use crate::learners::{select_rows, FoldScheme, LearnerSpec};
use crate::linalg::{invert, pinv_sym, quad_form};
use crate::stats::{chi_square_sf, normal_quantile};
use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

/// Which influence function the variance estimator should evaluate, and which
/// nuisance pipeline refits it per training fold.
#[derive(Debug, Clone)]
pub enum IfKind<'a> {
    /// TSM with adaptive PS (collaborative estimators).
    TsmAdaptive {
        arm: usize,
        or_spec: &'a LearnerSpec,
        smoother: &'a LearnerSpec,
    },
    /// TSM with a covariate-based PS (standard TMLE / one-step).
    TsmStandard {
        arm: usize,
        or_spec: &'a LearnerSpec,
        ps_spec: &'a LearnerSpec,
    },
    /// ATE as the difference of two arm-specific TSM pipelines, each with its
    /// own adaptive PS (the relabeling construction).
    AteAdaptive {
        or_spec: &'a LearnerSpec,
        smoother: &'a LearnerSpec,
    },
    /// ATE with a single covariate-based PS.
    AteStandard {
        or_spec: &'a LearnerSpec,
        ps_spec: &'a LearnerSpec,
    },
    /// Direct-ATE collaborative pipeline: joint OR over (a, w), bivariate
    /// adaptive PS on the two counterfactual predictions.
    AteDirect {
        or_spec: &'a LearnerSpec,
        smoother: &'a LearnerSpec,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceEstimate {
    /// Cross-validated influence-function variance on the working scale.
    pub tau2: f64,
    /// sqrt(tau2 / n), on the working scale.
    pub se_scaled: f64,
    pub v: usize,
    pub fold_variances: Vec<f64>,
}

/// Cross-validated influence-function variance.
///
/// For each fold the nuisances are refit on the training split and the
/// influence function is evaluated on the validation split, centered at the
/// validation plug-in; the estimate averages within-fold centered mean
/// squares. `v = 1` gives the ordinary in-sample variance.
pub fn cv_if_variance(
    ds: &Dataset,
    kind: &IfKind,
    v: usize,
    config: &EstimatorConfig,
) -> Result<VarianceEstimate> {
    let n = ds.n();
    if v == 0 {
        return Err(Error::InvalidArgument("variance folds must be >= 1".into()));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = if v == 1 {
        let all: Vec<usize> = (0..n).collect();
        vec![(all.clone(), all)]
    } else {
        let folds = FoldScheme::new(n, v, config.seed.wrapping_add(0x5eed))?;
        (0..v)
            .map(|f| (folds.training_indices(f), folds.validation_indices(f)))
            .collect()
    };
    let mut fold_variances = Vec::with_capacity(splits.len());
    for (f, (train, val)) in splits.iter().enumerate() {
        let eif = eval_fold(ds, kind, train, val, config).map_err(|e| Error::FoldFailure {
            fold: f,
            source: Box::new(e),
        })?;
        let m = eif.len() as f64;
        let mean = eif.iter().sum::<f64>() / m;
        let var = eif.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / m;
        fold_variances.push(var);
    }
    let tau2 = fold_variances.iter().sum::<f64>() / fold_variances.len() as f64;
    Ok(VarianceEstimate {
        tau2,
        se_scaled: (tau2 / n as f64).sqrt(),
        v,
        fold_variances,
    })
}

/// Influence-function values on the validation rows, nuisances fit on the
/// training rows, centered at the validation plug-in.
fn eval_fold(
    ds: &Dataset,
    kind: &IfKind,
    train: &[usize],
    val: &[usize],
    config: &EstimatorConfig,
) -> Result<Vec<f64>> {
    let floor = config.ps_floor;
    let seed = config.seed;
    match kind {
        IfKind::TsmAdaptive { arm, or_spec, smoother } => {
            let ind = ds.arm_indicator(*arm);
            let (q_train, q_val) = fold_or_predictions(ds, &ind, or_spec, train, val, seed, *arm)?;
            let a_train: Vec<f64> = train.iter().map(|&i| ind[i]).collect();
            let ps = fit_adaptive_ps(&a_train, column_view(&q_train).view(), smoother, floor, seed)?;
            let g_val = ps.predict(column_view(&q_val).view(), floor);
            tsm_if(ds, &ind, val, &q_val, &g_val)
        }
        IfKind::TsmStandard { arm, or_spec, ps_spec } => {
            let ind = ds.arm_indicator(*arm);
            let (_, q_val) = fold_or_predictions(ds, &ind, or_spec, train, val, seed, *arm)?;
            let a_train: Vec<f64> = train.iter().map(|&i| ind[i]).collect();
            let w_train = select_rows(ds.w.view(), train);
            let ps = fit_adaptive_ps(&a_train, w_train.view(), ps_spec, floor, seed)?;
            let w_val = select_rows(ds.w.view(), val);
            let g_val = ps.predict(w_val.view(), floor);
            tsm_if(ds, &ind, val, &q_val, &g_val)
        }
        IfKind::AteAdaptive { or_spec, smoother } => {
            let ind1 = ds.arm_indicator(1);
            let ind0 = ds.arm_indicator(0);
            let (q1_train, q1_val) = fold_or_predictions(ds, &ind1, or_spec, train, val, seed, 1)?;
            let (q0_train, q0_val) = fold_or_predictions(ds, &ind0, or_spec, train, val, seed, 0)?;
            let a1_train: Vec<f64> = train.iter().map(|&i| ind1[i]).collect();
            let a0_train: Vec<f64> = train.iter().map(|&i| ind0[i]).collect();
            let ps1 = fit_adaptive_ps(&a1_train, column_view(&q1_train).view(), smoother, floor, seed)?;
            let ps0 = fit_adaptive_ps(&a0_train, column_view(&q0_train).view(), smoother, floor, seed)?;
            let g1 = ps1.predict(column_view(&q1_val).view(), floor);
            let g0 = ps0.predict(column_view(&q0_val).view(), floor);
            ate_if(ds, val, &q1_val, &q0_val, &g1, &g0)
        }
        IfKind::AteStandard { or_spec, ps_spec } => {
            let ind1 = ds.arm_indicator(1);
            let ind0 = ds.arm_indicator(0);
            let (_, q1_val) = fold_or_predictions(ds, &ind1, or_spec, train, val, seed, 1)?;
            let (_, q0_val) = fold_or_predictions(ds, &ind0, or_spec, train, val, seed, 0)?;
            let a1_train: Vec<f64> = train.iter().map(|&i| ind1[i]).collect();
            let w_train = select_rows(ds.w.view(), train);
            let ps = fit_adaptive_ps(&a1_train, w_train.view(), ps_spec, floor, seed)?;
            let w_val = select_rows(ds.w.view(), val);
            let g1 = ps.predict(w_val.view(), floor);
            let g0: Vec<f64> = g1.iter().map(|&g| (1.0 - g).clamp(floor, 1.0)).collect();
            ate_if(ds, val, &q1_val, &q0_val, &g1, &g0)
        }
        IfKind::AteDirect { or_spec, smoother } => {
            let ind1 = ds.arm_indicator(1);
            // joint OR over (a, w) fit on all training rows
            let a_all: Vec<f64> = ds.a.iter().map(|&ai| ai as f64).collect();
            let design = augment_with_treatment(ds.w.view(), &a_all);
            let x_train = select_rows(design.view(), train);
            let y_train: Vec<f64> = train.iter().map(|&i| ds.y[i]).collect();
            let fit = or_spec.fit(x_train.view(), &y_train, seed)?;
            let predict_arm = |rows: &[usize], arm: f64| -> Vec<f64> {
                let mut x = select_rows(design.view(), rows);
                for r in 0..x.nrows() {
                    x[[r, 0]] = arm;
                }
                fit.predict(x.view()).iter().map(|&q| q.clamp(0.0, 1.0)).collect()
            };
            let q1_train = predict_arm(train, 1.0);
            let q0_train = predict_arm(train, 0.0);
            let q1_val = predict_arm(val, 1.0);
            let q0_val = predict_arm(val, 0.0);
            let a_train: Vec<f64> = train.iter().map(|&i| ind1[i]).collect();
            let x_ps_train = two_columns(&q1_train, &q0_train);
            let ps = fit_adaptive_ps(&a_train, x_ps_train.view(), smoother, floor, seed)?;
            let x_ps_val = two_columns(&q1_val, &q0_val);
            let g_raw = ps.predict(x_ps_val.view(), floor);
            let g1: Vec<f64> = g_raw.iter().map(|&g| g.clamp(floor, 1.0 - floor)).collect();
            let g0: Vec<f64> = g1.iter().map(|&g| 1.0 - g).collect();
            ate_if(ds, val, &q1_val, &q0_val, &g1, &g0)
        }
    }
}

/// OR fit on the arm's training rows; predictions (clipped to [0,1]) on the
/// training and validation rows.
fn fold_or_predictions(
    ds: &Dataset,
    ind: &[f64],
    or_spec: &LearnerSpec,
    train: &[usize],
    val: &[usize],
    seed: u64,
    arm: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<usize> = train.iter().cloned().filter(|&i| ind[i] != 0.0).collect();
    if rows.is_empty() {
        return Err(Error::EmptyArm { arm });
    }
    let x_fit = select_rows(ds.w.view(), &rows);
    let y_fit: Vec<f64> = rows.iter().map(|&i| ds.y[i]).collect();
    let fit = or_spec.fit(x_fit.view(), &y_fit, seed)?;
    let clip = |p: Array1<f64>| -> Vec<f64> { p.iter().map(|&q| q.clamp(0.0, 1.0)).collect() };
    let q_train = clip(fit.predict(select_rows(ds.w.view(), train).view()));
    let q_val = clip(fit.predict(select_rows(ds.w.view(), val).view()));
    Ok((q_train, q_val))
}

fn tsm_if(ds: &Dataset, ind: &[f64], val: &[usize], q: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let m = val.len() as f64;
    let psi_v = q.iter().sum::<f64>() / m;
    let mut out = Vec::with_capacity(val.len());
    for (k, &i) in val.iter().enumerate() {
        let ipw = if ind[i] != 0.0 {
            (ds.y[i] - q[k]) / g[k]
        } else {
            0.0
        };
        out.push(ipw + q[k] - psi_v);
    }
    Ok(out)
}

fn ate_if(
    ds: &Dataset,
    val: &[usize],
    q1: &[f64],
    q0: &[f64],
    g1: &[f64],
    g0: &[f64],
) -> Result<Vec<f64>> {
    let m = val.len() as f64;
    let psi_v = q1.iter().zip(q0).map(|(a, b)| a - b).sum::<f64>() / m;
    let mut out = Vec::with_capacity(val.len());
    for (k, &i) in val.iter().enumerate() {
        let ipw = if ds.a[i] == 1 {
            (ds.y[i] - q1[k]) / g1[k]
        } else {
            -(ds.y[i] - q0[k]) / g0[k]
        };
        out.push(ipw + q1[k] - q0[k] - psi_v);
    }
    Ok(out)
}

fn column_view(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
}

fn augment_with_treatment(w: ArrayView2<f64>, a: &[f64]) -> Array2<f64> {
    let n = w.nrows();
    let p = w.ncols();
    let mut out = Array2::<f64>::zeros((n, p + 1));
    for i in 0..n {
        out[[i, 0]] = a[i];
        for j in 0..p {
            out[[i, j + 1]] = w[[i, j]];
        }
    }
    out
}

/// Two-sided Wald interval at the given coverage level.
pub fn wald_ci(psi: f64, se: f64, level: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::InvalidArgument(format!("level {level} outside (0,1)")));
    }
    if se < 0.0 || !se.is_finite() {
        return Err(Error::InvalidArgument("SE must be finite and nonnegative".into()));
    }
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    Ok((psi - z * se, psi + z * se))
}

#[derive(Debug, Clone, Serialize)]
pub struct WaldTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// True when the contrast covariance was singular and a pseudo-inverse
    /// with rank-adjusted degrees of freedom was used.
    pub rank_deficient: bool,
}

/// Wald test of equal means across K arms: contrasts are the K-1 differences
/// against arm 0. A singular contrast covariance falls back to the
/// Moore-Penrose inverse with degrees of freedom equal to its rank.
pub fn wald_test_equal_means(psi: &[f64], covariance: &Array2<f64>) -> Result<WaldTest> {
    let k = psi.len();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two arms".into()));
    }
    if covariance.nrows() != k || covariance.ncols() != k {
        return Err(Error::DimensionMismatch("covariance shape".into()));
    }
    let m = k - 1;
    // d = C psi with C rows e_{j+1} - e_0
    let d = Array1::from_iter((0..m).map(|j| psi[j + 1] - psi[0]));
    let mut cm = Array2::<f64>::zeros((m, m));
    for r in 0..m {
        for c in 0..m {
            cm[[r, c]] = covariance[[r + 1, c + 1]] - covariance[[r + 1, 0]] - covariance[[0, c + 1]]
                + covariance[[0, 0]];
        }
    }
    if let Some(inv) = invert(&cm) {
        let stat = quad_form(d.view(), inv.view(), d.view());
        return Ok(WaldTest {
            statistic: stat,
            df: m,
            p_value: chi_square_sf(stat, m as f64),
            rank_deficient: false,
        });
    }
    let (pinv, rank) = pinv_sym(&cm);
    if rank == 0 {
        return Ok(WaldTest {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
            rank_deficient: true,
        });
    }
    let stat = quad_form(d.view(), pinv.view(), d.view());
    Ok(WaldTest {
        statistic: stat,
        df: rank,
        p_value: chi_square_sf(stat, rank as f64),
        rank_deficient: true,
    })
}
