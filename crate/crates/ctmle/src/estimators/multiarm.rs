//! Multi-arm treatment-specific means with a sequential propensity-score
//! decomposition and a joint Wald test of equal arm means.

use super::{ctmle_tsm, EstimateReport, EstimatorConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{wald_test_equal_means, WaldTest};
use crate::learners::{select_rows, LearnerSpec, SeparationPolicy};
use ndarray::Array2;
use serde::Serialize;

/// Sequential multi-arm propensity decomposition: the last arm's probability
/// is fit against all rows; each earlier arm k is fit conditionally on
/// A <= k, and its marginal probability is the conditional times the mass not
/// yet assigned to later arms. Arm 0 receives the remaining mass, so rows sum
/// to one by construction.
pub fn multiarm_ps_decomposition(
    ds: &Dataset,
    ps_spec: &LearnerSpec,
    floor: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    let k_arms = ds.n_arms;
    if k_arms < 2 {
        return Err(Error::InvalidArgument("need at least two arms".into()));
    }
    let conds = fit_sequential_conditionals(ds, ps_spec, seed)?;
    Ok(combine_sequential(&conds, ds.n(), k_arms, floor))
}

/// Conditional P(A = k | W, A <= k) for k = K-1 down to 1, each evaluated at
/// every row of the dataset.
fn fit_sequential_conditionals(
    ds: &Dataset,
    ps_spec: &LearnerSpec,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let k_arms = ds.n_arms;
    let mut conds = Vec::with_capacity(k_arms - 1);
    for k in (1..k_arms).rev() {
        let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.a[i] <= k).collect();
        if rows.is_empty() {
            return Err(Error::EmptyArm { arm: k });
        }
        let x = select_rows(ds.w.view(), &rows);
        let y: Vec<f64> = rows.iter().map(|&i| f64::from(u8::from(ds.a[i] == k))).collect();
        if !y.iter().any(|&v| v != 0.0) {
            return Err(Error::EmptyArm { arm: k });
        }
        let fit = ps_spec.fit_with_policy(x.view(), &y, seed.wrapping_add(k as u64), SeparationPolicy::Cap)?;
        let pred: Vec<f64> = fit.predict(ds.w.view()).iter().map(|&g| g.clamp(0.0, 1.0)).collect();
        conds.push(pred);
    }
    Ok(conds)
}

/// Combine conditional probabilities (ordered arm K-1 down to arm 1) into
/// marginal arm probabilities; column k holds P(A = k | W).
fn combine_sequential(conds: &[Vec<f64>], n: usize, k_arms: usize, floor: f64) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((n, k_arms));
    for i in 0..n {
        let mut remaining = 1.0f64;
        for (step, cond) in conds.iter().enumerate() {
            let arm = k_arms - 1 - step;
            out[[i, arm]] = cond[i] * remaining;
            remaining *= 1.0 - cond[i];
        }
        out[[i, 0]] = remaining;
        for k in 0..k_arms {
            out[[i, k]] = out[[i, k]].max(floor);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiarmReport {
    pub arms: Vec<EstimateReport>,
    /// Covariance of the arm estimates on the raw outcome scale.
    pub covariance: Vec<Vec<f64>>,
    pub wald: WaldTest,
    #[serde(skip)]
    pub ps_matrix: Array2<f64>,
}

/// Collaborative TMLE for every arm mean, a joint covariance from the stacked
/// influence functions, and a Wald test of equal means. The sequential
/// propensity decomposition is returned as a diagnostic.
pub fn multiarm_means(
    ds: &Dataset,
    or_spec: &LearnerSpec,
    smoother: &LearnerSpec,
    ps_spec: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<MultiarmReport> {
    let k_arms = ds.n_arms;
    for arm in 0..k_arms {
        if !ds.a.contains(&arm) {
            return Err(Error::EmptyArm { arm });
        }
    }
    let ps_matrix = multiarm_ps_decomposition(ds, ps_spec, config.ps_floor, config.seed)?;
    let mut arms = Vec::with_capacity(k_arms);
    for arm in 0..k_arms {
        arms.push(ctmle_tsm(ds, arm, or_spec, smoother, config)?);
    }
    let n = ds.n() as f64;
    let range = if ds.y_scale.applied { ds.y_scale.range() } else { 1.0 };
    let mut covariance = vec![vec![0.0f64; k_arms]; k_arms];
    for j in 0..k_arms {
        for k in j..k_arms {
            let mut acc = 0.0;
            for i in 0..ds.n() {
                acc += arms[j].eif_values[i] * arms[k].eif_values[i];
            }
            // covariance of the estimates: mean cross product over n, then /n
            let c = acc / n / n * range * range;
            covariance[j][k] = c;
            covariance[k][j] = c;
        }
    }
    let psi: Vec<f64> = arms.iter().map(|r| r.psi).collect();
    let cov_arr = Array2::from_shape_fn((k_arms, k_arms), |(j, k)| covariance[j][k]);
    let wald = wald_test_equal_means(&psi, &cov_arr)?;
    Ok(MultiarmReport {
        arms,
        covariance,
        wald,
        ps_matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::default_smoother;
    use crate::learners::Link;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sequential_arithmetic_hand_values() {
        // last-arm marginal 0.1, middle-arm conditional 0.2:
        // arm2 = 0.1, arm1 = 0.2 * 0.9 = 0.18, arm0 = 0.72
        let conds = vec![vec![0.1], vec![0.2]];
        let out = combine_sequential(&conds, 1, 3, 1e-6);
        assert_abs_diff_eq!(out[[0, 2]], 0.10, epsilon = 1e-12);
        assert_abs_diff_eq!(out[[0, 1]], 0.18, epsilon = 1e-12);
        assert_abs_diff_eq!(out[[0, 0]], 0.72, epsilon = 1e-12);
    }

    fn three_arm_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0f64));
        let mut a = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.gen();
            let lean = 0.15 * w[[i, 0]];
            let ai = if u < 0.3 + lean {
                0
            } else if u < 0.65 {
                1
            } else {
                2
            };
            a.push(ai);
            let q = 1.0 / (1.0 + (-(0.2 * ai as f64 + 0.5 * w[[i, 0]])).exp());
            y.push(f64::from(rng.gen::<f64>() < q));
        }
        Dataset::from_unit_outcome(w, a, y, vec![]).unwrap()
    }

    #[test]
    fn decomposition_rows_sum_to_one() {
        let ds = three_arm_dataset(300, 5);
        let ps = multiarm_ps_decomposition(&ds, &LearnerSpec::Glm { link: Link::Logit }, 1e-6, 0).unwrap();
        assert_eq!(ps.ncols(), 3);
        for i in 0..ds.n() {
            let s: f64 = (0..3).map(|k| ps[[i, k]]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
            for k in 0..3 {
                assert!(ps[[i, k]] > 0.0 && ps[[i, k]] < 1.0);
            }
        }
    }

    #[test]
    fn decomposition_near_marginals_when_unconfounded() {
        // treatment independent of W: fitted arm probabilities should sit
        // near the empirical arm frequencies
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 3000;
        let w = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0f64));
        let mut a = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            a.push(if u < 0.5 { 0 } else if u < 0.8 { 1 } else { 2 });
        }
        let y = vec![0.5; n];
        let ds = Dataset::from_unit_outcome(w, a.clone(), y, vec![]).unwrap();
        let ps = multiarm_ps_decomposition(&ds, &LearnerSpec::Glm { link: Link::Logit }, 1e-6, 0).unwrap();
        let mut freq = [0.0f64; 3];
        for &ai in &a {
            freq[ai] += 1.0 / n as f64;
        }
        for k in 0..3 {
            let mean_k: f64 = (0..n).map(|i| ps[[i, k]]).sum::<f64>() / n as f64;
            assert!((mean_k - freq[k]).abs() < 0.03, "arm {k}: {mean_k} vs {}", freq[k]);
        }
    }

    #[test]
    fn multiarm_report_structure_and_wald() {
        let ds = three_arm_dataset(400, 12);
        let cfg = EstimatorConfig {
            compute_se: false,
            ..Default::default()
        };
        let rep = multiarm_means(
            &ds,
            &LearnerSpec::Glm { link: Link::Logit },
            &default_smoother(),
            &LearnerSpec::Glm { link: Link::Logit },
            &cfg,
        )
        .unwrap();
        assert_eq!(rep.arms.len(), 3);
        for arm_rep in &rep.arms {
            assert!(arm_rep.diagnostics.eif_mean.abs() <= 1e-8);
        }
        // covariance symmetric with positive diagonal
        for j in 0..3 {
            assert!(rep.covariance[j][j] > 0.0);
            for k in 0..3 {
                assert_abs_diff_eq!(rep.covariance[j][k], rep.covariance[k][j], epsilon = 1e-15);
            }
        }
        assert!(rep.wald.p_value >= 0.0 && rep.wald.p_value <= 1.0);
        assert_eq!(rep.wald.df, 2);
    }

    #[test]
    fn strong_effect_rejected_null_effect_retained() {
        // arm means far apart: tiny p-value; identical means: large p-value
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 900;
        let w = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0f64));
        let mut a = Vec::new();
        let mut y_big = Vec::new();
        let mut y_null = Vec::new();
        for i in 0..n {
            let ai = i % 3;
            a.push(ai);
            let noise = rng.gen_range(-0.05..0.05);
            y_big.push((0.2 + 0.3 * ai as f64 + noise).clamp(0.0, 1.0));
            y_null.push((0.5 + noise).clamp(0.0, 1.0));
        }
        let cfg = EstimatorConfig {
            compute_se: false,
            ..Default::default()
        };
        let or = LearnerSpec::Glm { link: Link::Logit };
        let ps = LearnerSpec::Glm { link: Link::Logit };
        let ds_big = Dataset::from_unit_outcome(w.clone(), a.clone(), y_big, vec![]).unwrap();
        let ds_null = Dataset::from_unit_outcome(w, a, y_null, vec![]).unwrap();
        let rep_big = multiarm_means(&ds_big, &or, &default_smoother(), &ps, &cfg).unwrap();
        let rep_null = multiarm_means(&ds_null, &or, &default_smoother(), &ps, &cfg).unwrap();
        assert!(rep_big.wald.p_value < 1e-6, "p {}", rep_big.wald.p_value);
        assert!(rep_null.wald.p_value > 0.05, "p {}", rep_null.wald.p_value);
    }

    #[test]
    fn empty_arm_errors() {
        let w = Array2::zeros((6, 1));
        // labels 0 and 2 only: arm 1 is empty
        let ds = Dataset::from_unit_outcome(w, vec![0, 0, 2, 2, 0, 2], vec![0.5; 6], vec![]).unwrap();
        let cfg = EstimatorConfig::default();
        let err = multiarm_means(
            &ds,
            &LearnerSpec::Glm { link: Link::Logit },
            &default_smoother(),
            &LearnerSpec::Glm { link: Link::Logit },
            &cfg,
        );
        assert!(matches!(err, Err(Error::EmptyArm { arm: 1 })));
    }
}
