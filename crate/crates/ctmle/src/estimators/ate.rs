//! Average treatment effect estimators: the relabeling construction (two
//! treatment-specific means with their own adaptive propensity scores) and
//! the direct collaborative TMLE with a single bivariate adaptive PS.

use super::tsm::finish_report;
use super::{
    fit_adaptive_ps, solve_epsilon, two_columns, EstimateReport, EstimatorConfig,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::IfKind;
use crate::learners::LearnerSpec;
use crate::stats::{expit, logit};
use ndarray::Array2;

fn require_binary(ds: &Dataset) -> Result<()> {
    if ds.a.iter().any(|&ai| ai > 1) {
        return Err(Error::InvalidArgument(
            "ATE estimators require binary treatment labels".into(),
        ));
    }
    for arm in 0..2 {
        if !ds.a.contains(&arm) {
            return Err(Error::EmptyArm { arm });
        }
    }
    Ok(())
}

/// ATE as the difference of two arm-specific TSM estimators (the relabeling
/// construction). `adaptive` selects the collaborative pipeline where
/// `ps_spec` acts as the smoother of treatment on the OR predictions;
/// otherwise `ps_spec` is a covariate-based propensity learner. `target`
/// distinguishes TMLE-type targeting from the one-step correction.
pub(crate) fn ate_difference(
    ds: &Dataset,
    or_spec: &LearnerSpec,
    ps_spec: &LearnerSpec,
    config: &EstimatorConfig,
    adaptive: bool,
    target: bool,
    name: &str,
) -> Result<EstimateReport> {
    require_binary(ds)?;
    let no_se = EstimatorConfig {
        compute_se: false,
        ..config.clone()
    };
    let r1 = super::tsm::tsm_estimate(ds, 1, or_spec, ps_spec, &no_se, adaptive, target)?;
    let r0 = super::tsm::tsm_estimate(ds, 0, or_spec, ps_spec, &no_se, adaptive, target)?;
    let psi_scaled = r1.psi_scaled - r0.psi_scaled;
    let eif: Vec<f64> = r1
        .eif_values
        .iter()
        .zip(&r0.eif_values)
        .map(|(d1, d0)| d1 - d0)
        .collect();
    let mut epsilon = r1.epsilon.clone();
    epsilon.extend(&r0.epsilon);
    let g_union: Vec<f64> = [
        r1.diagnostics.ps_range.0,
        r1.diagnostics.ps_range.1,
        r0.diagnostics.ps_range.0,
        r0.diagnostics.ps_range.1,
    ]
    .to_vec();
    let mut separation_flags = r1.diagnostics.separation_flags.clone();
    separation_flags.extend(r0.diagnostics.separation_flags.clone());
    let mut warnings = r1.diagnostics.warnings.clone();
    warnings.extend(r0.diagnostics.warnings.clone());
    let kind = if adaptive {
        IfKind::AteAdaptive {
            or_spec,
            smoother: ps_spec,
        }
    } else {
        IfKind::AteStandard { or_spec, ps_spec }
    };
    finish_report(
        ds,
        name,
        psi_scaled,
        epsilon,
        eif,
        Some(&kind),
        config,
        &g_union,
        separation_flags,
        warnings,
        true,
    )
}

/// ATE as the difference of two collaborative TMLEs: the arm-1 mean minus the
/// arm-0 mean, the latter obtained by relabeling the treatment indicator.
pub fn ate_by_relabeling(
    ds: &Dataset,
    or_spec: &LearnerSpec,
    smoother: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    ate_difference(ds, or_spec, smoother, config, true, true, "ate_by_relabeling")
}

/// Standard TMLE for the ATE with a covariate-based propensity score.
pub fn tmle_ate(
    ds: &Dataset,
    or_spec: &LearnerSpec,
    ps_spec: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    ate_difference(ds, or_spec, ps_spec, config, false, true, "tmle_ate")
}

/// Standard one-step ATE estimator with a covariate-based propensity score.
pub fn onestep_ate(
    ds: &Dataset,
    or_spec: &LearnerSpec,
    ps_spec: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    ate_difference(ds, or_spec, ps_spec, config, false, false, "onestep_ate")
}

/// Collaborative one-step ATE estimator with adaptive propensity scores.
pub fn collab_onestep_ate(
    ds: &Dataset,
    or_spec: &LearnerSpec,
    smoother: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    ate_difference(ds, or_spec, smoother, config, true, false, "collab_onestep_ate")
}

/// Direct collaborative TMLE for the ATE: a joint outcome regression over
/// (a, w), a bivariate adaptive propensity score on the two counterfactual
/// predictions, and a single fluctuation along H(a, w) = (2a - 1) / lG(a, w)
/// with lG(a, w) = a g(w) + (1 - a)(1 - g(w)).
pub fn ctmle_ate_direct(
    ds: &Dataset,
    or_spec: &LearnerSpec,
    smoother: &LearnerSpec,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    require_binary(ds)?;
    let n = ds.n();
    let a: Vec<f64> = ds.a.iter().map(|&ai| ai as f64).collect();
    let y: Vec<f64> = ds.y.to_vec();

    // joint OR over (a, w)
    let design = augment(ds, &a);
    let or_fit = or_spec.fit(design.view(), &y, config.seed)?;
    let mut separation_flags = Vec::new();
    if or_fit.separation() {
        separation_flags.push("outcome regression".into());
    }
    let predict_arm = |arm: f64| -> Vec<f64> {
        let mut x = design.clone();
        for i in 0..n {
            x[[i, 0]] = arm;
        }
        or_fit.predict(x.view()).iter().map(|&q| q.clamp(0.0, 1.0)).collect()
    };
    let q1 = predict_arm(1.0);
    let q0 = predict_arm(0.0);

    // bivariate adaptive PS on (q1, q0), clipped away from both boundaries so
    // lG stays positive for either arm
    let ps = fit_adaptive_ps(&a, two_columns(&q1, &q0).view(), smoother, config.ps_floor, config.seed)?;
    if ps.separation {
        separation_flags.push("propensity".into());
    }
    let floor = config.ps_floor;
    let g: Vec<f64> = ps
        .predictions
        .iter()
        .map(|&v| v.clamp(floor, 1.0 - floor))
        .collect();

    // single fluctuation along the signed clever covariate
    let clip = config.or_logit_clip;
    let mut offset = vec![0.0; n];
    let mut h_obs = vec![0.0; n];
    for i in 0..n {
        let (q_obs, lg) = if ds.a[i] == 1 { (q1[i], g[i]) } else { (q0[i], 1.0 - g[i]) };
        offset[i] = logit(q_obs.clamp(clip, 1.0 - clip));
        h_obs[i] = (2.0 * a[i] - 1.0) / lg;
    }
    let eps = solve_epsilon(&offset, &h_obs, &y)?;
    let mut q1_star = vec![0.0; n];
    let mut q0_star = vec![0.0; n];
    let mut eif = vec![0.0; n];
    for i in 0..n {
        q1_star[i] = expit(logit(q1[i].clamp(clip, 1.0 - clip)) + eps / g[i]);
        q0_star[i] = expit(logit(q0[i].clamp(clip, 1.0 - clip)) - eps / (1.0 - g[i]));
    }
    let psi_scaled = (0..n).map(|i| q1_star[i] - q0_star[i]).sum::<f64>() / n as f64;
    for i in 0..n {
        let (q_obs, _) = if ds.a[i] == 1 { (q1_star[i], g[i]) } else { (q0_star[i], 1.0 - g[i]) };
        eif[i] = h_obs[i] * (y[i] - q_obs) + q1_star[i] - q0_star[i] - psi_scaled;
    }

    let kind = IfKind::AteDirect { or_spec, smoother };
    finish_report(
        ds,
        "ctmle_ate_direct",
        psi_scaled,
        vec![eps],
        eif,
        Some(&kind),
        config,
        &g,
        separation_flags,
        ps.warnings.clone(),
        true,
    )
}

fn augment(ds: &Dataset, a: &[f64]) -> Array2<f64> {
    let n = ds.n();
    let p = ds.n_covariates();
    let mut out = Array2::<f64>::zeros((n, p + 1));
    for i in 0..n {
        out[[i, 0]] = a[i];
        for j in 0..p {
            out[[i, j + 1]] = ds.w[[i, j]];
        }
    }
    out
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

    fn fast_config() -> EstimatorConfig {
        EstimatorConfig {
            compute_se: false,
            ..Default::default()
        }
    }

    fn glm_logit() -> LearnerSpec {
        LearnerSpec::Glm { link: Link::Logit }
    }

    fn confounded(n: usize, seed: u64) -> Dataset {
        // true ATE on the scaled outcome known by construction below
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0f64));
        let mut a = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let g = 1.0 / (1.0 + (-(0.3 + 0.8 * w[[i, 0]])).exp());
            let ai = usize::from(rng.gen::<f64>() < g);
            a.push(ai);
            let q = 1.0 / (1.0 + (-(0.2 * (2 * ai) as f64 + w[[i, 0]] - 0.2)).exp());
            y.push(f64::from(rng.gen::<f64>() < q));
        }
        Dataset::from_unit_outcome(w, a, y, vec![]).unwrap()
    }

    fn true_ate_numeric() -> f64 {
        // E_W[expit(0.2 + W) - expit(W - 0.2)], W ~ U(-1, 1)
        let m = 20_000;
        let mut acc = 0.0;
        for k in 0..=m {
            let wv = -1.0 + 2.0 * k as f64 / m as f64;
            let f1 = 1.0 / (1.0 + (-(0.2f64 + wv)).exp());
            let f0 = 1.0 / (1.0 + (-(wv - 0.2f64)).exp());
            let wgt = if k == 0 || k == m { 0.5 } else { 1.0 };
            acc += wgt * (f1 - f0);
        }
        acc / m as f64
    }

    #[test]
    fn relabeling_equals_difference_of_arm_means() {
        let ds = confounded(300, 5);
        let cfg = fast_config();
        let rep = ate_by_relabeling(&ds, &glm_logit(), &default_smoother(), &cfg).unwrap();
        let r1 = crate::estimators::ctmle_tsm(&ds, 1, &glm_logit(), &default_smoother(), &cfg).unwrap();
        let r0 = crate::estimators::ctmle_tsm(&ds, 0, &glm_logit(), &default_smoother(), &cfg).unwrap();
        assert_abs_diff_eq!(rep.psi_scaled, r1.psi_scaled - r0.psi_scaled, epsilon = 1e-12);
        assert!(rep.diagnostics.eif_mean.abs() <= 1e-8);
    }

    #[test]
    fn direct_ate_solves_its_eif_equation() {
        let ds = confounded(400, 8);
        let rep = ctmle_ate_direct(&ds, &glm_logit(), &default_smoother(), &fast_config()).unwrap();
        assert!(
            rep.diagnostics.eif_mean.abs() <= 1e-8,
            "eif mean {}",
            rep.diagnostics.eif_mean
        );
        assert_eq!(rep.epsilon.len(), 1);
    }

    #[test]
    fn both_ate_estimators_near_truth_on_large_sample() {
        let ds = confounded(6000, 17);
        let truth = true_ate_numeric();
        let cfg = fast_config();
        let r_rel = ate_by_relabeling(&ds, &glm_logit(), &default_smoother(), &cfg).unwrap();
        let r_dir = ctmle_ate_direct(&ds, &glm_logit(), &default_smoother(), &cfg).unwrap();
        for rep in [&r_rel, &r_dir] {
            assert!(
                (rep.psi - truth).abs() < 0.05,
                "{} psi {} vs truth {}",
                rep.estimator,
                rep.psi,
                truth
            );
        }
    }

    #[test]
    fn randomized_no_effect_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let n = 2000;
        let w = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0f64));
        let mut a = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            a.push(usize::from(rng.gen::<f64>() < 0.5));
            let q = 1.0 / (1.0 + (-(w[[i, 0]])).exp());
            y.push(f64::from(rng.gen::<f64>() < q));
        }
        let ds = Dataset::from_unit_outcome(w, a, y, vec![]).unwrap();
        let rep = ctmle_ate_direct(&ds, &glm_logit(), &default_smoother(), &fast_config()).unwrap();
        assert!(rep.psi.abs() < 0.06, "psi {}", rep.psi);
    }

    #[test]
    fn ate_on_raw_outcome_scale() {
        // constant additive effect of 30 on a raw scale around 200
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let n = 800;
        let w = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0f64));
        let mut a = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let ai = usize::from(rng.gen::<f64>() < 0.5);
            a.push(ai);
            y.push(200.0 + 30.0 * ai as f64 + 10.0 * w[[i, 0]] + rng.gen_range(-5.0..5.0));
        }
        let ds = Dataset::from_raw(w, a, &y, vec![]).unwrap();
        let rep = ate_by_relabeling(&ds, &glm_logit(), &default_smoother(), &fast_config()).unwrap();
        assert!((rep.psi - 30.0).abs() < 3.0, "psi {}", rep.psi);
    }

    #[test]
    fn nonbinary_labels_rejected() {
        let w = Array2::zeros((6, 1));
        let ds = Dataset::from_unit_outcome(w, vec![0, 1, 2, 0, 1, 2], vec![0.5; 6], vec![]).unwrap();
        assert!(ate_by_relabeling(&ds, &glm_logit(), &default_smoother(), &fast_config()).is_err());
        assert!(ctmle_ate_direct(&ds, &glm_logit(), &default_smoother(), &fast_config()).is_err());
    }
}
