//! Seeded Monte Carlo engine: replicate generation over independent RNG
//! substreams, estimator execution, and performance metrics against the
//! known truth.

pub mod dgp;
pub mod kde;

pub use dgp::{Dgp, DgpTruths};
pub use kde::{kde, silverman_bandwidth, KdeCurve};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{
    ate_by_relabeling, collab_onestep_ate, ctmle_ate_direct, onestep_ate, tmle_ate,
    EstimateReport, EstimatorConfig,
};
use crate::learners::{LearnerSpec, Link};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum McEstimatorKind {
    CtmleAte,
    CtmleAteDirect,
    TmleAte,
    OnestepAte,
    CollabOnestepAte,
}

/// One estimator entry in a Monte Carlo comparison. For the collaborative
/// kinds `ps_spec` is the smoother of treatment on the OR predictions; for
/// the standard kinds it is a covariate-based propensity learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimator {
    pub label: String,
    pub kind: McEstimatorKind,
    pub or_spec: LearnerSpec,
    pub ps_spec: LearnerSpec,
}

/// Default Sim1 line-up: correctly specified parametric nuisances for the
/// standard estimators, the spline smoother for the collaborative ones.
pub fn sim1_default_estimators() -> Vec<McEstimator> {
    let or = LearnerSpec::Glm { link: Link::Identity };
    let ps = LearnerSpec::Glm { link: Link::Logit };
    let smoother = crate::estimators::default_smoother();
    vec![
        McEstimator {
            label: "tmle".into(),
            kind: McEstimatorKind::TmleAte,
            or_spec: or.clone(),
            ps_spec: ps.clone(),
        },
        McEstimator {
            label: "ctmle".into(),
            kind: McEstimatorKind::CtmleAte,
            or_spec: or.clone(),
            ps_spec: smoother.clone(),
        },
        McEstimator {
            label: "onestep".into(),
            kind: McEstimatorKind::OnestepAte,
            or_spec: or.clone(),
            ps_spec: ps,
        },
        McEstimator {
            label: "collab_onestep".into(),
            kind: McEstimatorKind::CollabOnestepAte,
            or_spec: or,
            ps_spec: smoother,
        },
    ]
}

/// Default Sim2 line-up: flexible indicator-basis lasso nuisances on the
/// observed (transformed) covariates.
pub fn sim2_default_estimators() -> Vec<McEstimator> {
    let hal = LearnerSpec::HalLasso {
        max_interaction: 2,
        max_knots_per_dim: 3,
        n_lambda: 10,
        cv_folds: 3,
    };
    let smoother = crate::estimators::default_smoother();
    vec![
        McEstimator {
            label: "tmle".into(),
            kind: McEstimatorKind::TmleAte,
            or_spec: hal.clone(),
            ps_spec: hal.clone(),
        },
        McEstimator {
            label: "ctmle".into(),
            kind: McEstimatorKind::CtmleAte,
            or_spec: hal,
            ps_spec: smoother,
        },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub reps: usize,
    pub base_seed: u64,
    /// Compute the cross-validated SE each replicate (needed for
    /// estimated-SE coverage; disable for speed).
    pub compute_se: bool,
    pub variance_folds: usize,
    pub ci_level: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n: 100,
            reps: 200,
            base_seed: 1,
            compute_se: false,
            variance_folds: 5,
            ci_level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub kind: McEstimatorKind,
    pub n_failures: usize,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    /// This estimator's MSE over the reference (first TMLE) estimator's MSE.
    pub relative_efficiency: f64,
    /// Coverage of estimate +/- 1.96 * (MC standard deviation).
    pub oracle_coverage: f64,
    /// Coverage of the per-replicate estimated-SE Wald interval, when SEs
    /// were computed.
    pub estimated_se_coverage: Option<f64>,
    pub mean_estimated_se: Option<f64>,
    pub kde: Option<KdeCurve>,
    /// Successful replicate estimates, in replicate order.
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub dgp: String,
    pub n: usize,
    pub reps: usize,
    pub truth: f64,
    pub base_seed: u64,
    pub estimators: Vec<EstimatorSummary>,
}

#[derive(Debug, Clone)]
struct RepOutcome {
    psi: f64,
    ci: Option<(f64, f64)>,
    se: Option<f64>,
}

fn run_one(est: &McEstimator, ds: &Dataset, ec: &EstimatorConfig) -> Result<EstimateReport> {
    match est.kind {
        McEstimatorKind::CtmleAte => ate_by_relabeling(ds, &est.or_spec, &est.ps_spec, ec),
        McEstimatorKind::CtmleAteDirect => ctmle_ate_direct(ds, &est.or_spec, &est.ps_spec, ec),
        McEstimatorKind::TmleAte => tmle_ate(ds, &est.or_spec, &est.ps_spec, ec),
        McEstimatorKind::OnestepAte => onestep_ate(ds, &est.or_spec, &est.ps_spec, ec),
        McEstimatorKind::CollabOnestepAte => collab_onestep_ate(ds, &est.or_spec, &est.ps_spec, ec),
    }
}

/// Run the Monte Carlo study. Replicate r draws its data from an independent
/// ChaCha substream of `base_seed`, so results are bit-identical for any
/// worker count: the parallel map collects in replicate order and every
/// replicate's randomness is self-contained.
pub fn run_mc(dgp: &Dgp, estimators: &[McEstimator], cfg: &McConfig) -> Result<SimulationReport> {
    if cfg.reps < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    if estimators.is_empty() {
        return Err(Error::InvalidArgument("no estimators configured".into()));
    }
    let truth = dgp.truth_ate();
    let outcomes: Vec<Vec<Option<RepOutcome>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<Option<RepOutcome>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
            rng.set_stream(1 + r as u64);
            let (ds, _) = dgp.sample(cfg.n, &mut rng)?;
            let ec = EstimatorConfig {
                seed: cfg.base_seed.wrapping_mul(0x9e37_79b9).wrapping_add(r as u64),
                compute_se: cfg.compute_se,
                variance_folds: cfg.variance_folds,
                ci_level: cfg.ci_level,
                ..Default::default()
            };
            Ok(estimators
                .iter()
                .map(|est| {
                    run_one(est, &ds, &ec).ok().map(|rep| RepOutcome {
                        psi: rep.psi,
                        ci: if rep.se.is_finite() { Some(rep.ci) } else { None },
                        se: if rep.se.is_finite() { Some(rep.se) } else { None },
                    })
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::with_capacity(estimators.len());
    for (e, est) in estimators.iter().enumerate() {
        let results: Vec<&RepOutcome> = outcomes.iter().filter_map(|row| row[e].as_ref()).collect();
        let n_failures = cfg.reps - results.len();
        if results.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "estimator {} failed on {} of {} replicates",
                est.label, n_failures, cfg.reps
            )));
        }
        let estimates: Vec<f64> = results.iter().map(|o| o.psi).collect();
        let m = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / m;
        let bias = mean - truth;
        let variance = estimates.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / m;
        let mse = bias * bias + variance;
        let sd = variance.sqrt();
        let oracle_coverage = estimates
            .iter()
            .filter(|&&p| (p - truth).abs() <= 1.96 * sd)
            .count() as f64
            / m;
        let with_se: Vec<&RepOutcome> = results.iter().filter(|o| o.se.is_some()).cloned().collect();
        let (estimated_se_coverage, mean_estimated_se) = if with_se.is_empty() {
            (None, None)
        } else {
            let covered = with_se
                .iter()
                .filter(|o| {
                    let (lo, hi) = o.ci.unwrap();
                    lo <= truth && truth <= hi
                })
                .count() as f64
                / with_se.len() as f64;
            let mean_se =
                with_se.iter().map(|o| o.se.unwrap()).sum::<f64>() / with_se.len() as f64;
            (Some(covered), Some(mean_se))
        };
        let kde_curve = if variance > 0.0 { kde(&estimates, 201).ok() } else { None };
        summaries.push(EstimatorSummary {
            label: est.label.clone(),
            kind: est.kind,
            n_failures,
            mean,
            bias,
            variance,
            mse,
            relative_efficiency: f64::NAN, // filled against the reference below
            oracle_coverage,
            estimated_se_coverage,
            mean_estimated_se,
            kde: kde_curve,
            estimates,
        });
    }
    let reference = estimators
        .iter()
        .position(|e| e.kind == McEstimatorKind::TmleAte)
        .unwrap_or(0);
    let ref_mse = summaries[reference].mse;
    for s in &mut summaries {
        s.relative_efficiency = s.mse / ref_mse;
    }
    Ok(SimulationReport {
        dgp: dgp.name(),
        n: cfg.n,
        reps: cfg.reps,
        truth,
        base_seed: cfg.base_seed,
        estimators: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_cfg(reps: usize, n: usize, seed: u64) -> McConfig {
        McConfig {
            n,
            reps,
            base_seed: seed,
            compute_se: false,
            ..Default::default()
        }
    }

    #[test]
    fn mse_identity_exact() {
        let dgp = Dgp::Sim1 { gamma: 0.0 };
        let rep = run_mc(&dgp, &sim1_default_estimators()[..2], &small_cfg(20, 60, 3)).unwrap();
        for s in &rep.estimators {
            assert_abs_diff_eq!(s.mse, s.bias * s.bias + s.variance, epsilon = 1e-10);
            assert!(s.oracle_coverage >= 0.0 && s.oracle_coverage <= 1.0);
        }
    }

    #[test]
    fn reference_estimator_relative_efficiency_is_one() {
        let dgp = Dgp::Sim1 { gamma: 0.0 };
        let rep = run_mc(&dgp, &sim1_default_estimators()[..2], &small_cfg(15, 50, 4)).unwrap();
        let tmle = rep.estimators.iter().find(|s| s.label == "tmle").unwrap();
        assert_abs_diff_eq!(tmle.relative_efficiency, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_estimator_entries_identical_metrics() {
        // two copies of the same estimator spec: identical outputs per
        // replicate, hence relative efficiency exactly one
        let est = sim1_default_estimators().remove(0);
        let pair = vec![
            McEstimator {
                label: "first".into(),
                ..est.clone()
            },
            McEstimator {
                label: "second".into(),
                ..est
            },
        ];
        let dgp = Dgp::Sim1 { gamma: 0.0 };
        let rep = run_mc(&dgp, &pair, &small_cfg(10, 50, 5)).unwrap();
        assert_eq!(rep.estimators[0].estimates, rep.estimators[1].estimates);
        assert_abs_diff_eq!(rep.estimators[1].relative_efficiency, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let dgp = Dgp::Sim1 { gamma: 3.0 };
        let ests = sim1_default_estimators();
        let cfg = small_cfg(12, 60, 11);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let r1 = pool1.install(|| run_mc(&dgp, &ests, &cfg)).unwrap();
        let r8 = pool8.install(|| run_mc(&dgp, &ests, &cfg)).unwrap();
        let j1 = serde_json::to_string(&r1).unwrap();
        let j8 = serde_json::to_string(&r8).unwrap();
        assert_eq!(j1, j8);
    }

    #[test]
    fn estimated_se_coverage_populated_when_requested() {
        let dgp = Dgp::Sim1 { gamma: 0.0 };
        let cfg = McConfig {
            n: 80,
            reps: 8,
            base_seed: 2,
            compute_se: true,
            variance_folds: 3,
            ci_level: 0.95,
        };
        let rep = run_mc(&dgp, &sim1_default_estimators()[..1], &cfg).unwrap();
        let s = &rep.estimators[0];
        assert!(s.estimated_se_coverage.is_some());
        assert!(s.mean_estimated_se.unwrap() > 0.0);
    }

    #[test]
    fn rep_floor_enforced() {
        let dgp = Dgp::Sim2;
        let err = run_mc(&dgp, &sim1_default_estimators()[..1], &small_cfg(1, 50, 1));
        assert!(err.is_err());
    }
}
