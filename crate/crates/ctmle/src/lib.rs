//! Collaborative targeted learning for treatment effects.
//!
//! The estimators here pair an outcome regression with an *adaptive*
//! propensity score — the regression of the treatment indicator on the
//! estimated outcome regression — so the treatment mechanism only needs to be
//! learned along the single dimension that matters for confounding control.
//! Standard TMLE and one-step estimators with covariate-based propensity
//! scores are included as baselines, along with cross-validated
//! influence-function variance estimation and a seeded Monte Carlo engine.

pub mod cli;
pub mod data;
pub mod eif;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod learners;
pub mod linalg;
pub mod sim;
pub mod stats;

pub use data::{scale_outcome, unscale_estimate, validate_dataset, Dataset, OutcomeScale};
pub use eif::{eif_eval, plugin_estimate, remainder_r2, EifInputs};
pub use error::{Error, Result};
pub use estimators::{
    ate_by_relabeling, collab_onestep_tsm, ctmle_ate_direct, ctmle_tsm, cv_ctmle_tsm,
    default_smoother, fit_adaptive_ps, multiarm_means, onestep_tsm, tmle_tsm, EstimateReport,
    EstimatorConfig, MultiarmReport,
};
pub use inference::{cv_if_variance, wald_ci, wald_test_equal_means, IfKind, VarianceEstimate, WaldTest};
pub use learners::{FoldScheme, LearnerSpec, Link};
