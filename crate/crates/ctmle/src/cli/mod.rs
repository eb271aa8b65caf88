//! Command-line layer: CSV ingestion with simple imputation, configuration
//! merging, and the `estimate` / `simulate` subcommands.

pub mod csv_io;
pub mod output;

pub use csv_io::{load_csv, ColumnRoles, IngestReport};
pub use output::{
    estimate_json, estimate_text, kde_csv, multiarm_json, simulation_metrics_csv, simulation_text,
    write_simulation_outputs,
};

use crate::data::{validate_dataset, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{
    ate_by_relabeling, collab_onestep_ate, ctmle_ate_direct, ctmle_tsm, cv_ctmle_tsm,
    multiarm_means, onestep_ate, tmle_ate, tmle_tsm, EstimateReport, EstimatorConfig,
};
use crate::learners::{LearnerSpec, Link};
use crate::sim::{run_mc, sim1_default_estimators, sim2_default_estimators, Dgp, McConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Exit-code contract: 0 success, 1 estimation failure, 2 usage/config error.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::MissingColumn(_)
        | Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::Csv(_)
        | Error::CsvCell { .. }
        | Error::MissingRequired { .. }
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Named learner specifications accepted by `--or-learner` / `--ps-learner`.
pub fn parse_learner(name: &str, df: usize) -> Result<LearnerSpec> {
    match name {
        "intercept" => Ok(LearnerSpec::InterceptOnly { link: Link::Logit }),
        "glm" => Ok(LearnerSpec::Glm { link: Link::Logit }),
        "linear" => Ok(LearnerSpec::Glm { link: Link::Identity }),
        "spline" => Ok(LearnerSpec::GlmSpline { link: Link::Logit, df }),
        "hal" => Ok(LearnerSpec::hal_default()),
        other => Err(Error::Config(format!(
            "unknown learner {other:?}; expected intercept, glm, linear, spline, or hal"
        ))),
    }
}

/// Resolved settings for one `estimate` run, after merging the config file
/// (when given) with command-line flags; flags win.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub estimator: String,
    pub or_learner: String,
    pub ps_learner: String,
    pub smoother_df: usize,
    pub folds: usize,
    pub level: f64,
    pub ps_floor: f64,
    pub seed: u64,
    pub treatment: String,
    pub outcome: String,
    pub covariates: Option<Vec<String>>,
    pub multiarm: bool,
    pub impute: bool,
    pub arm: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            estimator: "ctmle".into(),
            or_learner: "glm".into(),
            ps_learner: "glm".into(),
            smoother_df: 2,
            folds: 5,
            level: 0.95,
            ps_floor: 1e-6,
            seed: 0,
            treatment: "a".into(),
            outcome: "y".into(),
            covariates: None,
            multiarm: false,
            impute: false,
            arm: None,
        }
    }
}

/// TOML config file: `[data]` for column roles, `[estimate]` for settings.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub estimate: EstimateSection,
}

#[derive(Debug, Default, Deserialize)]
pub struct DataSection {
    pub treatment: Option<String>,
    pub outcome: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub impute: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
pub struct EstimateSection {
    pub estimator: Option<String>,
    pub or_learner: Option<String>,
    pub ps_learner: Option<String>,
    pub smoother_df: Option<usize>,
    pub folds: Option<usize>,
    pub level: Option<f64>,
    pub ps_floor: Option<f64>,
    pub seed: Option<u64>,
    pub multiarm: Option<bool>,
    pub arm: Option<usize>,
}

pub fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl AnalysisConfig {
    /// Layer a config file under this configuration: any field already set by
    /// a flag (tracked by the caller passing `Some`) is kept.
    pub fn merge_file(&mut self, file: &FileConfig, flag_overrides: &AnalysisOverrides) {
        macro_rules! take {
            ($field:ident, $src:expr) => {
                if flag_overrides.$field.is_none() {
                    if let Some(v) = &$src {
                        self.$field = v.clone();
                    }
                }
            };
        }
        take!(treatment, file.data.treatment);
        take!(outcome, file.data.outcome);
        take!(estimator, file.estimate.estimator);
        take!(or_learner, file.estimate.or_learner);
        take!(ps_learner, file.estimate.ps_learner);
        if flag_overrides.covariates.is_none() {
            if let Some(v) = &file.data.covariates {
                self.covariates = Some(v.clone());
            }
        }
        if flag_overrides.impute.is_none() {
            if let Some(v) = file.data.impute {
                self.impute = v;
            }
        }
        if flag_overrides.smoother_df.is_none() {
            if let Some(v) = file.estimate.smoother_df {
                self.smoother_df = v;
            }
        }
        if flag_overrides.folds.is_none() {
            if let Some(v) = file.estimate.folds {
                self.folds = v;
            }
        }
        if flag_overrides.level.is_none() {
            if let Some(v) = file.estimate.level {
                self.level = v;
            }
        }
        if flag_overrides.ps_floor.is_none() {
            if let Some(v) = file.estimate.ps_floor {
                self.ps_floor = v;
            }
        }
        if flag_overrides.seed.is_none() {
            if let Some(v) = file.estimate.seed {
                self.seed = v;
            }
        }
        if flag_overrides.multiarm.is_none() {
            if let Some(v) = file.estimate.multiarm {
                self.multiarm = v;
            }
        }
        if flag_overrides.arm.is_none() {
            if let Some(v) = file.estimate.arm {
                self.arm = Some(v);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.level && self.level < 1.0) {
            return Err(Error::Config(format!("level {} outside (0,1)", self.level)));
        }
        if self.folds < 1 {
            return Err(Error::Config("folds must be >= 1".into()));
        }
        if !(self.ps_floor > 0.0 && self.ps_floor < 0.5) {
            return Err(Error::Config(format!("ps-floor {} outside (0, 0.5)", self.ps_floor)));
        }
        Ok(())
    }

    fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            ps_floor: self.ps_floor,
            ci_level: self.level,
            variance_folds: self.folds,
            seed: self.seed,
            compute_se: true,
            ..Default::default()
        }
    }
}

/// Which fields were supplied as flags (so the config file cannot override
/// them). Mirrors [`AnalysisConfig`]'s optional inputs.
#[derive(Debug, Default)]
pub struct AnalysisOverrides {
    pub estimator: Option<()>,
    pub or_learner: Option<()>,
    pub ps_learner: Option<()>,
    pub smoother_df: Option<()>,
    pub folds: Option<()>,
    pub level: Option<()>,
    pub ps_floor: Option<()>,
    pub seed: Option<()>,
    pub treatment: Option<()>,
    pub outcome: Option<()>,
    pub covariates: Option<()>,
    pub multiarm: Option<()>,
    pub impute: Option<()>,
    pub arm: Option<()>,
}

/// Outcome of an `estimate` run: either a set of per-estimand reports or a
/// multi-arm report.
pub enum EstimateOutcome {
    Single(EstimateReport),
    Multiarm(crate::estimators::MultiarmReport),
}

/// Run the configured estimator against a loaded dataset.
pub fn run_estimate(ds: &Dataset, cfg: &AnalysisConfig) -> Result<EstimateOutcome> {
    cfg.validate()?;
    let report = validate_dataset(ds)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let or_spec = parse_learner(&cfg.or_learner, cfg.smoother_df)?;
    let ps_spec = parse_learner(&cfg.ps_learner, cfg.smoother_df)?;
    let smoother = LearnerSpec::GlmSpline {
        link: Link::Logit,
        df: cfg.smoother_df,
    };
    let ec = cfg.estimator_config();
    if cfg.multiarm {
        let rep = multiarm_means(ds, &or_spec, &smoother, &ps_spec, &ec)?;
        return Ok(EstimateOutcome::Multiarm(rep));
    }
    let rep = match (cfg.estimator.as_str(), cfg.arm) {
        ("ctmle", None) => ate_by_relabeling(ds, &or_spec, &smoother, &ec)?,
        ("ctmle", Some(arm)) => ctmle_tsm(ds, arm, &or_spec, &smoother, &ec)?,
        ("ctmle-direct", None) => ctmle_ate_direct(ds, &or_spec, &smoother, &ec)?,
        ("tmle", None) => tmle_ate(ds, &or_spec, &ps_spec, &ec)?,
        ("tmle", Some(arm)) => tmle_tsm(ds, arm, &or_spec, &ps_spec, &ec)?,
        ("onestep", None) => onestep_ate(ds, &or_spec, &ps_spec, &ec)?,
        ("collab-onestep", None) => collab_onestep_ate(ds, &or_spec, &smoother, &ec)?,
        ("cv-ctmle", arm) => cv_ctmle_tsm(ds, arm.unwrap_or(1), &or_spec, &smoother, cfg.folds.max(2), &ec)?,
        (name, Some(_)) => {
            return Err(Error::Config(format!(
                "estimator {name:?} does not support --arm"
            )))
        }
        (name, None) => {
            return Err(Error::Config(format!(
                "unknown estimator {name:?}; expected ctmle, ctmle-direct, tmle, onestep, collab-onestep, or cv-ctmle"
            )))
        }
    };
    Ok(EstimateOutcome::Single(rep))
}

/// Arguments for the `simulate` subcommand after clap parsing.
#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub dgp: String,
    pub gamma: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimated_se: bool,
    pub folds: usize,
    pub out: Option<PathBuf>,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<crate::sim::SimulationReport> {
    let (dgp, estimators) = match args.dgp.as_str() {
        "sim1" => (Dgp::Sim1 { gamma: args.gamma }, sim1_default_estimators()),
        "sim2" => (Dgp::Sim2, sim2_default_estimators()),
        other => {
            return Err(Error::Config(format!(
                "unknown dgp {other:?}; expected sim1 or sim2"
            )))
        }
    };
    let cfg = McConfig {
        n: args.n,
        reps: args.reps,
        base_seed: args.seed,
        compute_se: args.estimated_se,
        variance_folds: args.folds,
        ci_level: 0.95,
    };
    run_mc(&dgp, &estimators, &cfg)
}
