//! Thin CLI over the library: `estimate` runs one analysis on a CSV file,
//! `simulate` runs a seeded Monte Carlo study.

use clap::{Args, Parser, Subcommand};
use ctmle::cli::{
    estimate_json, estimate_text, exit_code_for, load_csv, multiarm_json, read_file_config,
    run_estimate, run_simulate, simulation_text, write_simulation_outputs, AnalysisConfig,
    AnalysisOverrides, ColumnRoles, EstimateOutcome, SimulateArgs,
};
use ctmle::Error;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ctmle", version, about = "Collaborative targeted learning for treatment effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a treatment effect or treatment-specific means from a CSV file
    Estimate(EstimateCli),
    /// Run a seeded Monte Carlo simulation study
    Simulate(SimulateCli),
}

#[derive(Args)]
struct EstimateCli {
    /// Input CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    /// TOML config file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// ctmle, ctmle-direct, tmle, onestep, collab-onestep, or cv-ctmle
    #[arg(long)]
    estimator: Option<String>,
    /// Outcome-regression learner: intercept, glm, linear, spline, or hal
    #[arg(long)]
    or_learner: Option<String>,
    /// Propensity-score learner (standard estimators only)
    #[arg(long)]
    ps_learner: Option<String>,
    /// Spline degrees of freedom for the adaptive propensity smoother
    #[arg(long)]
    smoother_df: Option<usize>,
    /// Folds for cross-validated variance (1 = in-sample)
    #[arg(long)]
    folds: Option<usize>,
    /// Confidence level, e.g. 0.95
    #[arg(long)]
    level: Option<f64>,
    /// Lower bound applied to estimated propensity scores
    #[arg(long)]
    ps_floor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Treatment column name
    #[arg(long)]
    treatment: Option<String>,
    /// Outcome column name
    #[arg(long)]
    outcome: Option<String>,
    /// Comma-separated covariate columns; default is every other column
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Estimate all arm means and test their equality
    #[arg(long)]
    multiarm: bool,
    /// Mean/mode-impute missing covariate cells (adds indicator columns)
    #[arg(long)]
    impute: bool,
    /// Target a single treatment-specific mean instead of the effect
    #[arg(long)]
    arm: Option<usize>,
    /// Write the JSON report here in addition to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateCli {
    /// sim1 or sim2
    #[arg(long)]
    dgp: String,
    /// Confounding strength for sim1
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    /// Sample size per replicate
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of Monte Carlo replicates
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also compute per-replicate estimated standard errors and CI coverage
    #[arg(long)]
    estimated_se: bool,
    /// Folds for the estimated-SE variance estimator
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Directory for the JSON report, metrics CSV, and KDE curves
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

fn build_config(args: &EstimateCli) -> Result<AnalysisConfig, Error> {
    let mut cfg = AnalysisConfig::default();
    let overrides = AnalysisOverrides {
        estimator: args.estimator.as_ref().map(|_| ()),
        or_learner: args.or_learner.as_ref().map(|_| ()),
        ps_learner: args.ps_learner.as_ref().map(|_| ()),
        smoother_df: args.smoother_df.map(|_| ()),
        folds: args.folds.map(|_| ()),
        level: args.level.map(|_| ()),
        ps_floor: args.ps_floor.map(|_| ()),
        seed: args.seed.map(|_| ()),
        treatment: args.treatment.as_ref().map(|_| ()),
        outcome: args.outcome.as_ref().map(|_| ()),
        covariates: args.covariates.as_ref().map(|_| ()),
        multiarm: args.multiarm.then_some(()),
        impute: args.impute.then_some(()),
        arm: args.arm.map(|_| ()),
    };
    // flags first, then config file fills the gaps
    if let Some(v) = &args.estimator {
        cfg.estimator = v.clone();
    }
    if let Some(v) = &args.or_learner {
        cfg.or_learner = v.clone();
    }
    if let Some(v) = &args.ps_learner {
        cfg.ps_learner = v.clone();
    }
    if let Some(v) = args.smoother_df {
        cfg.smoother_df = v;
    }
    if let Some(v) = args.folds {
        cfg.folds = v;
    }
    if let Some(v) = args.level {
        cfg.level = v;
    }
    if let Some(v) = args.ps_floor {
        cfg.ps_floor = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.treatment {
        cfg.treatment = v.clone();
    }
    if let Some(v) = &args.outcome {
        cfg.outcome = v.clone();
    }
    if let Some(v) = &args.covariates {
        cfg.covariates = Some(v.clone());
    }
    if args.multiarm {
        cfg.multiarm = true;
    }
    if args.impute {
        cfg.impute = true;
    }
    if let Some(v) = args.arm {
        cfg.arm = Some(v);
    }
    if let Some(path) = &args.config {
        let file = read_file_config(path)?;
        cfg.merge_file(&file, &overrides);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_estimate(args: EstimateCli) -> Result<(), Error> {
    let cfg = build_config(&args)?;
    let roles = ColumnRoles {
        treatment: cfg.treatment.clone(),
        outcome: cfg.outcome.clone(),
        covariates: cfg.covariates.clone(),
    };
    let (ds, ingest) = load_csv(&args.data, &roles, cfg.impute)?;
    let echo = json!({
        "data": args.data.display().to_string(),
        "estimator": cfg.estimator,
        "or_learner": cfg.or_learner,
        "ps_learner": cfg.ps_learner,
        "smoother_df": cfg.smoother_df,
        "folds": cfg.folds,
        "level": cfg.level,
        "ps_floor": cfg.ps_floor,
        "seed": cfg.seed,
        "multiarm": cfg.multiarm,
        "arm": cfg.arm,
        "n_rows": ingest.n_rows,
        "imputed": ingest.missing_counts,
    });
    let outcome = match run_estimate(&ds, &cfg) {
        Ok(o) => o,
        Err(e) => {
            // emit a diagnostic payload so failed runs are still machine-readable
            let diag = json!({ "error": e.to_string(), "config": echo });
            eprintln!("{}", serde_json::to_string_pretty(&diag).expect("serializes"));
            return Err(e);
        }
    };
    let payload = match &outcome {
        EstimateOutcome::Single(rep) => estimate_json(rep, echo),
        EstimateOutcome::Multiarm(rep) => multiarm_json(rep, echo),
    };
    let text = serde_json::to_string_pretty(&payload).expect("serializes");
    if let Some(out) = &args.out {
        std::fs::write(out, &text)?;
    }
    println!("{text}");
    print!("{}", estimate_text(&outcome, cfg.level));
    Ok(())
}

fn cmd_simulate(args: SimulateCli) -> Result<(), Error> {
    let sim_args = SimulateArgs {
        dgp: args.dgp,
        gamma: args.gamma,
        n: args.n,
        reps: args.reps,
        seed: args.seed,
        estimated_se: args.estimated_se,
        folds: args.folds,
        out: args.out.clone(),
    };
    let report = run_simulate(&sim_args)?;
    if let Some(dir) = &args.out {
        write_simulation_outputs(&report, dir)?;
    }
    print!("{}", simulation_text(&report));
    Ok(())
}
