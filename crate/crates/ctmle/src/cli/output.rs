//! Result persistence: JSON reports, flat metric CSVs, and KDE curve CSVs.

use super::EstimateOutcome;
use crate::error::Result;
use crate::estimators::{EstimateReport, MultiarmReport};
use crate::sim::SimulationReport;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// JSON payload for a single estimate, echoing the run configuration.
pub fn estimate_json(rep: &EstimateReport, config_echo: serde_json::Value) -> serde_json::Value {
    json!({
        "estimator": rep.estimator,
        "psi": rep.psi,
        "psi_scaled": rep.psi_scaled,
        "se": rep.se,
        "ci": { "lo": rep.ci.0, "hi": rep.ci.1 },
        "epsilon": rep.epsilon,
        "eif_mean": rep.diagnostics.eif_mean,
        "ps_range": { "min": rep.diagnostics.ps_range.0, "max": rep.diagnostics.ps_range.1 },
        "n": rep.n,
        "seed": config_echo.get("seed").cloned().unwrap_or(serde_json::Value::Null),
        "warnings": rep.diagnostics.warnings,
        "separation": rep.diagnostics.separation_flags,
        "config": config_echo,
    })
}

pub fn multiarm_json(rep: &MultiarmReport, config_echo: serde_json::Value) -> serde_json::Value {
    json!({
        "arms": rep.arms.iter().enumerate().map(|(k, r)| json!({
            "arm": k,
            "psi": r.psi,
            "se": r.se,
            "ci": { "lo": r.ci.0, "hi": r.ci.1 },
            "eif_mean": r.diagnostics.eif_mean,
        })).collect::<Vec<_>>(),
        "covariance": rep.covariance,
        "wald": {
            "statistic": rep.wald.statistic,
            "df": rep.wald.df,
            "p_value": rep.wald.p_value,
            "rank_deficient": rep.wald.rank_deficient,
        },
        "config": config_echo,
    })
}

/// Human-readable table for an estimate run.
pub fn estimate_text(outcome: &EstimateOutcome, level: f64) -> String {
    let pct = level * 100.0;
    let mut out = String::new();
    match outcome {
        EstimateOutcome::Single(rep) => {
            let _ = writeln!(out, "{:<18} {:>12} {:>26}", "estimator", "estimate", format!("{pct:.0}% confidence interval"));
            let _ = writeln!(
                out,
                "{:<18} {:>12.4} {:>26}",
                rep.estimator,
                rep.psi,
                format!("({:.4}, {:.4})", rep.ci.0, rep.ci.1)
            );
            let _ = writeln!(
                out,
                "\nEstimated average: {:.4} ({pct:.0}% confidence interval: {:.4}, {:.4})",
                rep.psi, rep.ci.0, rep.ci.1
            );
        }
        EstimateOutcome::Multiarm(rep) => {
            let _ = writeln!(out, "{:<6} {:>12} {:>26}", "arm", "estimate", format!("{pct:.0}% confidence interval"));
            for (k, r) in rep.arms.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:<6} {:>12.4} {:>26}",
                    k,
                    r.psi,
                    format!("({:.4}, {:.4})", r.ci.0, r.ci.1)
                );
            }
            let _ = writeln!(
                out,
                "\nWald test of equal arm means: statistic {:.4}, df {}, p = {:.4}",
                rep.wald.statistic, rep.wald.df, rep.wald.p_value
            );
        }
    }
    out
}

/// Flat CSV: one row per estimator x metric.
pub fn simulation_metrics_csv(rep: &SimulationReport) -> String {
    let mut out = String::from("estimator,metric,value\n");
    for s in &rep.estimators {
        let rows: Vec<(&str, f64)> = vec![
            ("bias", s.bias),
            ("variance", s.variance),
            ("mse", s.mse),
            ("relative_efficiency", s.relative_efficiency),
            ("oracle_coverage", s.oracle_coverage),
            ("estimated_se_coverage", s.estimated_se_coverage.unwrap_or(f64::NAN)),
            ("n_failures", s.n_failures as f64),
        ];
        for (metric, value) in rows {
            let _ = writeln!(out, "{},{},{}", s.label, metric, value);
        }
    }
    out
}

/// Two-column CSV of a KDE curve.
pub fn kde_csv(curve: &crate::sim::KdeCurve) -> String {
    let mut out = String::from("x,density\n");
    for (x, d) in curve.grid.iter().zip(&curve.density) {
        let _ = writeln!(out, "{x},{d}");
    }
    out
}

/// Console summary table for a simulation run.
pub fn simulation_text(rep: &SimulationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dgp {}  n {}  reps {}  truth {}",
        rep.dgp, rep.n, rep.reps, rep.truth
    );
    let _ = writeln!(
        out,
        "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "estimator", "bias", "variance", "mse", "rel.eff", "coverage"
    );
    for s in &rep.estimators {
        let _ = writeln!(
            out,
            "{:<16} {:>10.4} {:>10.4} {:>10.4} {:>10.3} {:>10.3}",
            s.label, s.bias, s.variance, s.mse, s.relative_efficiency, s.oracle_coverage
        );
    }
    out
}

/// Write the full simulation artifact set into `dir`.
pub fn write_simulation_outputs(rep: &SimulationReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("sim_report.json"),
        serde_json::to_string_pretty(rep).expect("report serializes"),
    )?;
    fs::write(dir.join("sim_metrics.csv"), simulation_metrics_csv(rep))?;
    for s in &rep.estimators {
        if let Some(curve) = &s.kde {
            fs::write(dir.join(format!("kde_{}.csv", s.label)), kde_csv(curve))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Diagnostics;

    fn fake_report() -> EstimateReport {
        EstimateReport {
            estimator: "ctmle".into(),
            psi: 1.25,
            psi_scaled: 0.6,
            epsilon: vec![0.1],
            eif_values: vec![],
            se: 0.2,
            se_scaled: 0.1,
            ci: (0.858, 1.642),
            n: 100,
            diagnostics: Diagnostics {
                eif_mean: 1e-12,
                ps_range: (0.1, 0.9),
                separation_flags: vec![],
                warnings: vec![],
            },
        }
    }

    #[test]
    fn estimate_json_round_trips() {
        let rep = fake_report();
        let v = estimate_json(&rep, serde_json::json!({"seed": 1}));
        let text = serde_json::to_string(&v).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["psi"].as_f64().unwrap(), 1.25);
        assert_eq!(back["ci"]["lo"].as_f64().unwrap(), 0.858);
        assert_eq!(back["config"]["seed"].as_i64().unwrap(), 1);
    }

    #[test]
    fn text_table_mentions_estimate_and_interval() {
        let text = estimate_text(&EstimateOutcome::Single(fake_report()), 0.95);
        assert!(text.contains("1.2500"));
        assert!(text.contains("95% confidence interval"));
        assert!(text.contains("(0.8580, 1.6420)"));
    }

    #[test]
    fn kde_csv_shape() {
        let curve = crate::sim::KdeCurve {
            grid: vec![0.0, 1.0],
            density: vec![0.4, 0.6],
            bandwidth: 0.1,
        };
        let text = kde_csv(&curve);
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("x,density\n"));
    }
}
