//! A desk-scale Monte Carlo study: the strong-confounding design at three
//! confounding levels, comparing TMLE, CTMLE, and both one-step variants on
//! bias, variance, MSE, and oracle-interval coverage.
//!
//! Run with: cargo run --example simulation_study

use ctmle::cli::kde_csv;
use ctmle::sim::{run_mc, sim1_default_estimators, Dgp, McConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let estimators = sim1_default_estimators();
    for gamma in [0.0, 3.0, 6.0] {
        let cfg = McConfig {
            n: 100,
            reps: 200,
            base_seed: 1,
            compute_se: false,
            variance_folds: 5,
            ci_level: 0.95,
        };
        let report = run_mc(&Dgp::Sim1 { gamma }, &estimators, &cfg)?;
        println!(
            "gamma = {gamma}: n = {}, reps = {}, true ATE = {}",
            report.n, report.reps, report.truth
        );
        println!(
            "  {:<16} {:>9} {:>9} {:>9} {:>8} {:>9}",
            "estimator", "bias", "variance", "mse", "rel.eff", "coverage"
        );
        for s in &report.estimators {
            println!(
                "  {:<16} {:>9.4} {:>9.4} {:>9.4} {:>8.3} {:>9.3}",
                s.label, s.bias, s.variance, s.mse, s.relative_efficiency, s.oracle_coverage
            );
        }
        println!();

        // the sampling-distribution density curves are plain two-column CSVs
        if gamma == 6.0 {
            let dir = std::env::temp_dir();
            for s in &report.estimators {
                if let Some(curve) = &s.kde {
                    let path = dir.join(format!("sim1_gamma6_kde_{}.csv", s.label));
                    std::fs::write(&path, kde_csv(curve))?;
                    println!("wrote {}", path.display());
                }
            }
        }
    }
    println!("\nAs confounding strengthens the collaborative estimators pull");
    println!("ahead: same bias profile, visibly smaller variance.");
    Ok(())
}
