//! Cross-validated CTMLE for a treatment-specific mean: nuisances are fit
//! per training fold, predictions are made out-of-fold, and one pooled
//! fluctuation targets all folds at once. This removes the own-observation
//! bias of full-sample fitting at a modest variance cost.
//!
//! Run with: cargo run --example cv_ctmle

use ctmle::sim::Dgp;
use ctmle::{ctmle_tsm, cv_ctmle_tsm, default_smoother, EstimatorConfig, LearnerSpec, Link};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (ds, truths) = Dgp::Sim1 { gamma: 3.0 }.sample(2000, &mut rng)?;
    let truth = truths.arm_means.1;

    let or = LearnerSpec::Glm { link: Link::Identity };
    let smoother = default_smoother();
    let config = EstimatorConfig {
        seed: 2,
        ..Default::default()
    };

    println!("treatment-specific mean under universal treatment, n = 2000");
    println!("true value: {truth:.4}\n");
    println!("{:<16} {:>10} {:>10} {:>24}", "estimator", "psi", "se", "95% CI");

    let full = ctmle_tsm(&ds, 1, &or, &smoother, &config)?;
    println!(
        "{:<16} {:>10.4} {:>10.4} {:>24}",
        "ctmle (full)",
        full.psi,
        full.se,
        format!("({:.4}, {:.4})", full.ci.0, full.ci.1)
    );

    for v in [2usize, 5, 10] {
        let cv = cv_ctmle_tsm(&ds, 1, &or, &smoother, v, &config)?;
        println!(
            "{:<16} {:>10.4} {:>10.4} {:>24}",
            format!("cv-ctmle (v={v})"),
            cv.psi,
            cv.se,
            format!("({:.4}, {:.4})", cv.ci.0, cv.ci.1)
        );
    }

    println!("\nWith a well-specified parametric outcome model the full-sample");
    println!("and cross-validated fits agree closely; the CV version matters");
    println!("when the outcome regression is aggressive enough to overfit.");
    Ok(())
}
