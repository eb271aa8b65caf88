//! GLM fitting by iteratively reweighted least squares.

use crate::error::{Error, Result};
use crate::linalg::solve_sym_dropping;
use crate::stats::expit;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Coefficient magnitude on the logit scale beyond which expit saturates and
/// we declare separation.
pub const SEPARATION_BOUND: f64 = 30.0;

const SCORE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Identity,
    Logit,
}

/// What to do when a logit fit diverges past [`SEPARATION_BOUND`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationPolicy {
    /// Return an error.
    Error,
    /// Stop iterating, keep the current coefficients, and set the flag.
    Cap,
}

#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: Array1<f64>,
    pub link: Link,
    pub converged: bool,
    pub iterations: usize,
    pub dropped_columns: Vec<usize>,
    pub separation: bool,
}

impl GlmFit {
    pub fn linear_predictor(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&self.coefficients)
    }

    /// Predictions on the response scale. Logit-link outputs lie in (0, 1).
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        let eta = self.linear_predictor(x);
        match self.link {
            Link::Identity => eta,
            Link::Logit => eta.mapv(expit),
        }
    }
}

/// Fit a GLM by IRLS on an explicit design matrix (the caller supplies the
/// intercept column).
///
/// The offset enters additively on the link scale. Rank-deficient designs are
/// handled by dropping dependent columns (coefficient zero, recorded in the
/// fit). For the logit link, a coefficient exceeding [`SEPARATION_BOUND`]
/// triggers the separation policy.
pub fn fit_glm(
    x: &Array2<f64>,
    y: &Array1<f64>,
    link: Link,
    offset: Option<&Array1<f64>>,
    weights: Option<&Array1<f64>>,
) -> Result<GlmFit> {
    fit_glm_with_policy(x, y, link, offset, weights, SeparationPolicy::Error)
}

pub fn fit_glm_with_policy(
    x: &Array2<f64>,
    y: &Array1<f64>,
    link: Link,
    offset: Option<&Array1<f64>>,
    weights: Option<&Array1<f64>>,
    policy: SeparationPolicy,
) -> Result<GlmFit> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("empty design matrix".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if let Some(o) = offset {
        if o.len() != n {
            return Err(Error::DimensionMismatch("offset length".into()));
        }
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch("weights length".into()));
        }
    }
    if link == Link::Logit && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument("logit link requires responses in [0,1]".into()));
    }

    let zero_offset;
    let off = match offset {
        Some(o) => o,
        None => {
            zero_offset = Array1::zeros(n);
            &zero_offset
        }
    };
    let unit_weights;
    let prior_w = match weights {
        Some(w) => w,
        None => {
            unit_weights = Array1::ones(n);
            &unit_weights
        }
    };

    match link {
        Link::Identity => {
            // Single weighted least squares solve.
            let adj = y - off;
            let (xtx, xty) = weighted_normal_eq(x, &adj, prior_w);
            let (beta, dropped) = solve_sym_dropping(&xtx, &xty);
            Ok(GlmFit {
                coefficients: beta,
                link,
                converged: true,
                iterations: 1,
                dropped_columns: dropped,
                separation: false,
            })
        }
        Link::Logit => {
            let mut beta = Array1::<f64>::zeros(p);
            let mut dropped = Vec::new();
            let mut separation = false;
            let mut converged = false;
            let mut iter = 0;
            while iter < MAX_ITER {
                iter += 1;
                let eta = x.dot(&beta) + off;
                let mu = eta.mapv(expit);
                // score in the kept coordinates
                let resid: Array1<f64> = (0..n).map(|i| prior_w[i] * (y[i] - mu[i])).collect();
                let score = x.t().dot(&resid);
                let score_max = score
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !dropped.contains(j))
                    .map(|(_, s)| s.abs())
                    .fold(0.0f64, f64::max);
                if score_max <= SCORE_TOL {
                    converged = true;
                    break;
                }
                // IRLS weights
                let irls_w: Array1<f64> =
                    (0..n).map(|i| (prior_w[i] * mu[i] * (1.0 - mu[i])).max(1e-10)).collect();
                let (xtx, _) = weighted_normal_eq(x, &Array1::zeros(n), &irls_w);
                let (delta, new_dropped) = solve_sym_dropping(&xtx, &score);
                dropped = new_dropped;
                // step-halving safeguard on the deviance
                let dev_old = binomial_deviance(y, &mu, prior_w);
                let mut step = 1.0;
                let mut accepted = false;
                for _ in 0..20 {
                    let cand = &beta + &(&delta * step);
                    let mu_new = (x.dot(&cand) + off).mapv(expit);
                    if binomial_deviance(y, &mu_new, prior_w) <= dev_old + 1e-12 {
                        beta = cand;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    beta = &beta + &(&delta * step);
                }
                if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
                    match policy {
                        SeparationPolicy::Error => {
                            return Err(Error::Separation { bound: SEPARATION_BOUND })
                        }
                        SeparationPolicy::Cap => {
                            separation = true;
                            break;
                        }
                    }
                }
            }
            Ok(GlmFit {
                coefficients: beta,
                link,
                converged,
                iterations: iter,
                dropped_columns: dropped,
                separation,
            })
        }
    }
}

fn weighted_normal_eq(
    x: &Array2<f64>,
    target: &Array1<f64>,
    w: &Array1<f64>,
) -> (Array2<f64>, Array1<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let mut xtx = Array2::<f64>::zeros((p, p));
    let mut xty = Array1::<f64>::zeros(p);
    for i in 0..n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..p {
            let xij = x[[i, j]];
            if xij == 0.0 {
                continue;
            }
            xty[j] += wi * xij * target[i];
            for k in j..p {
                xtx[[j, k]] += wi * xij * x[[i, k]];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            xtx[[j, k]] = xtx[[k, j]];
        }
    }
    (xtx, xty)
}

fn binomial_deviance(y: &Array1<f64>, mu: &Array1<f64>, w: &Array1<f64>) -> f64 {
    let mut d = 0.0;
    for i in 0..y.len() {
        let m = mu[i].clamp(1e-12, 1.0 - 1e-12);
        d -= 2.0 * w[i] * (y[i] * m.ln() + (1.0 - y[i]) * (1.0 - m).ln());
    }
    d
}
