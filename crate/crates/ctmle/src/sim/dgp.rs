//! Data-generating processes for the two simulation studies.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::expit;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Per-row true nuisances and the target parameters, on the raw outcome scale.
#[derive(Debug, Clone)]
pub struct DgpTruths {
    /// True propensity P(A = 1 | W) per row.
    pub g0: Vec<f64>,
    /// True outcome regression at a = 1, raw scale.
    pub q1: Vec<f64>,
    /// True outcome regression at a = 0, raw scale.
    pub q0: Vec<f64>,
    /// True arm means (psi_0, psi_1).
    pub arm_means: (f64, f64),
    pub ate: f64,
}

/// The two simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dgp {
    /// Eight independent covariates; `gamma` scales a near-deterministic
    /// treatment assignment channel through the binary W8, inducing
    /// progressively severe positivity violations.
    Sim1 { gamma: f64 },
    /// Kang-Schafer design: linear truth in latent Z, but only nonlinear
    /// transforms W of Z are observed, so parametric fits on W are
    /// misspecified.
    Sim2,
}

impl Dgp {
    pub fn name(&self) -> String {
        match self {
            Dgp::Sim1 { gamma } => format!("sim1(gamma={gamma})"),
            Dgp::Sim2 => "sim2".to_string(),
        }
    }

    pub fn truth_ate(&self) -> f64 {
        match self {
            Dgp::Sim1 { .. } => 1.0,
            Dgp::Sim2 => 0.0,
        }
    }

    /// True arm means (E[Y(0)], E[Y(1)]): Sim1 covariates are mean-zero so the
    /// arm means are 0 and 1; Sim2 arm means are both 210 + 27.4 E[Z1] with
    /// E[Z1] = 1.25 and the remaining Z mean-zero.
    pub fn arm_truths(&self) -> (f64, f64) {
        match self {
            Dgp::Sim1 { .. } => (0.0, 1.0),
            Dgp::Sim2 => {
                let m = 210.0 + 27.4 * 1.25;
                (m, m)
            }
        }
    }

    /// Draw a dataset of size `n` plus the per-row truths.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<(Dataset, DgpTruths)> {
        if n < 2 {
            return Err(Error::InvalidArgument("sample size must be >= 2".into()));
        }
        match self {
            Dgp::Sim1 { gamma } => sample_sim1(n, *gamma, rng),
            Dgp::Sim2 => sample_sim2(n, rng),
        }
    }
}

/// Sim1 linear combination sum_{j=1..7} 2^{1-j} w_j.
fn sim1_linear(w: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut coef = 1.0;
    for &wj in w.iter().take(7) {
        acc += coef * wj;
        coef *= 0.5;
    }
    acc
}

/// True Sim1 propensity: expit(0.5 gamma - gamma w8 + sum 2^{1-j} w_j).
pub fn sim1_ps(w: &[f64], gamma: f64) -> f64 {
    expit(0.5 * gamma - gamma * w[7] + sim1_linear(w))
}

fn sample_sim1<R: Rng>(n: usize, gamma: f64, rng: &mut R) -> Result<(Dataset, DgpTruths)> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut w = Array2::<f64>::zeros((n, 8));
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut g0 = Vec::with_capacity(n);
    let mut q1 = Vec::with_capacity(n);
    let mut q0 = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = [0.0f64; 8];
        for v in row.iter_mut().take(7) {
            *v = rng.gen_range(-1.5..1.5);
        }
        row[7] = f64::from(rng.gen::<f64>() < 0.5);
        for (j, &v) in row.iter().enumerate() {
            w[[i, j]] = v;
        }
        let lin = sim1_linear(&row);
        let g = sim1_ps(&row, gamma);
        let ai = usize::from(rng.gen::<f64>() < g);
        let yi = ai as f64 - lin + normal.sample(rng);
        a.push(ai);
        y.push(yi);
        g0.push(g);
        q1.push(1.0 - lin);
        q0.push(-lin);
    }
    let ds = Dataset::from_raw(w, a, &y, vec![])?;
    Ok((
        ds,
        DgpTruths {
            g0,
            q1,
            q0,
            arm_means: (0.0, 1.0),
            ate: 1.0,
        },
    ))
}

/// True Sim2 propensity in the latent Z coordinates.
pub fn sim2_ps(z: &[f64; 5]) -> f64 {
    expit(-z[0] + 0.5 * z[1] - z[2] - 0.1 * z[3] + z[4] + 0.75 * z[4] * z[4])
}

/// Observed covariates as nonlinear transforms of Z.
pub fn sim2_transform(z: &[f64; 5]) -> [f64; 5] {
    [
        (z[0] / 2.0).exp(),
        z[1] / (1.0 + z[0].exp()) + 10.0,
        (z[0] * z[2] / 25.0 + 0.6).powi(3),
        (z[1] + z[3] + 20.0).powi(2),
        z[4],
    ]
}

fn sample_sim2<R: Rng>(n: usize, rng: &mut R) -> Result<(Dataset, DgpTruths)> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut w = Array2::<f64>::zeros((n, 5));
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut g0 = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let z = [
            rng.gen_range(0.5..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ];
        let obs = sim2_transform(&z);
        for (j, &v) in obs.iter().enumerate() {
            w[[i, j]] = v;
        }
        let g = sim2_ps(&z);
        let ai = usize::from(rng.gen::<f64>() < g);
        let mean = 210.0 + 27.4 * z[0] + 13.7 * (z[1] + z[2] + z[3]);
        a.push(ai);
        y.push(mean + normal.sample(rng));
        g0.push(g);
        q.push(mean);
    }
    let ds = Dataset::from_raw(w, a, &y, vec![])?;
    let m = 210.0 + 27.4 * 1.25;
    Ok((
        ds,
        DgpTruths {
            g0,
            q1: q.clone(),
            q0: q,
            arm_means: (m, m),
            ate: 0.0,
        },
    ))
}
