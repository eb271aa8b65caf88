//! Gaussian kernel density estimate with Silverman's rule-of-thumb bandwidth.

use crate::error::{Error, Result};
use crate::stats::{normal_pdf, quantile, sample_sd};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Silverman's rule of thumb: h = 0.9 min(sd, IQR/1.34) n^{-1/5}.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("kde needs at least two samples".into()));
    }
    let sd = sample_sd(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !spread.is_finite() || spread <= 0.0 {
        return Err(Error::InvalidArgument("kde requires positive sample variance".into()));
    }
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

/// Density curve on `n_grid` equally spaced points spanning the data plus
/// three bandwidths on each side.
pub fn kde(samples: &[f64], n_grid: usize) -> Result<KdeCurve> {
    if n_grid < 2 {
        return Err(Error::InvalidArgument("kde grid needs at least two points".into()));
    }
    let h = silverman_bandwidth(samples)?;
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = min - 3.0 * h;
    let hi = max + 3.0 * h;
    let step = (hi - lo) / (n_grid - 1) as f64;
    let n = samples.len() as f64;
    let mut grid = Vec::with_capacity(n_grid);
    let mut density = Vec::with_capacity(n_grid);
    for k in 0..n_grid {
        let x = lo + step * k as f64;
        let d: f64 = samples.iter().map(|&s| normal_pdf((x - s) / h)).sum::<f64>() / (n * h);
        grid.push(x);
        density.push(d);
    }
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}
