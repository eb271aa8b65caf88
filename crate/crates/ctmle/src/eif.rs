//! Efficient influence function evaluation for the treatment-specific mean,
//! the plug-in estimator, and the second-order remainder diagnostic.

use crate::error::{Error, Result};

/// Default lower clip on propensity predictions before division.
pub const DEFAULT_PS_FLOOR: f64 = 1e-6;

/// Inputs to the influence-function evaluation for one sample.
#[derive(Debug, Clone)]
pub struct EifInputs<'a> {
    /// Outcome regression predictions in [0, 1].
    pub or_pred: &'a [f64],
    /// Propensity predictions in (0, 1].
    pub ps_pred: &'a [f64],
    /// Treatment indicator (0/1).
    pub a: &'a [f64],
    /// Outcome in [0, 1].
    pub y: &'a [f64],
    /// Plug-in value centering the influence function.
    pub psi: f64,
}

/// Plug-in estimate: the empirical mean of outcome-regression predictions.
pub fn plugin_estimate(or_pred: &[f64]) -> Result<f64> {
    if or_pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(or_pred.iter().sum::<f64>() / or_pred.len() as f64)
}

/// Per-observation influence function values:
/// (a/g)(y - q) + q - psi.
pub fn eif_eval(inputs: &EifInputs) -> Result<Vec<f64>> {
    let n = inputs.or_pred.len();
    if inputs.ps_pred.len() != n || inputs.a.len() != n || inputs.y.len() != n {
        return Err(Error::DimensionMismatch("eif input lengths".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let g = inputs.ps_pred[i];
        if inputs.a[i] != 0.0 && g == 0.0 {
            return Err(Error::ZeroPropensity { row: i });
        }
        let ipw = if inputs.a[i] != 0.0 {
            (inputs.a[i] / g) * (inputs.y[i] - inputs.or_pred[i])
        } else {
            0.0
        };
        out.push(ipw + inputs.or_pred[i] - inputs.psi);
    }
    Ok(out)
}

/// Second-order remainder diagnostic:
/// sum_i w_i [(g_n - g_0)/g_n](q_n - q_0), evaluated at a set of confounder
/// points with probability weights `weights` (typically a large fresh Monte
/// Carlo draw from the true confounder law, each weighted 1/m).
pub fn remainder_r2(
    or_pred: &[f64],
    or_true: &[f64],
    ps_pred: &[f64],
    ps_true: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let m = or_pred.len();
    if or_true.len() != m || ps_pred.len() != m || ps_true.len() != m || weights.len() != m {
        return Err(Error::DimensionMismatch("remainder input lengths".into()));
    }
    if ps_pred.iter().any(|&g| g <= 0.0) {
        return Err(Error::InvalidArgument("remainder requires ps_pred > 0".into()));
    }
    let mut acc = 0.0;
    for i in 0..m {
        acc += weights[i] * ((ps_pred[i] - ps_true[i]) / ps_pred[i]) * (or_pred[i] - or_true[i]);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plugin_cases() {
        assert_abs_diff_eq!(plugin_estimate(&[0.3, 0.3, 0.3]).unwrap(), 0.3);
        assert_abs_diff_eq!(plugin_estimate(&[0.0, 1.0]).unwrap(), 0.5);
        assert_abs_diff_eq!(plugin_estimate(&[0.2, 0.4, 0.9]).unwrap(), 0.5);
        assert!(plugin_estimate(&[]).is_err());
    }

    #[test]
    fn eif_untreated_at_mean_is_zero() {
        let inputs = EifInputs {
            or_pred: &[0.4],
            ps_pred: &[0.5],
            a: &[0.0],
            y: &[0.9],
            psi: 0.4,
        };
        assert_abs_diff_eq!(eif_eval(&inputs).unwrap()[0], 0.0);
    }

    #[test]
    fn eif_residual_free_is_zero() {
        for a in [0.0, 1.0] {
            let inputs = EifInputs {
                or_pred: &[0.6],
                ps_pred: &[0.3],
                a: &[a],
                y: &[0.6],
                psi: 0.6,
            };
            assert_abs_diff_eq!(eif_eval(&inputs).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn eif_direct_formula() {
        let inputs = EifInputs {
            or_pred: &[0.5],
            ps_pred: &[0.25],
            a: &[1.0],
            y: &[1.0],
            psi: 0.4,
        };
        // 4 * 0.5 + 0.5 - 0.4 = 2.1
        assert_abs_diff_eq!(eif_eval(&inputs).unwrap()[0], 2.1, epsilon = 1e-12);
    }

    #[test]
    fn centering_terms_cancel() {
        // mean(eif) with psi = plugin equals mean of the IPW residual term
        let or_pred = [0.2, 0.7, 0.5, 0.9];
        let ps = [0.4, 0.6, 0.2, 0.8];
        let a = [1.0, 0.0, 1.0, 1.0];
        let y = [0.3, 0.5, 0.4, 1.0];
        let psi = plugin_estimate(&or_pred).unwrap();
        let eif = eif_eval(&EifInputs {
            or_pred: &or_pred,
            ps_pred: &ps,
            a: &a,
            y: &y,
            psi,
        })
        .unwrap();
        let mean_eif: f64 = eif.iter().sum::<f64>() / 4.0;
        let ipw: f64 = (0..4)
            .map(|i| if a[i] == 1.0 { (y[i] - or_pred[i]) / ps[i] } else { 0.0 })
            .sum::<f64>()
            / 4.0;
        assert_abs_diff_eq!(mean_eif, ipw, epsilon = 1e-14);
    }

    #[test]
    fn remainder_vanishing_factors() {
        let w = [0.5, 0.5];
        assert_abs_diff_eq!(
            remainder_r2(&[0.3, 0.4], &[0.2, 0.2], &[0.5, 0.5], &[0.5, 0.5], &w).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            remainder_r2(&[0.3, 0.4], &[0.3, 0.4], &[0.5, 0.6], &[0.2, 0.3], &w).unwrap(),
            0.0
        );
    }

    #[test]
    fn remainder_two_point_hand_value() {
        // (0.5 - 0.25)/0.5 = 0.5 factor, times 0.1, equal weights -> 0.05
        let v = remainder_r2(
            &[0.4, 0.6],
            &[0.3, 0.5],
            &[0.5, 0.5],
            &[0.25, 0.25],
            &[0.5, 0.5],
        )
        .unwrap();
        assert_abs_diff_eq!(v, 0.05, epsilon = 1e-14);
    }

    #[test]
    fn remainder_bilinear() {
        let w = [0.25, 0.25, 0.5];
        let q = [0.3, 0.5, 0.7];
        let q0 = [0.2, 0.6, 0.65];
        let g = [0.5, 0.4, 0.6];
        let g0 = [0.3, 0.5, 0.55];
        let base = remainder_r2(&q, &q0, &g, &g0, &w).unwrap();
        // doubling the OR gap doubles the remainder
        let q_double: Vec<f64> = q.iter().zip(q0.iter()).map(|(a, b)| b + 2.0 * (a - b)).collect();
        let doubled = remainder_r2(&q_double, &q0, &g, &g0, &w).unwrap();
        assert_abs_diff_eq!(doubled, 2.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn zero_propensity_for_treated_errors() {
        let inputs = EifInputs {
            or_pred: &[0.5],
            ps_pred: &[0.0],
            a: &[1.0],
            y: &[1.0],
            psi: 0.5,
        };
        assert!(matches!(eif_eval(&inputs), Err(Error::ZeroPropensity { row: 0 })));
    }
}
