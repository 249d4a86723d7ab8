//! One-sample Kolmogorov–Smirnov test against the standard normal.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LabError, Result};

pub const KS_MIN_SAMPLE: usize = 8;
const SERIES_TERMS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_test(sample: &[f64]) -> Result<KsOutcome> {
    if sample.len() < KS_MIN_SAMPLE {
        return Err(LabError::SampleTooSmall {
            needed: KS_MIN_SAMPLE,
            got: sample.len(),
        });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(LabError::InvalidArgument("KS sample contains non-finite values".into()));
    }
    let normal = Normal::standard();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal.cdf(x);
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    let root_n = n.sqrt();
    let lambda = (root_n + 0.12 + 0.11 / root_n) * d;
    Ok(KsOutcome {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`, clamped to `[0, 1]`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=SERIES_TERMS {
        let term = sign * (a * (k * k) as f64).exp();
        sum += term;
        if k >= 10 && term.abs() <= 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plug_in_quantiles_give_half_step() {
        let normal = Normal::standard();
        for n in [8usize, 50, 1000] {
            let sample: Vec<f64> = (1..=n).map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64)).collect();
            let out = ks_test(&sample).unwrap();
            // Limited by the accuracy of the normal quantile, not the test.
            assert_abs_diff_eq!(out.statistic, 0.5 / n as f64, epsilon = 1e-9);
            assert!(out.p_value > 0.99);
        }
    }

    #[test]
    fn small_samples_rejected() {
        assert!(matches!(ks_test(&[]), Err(LabError::SampleTooSmall { got: 0, .. })));
        assert!(ks_test(&[0.0; 7]).is_err());
    }

    #[test]
    fn shifted_sample_rejected() {
        let normal = Normal::standard();
        let sample: Vec<f64> = (1..=500).map(|i| normal.inverse_cdf((i as f64 - 0.5) / 500.0) + 0.5).collect();
        assert!(ks_test(&sample).unwrap().p_value < 1e-6);
    }

    #[test]
    fn q_function_reference_points() {
        // Classical critical values: Q(1.358) ≈ 0.05, Q(1.628) ≈ 0.01.
        assert_abs_diff_eq!(kolmogorov_q(1.358), 0.05, epsilon = 5e-4);
        assert_abs_diff_eq!(kolmogorov_q(1.628), 0.01, epsilon = 2e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert_eq!(kolmogorov_q(0.05), 1.0);
    }
}
