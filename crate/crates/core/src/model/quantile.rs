use statrs::function::erf::erfc;

use crate::error::{Error, Result};

// Rational approximation coefficients for the inverse normal CDF (Acklam).
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn rational_guess(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// `Φ⁻¹(p)`: rational approximation refined by one Newton step.
pub fn standard_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
    }
    let x = rational_guess(p);
    let cdf = 0.5 * erfc(-x / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(x - (cdf - p) / pdf)
}

/// `mean + √variance · Φ⁻¹(ρ)`.
pub fn gaussian_quantile(mean: f64, variance: f64, rho: f64) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(Error::Domain(format!("negative variance {variance}")));
    }
    Ok(mean + variance.sqrt() * standard_normal_quantile(rho)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn known_values() {
        assert_eq!(gaussian_quantile(0.0, 1.0, 0.5).unwrap(), 0.0);
        assert!((gaussian_quantile(0.0, 1.0, 0.9).unwrap() - 1.281552).abs() < 1e-6);
        assert!((gaussian_quantile(2.0, 4.0, 0.9).unwrap() - 4.563103).abs() < 1e-6);
    }

    #[test]
    fn median_is_exactly_the_mean() {
        assert_eq!(gaussian_quantile(123.456, 7.0, 0.5).unwrap(), 123.456);
    }

    #[test]
    fn matches_reference_inverse_cdf() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for k in 1..1000 {
            let p = k as f64 / 1000.0;
            let ours = standard_normal_quantile(p).unwrap();
            assert!((ours - n.inverse_cdf(p)).abs() < 1e-8, "p={p}");
        }
        for p in [1e-10, 1e-6, 0.01, 0.99, 1.0 - 1e-6] {
            let ours = standard_normal_quantile(p).unwrap();
            assert!((n.cdf(ours) - p).abs() < 1e-8 * p.max(1e-3), "p={p}");
        }
    }

    #[test]
    fn domain_errors() {
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(standard_normal_quantile(p), Err(Error::Domain(_))));
        }
        assert!(gaussian_quantile(0.0, -1.0, 0.5).is_err());
    }
}
