//! Distribution tail functions used by the test statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Survival function of the chi-square distribution with `df` degrees of freedom.
pub fn chi_squared_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("chi-square needs df >= 1".into()));
    }
    let d = ChiSquared::new(df as f64)
        .map_err(|e| Error::Domain(format!("chi-square df {df}: {e}")))?;
    Ok(d.sf(x).clamp(0.0, 1.0))
}

/// Standard normal CDF.
pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
///
/// This is the asymptotic law of `sqrt(n) * D_n` for the one-sample
/// Kolmogorov-Smirnov statistic against a fully specified distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.05 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_five_percent_critical_value() {
        // chi2(35) 5% critical value is 49.80
        let p = chi_squared_sf(49.80, 35).unwrap();
        assert!((p - 0.05).abs() < 2e-4, "p = {p}");
    }

    #[test]
    fn kolmogorov_known_quantile() {
        // the classic 5% asymptotic point: Q(1.358) ~ 0.05
        let p = kolmogorov_sf(1.358);
        assert!((p - 0.05).abs() < 1e-3, "p = {p}");
        assert!(kolmogorov_sf(0.0) == 1.0);
        assert!(kolmogorov_sf(5.0) < 1e-10);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert!((standard_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((standard_normal_cdf(1.96) - 0.975).abs() < 1e-4);
    }
}
