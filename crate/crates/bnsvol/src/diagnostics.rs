//! Residual construction, moment statistics, autocorrelations and
//! goodness-of-fit tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::special::{chi_squared_sf, kolmogorov_sf, standard_normal_cdf};
use crate::numeric::sum::{compensated_mean, compensated_sum};
use crate::params::{GridConstants, ModelParams};

/// Standardized residuals, jump proxies and the estimated volatility path.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    /// Standardized return innovations.
    pub eps: Vec<f64>,
    /// Jump-increment proxies built from consecutive volumes.
    pub zhat: Vec<f64>,
    /// Estimated volatility path `sigma sqrt(tau_i)`.
    pub vol: Vec<f64>,
}

/// A scalar test statistic with its p-value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Number of lags (Ljung-Box) or the sample size (KS).
    pub lags_or_n: usize,
    pub reject_at_5pct: bool,
}

/// Mean, standard deviation, skewness and kurtosis of a series.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentStats {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Standardized residuals of a fitted sample.
///
/// The integrated volume over an interval is Euler-approximated from the
/// observed endpoint volumes: the standardization and the variance-in-mean
/// term use the interval's left endpoint, and the jump increment is proxied
/// by `zhat_i = lambda delta tau_i + (tau_i - gamma tau_{i-1})` (integrated
/// volume at the right endpoint plus the AR innovation). This is the
/// convention whose replication statistics reproduce the reference
/// finite-sample study, including its small positive mean bias.
pub fn residuals(
    x: &[f64],
    tau: &[f64],
    theta: &ModelParams,
    delta: f64,
) -> Result<ResidualSeries> {
    theta.validate()?;
    let n = x.len();
    if tau.len() != n + 1 {
        return Err(Error::Data(format!(
            "tau must hold n + 1 = {} values, got {}",
            n + 1,
            tau.len()
        )));
    }
    for (i, &t) in tau.iter().enumerate() {
        if !(t > 0.0) && i < n {
            return Err(Error::Domain(format!(
                "residuals need positive volumes; tau[{i}] = {t}"
            )));
        }
    }
    let grid = GridConstants::new(theta.lambda, delta)?;
    let mut eps = Vec::with_capacity(n);
    let mut zhat = Vec::with_capacity(n);
    let mut vol = Vec::with_capacity(n);
    for i in 1..=n {
        let cur = tau[i];
        let prev = tau[i - 1];
        let z = theta.lambda * delta * cur + (cur - grid.gamma_grid * prev);
        let denom = theta.sigma * (prev * delta).sqrt();
        let e = (x[i - 1] - theta.mu * delta - theta.beta * cur * delta - theta.rho * z) / denom;
        if !e.is_finite() {
            return Err(Error::Domain(format!(
                "residual {i} is not finite (tau[{}] = {prev})",
                i - 1
            )));
        }
        eps.push(e);
        zhat.push(z);
        vol.push(theta.sigma * cur.max(0.0).sqrt());
    }
    Ok(ResidualSeries { eps, zhat, vol })
}

/// Central-moment statistics: `skew = m3 / m2^(3/2)`, `kurt = m4 / m2^2`,
/// with no small-sample bias correction.
pub fn moment_stats(series: &[f64]) -> Result<MomentStats> {
    let n = series.len();
    if n < 4 {
        return Err(Error::Domain(format!(
            "moment statistics need at least 4 points, got {n}"
        )));
    }
    let mean = compensated_mean(series);
    let nf = n as f64;
    let m2 = compensated_sum(series.iter().map(|v| (v - mean).powi(2))) / nf;
    if m2 <= 0.0 {
        return Err(Error::Domain(
            "skewness/kurtosis undefined for a constant series".into(),
        ));
    }
    let m3 = compensated_sum(series.iter().map(|v| (v - mean).powi(3))) / nf;
    let m4 = compensated_sum(series.iter().map(|v| (v - mean).powi(4))) / nf;
    Ok(MomentStats {
        mean,
        std: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

/// Empirical autocorrelations for lags `1..=max_lag` plus the asymptotic
/// 95% confidence band `1.96 / sqrt(n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Acf {
    pub rho: Vec<f64>,
    pub band: f64,
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<Acf> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::Domain(format!(
            "max_lag {max_lag} must be below the sample size {n}"
        )));
    }
    let mean = compensated_mean(series);
    let denom = compensated_sum(series.iter().map(|v| (v - mean).powi(2)));
    if denom <= 0.0 {
        return Err(Error::Domain("autocorrelation of a constant series".into()));
    }
    let rho = (1..=max_lag)
        .map(|k| {
            compensated_sum(
                series[k..]
                    .iter()
                    .zip(series)
                    .map(|(a, b)| (a - mean) * (b - mean)),
            ) / denom
        })
        .collect();
    Ok(Acf {
        rho,
        band: 1.96 / (n as f64).sqrt(),
    })
}

/// Ljung-Box portmanteau test on `lags` autocorrelations;
/// `Q = n (n + 2) sum_k rho_k^2 / (n - k)` against chi-square(`lags`).
pub fn ljung_box(series: &[f64], lags: usize) -> Result<TestResult> {
    let n = series.len();
    if lags == 0 || lags >= n {
        return Err(Error::Domain(format!(
            "lags must be in 1..n = {n}, got {lags}"
        )));
    }
    let a = acf(series, lags)?;
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * a.rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * r / (nf - (i + 1) as f64))
            .sum::<f64>();
    let p = chi_squared_sf(q, lags)?;
    Ok(TestResult {
        statistic: q,
        p_value: p,
        lags_or_n: lags,
        reject_at_5pct: p < 0.05,
    })
}

/// Default lag count `floor(sqrt(n))`.
pub fn ljung_box_default_lags(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

/// One-sample Kolmogorov-Smirnov test against the standard normal law,
/// with the asymptotic p-value `Q(sqrt(n) D_n)`.
pub fn ks_normality(series: &[f64]) -> Result<TestResult> {
    let n = series.len();
    if n < 10 {
        return Err(Error::Domain(format!("KS test needs n >= 10, got {n}")));
    }
    let mut sorted = series.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let cdf = standard_normal_cdf(v);
        d = d
            .max(((i + 1) as f64 / nf - cdf).abs())
            .max((cdf - i as f64 / nf).abs());
    }
    let p = kolmogorov_sf(nf.sqrt() * d);
    Ok(TestResult {
        statistic: d,
        p_value: p,
        lags_or_n: n,
        reject_at_5pct: p < 0.05,
    })
}
