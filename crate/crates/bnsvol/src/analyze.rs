//! The full data-analysis pipeline: estimation, standard errors,
//! unconditional moments, residual diagnostics, autocorrelations and the
//! model return density, with plot-ready CSV outputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{sandwich_empirical, SandwichReport};
use crate::density::{CumulantEvaluator, DensityCurve};
use crate::diagnostics::{
    acf, ks_normality, ljung_box, moment_stats, residuals, Acf, MomentStats, ResidualSeries,
    TestResult,
};
use crate::error::{Error, Result};
use crate::estimate::{estimate, EstimateReport};
use crate::moments::{theoretical_acf_tau, theoretical_moments};
use crate::params::{GridConstants, ModelParams};

/// Options of the analysis pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Ljung-Box lag count for the squared residuals.
    pub lb_lags: usize,
    /// Autocorrelation horizon for the reported ACF series.
    pub acf_lags: usize,
    /// Grid size of the return-density curve.
    pub density_points: usize,
    /// Per-point absolute tolerance of the density quadrature.
    pub density_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            lb_lags: 35,
            acf_lags: 50,
            density_points: 201,
            density_tol: 1e-8,
        }
    }
}

/// Unconditional moments implied by the fitted parameters: daily return mean
/// and standard deviation, and the level/spread of the instantaneous
/// variance `V = sigma^2 tau`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UnconditionalMoments {
    pub mean_x: f64,
    pub std_x: f64,
    pub mean_v: f64,
    pub std_v: f64,
}

/// Unconditional moments for a parameter vector:
/// `E[V] = sigma^2 zeta`, `Std[V] = sigma^2 sqrt(eta)`, and the return
/// mean/spread from the stationary limits.
pub fn unconditional_moments(theta: &ModelParams, delta: f64) -> Result<UnconditionalMoments> {
    let grid = GridConstants::new(theta.lambda, delta)?;
    let th = theoretical_moments(theta, &grid)?;
    Ok(UnconditionalMoments {
        mean_x: th.xi[3],
        std_x: (th.xi[6] - th.xi[3] * th.xi[3]).sqrt(),
        mean_v: theta.sigma * theta.sigma * theta.zeta(),
        std_v: theta.sigma * theta.sigma * theta.eta().sqrt(),
    })
}

/// Everything the pipeline produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub delta: f64,
    pub estimate: EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<SandwichReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unconditional: Option<UnconditionalMoments>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_moments: Option<MomentStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ljung_box_squared_residuals: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_residuals: Option<TestResult>,
    #[serde(skip)]
    pub series: Option<AnalysisSeries>,
}

/// Bulky series kept out of the JSON report; written as CSV files.
#[derive(Debug, Clone)]
pub struct AnalysisSeries {
    pub residuals: ResidualSeries,
    pub acf_tau: Acf,
    pub acf_tau_model: Vec<f64>,
    pub acf_residuals: Acf,
    pub acf_squared_residuals: Acf,
    pub density: DensityCurve,
}

/// Runs the pipeline on a return/volume series.
///
/// Estimation failure is reported in-band (`estimate.valid = false`) with
/// all diagnostics skipped.
pub fn analyze(
    x: &[f64],
    tau: &[f64],
    delta: f64,
    options: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let est = estimate(x, tau, delta)?;
    let n = x.len();
    let Some(theta) = est.params() else {
        return Ok(AnalysisReport {
            n,
            delta,
            estimate: est,
            standard_errors: None,
            unconditional: None,
            residual_moments: None,
            ljung_box_squared_residuals: None,
            ks_residuals: None,
            series: None,
        });
    };
    let grid = GridConstants::new(theta.lambda, delta)?;

    let standard_errors = sandwich_empirical(x, tau, &theta, &grid).ok();
    let unconditional = unconditional_moments(&theta, delta)?;

    let resid = residuals(x, tau, &theta, delta)?;
    let residual_moments = moment_stats(&resid.eps)?;
    let eps_sq: Vec<f64> = resid.eps.iter().map(|e| e * e).collect();
    let lb = ljung_box(&eps_sq, options.lb_lags.min(n - 1))?;
    let ks = ks_normality(&resid.eps)?;

    let acf_lags = options.acf_lags.min(n - 1);
    let acf_tau = acf(&tau[1..], acf_lags)?;
    let acf_tau_model: Vec<f64> = (1..=acf_lags)
        .map(|h| theoretical_acf_tau(&theta, h, &grid))
        .collect();
    let acf_residuals = acf(&resid.eps, acf_lags)?;
    let acf_squared_residuals = acf(&eps_sq, acf_lags)?;

    // density over the empirical return range, slightly padded
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let pad = 0.05 * (hi - lo);
    let m = options.density_points.max(2);
    let x_grid: Vec<f64> = (0..m)
        .map(|i| lo - pad + (hi - lo + 2.0 * pad) * i as f64 / (m - 1) as f64)
        .collect();
    let density =
        CumulantEvaluator::gamma_ou(&theta, delta)?.density(&x_grid, options.density_tol)?;

    Ok(AnalysisReport {
        n,
        delta,
        estimate: est,
        standard_errors,
        unconditional: Some(unconditional),
        residual_moments: Some(residual_moments),
        ljung_box_squared_residuals: Some(lb),
        ks_residuals: Some(ks),
        series: Some(AnalysisSeries {
            residuals: resid,
            acf_tau,
            acf_tau_model,
            acf_residuals,
            acf_squared_residuals,
            density,
        }),
    })
}

fn write_acf_csv(path: &Path, acf: &Acf, model: Option<&[f64]>) -> Result<()> {
    let mut out = String::from(if model.is_some() {
        "lag,rho,band,rho_model\n"
    } else {
        "lag,rho,band\n"
    });
    for (i, r) in acf.rho.iter().enumerate() {
        match model {
            Some(m) => out.push_str(&format!(
                "{},{r:.16e},{:.16e},{:.16e}\n",
                i + 1,
                acf.band,
                m[i]
            )),
            None => out.push_str(&format!("{},{r:.16e},{:.16e}\n", i + 1, acf.band)),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes `report.json` plus the series CSVs into `dir`.
pub fn write_analysis_outputs(report: &AnalysisReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)
            .map_err(|e| Error::Data(format!("serialize report: {e}")))?,
    )?;
    let Some(series) = &report.series else {
        return Ok(());
    };
    let mut resid_csv = String::from("i,eps,zhat,vol\n");
    for (i, ((e, z), v)) in series
        .residuals
        .eps
        .iter()
        .zip(&series.residuals.zhat)
        .zip(&series.residuals.vol)
        .enumerate()
    {
        resid_csv.push_str(&format!("{},{e:.16e},{z:.16e},{v:.16e}\n", i + 1));
    }
    fs::write(dir.join("residuals.csv"), resid_csv)?;
    let mut vol_csv = String::from("i,vol\n");
    for (i, v) in series.residuals.vol.iter().enumerate() {
        vol_csv.push_str(&format!("{},{v:.16e}\n", i + 1));
    }
    fs::write(dir.join("volatility.csv"), vol_csv)?;
    write_acf_csv(
        &dir.join("acf_tau.csv"),
        &series.acf_tau,
        Some(&series.acf_tau_model),
    )?;
    write_acf_csv(&dir.join("acf_residuals.csv"), &series.acf_residuals, None)?;
    write_acf_csv(
        &dir.join("acf_squared_residuals.csv"),
        &series.acf_squared_residuals,
        None,
    )?;
    let mut density_csv = Vec::new();
    series.density.write_csv(&mut density_csv)?;
    fs::write(dir.join("density.csv"), density_csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use crate::simulate::{simulate_gamma_ou, RngStream};

    #[test]
    fn failed_estimation_skips_diagnostics() {
        let x = vec![0.0; 16];
        let tau = vec![2.0; 17];
        let rep = analyze(&x, &tau, 1.0 / 250.0, &AnalysisOptions::default()).unwrap();
        assert!(!rep.estimate.valid);
        assert!(rep.residual_moments.is_none());
        assert!(rep.series.is_none());
    }

    #[test]
    fn pipeline_matches_direct_estimation() {
        let p = ModelParams::new(6.17, 1.42, 177.95, 0.435, -0.015, 0.087, -0.00056).unwrap();
        let delta = 1.0 / 250.0;
        let s = simulate_gamma_ou(&p, 1500, delta, &RngStream::new(2024, 0), false).unwrap();
        let rep = analyze(
            &s.x,
            &s.tau,
            delta,
            &AnalysisOptions {
                density_points: 21,
                density_tol: 1e-6,
                ..Default::default()
            },
        )
        .unwrap();
        let direct = crate::estimate::estimate(&s.x, &s.tau, delta).unwrap();
        // the pipeline adds nothing to the estimator path
        assert_eq!(rep.estimate.theta(), direct.theta());
        assert!(rep.unconditional.is_some());
        assert!(rep.series.is_some());
    }
}
