//! Closed-form moment estimator.
//!
//! The estimating equations set each empirical moment equal to the mean of
//! the corresponding conditional moment function; their root has an explicit
//! solution. The solution exists on the event that the empirical lag-1
//! autocovariance and the lagged volume variance are both positive; failures
//! are reported in-band (with the parameter vector zeroed), never thrown.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::numeric::sum::compensated_sum;
use crate::params::ModelParams;

/// Why the closed-form solution was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    None,
    /// `xi^2 - xi^1 upsilon^1 <= 0`.
    NonpositiveAutocovariance,
    /// `upsilon^2 - (upsilon^1)^2 <= 0`, or a nonpositive implied mean or
    /// variance of the volume law.
    DegenerateVolumeVariance,
    /// The variance-scale equation produced `sigma^2 <= 0`.
    NonpositiveSigmaSquare,
    /// The autocorrelation ratio fell outside (0, 1).
    GammaOutOfRange,
}

/// Result of solving the estimating equations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub nu: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub zeta: f64,
    pub eta: f64,
    pub valid: bool,
    pub failure_reason: FailureReason,
    pub n: usize,
    /// The empirical moments the solution was computed from.
    #[serde(skip)]
    pub moments: Option<MomentSet>,
}

impl EstimateReport {
    fn failure(reason: FailureReason, moments: MomentSet) -> Self {
        Self {
            nu: 0.0,
            alpha: 0.0,
            lambda: 0.0,
            mu: 0.0,
            beta: 0.0,
            sigma: 0.0,
            rho: 0.0,
            zeta: 0.0,
            eta: 0.0,
            valid: false,
            failure_reason: reason,
            n: moments.n,
            moments: Some(moments),
        }
    }

    /// The estimate as a parameter vector, when valid.
    pub fn params(&self) -> Option<ModelParams> {
        self.valid.then_some(ModelParams {
            nu: self.nu,
            alpha: self.alpha,
            lambda: self.lambda,
            mu: self.mu,
            beta: self.beta,
            sigma: self.sigma,
            rho: self.rho,
        })
    }

    pub fn theta(&self) -> [f64; 7] {
        [
            self.nu,
            self.alpha,
            self.lambda,
            self.mu,
            self.beta,
            self.sigma,
            self.rho,
        ]
    }
}

/// The nine empirical moment averages of a sample with `n` returns and
/// `n + 1` volumes.
pub fn empirical_moments(x: &[f64], tau: &[f64]) -> Result<MomentSet> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    if tau.len() != n + 1 {
        return Err(Error::Data(format!(
            "tau must hold n + 1 = {} values, got {}",
            n + 1,
            tau.len()
        )));
    }
    let nf = n as f64;
    let cur = &tau[1..];
    let prev = &tau[..n];
    let mean = |it: &mut dyn Iterator<Item = f64>| compensated_sum(it) / nf;
    let xi = [
        mean(&mut cur.iter().copied()),
        mean(&mut cur.iter().zip(prev).map(|(a, b)| a * b)),
        mean(&mut cur.iter().map(|a| a * a)),
        mean(&mut x.iter().copied()),
        mean(&mut x.iter().zip(prev).map(|(a, b)| a * b)),
        mean(&mut x.iter().zip(cur).map(|(a, b)| a * b)),
        mean(&mut x.iter().map(|a| a * a)),
    ];
    let upsilon = [
        mean(&mut prev.iter().copied()),
        mean(&mut prev.iter().map(|a| a * a)),
    ];
    Ok(MomentSet { xi, upsilon, n })
}

/// Solves the estimating equations in closed form.
///
/// The chain is triangular: the volume equations give `gamma`, `zeta`,
/// `eta`, `lambda`; the return equations are then linear in `beta`, `rho`,
/// `mu`, `sigma^2`. Every component is the exact root of its equation given
/// the earlier ones, so the estimating functions vanish at the result to
/// machine precision for any sample (not only asymptotically).
pub fn solve(moments: &MomentSet, delta: f64) -> EstimateReport {
    let m = *moments;
    let [xi1, _, xi3, xi4, xi5, xi6, xi7] = m.xi;
    let [up1, up2] = m.upsilon;

    let lag_var = up2 - up1 * up1;
    if !(lag_var > 0.0) {
        return EstimateReport::failure(FailureReason::DegenerateVolumeVariance, m);
    }
    let autocov = m.xi[1] - xi1 * up1;
    if !(autocov > 0.0) {
        return EstimateReport::failure(FailureReason::NonpositiveAutocovariance, m);
    }
    let g = autocov / lag_var;
    if !(g < 1.0) {
        return EstimateReport::failure(FailureReason::GammaOutOfRange, m);
    }

    let zeta = (g * up1 - xi1) / (g - 1.0);
    // exact root of the squared-volume equation given (gamma, zeta)
    let eta = (xi3
        - g * g * up2
        - 2.0 * g * (1.0 - g) * zeta * up1
        - (1.0 - g) * (1.0 - g) * zeta * zeta)
        / (1.0 - g * g);
    if !(zeta > 0.0) || !(eta > 0.0) {
        return EstimateReport::failure(FailureReason::DegenerateVolumeVariance, m);
    }
    let lambda = -g.ln() / delta;
    let eps = (1.0 - g) / lambda;
    let d_me = delta - eps;

    let beta = (xi5 - up1 * xi4) / (eps * lag_var);
    // the return-mean equation eliminates mu from the cross-moment
    // equation; what is left is linear in rho with coefficient
    // 2 eps eta lambda
    let k_beta = eps * g * up2 + zeta * (eps * (1.0 - 2.0 * g) + delta * g) * up1
        - eps * up1 * xi1
        - zeta * d_me * xi1
        + lambda * eps * (eps * eta + zeta * zeta * d_me);
    let rho = (xi6 - xi1 * xi4 - beta * k_beta) / (2.0 * eps * eta * lambda);
    let mu =
        (-delta * lambda * rho * zeta - beta * (delta * zeta + eps * (up1 - zeta)) + xi4) / delta;
    // squared-return equation: everything except the sigma^2 block
    let r_rest = beta
        * beta
        * (eps * eps * up2
            + 2.0 * eps * zeta * d_me * up1
            + zeta * zeta * d_me * d_me
            + eta * (2.0 * delta - 3.0 * eps + g * eps) / lambda)
        + 2.0 * beta * mu * delta * (eps * up1 + zeta * d_me)
        + 2.0
            * beta
            * rho
            * (lambda * delta * zeta * eps * up1
                + 2.0 * eta * d_me
                + lambda * delta * zeta * zeta * d_me)
        + mu * mu * delta * delta
        + 2.0 * mu * rho * lambda * delta * delta * zeta
        + rho * rho * (2.0 * eta * lambda * delta + lambda * lambda * delta * delta * zeta * zeta);
    let b_n = delta * zeta + eps * (up1 - zeta);
    let sigma_sq = (xi7 - r_rest) / b_n;
    if !(sigma_sq > 0.0) {
        return EstimateReport::failure(FailureReason::NonpositiveSigmaSquare, m);
    }

    EstimateReport {
        nu: zeta * zeta / eta,
        alpha: zeta / eta,
        lambda,
        mu,
        beta,
        sigma: sigma_sq.sqrt(),
        rho,
        zeta,
        eta,
        valid: true,
        failure_reason: FailureReason::None,
        n: m.n,
        moments: Some(m),
    }
}

/// `empirical_moments` followed by `solve`.
pub fn estimate(x: &[f64], tau: &[f64], delta: f64) -> Result<EstimateReport> {
    Ok(solve(&empirical_moments(x, tau)?, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{conditional_moment, theoretical_moments};
    use crate::params::{GridConstants, ModelParams};
    use crate::simulate::{simulate_gamma_ou, RngStream};
    use rand::Rng;
    use rand::SeedableRng;

    fn reference() -> ModelParams {
        ModelParams::new(6.17, 1.42, 177.95, 0.435, -0.015, 0.087, -0.00056).unwrap()
    }

    #[test]
    fn hand_computed_moments() {
        let m = empirical_moments(&[0.1, 0.2], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.xi[0], 2.5);
        assert_eq!(m.xi[1], (2.0 * 1.0 + 3.0 * 2.0) / 2.0);
        assert_eq!(m.upsilon[0], 1.5);
        assert_eq!(m.xi[4], (0.1 * 1.0 + 0.2 * 2.0) / 2.0);
        assert!(empirical_moments(&[0.1], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn boundary_terms_relate_xi1_and_upsilon1() {
        let p = reference();
        let s = simulate_gamma_ou(&p, 500, 1.0 / 250.0, &RngStream::new(2, 0), false).unwrap();
        let m = empirical_moments(&s.x, &s.tau).unwrap();
        let n = s.n() as f64;
        let boundary = (s.tau[0] - s.tau[s.n()]) / n;
        assert!(((m.upsilon[0] - m.xi[0]) - boundary).abs() < 1e-12);
    }

    #[test]
    fn constant_volume_is_degenerate() {
        let m = empirical_moments(&[0.0, 0.0, 0.0], &[2.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(m.xi[0], 2.0);
        assert_eq!(m.xi[2], 4.0);
        let r = solve(&m, 1.0 / 250.0);
        assert!(!r.valid);
        assert_eq!(r.failure_reason, FailureReason::DegenerateVolumeVariance);
        assert_eq!(r.theta(), [0.0; 7]);
    }

    #[test]
    fn remaining_failure_reasons_are_reported() {
        let delta = 1.0 / 250.0;
        // lag-1 autocovariance exceeding the lagged variance pushes the
        // autocorrelation ratio past 1
        let base = {
            let p = reference();
            let s = simulate_gamma_ou(&p, 200, delta, &RngStream::new(14, 0), false).unwrap();
            empirical_moments(&s.x, &s.tau).unwrap()
        };
        let mut m = base;
        m.xi[1] = m.xi[0] * m.upsilon[0] + 2.0 * (m.upsilon[1] - m.upsilon[0] * m.upsilon[0]);
        let r = solve(&m, delta);
        assert!(!r.valid);
        assert_eq!(r.failure_reason, FailureReason::GammaOutOfRange);

        // an impossibly small squared-return moment drives sigma^2 negative
        let mut m = base;
        m.xi[6] = -1.0;
        let r = solve(&m, delta);
        assert!(!r.valid);
        assert_eq!(r.failure_reason, FailureReason::NonpositiveSigmaSquare);

        // negative autocovariance
        let mut m = base;
        m.xi[1] = m.xi[0] * m.upsilon[0] - 1.0;
        let r = solve(&m, delta);
        assert!(!r.valid);
        assert_eq!(r.failure_reason, FailureReason::NonpositiveAutocovariance);
    }

    #[test]
    fn plug_in_recovers_parameters_exactly() {
        // solving at the theoretical moments returns theta: 50 random draws
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let delta = 1.0 / 250.0;
        for _ in 0..50 {
            let p = ModelParams::new(
                10f64.powf(rng.random_range(-0.5..1.2)),
                10f64.powf(rng.random_range(-0.5..1.0)),
                10f64.powf(rng.random_range(0.5..2.6)),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.3..0.3),
                10f64.powf(rng.random_range(-2.0..0.0)),
                rng.random_range(-0.01..0.01),
            )
            .unwrap();
            let grid = GridConstants::new(p.lambda, delta).unwrap();
            let th = theoretical_moments(&p, &grid).unwrap();
            let r = solve(&th, delta);
            assert!(r.valid, "plug-in failed for {p:?}: {:?}", r.failure_reason);
            for (got, want) in r.theta().into_iter().zip(p.as_array()) {
                let rel = (got - want).abs() / want.abs().max(1e-12);
                assert!(rel < 1e-8, "{got} vs {want} for {p:?}");
            }
        }
    }

    #[test]
    fn estimating_equations_vanish_at_the_estimate() {
        let p = reference();
        let delta = 1.0 / 250.0;
        let s = simulate_gamma_ou(&p, 20_000, delta, &RngStream::new(8, 0), false).unwrap();
        let r = estimate(&s.x, &s.tau, delta).unwrap();
        assert!(r.valid);
        let hat = r.params().unwrap();
        let grid = GridConstants::new(hat.lambda, delta).unwrap();
        let m = r.moments.unwrap();
        // G_n^i(theta_hat) = xi_n^i - mean(f_i(tau_{k-1})) must vanish
        for i in 1..=7 {
            let mean_f = compensated_sum(
                s.tau[..s.n()]
                    .iter()
                    .map(|&t| conditional_moment(i, t, &hat, &grid).unwrap()),
            ) / s.n() as f64;
            let scale = m.xi[i - 1].abs().max(1e-6);
            assert!(
                (m.xi[i - 1] - mean_f).abs() / scale < 1e-8,
                "G^{i} residual too large: {} vs {}",
                m.xi[i - 1],
                mean_f
            );
        }
    }

    #[test]
    fn scaling_equivariance() {
        let p = reference();
        let delta = 1.0 / 250.0;
        let s = simulate_gamma_ou(&p, 4000, delta, &RngStream::new(21, 0), false).unwrap();
        let base = estimate(&s.x, &s.tau, delta).unwrap();
        let c = 3.7;
        let tau_scaled: Vec<f64> = s.tau.iter().map(|t| c * t).collect();
        let scaled = estimate(&s.x, &tau_scaled, delta).unwrap();
        assert!(base.valid && scaled.valid);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-14);
        assert!(rel(scaled.zeta, c * base.zeta) < 1e-9);
        assert!(rel(scaled.eta, c * c * base.eta) < 1e-9);
        assert!(rel(scaled.lambda, base.lambda) < 1e-9);
        assert!(rel(scaled.mu, base.mu) < 1e-9);
        assert!(rel(scaled.beta, base.beta / c) < 1e-9);
        assert!(rel(scaled.rho, base.rho / c) < 1e-9);
        assert!(rel(scaled.sigma, base.sigma / c.sqrt()) < 1e-9);
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let p = reference();
        let s = simulate_gamma_ou(&p, 500, 1.0 / 250.0, &RngStream::new(4, 0), false).unwrap();
        let r = estimate(&s.x, &s.tau, 1.0 / 250.0).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "nu",
            "alpha",
            "lambda",
            "mu",
            "beta",
            "sigma",
            "rho",
            "zeta",
            "eta",
            "valid",
            "failure_reason",
            "n",
        ] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
    }
}
