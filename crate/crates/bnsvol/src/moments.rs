//! Conditional moment functions of the discretely observed model and their
//! stationary limits.
//!
//! `f^i(iota) = E[Xi_1^i | tau_0 = iota]` for the seven statistics
//! `Xi = (tau_1, tau_1 tau_0, tau_1^2, X_1, X_1 tau_0, X_1 tau_1, X_1^2)`.
//! Every `f^i` is a polynomial of degree <= 2 in `iota`; the coefficients
//! are exact functions of the parameters, derived from the first two moments
//! of the BDLP functionals over one observation interval:
//!
//! ```text
//! E[U_1] = (1-g) z            Var[U_1] = (1-g^2) et
//! E[Z_1] = l D z              Var[Z_1] = 2 et l D
//! E[S_1] = z (D-e)            Cov[Z_1, U_1] = 2 e et l
//! Cov[S_1, U_1] = et l e^2    Cov[S_1, Z_1] = 2 et (D-e)
//! Var[S_1] = et (2D - 3e + g e) / l
//! ```
//!
//! with `g = exp(-l D)`, `e = (1-g)/l`, `z` and `et` the stationary mean and
//! variance. These identities hold for any square-integrable subordinator
//! BDLP, so the same coefficients serve the Gamma-OU and IG-OU variants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{GridConstants, LawKind, ModelParams, StationaryLaw};

/// The seven moment statistics plus the two lagged volume moments.
///
/// `n` is the sample size behind an empirical set; 0 marks a theoretical set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// `xi[0..7]`: means of `tau_i, tau_i tau_{i-1}, tau_i^2, X_i,
    /// X_i tau_{i-1}, X_i tau_i, X_i^2`.
    pub xi: [f64; 7],
    /// `upsilon[0..2]`: means of `tau_{i-1}, tau_{i-1}^2`.
    pub upsilon: [f64; 2],
    pub n: usize,
}

/// Generic parameter bundle used internally by the moment formulas.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Generic {
    pub zeta: f64,
    pub eta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl Generic {
    pub fn from_params(p: &ModelParams) -> Self {
        Self {
            zeta: p.zeta(),
            eta: p.eta(),
            lambda: p.lambda,
            mu: p.mu,
            beta: p.beta,
            sigma: p.sigma,
            rho: p.rho,
        }
    }

    pub fn from_law(
        law: &StationaryLaw,
        lambda: f64,
        mu: f64,
        beta: f64,
        sigma: f64,
        rho: f64,
    ) -> Self {
        Self {
            zeta: law.zeta,
            eta: law.eta,
            lambda,
            mu,
            beta,
            sigma,
            rho,
        }
    }
}

/// Coefficients `(c0, c1, c2)` of `f^i(iota) = c0 + c1 iota + c2 iota^2`.
pub(crate) fn f_coeffs(i: usize, p: &Generic, grid: &GridConstants) -> Result<[f64; 3]> {
    let (z, et, l) = (p.zeta, p.eta, p.lambda);
    let (mu, b, s, r) = (p.mu, p.beta, p.sigma, p.rho);
    let d = grid.delta;
    let g = grid.gamma_grid;
    let e = grid.epsilon;
    let c = match i {
        1 => [(1.0 - g) * z, g, 0.0],
        2 => [0.0, (1.0 - g) * z, g],
        3 => [
            (1.0 - g) * (1.0 - g) * z * z + (1.0 - g * g) * et,
            2.0 * g * (1.0 - g) * z,
            g * g,
        ],
        4 => [d * mu + b * z * (d - e) + d * l * r * z, b * e, 0.0],
        5 => [0.0, d * mu + b * z * (d - e) + d * l * r * z, b * e],
        6 => [
            mu * d * z * (1.0 - g)
                + b * l * e * (e * et + z * z * (d - e))
                + r * l * (2.0 * e * et + l * d * e * z * z),
            mu * d * g + b * z * (e * (1.0 - 2.0 * g) + d * g) + r * l * d * g * z,
            b * e * g,
        ],
        7 => [
            b * b * (z * z * (d - e) * (d - e) + et * (2.0 * d - 3.0 * e + g * e) / l)
                + 2.0 * b * mu * d * z * (d - e)
                + 2.0 * b * r * (2.0 * et * (d - e) + l * d * z * z * (d - e))
                + mu * mu * d * d
                + 2.0 * mu * r * l * d * d * z
                + r * r * (2.0 * et * l * d + l * l * d * d * z * z)
                + s * s * z * (d - e),
            2.0 * b * b * e * z * (d - e)
                + 2.0 * b * mu * d * e
                + 2.0 * b * r * l * d * z * e
                + s * s * e,
            b * b * e * e,
        ],
        _ => {
            return Err(Error::Domain(format!(
                "conditional moment index must be in 1..=7, got {i}"
            )))
        }
    };
    Ok(c)
}

/// Conditional moment `f^i(iota) = E[Xi_1^i | tau_0 = iota]`.
pub fn conditional_moment(
    i: usize,
    iota: f64,
    params: &ModelParams,
    grid: &GridConstants,
) -> Result<f64> {
    params.validate()?;
    if iota < 0.0 {
        return Err(Error::Domain(format!("iota must be >= 0, got {iota}")));
    }
    let c = f_coeffs(i, &Generic::from_params(params), grid)?;
    Ok(c[0] + c[1] * iota + c[2] * iota * iota)
}

/// Stationary limits of the nine empirical moments.
pub fn theoretical_moments(params: &ModelParams, grid: &GridConstants) -> Result<MomentSet> {
    params.validate()?;
    theoretical_moments_generic(&Generic::from_params(params), grid)
}

pub(crate) fn theoretical_moments_generic(p: &Generic, grid: &GridConstants) -> Result<MomentSet> {
    let (z, et, l) = (p.zeta, p.eta, p.lambda);
    let (mu, b, s, r) = (p.mu, p.beta, p.sigma, p.rho);
    let d = grid.delta;
    let g = grid.gamma_grid;
    let e = grid.epsilon;
    let drift = mu + l * r * z;
    let xi = [
        z,
        z * z + g * et,
        z * z + et,
        d * (mu + (b + l * r) * z),
        d * z * drift + b * (e * et + d * z * z),
        2.0 * e * et * l * r + d * z * drift + b * (e * et + d * z * z),
        b * b * (2.0 * d * et - 2.0 * e * et + d * d * l * z * z) / l
            + 2.0 * b * (2.0 * d * et * r - 2.0 * e * et * r + d * d * z * drift)
            + d * (2.0 * et * l * r * r + s * s * z + d * drift * drift),
    ];
    Ok(MomentSet {
        xi,
        upsilon: [z, z * z + et],
        n: 0,
    })
}

/// Raw moment `E[tau_0^k]` of the stationary law, supported for `k <= 8`.
pub fn stationary_raw_moment(law: &StationaryLaw, k: usize) -> Result<f64> {
    if k > 8 {
        return Err(Error::Domain(format!(
            "stationary raw moments supported up to order 8, got {k}"
        )));
    }
    match law.kind {
        LawKind::GammaOu => {
            // E[tau^k] = nu (nu+1) ... (nu+k-1) / alpha^k
            let (nu, alpha) = law.native_params();
            let mut m = 1.0;
            for j in 0..k {
                m *= (nu + j as f64) / alpha;
            }
            Ok(m)
        }
        LawKind::IgOu => {
            // cumulants of IG(delta, gamma): kappa_m = delta (2m-3)!! / gamma^(2m-1)
            let (delta, gamma_ig) = law.native_params();
            let mut kappa = [0.0; 9];
            let mut double_fact = 1.0; // (2m-3)!! with (-1)!! = 1
            for (m, kap) in kappa.iter_mut().enumerate().skip(1) {
                if m >= 2 {
                    double_fact *= (2 * m - 3) as f64;
                }
                *kap = delta * double_fact / gamma_ig.powi(2 * m as i32 - 1);
            }
            // moments from cumulants: m_k = sum_j C(k-1, j) kappa_{j+1} m_{k-1-j}
            let mut moments = [0.0; 9];
            moments[0] = 1.0;
            for k_cur in 1..=k {
                let mut acc = 0.0;
                let mut binom = 1.0;
                for j in 0..k_cur {
                    acc += binom * kappa[j + 1] * moments[k_cur - 1 - j];
                    binom *= (k_cur - 1 - j) as f64 / (j + 1) as f64;
                }
                moments[k_cur] = acc;
            }
            Ok(moments[k])
        }
    }
}

/// Stationary autocorrelation of the volume process at lag `h`:
/// `gamma_grid^h = exp(-lambda delta h)`.
pub fn theoretical_acf_tau(params: &ModelParams, lag_h: usize, grid: &GridConstants) -> f64 {
    let _ = params;
    grid.gamma_grid.powi(lag_h as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::StationaryLaw;

    fn reference() -> (ModelParams, GridConstants) {
        let p = ModelParams::new(6.17, 1.42, 177.95, 0.435, -0.015, 0.087, -0.00056).unwrap();
        let g = GridConstants::new(p.lambda, 1.0 / 250.0).unwrap();
        (p, g)
    }

    #[test]
    fn f1_fixed_point_at_zeta() {
        let (p, g) = reference();
        let z = p.zeta();
        assert!((conditional_moment(1, z, &p, &g).unwrap() - z).abs() < 1e-12);
        // and for a different grid
        let g2 = GridConstants::new(p.lambda, 1.0 / 52.0).unwrap();
        assert!((conditional_moment(1, z, &p, &g2).unwrap() - z).abs() < 1e-12);
    }

    #[test]
    fn f1_at_zero_matches_frozen_value() {
        let (p, g) = reference();
        // (1 - e^(-177.95/250)) * 6.17/1.42
        let v = conditional_moment(1, 0.0, &p, &g).unwrap();
        assert!((v - 2.212_683_514_710_998).abs() < 1e-12, "f1(0) = {v}");
    }

    #[test]
    fn invalid_index_is_domain_error() {
        let (p, g) = reference();
        assert!(conditional_moment(0, 1.0, &p, &g).is_err());
        assert!(conditional_moment(8, 1.0, &p, &g).is_err());
        assert!(conditional_moment(1, -0.5, &p, &g).is_err());
    }

    #[test]
    fn tower_property_for_all_moments() {
        // E[f^i(tau_0)] against the Gamma stationary moments equals xi^i
        let (p, g) = reference();
        let law = p.stationary_law();
        let m1 = stationary_raw_moment(&law, 1).unwrap();
        let m2 = stationary_raw_moment(&law, 2).unwrap();
        let th = theoretical_moments(&p, &g).unwrap();
        let gen = Generic::from_params(&p);
        for i in 1..=7 {
            let c = f_coeffs(i, &gen, &g).unwrap();
            let ef = c[0] + c[1] * m1 + c[2] * m2;
            let rel = (ef - th.xi[i - 1]).abs() / th.xi[i - 1].abs().max(1e-30);
            assert!(
                rel < 1e-10,
                "tower property fails for f{i}: {ef} vs {}",
                th.xi[i - 1]
            );
        }
    }

    #[test]
    fn theoretical_moment_values() {
        let (p, g) = reference();
        let th = theoretical_moments(&p, &g).unwrap();
        // stationary volume mean 6.17/1.42
        assert!((th.xi[0] - 4.345_070_422_535_211).abs() < 1e-12);
        assert!((th.upsilon[0] - th.xi[0]).abs() < 1e-15);
        assert!((th.upsilon[1] - th.xi[2]).abs() < 1e-15);
        assert_eq!(th.n, 0);
        // drift-only mean return
        let p2 = ModelParams::new(6.17, 1.42, 177.95, 1.0, 0.0, 0.087, 0.0).unwrap();
        let th2 = theoretical_moments(&p2, &g).unwrap();
        assert!((th2.xi[3] - 1.0 / 250.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_variance_is_nonnegative() {
        let (p, g) = reference();
        let z = p.zeta();
        for k in 0..=100 {
            let iota = 10.0 * z * k as f64 / 100.0;
            let f1 = conditional_moment(1, iota, &p, &g).unwrap();
            let f3 = conditional_moment(3, iota, &p, &g).unwrap();
            assert!(
                f3 - f1 * f1 >= 0.0,
                "negative conditional variance at {iota}"
            );
        }
    }

    #[test]
    fn moments_are_quadratic_in_iota() {
        // second finite difference constant over iota for every i
        let (p, g) = reference();
        let h = 0.5;
        for i in 1..=7 {
            let second = |iota: f64| {
                let a = conditional_moment(i, iota - h, &p, &g).unwrap();
                let b = conditional_moment(i, iota, &p, &g).unwrap();
                let c = conditional_moment(i, iota + h, &p, &g).unwrap();
                (a - 2.0 * b + c) / (h * h)
            };
            let d0 = second(1.0);
            for iota in [2.0, 5.0, 17.0] {
                assert!(
                    (second(iota) - d0).abs() <= 1e-8 * d0.abs().max(1.0),
                    "f{i} second difference varies"
                );
            }
        }
    }

    #[test]
    fn gamma_raw_moments() {
        let law = StationaryLaw::gamma_ou(6.17, 1.42).unwrap();
        assert_eq!(stationary_raw_moment(&law, 0).unwrap(), 1.0);
        assert!((stationary_raw_moment(&law, 1).unwrap() - 4.345_070_422_535_211).abs() < 1e-12);
        // nu (nu+1) / alpha^2 = zeta^2 + eta
        assert!((stationary_raw_moment(&law, 2).unwrap() - 21.939_545_725_054_55).abs() < 1e-11);
        assert!(stationary_raw_moment(&law, 9).is_err());
    }

    #[test]
    fn ig_raw_moments_match_closed_forms() {
        let law = StationaryLaw::ig_ou(2.0, 1.3).unwrap();
        let (delta, gam) = law.native_params();
        let m1 = delta / gam;
        let m2 = delta / gam.powi(3) + (delta / gam).powi(2);
        let m3 =
            3.0 * delta / gam.powi(5) + 3.0 * delta * delta / gam.powi(4) + (delta / gam).powi(3);
        assert!((stationary_raw_moment(&law, 1).unwrap() - m1).abs() < 1e-13 * m1);
        assert!((stationary_raw_moment(&law, 2).unwrap() - m2).abs() < 1e-13 * m2);
        assert!((stationary_raw_moment(&law, 3).unwrap() - m3).abs() < 1e-13 * m3);
    }

    #[test]
    fn acf_is_geometric() {
        let (p, g) = reference();
        assert_eq!(theoretical_acf_tau(&p, 0, &g), 1.0);
        let r1 = theoretical_acf_tau(&p, 1, &g);
        assert!((r1 - 0.490_760_033_891_472_05).abs() < 1e-15);
        let mut prev = 1.0;
        for h in 1..40 {
            let r = theoretical_acf_tau(&p, h, &g);
            assert!(r < prev && r > 0.0);
            prev = r;
        }
        assert!(theoretical_acf_tau(&p, 200, &g) < 1e-60);
    }
}
