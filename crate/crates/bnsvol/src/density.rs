//! Cumulant functions of the one-period return and density recovery by
//! Fourier inversion.
//!
//! For the Gamma-OU law everything is closed form; the bivariate cumulants
//! reduce to rational/logarithmic expressions via the substitution
//! `v = exp(-lambda u)`. Complex logarithms are always evaluated as
//! differences of principal logs whose arguments stay in the right half
//! plane along the inversion contour `h = iy` (their real parts are
//! `alpha + (positive)` there), so the branch is continuous in `y`; the
//! quadrature route, which has no logarithms at all, cross-checks this on a
//! contour grid. The IG-OU law is supported through the quadrature route.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec;
use crate::moments::{theoretical_moments_generic, Generic};
use crate::numeric::quad;
use crate::params::{GridConstants, IgOuParams, LawKind, ModelParams, StationaryLaw};

/// Evaluates the cumulant functions of one observation interval.
#[derive(Debug, Clone)]
pub struct CumulantEvaluator {
    law: StationaryLaw,
    lambda: f64,
    mu: f64,
    beta: f64,
    sigma: f64,
    rho: f64,
    grid: GridConstants,
}

/// Density of the one-period return on a grid.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub x: Vec<f64>,
    pub pdf: Vec<f64>,
    /// Per-point absolute error target met by the quadrature.
    pub quadrature_tol: f64,
    /// Upper integration limit used for the inversion integral.
    pub truncation: f64,
}

impl DensityCurve {
    /// Writes `x,pdf,log_pdf` rows with full float precision.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,pdf,log_pdf")?;
        for (x, p) in self.x.iter().zip(&self.pdf) {
            writeln!(
                out,
                "{x:.16e},{p:.16e},{:.16e}",
                p.max(f64::MIN_POSITIVE).ln()
            )?;
        }
        Ok(())
    }
}

impl CumulantEvaluator {
    pub fn gamma_ou(params: &ModelParams, delta: f64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            law: params.stationary_law(),
            lambda: params.lambda,
            mu: params.mu,
            beta: params.beta,
            sigma: params.sigma,
            rho: params.rho,
            grid: GridConstants::new(params.lambda, delta)?,
        })
    }

    pub fn ig_ou(params: &IgOuParams, delta: f64) -> Result<Self> {
        Ok(Self {
            law: params.law,
            lambda: params.lambda,
            mu: params.mu,
            beta: params.beta,
            sigma: params.sigma,
            rho: params.rho,
            grid: GridConstants::new(params.lambda, delta)?,
        })
    }

    fn generic(&self) -> Generic {
        Generic::from_law(
            &self.law,
            self.lambda,
            self.mu,
            self.beta,
            self.sigma,
            self.rho,
        )
    }

    /// Real-part bound of the BDLP cumulant domain.
    fn bdlp_bound(&self) -> f64 {
        let (_, p2) = self.law.native_params();
        match self.law.kind {
            LawKind::GammaOu => p2,         // alpha
            LawKind::IgOu => p2 * p2 / 2.0, // gamma^2 / 2
        }
    }

    fn check_domain(&self, h: Complex64, what: &str) -> Result<()> {
        let bound = self.bdlp_bound();
        if h.re >= bound {
            return Err(Error::Domain(format!(
                "{what}: Re(h) = {} outside the cumulant domain (< {bound})",
                h.re
            )));
        }
        Ok(())
    }

    /// Cumulant of the BDLP at unit time: `nu h / (alpha - h)` for Gamma-OU,
    /// `h delta (gamma^2 - 2h)^{-1/2}` for IG-OU.
    pub fn cumulant_bdlp(&self, h: Complex64) -> Result<Complex64> {
        self.check_domain(h, "cumulant_bdlp")?;
        let (p1, p2) = self.law.native_params();
        Ok(match self.law.kind {
            LawKind::GammaOu => p1 * h / (Complex64::from(p2) - h),
            LawKind::IgOu => h * p1 * (Complex64::from(p2 * p2) - 2.0 * h).sqrt().inv(),
        })
    }

    /// Cumulant of the stationary volume law.
    pub fn cumulant_tau0(&self, h: Complex64) -> Result<Complex64> {
        self.check_domain(h, "cumulant_tau0")?;
        let (p1, p2) = self.law.native_params();
        Ok(match self.law.kind {
            LawKind::GammaOu => p1 * (Complex64::from(p2).ln() - (Complex64::from(p2) - h).ln()),
            LawKind::IgOu => {
                p1 * (Complex64::from(p2) - (Complex64::from(p2 * p2) - 2.0 * h).sqrt())
            }
        })
    }

    /// Joint cumulant of `(Z_1, U_1)`:
    /// `lambda * int_0^delta k_bdlp(h1 + h2 exp(-lambda (delta - s))) ds`.
    pub fn cumulant_z_u(&self, h1: Complex64, h2: Complex64) -> Result<Complex64> {
        // the argument is linear in the weight w in [gamma, 1]
        self.check_domain(h1 + h2 * self.grid.gamma_grid, "cumulant_z_u path")?;
        self.check_domain(h1 + h2, "cumulant_z_u path")?;
        if self.law.kind == LawKind::GammaOu {
            if let Some(v) = self.z_u_closed(h1, h2)? {
                return Ok(v);
            }
        }
        self.z_u_quad(h1, h2)
    }

    fn z_u_quad(&self, h1: Complex64, h2: Complex64) -> Result<Complex64> {
        let lambda = self.lambda;
        let delta = self.grid.delta;
        let (v, _) = quad::integrate(
            |s| self.cumulant_bdlp(h1 + h2 * (-lambda * (delta - s)).exp()),
            0.0,
            delta,
            1e-13 * (1.0 + h1.norm() + h2.norm()),
        )?;
        Ok(lambda * v)
    }

    /// Closed form of the `(Z_1, U_1)` integral for the Gamma law; `None`
    /// near the removable singularity `h1 -> alpha`.
    fn z_u_closed(&self, h1: Complex64, h2: Complex64) -> Result<Option<Complex64>> {
        let (nu, alpha) = self.law.native_params();
        let a = Complex64::from(alpha) - h1;
        if a.norm() < 1e-10 * alpha {
            return Ok(None);
        }
        let lam_d = self.lambda * self.grid.delta;
        let num = a - h2 * self.grid.gamma_grid;
        let den = a - h2;
        if num.norm() == 0.0 || den.norm() == 0.0 {
            return Ok(None);
        }
        Ok(Some(nu / a * (h1 * lam_d + alpha * (num.ln() - den.ln()))))
    }

    /// Joint cumulant of `(Y_1, Z_1)`:
    /// `k_tau0(h1 eps_lambda(delta)) +
    ///  lambda * int_0^delta k_bdlp(h1 eps_lambda(delta - s) + h2) ds`
    /// with `eps_lambda(t) = (1 - exp(-lambda t)) / lambda`.
    pub fn cumulant_y_z(&self, h1: Complex64, h2: Complex64) -> Result<Complex64> {
        let eps = self.grid.epsilon;
        // eps_lambda(delta - s) sweeps [0, eps]; the argument is linear in it
        self.check_domain(h2, "cumulant_y_z path")?;
        self.check_domain(h1 * eps + h2, "cumulant_y_z path")?;
        let head = self.cumulant_tau0(h1 * eps)?;
        if self.law.kind == LawKind::GammaOu {
            if let Some(tail) = self.y_z_closed(h1, h2)? {
                return Ok(head + tail);
            }
        }
        Ok(head + self.y_z_quad(h1, h2)?)
    }

    fn y_z_quad(&self, h1: Complex64, h2: Complex64) -> Result<Complex64> {
        let lambda = self.lambda;
        let delta = self.grid.delta;
        let (v, _) = quad::integrate(
            |s| {
                let eps_t = (1.0 - (-lambda * (delta - s)).exp()) / lambda;
                self.cumulant_bdlp(h1 * eps_t + h2)
            },
            0.0,
            delta,
            1e-13 * (1.0 + h1.norm() + h2.norm()),
        )?;
        Ok(lambda * v)
    }

    /// Closed form of the `(Y_1, Z_1)` integral for the Gamma law.
    fn y_z_closed(&self, h1: Complex64, h2: Complex64) -> Result<Option<Complex64>> {
        let (nu, alpha) = self.law.native_params();
        let lambda = self.lambda;
        let eps = self.grid.epsilon;
        let c = h1 / lambda + h2;
        let a = Complex64::from(alpha) - c;
        if a.norm() < 1e-10 * alpha {
            return Ok(None);
        }
        let num = Complex64::from(alpha) - h2 - h1 * eps;
        let den = Complex64::from(alpha) - h2;
        if num.norm() == 0.0 || den.norm() == 0.0 {
            return Ok(None);
        }
        let lam_d = lambda * self.grid.delta;
        Ok(Some(nu / a * (c * lam_d + alpha * (num.ln() - den.ln()))))
    }

    /// Cumulant of the one-period return:
    /// `h mu delta + k_{Y_1, Z_1}(beta h + sigma^2 h^2 / 2, rho h)`.
    ///
    /// Gamma-OU uses the closed form; IG-OU integrates the BDLP cumulant
    /// numerically.
    pub fn cumulant_x(&self, h: Complex64) -> Result<Complex64> {
        let w = self.beta * h + 0.5 * self.sigma * self.sigma * h * h;
        let drift = h * self.mu * self.grid.delta;
        Ok(drift + self.cumulant_y_z(w, self.rho * h)?)
    }

    /// Same value through the explicitly numerical route (no closed forms);
    /// kept as the cross-check for branch handling.
    pub fn cumulant_x_quad(&self, h: Complex64) -> Result<Complex64> {
        let w = self.beta * h + 0.5 * self.sigma * self.sigma * h * h;
        let h2 = self.rho * h;
        let eps = self.grid.epsilon;
        self.check_domain(h2, "cumulant_x path")?;
        self.check_domain(w * eps + h2, "cumulant_x path")?;
        let head = self.cumulant_tau0(w * eps)?;
        Ok(h * self.mu * self.grid.delta + head + self.y_z_quad(w, h2)?)
    }

    /// Theoretical mean and variance of the one-period return.
    pub fn return_mean_var(&self) -> Result<(f64, f64)> {
        let th = theoretical_moments_generic(&self.generic(), &self.grid)?;
        Ok((th.xi[3], th.xi[6] - th.xi[3] * th.xi[3]))
    }

    /// Return density by Fourier inversion of the cumulant:
    /// `f(x) = (1/pi) int_0^inf Re(exp(k(iy) - ixy)) dy`.
    ///
    /// The truncation point is found by a doubling search on the decay of
    /// `|exp(k(iy))|` and the power-law tail remainder joins the per-point
    /// error budget `quad_tol`.
    pub fn density(&self, x_grid: &[f64], quad_tol: f64) -> Result<DensityCurve> {
        if !(quad_tol > 0.0) {
            return Err(Error::Parameter("quad_tol must be > 0".into()));
        }
        let (_, var) = self.return_mean_var()?;
        if !(var > 0.0) {
            return Err(Error::Numerical("return variance must be positive".into()));
        }
        let mut y_max = 8.0 / var.sqrt();
        let mut tail;
        loop {
            let re_k = self.cumulant_x(Complex64::new(0.0, y_max))?.re;
            let mag = re_k.exp();
            if mag < quad_tol * 1e-2 {
                let re_half = self.cumulant_x(Complex64::new(0.0, 0.5 * y_max))?.re;
                let p = (re_half - re_k) / std::f64::consts::LN_2;
                if p > 1.0 {
                    tail = mag * y_max / (p - 1.0) / std::f64::consts::PI;
                    if tail < 0.5 * quad_tol {
                        break;
                    }
                }
            }
            y_max *= 2.0;
            if y_max > 1e12 {
                return Err(Error::Numerical(
                    "inversion integrand does not decay; truncation search failed".into(),
                ));
            }
        }
        let int_tol = 0.5 * quad_tol * std::f64::consts::PI;
        let pdf_or: Vec<Result<f64>> = exec::map_indexed(x_grid.len(), |ix| {
            let x = x_grid[ix];
            // seed the adaptive rule with panels no wider than about one
            // oscillation period of exp(-ixy), where its error estimate is
            // reliable
            let segments =
                ((x.abs() * y_max / std::f64::consts::PI).ceil() as usize).clamp(1, 8192);
            let mut acc = 0.0;
            for seg in 0..segments {
                let a = y_max * seg as f64 / segments as f64;
                let b = y_max * (seg + 1) as f64 / segments as f64;
                let (v, _) = quad::integrate(
                    |y| {
                        let k = self.cumulant_x(Complex64::new(0.0, y))?;
                        Ok((k - Complex64::new(0.0, x * y)).exp().re)
                    },
                    a,
                    b,
                    int_tol / segments as f64,
                )?;
                acc += v;
            }
            Ok(acc / std::f64::consts::PI)
        });
        let mut pdf = Vec::with_capacity(x_grid.len());
        for v in pdf_or {
            pdf.push(v?);
        }
        Ok(DensityCurve {
            x: x_grid.to_vec(),
            pdf,
            quadrature_tol: quad_tol,
            truncation: y_max,
        })
    }
}

/// Convenience wrapper: Gamma-OU return density on a grid.
pub fn density_x(
    x_grid: &[f64],
    params: &ModelParams,
    delta: f64,
    quad_tol: f64,
) -> Result<DensityCurve> {
    CumulantEvaluator::gamma_ou(params, delta)?.density(x_grid, quad_tol)
}
