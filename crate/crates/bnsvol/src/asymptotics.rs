//! Sandwich asymptotic covariance of the estimator.
//!
//! `T = A^{-1} Upsilon A^{-T}` with `A_{ij} = E[d f^i / d theta_j (tau_0)]`
//! and `Upsilon_{ij} = E[Cov(Xi_1^i, Xi_1^j | tau_0)]`. `A` has closed-form
//! entries (the `f^i` are quadratics in `tau_0` with smooth coefficients);
//! `Upsilon` is estimated either by nested Monte Carlo at a given parameter
//! (outer draws of `tau_0` from the stationary law, inner exact conditional
//! draws) or by the outer-product plug-in on observed data.

use nalgebra::SMatrix;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::moments::{f_coeffs, Generic};
use crate::numeric::sum::compensated_sum;
use crate::params::{GridConstants, ModelParams};
use crate::simulate::{ConditionalSampler, RngStream};

pub type Matrix7 = SMatrix<f64, 7, 7>;

/// Condition-number ceiling beyond which `A` is reported as singular;
/// the volume-law coordinates are strongly collinear, so this is checked
/// rather than assumed.
pub const MAX_CONDITION: f64 = 1e12;

/// How a [`SandwichReport`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SandwichMethod {
    /// Nested Monte Carlo at a given parameter vector.
    TheoreticalMc,
    /// Outer-product plug-in evaluated on a data sample.
    EmpiricalPlugin,
}

/// Row-major matrix payload for serialized reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixPayload {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix7> for MatrixPayload {
    fn from(m: &Matrix7) -> Self {
        let mut data = Vec::with_capacity(49);
        for i in 0..7 {
            for j in 0..7 {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: 7,
            cols: 7,
            data,
        }
    }
}

/// Asymptotic covariance report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    pub a: MatrixPayload,
    pub upsilon: MatrixPayload,
    pub t: MatrixPayload,
    /// Asymptotic standard deviations `sqrt(diag(T))`; divide by `sqrt(n)`
    /// for finite-sample standard errors.
    pub s: [f64; 7],
    /// Correlation matrix of the estimator.
    pub r: MatrixPayload,
    pub method: SandwichMethod,
    /// Condition number of `A`.
    pub cond_a: f64,
    /// `s / sqrt(n)` when the report was computed from a sample of size `n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<[f64; 7]>,
    #[serde(skip)]
    pub t_matrix: Matrix7,
}

/// Analytic gradient of `E[f^i(tau_0, theta)]` in `theta` with the
/// stationary moments `(m1, m2)` of `tau_0` held fixed.
///
/// Order: `(nu, alpha, lambda, mu, beta, sigma, rho)`. The `(zeta, eta)`
/// partials are chained through `zeta = nu/alpha`, `eta = nu/alpha^2`; the
/// `lambda` partial includes the grid dependence `gamma = exp(-lambda
/// delta)`, `epsilon = (1 - gamma)/lambda`.
fn ef_gradient(i: usize, params: &ModelParams, grid: &GridConstants, m1: f64, m2: f64) -> [f64; 7] {
    let p = Generic::from_params(params);
    let (z, et, l) = (p.zeta, p.eta, p.lambda);
    let (mu, b, s, r) = (p.mu, p.beta, p.sigma, p.rho);
    let d = grid.delta;
    let g = grid.gamma_grid;
    let e = grid.epsilon;
    let dg = -d * g;
    let de = (d * g - e) / l;

    // partials with respect to (zeta, eta, lambda, mu, beta, sigma, rho)
    let (dz, det, dl, dmu, db, ds, dr) = match i {
        1 => (1.0 - g, 0.0, dg * (m1 - z), 0.0, 0.0, 0.0, 0.0),
        2 => ((1.0 - g) * m1, 0.0, dg * (m2 - z * m1), 0.0, 0.0, 0.0, 0.0),
        3 => (
            2.0 * (1.0 - g) * (1.0 - g) * z + 2.0 * g * (1.0 - g) * m1,
            1.0 - g * g,
            dg * (-2.0 * (1.0 - g) * z * z - 2.0 * g * et
                + 2.0 * (1.0 - 2.0 * g) * z * m1
                + 2.0 * g * m2),
            0.0,
            0.0,
            0.0,
            0.0,
        ),
        4 => (
            b * (d - e) + d * l * r,
            0.0,
            b * de * (m1 - z) + d * r * z,
            d,
            z * (d - e) + e * m1,
            0.0,
            d * l * z,
        ),
        5 => (
            (b * (d - e) + d * l * r) * m1,
            0.0,
            (d * r * z - b * z * de) * m1 + b * de * m2,
            d * m1,
            z * (d - e) * m1 + e * m2,
            0.0,
            d * l * z * m1,
        ),
        6 => {
            let dz = mu * d * (1.0 - g)
                + 2.0 * b * l * e * z * (d - e)
                + 2.0 * r * l * l * d * e * z
                + (b * (e * (1.0 - 2.0 * g) + d * g) + r * l * d * g) * m1;
            let det = b * l * e * e + 2.0 * r * l * e;
            let dmu = d * z * (1.0 - g) + d * g * m1;
            let db = l * e * (e * et + z * z * (d - e))
                + z * (e * (1.0 - 2.0 * g) + d * g) * m1
                + e * g * m2;
            let dr = l * (2.0 * e * et + l * d * e * z * z) + l * d * g * z * m1;
            let dl = -mu * d * z * dg
                + b * ((e + l * de) * (e * et + z * z * (d - e)) + l * e * de * (et - z * z))
                + r * ((2.0 * e * et + l * d * e * z * z)
                    + l * (2.0 * de * et + d * z * z * (e + l * de)))
                + (mu * d * dg
                    + b * z * (de * (1.0 - 2.0 * g) - 2.0 * e * dg + d * dg)
                    + r * d * z * (g + l * dg))
                    * m1
                + b * (de * g + e * dg) * m2;
            (dz, det, dl, dmu, db, 0.0, dr)
        }
        7 => {
            let shape = 2.0 * d - 3.0 * e + g * e; // eta-coefficient kernel of Var[S_1] * lambda
            let dz = 2.0 * b * b * z * (d - e) * (d - e)
                + 2.0 * b * mu * d * (d - e)
                + 4.0 * b * r * l * d * z * (d - e)
                + 2.0 * mu * r * l * d * d
                + 2.0 * r * r * l * l * d * d * z
                + s * s * (d - e)
                + (2.0 * b * b * e * (d - e) + 2.0 * b * r * l * d * e) * m1;
            let det = b * b * shape / l + 4.0 * b * r * (d - e) + 2.0 * r * r * l * d;
            let dmu = 2.0 * b * d * z * (d - e)
                + 2.0 * mu * d * d
                + 2.0 * r * l * d * d * z
                + 2.0 * b * d * e * m1;
            let db = 2.0 * b * z * z * (d - e) * (d - e)
                + 2.0 * b * et * shape / l
                + 2.0 * mu * d * z * (d - e)
                + 2.0 * r * (2.0 * et * (d - e) + l * d * z * z * (d - e))
                + (4.0 * b * e * z * (d - e) + 2.0 * mu * d * e + 2.0 * r * l * d * z * e) * m1
                + 2.0 * b * e * e * m2;
            let ds = 2.0 * s * z * (d - e) + 2.0 * s * e * m1;
            let dr = 2.0 * b * (2.0 * et * (d - e) + l * d * z * z * (d - e))
                + 2.0 * mu * l * d * d * z
                + 2.0 * r * (2.0 * et * l * d + l * l * d * d * z * z)
                + 2.0 * b * l * d * z * e * m1;
            let dl = -2.0 * b * b * z * z * (d - e) * de
                + b * b * et * ((-3.0 * de + dg * e + g * de) * l - shape) / (l * l)
                - 2.0 * b * mu * d * z * de
                + 2.0 * b * r * (-2.0 * et * de + d * z * z * (d - e - l * de))
                + 2.0 * mu * r * d * d * z
                + r * r * (2.0 * et * d + 2.0 * l * d * d * z * z)
                - s * s * z * de
                + (2.0 * b * b * z * de * (d - 2.0 * e)
                    + 2.0 * b * mu * d * de
                    + 2.0 * b * r * d * z * (e + l * de)
                    + s * s * de)
                    * m1
                + 2.0 * b * b * e * de * m2;
            (dz, det, dl, dmu, db, ds, dr)
        }
        _ => unreachable!("index checked by caller"),
    };

    // chain (zeta, eta) -> (nu, alpha)
    let alpha = params.alpha;
    let nu = params.nu;
    let d_nu = dz / alpha + det / (alpha * alpha);
    let d_alpha = -nu * dz / (alpha * alpha) - 2.0 * nu * det / (alpha * alpha * alpha);
    [d_nu, d_alpha, dl, dmu, db, ds, dr]
}

fn a_matrix_with_moments(params: &ModelParams, grid: &GridConstants, m1: f64, m2: f64) -> Matrix7 {
    let mut a = Matrix7::zeros();
    for i in 1..=7 {
        let row = ef_gradient(i, params, grid, m1, m2);
        for j in 0..7 {
            a[(i - 1, j)] = row[j];
        }
    }
    a
}

/// Expected Jacobian `A(theta)` under the stationary law of `theta`.
pub fn a_matrix(params: &ModelParams, grid: &GridConstants) -> Result<Matrix7> {
    params.validate()?;
    let law = params.stationary_law();
    let m1 = crate::moments::stationary_raw_moment(&law, 1)?;
    let m2 = crate::moments::stationary_raw_moment(&law, 2)?;
    Ok(a_matrix_with_moments(params, grid, m1, m2))
}

fn xi_vector(x: f64, tau1: f64, tau0: f64) -> [f64; 7] {
    [tau1, tau1 * tau0, tau1 * tau1, x, x * tau0, x * tau1, x * x]
}

/// Nested Monte Carlo estimate of `Upsilon`.
///
/// Outer draws of `tau_0` come from the stationary law, each followed by
/// `n_inner` exact conditional draws; the unbiased conditional covariance is
/// averaged over the outer draws. Outer draws run in parallel on their own
/// derived streams and are reduced in index order, so the result does not
/// depend on the thread count.
pub fn upsilon_mc(
    params: &ModelParams,
    grid: &GridConstants,
    n_outer: usize,
    n_inner: usize,
    stream: &RngStream,
) -> Result<Matrix7> {
    params.validate()?;
    if n_outer < 2 || n_inner < 2 {
        return Err(Error::Domain(
            "upsilon_mc needs n_outer >= 2 and n_inner >= 2".into(),
        ));
    }
    let p = *params;
    let grid = *grid;
    let delta = grid.delta;
    let base_seed = stream
        .seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.stream_id.wrapping_add(1)));
    let gen = Generic::from_params(&p);
    let mut coeffs = [[0.0; 3]; 7];
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = f_coeffs(i + 1, &gen, &grid)?;
    }

    let covs: Vec<Result<Matrix7>> = exec::map_indexed(n_outer, move |o| {
        let mut rng = RngStream::new(base_seed, o as u64).rng();
        let stationary = Gamma::new(p.nu, 1.0 / p.alpha)
            .map_err(|e| Error::Parameter(format!("stationary law: {e}")))?;
        let iota = stationary.sample(&mut rng);
        let mut sampler = ConditionalSampler::new(&p, delta)?;
        // center each draw on the exact conditional mean f^i(iota)
        let mut f = [0.0; 7];
        for i in 0..7 {
            f[i] = coeffs[i][0] + coeffs[i][1] * iota + coeffs[i][2] * iota * iota;
        }
        let mut sum = [0.0; 7];
        let mut sum_outer = Matrix7::zeros();
        for _ in 0..n_inner {
            let (x, tau1) = sampler.draw(iota, &mut rng);
            let xi = xi_vector(x, tau1, iota);
            let mut d = [0.0; 7];
            for i in 0..7 {
                d[i] = xi[i] - f[i];
                sum[i] += d[i];
            }
            for i in 0..7 {
                for j in i..7 {
                    sum_outer[(i, j)] += d[i] * d[j];
                }
            }
        }
        let nf = n_inner as f64;
        let mut cov = Matrix7::zeros();
        for i in 0..7 {
            for j in i..7 {
                let c = (sum_outer[(i, j)] - sum[i] * sum[j] / nf) / (nf - 1.0);
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        Ok(cov)
    });

    let mut total = Matrix7::zeros();
    for c in covs {
        total += c?;
    }
    let mut ups = total / n_outer as f64;
    // symmetrize and check positive semidefiniteness
    ups = (ups + ups.transpose()) * 0.5;
    check_psd(&ups, "Upsilon")?;
    Ok(ups)
}

fn check_psd(m: &Matrix7, what: &str) -> Result<()> {
    let eig = m.symmetric_eigenvalues();
    let min = eig.min();
    let trace = m.trace();
    if min < -1e-8 * trace.abs() {
        return Err(Error::Numerical(format!(
            "{what} is not positive semidefinite (min eigenvalue {min:.3e}, trace {trace:.3e})"
        )));
    }
    Ok(())
}

fn invert_with_condition(a: &Matrix7) -> Result<(Matrix7, f64)> {
    let svd = a.svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "A is numerically singular (condition number {cond:.3e})"
        )));
    }
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::Numerical("A is not invertible".into()))?;
    Ok((inv, cond))
}

fn build_report(
    a: Matrix7,
    ups: Matrix7,
    method: SandwichMethod,
    n: Option<usize>,
) -> Result<SandwichReport> {
    let (a_inv, cond_a) = invert_with_condition(&a)?;
    let mut t = a_inv * ups * a_inv.transpose();
    t = (t + t.transpose()) * 0.5;
    check_psd(&t, "T")?;
    let mut s = [0.0; 7];
    for i in 0..7 {
        let d = t[(i, i)];
        if d <= 0.0 {
            return Err(Error::Numerical(format!(
                "T has nonpositive diagonal entry {d:.3e} at {i}"
            )));
        }
        s[i] = d.sqrt();
    }
    let r = correlation_from_t(&t)?;
    let standard_errors = n.map(|n| {
        let root = (n as f64).sqrt();
        let mut se = [0.0; 7];
        for i in 0..7 {
            se[i] = s[i] / root;
        }
        se
    });
    Ok(SandwichReport {
        a: (&a).into(),
        upsilon: (&ups).into(),
        t: (&t).into(),
        s,
        r: (&r).into(),
        method,
        cond_a,
        standard_errors,
        t_matrix: t,
    })
}

/// Sandwich covariance at a given parameter vector via nested Monte Carlo.
pub fn sandwich_theoretical(
    params: &ModelParams,
    grid: &GridConstants,
    n_outer: usize,
    n_inner: usize,
    stream: &RngStream,
) -> Result<SandwichReport> {
    let a = a_matrix(params, grid)?;
    let ups = upsilon_mc(params, grid, n_outer, n_inner, stream)?;
    build_report(a, ups, SandwichMethod::TheoreticalMc, None)
}

/// Plug-in sandwich covariance on observed data, evaluated at `theta`
/// (usually the estimate): `Upsilon_hat` is the average outer product of the
/// martingale increments, `A_hat` averages the Jacobian over the observed
/// lagged volumes, and the standard errors are `sqrt(diag(T_hat) / n)`.
pub fn sandwich_empirical(
    x: &[f64],
    tau: &[f64],
    theta: &ModelParams,
    grid: &GridConstants,
) -> Result<SandwichReport> {
    theta.validate()?;
    let n = x.len();
    if n < 10 {
        return Err(Error::Domain(format!(
            "empirical sandwich needs n >= 10, got {n}"
        )));
    }
    if tau.len() != n + 1 {
        return Err(Error::Data(format!(
            "tau must hold n + 1 = {} values, got {}",
            n + 1,
            tau.len()
        )));
    }
    let gen = Generic::from_params(theta);
    let mut coeffs = [[0.0; 3]; 7];
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = f_coeffs(i + 1, &gen, grid)?;
    }
    let mut ups = Matrix7::zeros();
    for k in 0..n {
        let prev = tau[k];
        let xi = xi_vector(x[k], tau[k + 1], prev);
        let mut h = [0.0; 7];
        for i in 0..7 {
            h[i] = xi[i] - (coeffs[i][0] + coeffs[i][1] * prev + coeffs[i][2] * prev * prev);
        }
        for i in 0..7 {
            for j in i..7 {
                ups[(i, j)] += h[i] * h[j];
            }
        }
    }
    let nf = n as f64;
    for i in 0..7 {
        for j in i..7 {
            let v = ups[(i, j)] / nf;
            ups[(i, j)] = v;
            ups[(j, i)] = v;
        }
    }
    let prev = &tau[..n];
    let m1 = compensated_sum(prev.iter().copied()) / nf;
    let m2 = compensated_sum(prev.iter().map(|t| t * t)) / nf;
    let a = a_matrix_with_moments(theta, grid, m1, m2);
    build_report(a, ups, SandwichMethod::EmpiricalPlugin, Some(n))
}

/// Correlation matrix from a covariance matrix.
pub fn correlation_from_t(t: &Matrix7) -> Result<Matrix7> {
    let mut r = Matrix7::zeros();
    for i in 0..7 {
        if !(t[(i, i)] > 0.0) {
            return Err(Error::Domain(format!(
                "covariance diagonal must be positive, got {} at {i}",
                t[(i, i)]
            )));
        }
    }
    for i in 0..7 {
        for j in 0..7 {
            r[(i, j)] = t[(i, j)] / (t[(i, i)] * t[(j, j)]).sqrt();
        }
    }
    Ok(r)
}
