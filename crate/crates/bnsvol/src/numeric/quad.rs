//! Adaptive Gauss–Kronrod quadrature (G7/K15 panels).
//!
//! Works for real- and complex-valued integrands of a real variable; panels
//! are bisected until the embedded-rule error estimate meets the requested
//! absolute tolerance (distributed over subintervals by length).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Kronrod-15 abscissae on [0, 1] side (symmetric).
const XK: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_3,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_813,
];

/// Kronrod-15 weights paired with `XK`.
const WK: [f64; 8] = [
    0.209_482_141_084_727_83,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_2,
    0.104_790_010_322_250_18,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_225,
];

/// Gauss-7 weights for the odd Kronrod abscissae (indices 0, 2, 4, 6 of `XK`).
const WG: [f64; 4] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_119,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

/// Value types the panel rule can accumulate.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, w: f64) -> Self;
    fn dist(self, other: Self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn dist(self, other: Self) -> f64 {
        (self - other).abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }
}

fn panel<T: QuadValue, F: FnMut(f64) -> Result<T>>(f: &mut F, a: f64, b: f64) -> Result<(T, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = fc.scale(WK[0] * h);
    let mut gauss = fc.scale(WG[0] * h);
    for j in 1..8 {
        let x = h * XK[j];
        let fl = f(c - x)?;
        let fr = f(c + x)?;
        let pair = fl.add(fr);
        kronrod = kronrod.add(pair.scale(WK[j] * h));
        if j % 2 == 0 {
            gauss = gauss.add(pair.scale(WG[j / 2] * h));
        }
    }
    let err = (200.0 * kronrod.dist(gauss))
        .powf(1.5)
        .min(kronrod.dist(gauss));
    Ok((kronrod, err))
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// Returns the integral value and the accumulated error estimate.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> Result<T>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<(T, f64)> {
    if !(abs_tol > 0.0) {
        return Err(Error::Parameter("quadrature tolerance must be > 0".into()));
    }
    if a == b {
        return Ok((T::zero(), 0.0));
    }
    const MAX_DEPTH: u32 = 48;
    const MAX_PANELS: u64 = 100_000;
    let mut total = T::zero();
    let mut total_err = 0.0;
    // explicit stack of (a, b, tol, depth)
    let mut stack = vec![(a, b, abs_tol, 0u32)];
    let mut panels: u64 = 0;
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(Error::Numerical(format!(
                "quadrature exceeded the panel budget ({MAX_PANELS}) near [{lo}, {hi}]; \
                 the requested tolerance is unattainable"
            )));
        }
        let (val, err) = panel(&mut f, lo, hi)?;
        let mid = 0.5 * (lo + hi);
        let splittable = lo < mid && mid < hi;
        if err <= tol || depth >= MAX_DEPTH || !splittable {
            if err > tol && (depth >= MAX_DEPTH || !splittable) {
                return Err(Error::Numerical(format!(
                    "quadrature failed to converge on [{lo}, {hi}] (err {err:.3e} > tol {tol:.3e})"
                )));
            }
            total = total.add(val);
            total_err += err;
        } else {
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    Ok((total, total_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate(|x| Ok(x * x * x - 2.0 * x + 1.0), -1.0, 3.0, 1e-12).unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_real() {
        let (v, _) = integrate(|x| Ok((10.0 * x).cos()), 0.0, PI, 1e-12).unwrap();
        assert!((v - (10.0 * PI).sin() / 10.0).abs() < 1e-11);
    }

    #[test]
    fn complex_exponential() {
        let (v, _) = integrate(
            |x| Ok((Complex64::new(0.0, 1.0) * x).exp()),
            0.0,
            1.0,
            1e-13,
        )
        .unwrap();
        let exact = Complex64::new(1.0_f64.sin(), 1.0 - 1.0_f64.cos());
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn propagates_domain_errors() {
        let r = integrate(
            |x| {
                if x > 0.5 {
                    Err(Error::Domain("pole".into()))
                } else {
                    Ok(x)
                }
            },
            0.0,
            1.0,
            1e-8,
        );
        assert!(r.is_err());
    }
}
