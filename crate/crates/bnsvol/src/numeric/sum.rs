//! Compensated summation helpers.
//!
//! Moment averages mix scales (e.g. squared daily returns ~1e-4 against
//! squared volumes ~1e+1), so plain accumulation over 10^5..10^6 terms can
//! lose digits that the estimating-equation residual checks need.

/// Neumaier (improved Kahan) compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated arithmetic mean; 0 for an empty iterator.
pub fn compensated_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}
