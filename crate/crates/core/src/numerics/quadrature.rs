//! Quadrature on uniform grids: composite Simpson / trapezoid and prefix sums.

use super::grid::SampledFunction;
use crate::error::{Error, Result};

/// Integral of a sampled function over its grid interval.
///
/// Uses composite Simpson when the point count is odd (error O(h^4) for
/// smooth integrands) and composite trapezoid otherwise (O(h^2)).
pub fn integrate(f: &SampledFunction) -> Result<f64> {
    if let Some((index, &value)) = f.values().iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index, value });
    }
    let h = f.grid().spacing();
    let v = f.values();
    let n = v.len();
    if n % 2 == 1 {
        let mut odd = 0.0;
        let mut even = 0.0;
        for (i, &x) in v.iter().enumerate().take(n - 1).skip(1) {
            if i % 2 == 1 {
                odd += x;
            } else {
                even += x;
            }
        }
        Ok(h / 3.0 * (v[0] + v[n - 1] + 4.0 * odd + 2.0 * even))
    } else {
        let interior: f64 = v[1..n - 1].iter().sum();
        Ok(h * (0.5 * (v[0] + v[n - 1]) + interior))
    }
}

/// Running integral by composite trapezoid; result(0) = 0.
pub fn cumulative(f: &SampledFunction) -> Result<SampledFunction> {
    let h = f.grid().spacing();
    let v = f.values();
    let mut acc = Vec::with_capacity(v.len());
    let mut sum = 0.0;
    acc.push(0.0);
    for i in 1..v.len() {
        sum += 0.5 * h * (v[i - 1] + v[i]);
        acc.push(sum);
    }
    SampledFunction::new(f.grid(), acc)
}

/// Quadrature inner product of two functions on one grid.
pub fn inner_product(f: &SampledFunction, g: &SampledFunction) -> Result<f64> {
    integrate(&f.zip_with(g, |a, b| a * b)?)
}

/// L2 norm by quadrature.
pub fn l2_norm(f: &SampledFunction) -> Result<f64> {
    Ok(integrate(&f.map(|v| v * v)?)?.max(0.0).sqrt())
}
