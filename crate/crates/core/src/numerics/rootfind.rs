//! Bracketed scalar root finding: bisection with secant acceleration.

use crate::error::{Error, Result};

/// Find a root of `f` inside `[lo, hi]`, which must bracket a sign change.
///
/// A secant step is taken whenever it lands strictly inside the current
/// bracket, otherwise the method bisects; the bracket therefore shrinks
/// monotonically and convergence is guaranteed. Returns once the bracket
/// width is at most `tolerance`.
pub fn find_root<F>(f: F, lo: f64, hi: f64, tolerance: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tolerance > 0.0) || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "bad bracket [{lo}, {hi}] or tolerance {tolerance}"
        )));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }

    for _ in 0..200 {
        if b - a <= tolerance {
            break;
        }
        // Secant candidate from the bracket endpoints.
        let secant = b - fb * (b - a) / (fb - fa);
        let margin = 0.01 * (b - a);
        let x = if secant.is_finite() && secant > a + margin && secant < b - margin {
            secant
        } else {
            0.5 * (a + b)
        };
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if !fx.is_finite() {
            return Err(Error::InvalidParameter(format!("f({x}) is not finite")));
        }
        if fa * fx < 0.0 {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
    }
    Ok(0.5 * (a + b))
}
