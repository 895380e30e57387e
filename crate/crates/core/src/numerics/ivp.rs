//! Fixed-step classical Runge-Kutta integration on a uniform grid.

use super::grid::{Grid, SampledFunction};
use crate::error::{Error, Result};

/// Guard against runaway states; anything larger aborts with a diagnostic.
const STATE_LIMIT: f64 = 1e12;

/// State trajectory aligned with a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: Grid,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State vector at grid node `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.grid.count() - 1)
    }

    /// One state component as a sampled function of the position.
    pub fn component(&self, k: usize) -> Result<SampledFunction> {
        let values = (0..self.grid.count())
            .map(|i| self.data[i * self.dim + k])
            .collect();
        SampledFunction::new(self.grid, values)
    }
}

/// Integrate `y' = rhs(x, y)` from `span.0` to `span.1` with the classical
/// fourth-order Runge-Kutta scheme on a fixed grid of `step` spacing.
///
/// `step` must divide the span length; the returned trajectory is aligned
/// with the resulting grid. Global error is O(step^4) for smooth right sides.
pub fn solve_ivp<F>(rhs: F, y0: &[f64], span: (f64, f64), step: f64) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let (x0, x1) = span;
    let length = x1 - x0;
    if !(step > 0.0) || !length.is_finite() || length <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bad span [{x0}, {x1}] or step {step}"
        )));
    }
    let steps = (length / step).round();
    if steps < 2.0 || (steps * step - length).abs() > 1e-9 * length {
        return Err(Error::InvalidParameter(format!(
            "step {step} does not divide span length {length}"
        )));
    }
    let steps = steps as usize;
    let grid = Grid::uniform(x0, x1, steps + 1)?;
    let h = grid.spacing();

    let dim = y0.len();
    let mut data = Vec::with_capacity((steps + 1) * dim);
    data.extend_from_slice(y0);

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    for i in 0..steps {
        let x = grid.point(i);
        rhs(x, &y, &mut k1);
        for d in 0..dim {
            stage[d] = y[d] + 0.5 * h * k1[d];
        }
        rhs(x + 0.5 * h, &stage, &mut k2);
        for d in 0..dim {
            stage[d] = y[d] + 0.5 * h * k2[d];
        }
        rhs(x + 0.5 * h, &stage, &mut k3);
        for d in 0..dim {
            stage[d] = y[d] + h * k3[d];
        }
        rhs(x + h, &stage, &mut k4);
        for d in 0..dim {
            y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        if y.iter().any(|v| !v.is_finite() || v.abs() > STATE_LIMIT) {
            return Err(Error::IvpBlowUp { position: grid.point(i + 1) });
        }
        data.extend_from_slice(&y);
    }

    Ok(Trajectory { grid, dim, data })
}
