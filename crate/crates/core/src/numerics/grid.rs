//! Uniform grids and functions sampled on them.

use crate::error::{Error, Result};

/// A uniform grid on a closed interval.
///
/// Points are generated on demand from `(start, end, count)`, so uniformity
/// and monotonicity hold by construction and the type stays `Copy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    start: f64,
    end: f64,
    count: usize,
}

impl Grid {
    /// Uniform grid with `count >= 3` points covering `[start, end]`.
    pub fn uniform(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::InvalidGrid(format!("count = {count}, need >= 3")));
        }
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::InvalidGrid(format!("bad interval [{start}, {end}]")));
        }
        Ok(Self { start, end, count })
    }

    /// Unit interval grid, the working domain of the spatial operator.
    pub fn unit(count: usize) -> Result<Self> {
        Self::uniform(0.0, 1.0, count)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        (self.end - self.start) / (self.count - 1) as f64
    }

    /// The i-th grid point. Endpoints are returned exactly.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        if i == 0 {
            self.start
        } else if i == self.count - 1 {
            self.end
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }

    /// Index of the sub-interval containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let t = (x - self.start) / self.spacing();
        (t.floor() as isize).clamp(0, self.count as isize - 2) as usize
    }
}

/// Real-valued samples on a [`Grid`]. All values are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::GridMismatch(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.count()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Sample a closed-form function on the grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    /// The zero function.
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.count()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation, clamped to the grid interval.
    pub fn eval_linear(&self, x: f64) -> f64 {
        let i = self.grid.cell_of(x);
        let x0 = self.grid.point(i);
        let t = ((x - x0) / self.grid.spacing()).clamp(0.0, 1.0);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Cubic Lagrange interpolation on a centered four-point stencil.
    ///
    /// Falls back to the one-sided stencil near the ends. Exact for cubics,
    /// O(h^4) for smooth data; used where linear interpolation would cap the
    /// ODE integrator at second order.
    pub fn eval_cubic(&self, x: f64) -> f64 {
        let n = self.grid.count();
        let cell = self.grid.cell_of(x);
        let first = cell.saturating_sub(1).min(n - 4);
        let h = self.grid.spacing();
        let t = (x - self.grid.point(first)) / h;
        let mut acc = 0.0;
        for k in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if j != k {
                    w *= (t - j as f64) / (k as f64 - j as f64);
                }
            }
            acc += w * self.values[first + k];
        }
        acc
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid, values)
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, alpha: f64) -> Result<Self> {
        self.map(|v| alpha * v)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "[{}, {}] x {} vs [{}, {}] x {}",
                self.grid.start(),
                self.grid.end(),
                self.grid.count(),
                other.grid.start(),
                other.grid.end(),
                other.grid.count()
            )));
        }
        Ok(())
    }
}
