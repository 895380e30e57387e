//! Heat evolution by eigenfunction expansion.
//!
//! With the Dirichlet eigenpairs of L = -d^2/dx^2 + q in hand, the problem
//! u_t + a(t) L u = f reduces to independent mode ODEs
//! u_n' + lambda_n a(t) u_n = f_n(t). The homogeneous part decays through
//! the accumulated coefficient A(t) = int_0^t a, and sources enter through
//! the variation-of-constants integral evaluated in the overflow-safe form
//! exp(-lambda (A(t) - A(s))). A Crank-Nicolson finite-difference stepper
//! provides an independent oracle for cross-validation.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::numerics::{quadrature, Grid, SampledFunction};
use crate::sturm_liouville::EigenPair;

/// Time coefficient a(t) >= floor > 0 with its accumulated integral.
#[derive(Debug, Clone)]
pub struct TimeCoefficient {
    a: SampledFunction,
    floor: f64,
    accumulated: SampledFunction,
}

/// Build the accumulator A(t) = int_0^t a by cumulative trapezoid,
/// validating the positivity floor.
pub fn accumulate(a: &SampledFunction, floor: f64) -> Result<TimeCoefficient> {
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("floor = {floor}, need > 0")));
    }
    for (i, &v) in a.values().iter().enumerate() {
        if v < floor {
            return Err(Error::CoefficientBelowFloor {
                value: v,
                floor,
                at: a.grid().point(i),
            });
        }
    }
    let accumulated = quadrature::cumulative(a)?;
    Ok(TimeCoefficient { a: a.clone(), floor, accumulated })
}

impl TimeCoefficient {
    /// Constant coefficient a = 1 on [0, horizon].
    pub fn unit(horizon: f64, count: usize) -> Result<Self> {
        let grid = Grid::uniform(0.0, horizon, count)?;
        accumulate(&SampledFunction::from_fn(grid, |_| 1.0)?, 1.0)
    }

    pub fn grid(&self) -> Grid {
        self.a.grid()
    }

    pub fn horizon(&self) -> f64 {
        self.a.grid().end()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn samples(&self) -> &SampledFunction {
        &self.a
    }

    /// a(t) by linear interpolation between time nodes.
    pub fn a_at(&self, t: f64) -> f64 {
        self.a.eval_linear(t)
    }

    /// A(t) by linear interpolation, consistent with the trapezoid sums.
    pub fn accumulated_at(&self, t: f64) -> f64 {
        self.accumulated.eval_linear(t)
    }

    pub fn sup_norm(&self) -> f64 {
        self.a.max_abs()
    }

    pub fn min_value(&self) -> f64 {
        self.a.values().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = (self.grid().start(), self.grid().end());
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "t = {t} outside the horizon [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// A source term f(t, x) sampled as one spatial frame per time node.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    time_grid: Grid,
    frames: Vec<SampledFunction>,
}

impl SourceTerm {
    pub fn from_frames(time_grid: Grid, frames: Vec<SampledFunction>) -> Result<Self> {
        if frames.len() != time_grid.count() {
            return Err(Error::GridMismatch(format!(
                "{} frames for {} time nodes",
                frames.len(),
                time_grid.count()
            )));
        }
        for f in frames.iter().skip(1) {
            frames[0].check_same_grid(f)?;
        }
        Ok(Self { time_grid, frames })
    }

    /// Sample a closed-form f(t, x).
    pub fn from_expr(expr: &Expr, time_grid: Grid, space_grid: Grid) -> Result<Self> {
        let frames = time_grid
            .points()
            .map(|t| SampledFunction::from_fn(space_grid, |x| expr.eval(x, t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { time_grid, frames })
    }

    pub fn from_closure(
        f: impl Fn(f64, f64) -> f64,
        time_grid: Grid,
        space_grid: Grid,
    ) -> Result<Self> {
        let frames = time_grid
            .points()
            .map(|t| SampledFunction::from_fn(space_grid, |x| f(t, x)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { time_grid, frames })
    }

    pub fn time_grid(&self) -> Grid {
        self.time_grid
    }

    pub fn frame(&self, j: usize) -> &SampledFunction {
        &self.frames[j]
    }

    pub fn scale(&self, alpha: f64) -> Result<Self> {
        let frames = self.frames.iter().map(|f| f.scale(alpha)).collect::<Result<Vec<_>>>()?;
        Self::from_frames(self.time_grid, frames)
    }

    /// Mode coefficients f_n(t_j) for every pair, laid out as [mode][time].
    pub fn coefficients(&self, pairs: &[EigenPair]) -> Result<Vec<Vec<f64>>> {
        pairs
            .iter()
            .map(|pair| {
                self.frames
                    .iter()
                    .map(|frame| quadrature::inner_product(frame, &pair.phi))
                    .collect()
            })
            .collect()
    }

    /// max_t |f(t, .)|_L2.
    pub fn c0_l2_norm(&self) -> Result<f64> {
        let mut best = 0.0f64;
        for f in &self.frames {
            best = best.max(quadrature::l2_norm(f)?);
        }
        Ok(best)
    }

    /// max_t (|f(t, .)| + |df/dt(t, .)|) with the time derivative by
    /// centered differences (one-sided at the ends).
    pub fn c1_l2_norm(&self) -> Result<f64> {
        let dt = self.time_grid.spacing();
        let n = self.frames.len();
        let mut best = 0.0f64;
        for j in 0..n {
            let value = quadrature::l2_norm(&self.frames[j])?;
            let rate = if j == 0 {
                self.frames[1].zip_with(&self.frames[0], |a, b| (a - b) / dt)?
            } else if j == n - 1 {
                self.frames[n - 1].zip_with(&self.frames[n - 2], |a, b| (a - b) / dt)?
            } else {
                self.frames[j + 1].zip_with(&self.frames[j - 1], |a, b| (a - b) / (2.0 * dt))?
            };
            best = best.max(value + quadrature::l2_norm(&rate)?);
        }
        Ok(best)
    }
}

/// Truncated eigenbasis solution of the heat problem.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pairs: Vec<EigenPair>,
    /// Initial coefficients B_n.
    coefficients: Vec<f64>,
    /// |u0|^2 - sum B_n^2, the projection defect at t = 0.
    truncation_tail: f64,
    time: TimeCoefficient,
    source: Option<SourceData>,
}

#[derive(Debug, Clone)]
struct SourceData {
    term: SourceTerm,
    /// f_n(t_j) as [mode][time].
    coeffs: Vec<Vec<f64>>,
}

/// Project initial data onto the eigenbasis; returns the coefficients and
/// the truncation tail |u0|^2 - sum B_n^2.
pub fn project(u0: &SampledFunction, pairs: &[EigenPair]) -> Result<(Vec<f64>, f64)> {
    let mut coefficients = Vec::with_capacity(pairs.len());
    for pair in pairs {
        u0.check_same_grid(&pair.phi)?;
        coefficients.push(quadrature::inner_product(u0, &pair.phi)?);
    }
    let norm2 = quadrature::l2_norm(u0)?.powi(2);
    let sum2: f64 = coefficients.iter().map(|b| b * b).sum();
    Ok((coefficients, norm2 - sum2))
}

impl SpectralSolution {
    /// Homogeneous problem (f = 0).
    pub fn homogeneous(
        pairs: Vec<EigenPair>,
        u0: &SampledFunction,
        time: TimeCoefficient,
    ) -> Result<Self> {
        let (coefficients, truncation_tail) = project(u0, &pairs)?;
        Ok(Self { pairs, coefficients, truncation_tail, time, source: None })
    }

    /// Non-homogeneous problem with a sampled source term.
    pub fn with_source(
        pairs: Vec<EigenPair>,
        u0: &SampledFunction,
        time: TimeCoefficient,
        source: SourceTerm,
    ) -> Result<Self> {
        if source.time_grid() != time.grid() {
            return Err(Error::GridMismatch(
                "source term and time coefficient use different time grids".into(),
            ));
        }
        if !source.frames.is_empty() && !pairs.is_empty() {
            source.frames[0].check_same_grid(&pairs[0].phi)?;
        }
        let coeffs = source.coefficients(&pairs)?;
        let (coefficients, truncation_tail) = project(u0, &pairs)?;
        Ok(Self {
            pairs,
            coefficients,
            truncation_tail,
            time,
            source: Some(SourceData { term: source, coeffs }),
        })
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn truncation_tail(&self) -> f64 {
        self.truncation_tail
    }

    pub fn time_coefficient(&self) -> &TimeCoefficient {
        &self.time
    }

    pub fn source_term(&self) -> Option<&SourceTerm> {
        self.source.as_ref().map(|s| &s.term)
    }

    /// Source mode coefficients f_n(t_j) as [mode][time], when present.
    pub fn source_coefficients(&self) -> Option<&[Vec<f64>]> {
        self.source.as_ref().map(|s| s.coeffs.as_slice())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn min_lambda(&self) -> f64 {
        self.pairs.iter().map(|p| p.lambda).fold(f64::INFINITY, f64::min)
    }

    pub fn space_grid(&self) -> Grid {
        self.pairs[0].phi.grid()
    }

    /// Source coefficient f_n(t), linearly interpolated between time nodes.
    fn source_coeff_at(&self, n: usize, t: f64) -> f64 {
        match &self.source {
            None => 0.0,
            Some(data) => {
                let tg = self.time.grid();
                let j = tg.cell_of(t);
                let w = ((t - tg.point(j)) / tg.spacing()).clamp(0.0, 1.0);
                data.coeffs[n][j] * (1.0 - w) + data.coeffs[n][j + 1] * w
            }
        }
    }

    /// Mode coefficients u_n(t) at an arbitrary time in [0, T].
    ///
    /// u_n(t) = B_n e^(-lambda_n A(t)) + int_0^t e^(-lambda_n (A(t)-A(s)))
    /// f_n(s) ds, with the integral by trapezoid on the time grid; every
    /// exponent is non-positive, so no overflow can occur.
    pub fn mode_coefficients_at(&self, t: f64) -> Result<Vec<f64>> {
        self.time.check_time(t)?;
        let a_t = self.time.accumulated_at(t);
        let tg = self.time.grid();
        let dt = tg.spacing();
        let mut out = Vec::with_capacity(self.pairs.len());
        for (n, pair) in self.pairs.iter().enumerate() {
            let lambda = pair.lambda;
            let mut u = self.coefficients[n] * (-lambda * a_t).exp();
            if let Some(data) = &self.source {
                let mut duhamel = 0.0;
                let mut j = 0;
                while j + 1 < tg.count() && tg.point(j + 1) <= t + 1e-15 {
                    let w0 = (-lambda * (a_t - self.time.accumulated.value(j))).exp();
                    let w1 = (-lambda * (a_t - self.time.accumulated.value(j + 1))).exp();
                    duhamel += 0.5 * dt * (w0 * data.coeffs[n][j] + w1 * data.coeffs[n][j + 1]);
                    j += 1;
                }
                // partial cell up to t
                let t_j = tg.point(j);
                if t > t_j + 1e-15 {
                    let w0 = (-lambda * (a_t - self.time.accumulated.value(j))).exp();
                    let f_t = self.source_coeff_at(n, t);
                    duhamel += 0.5 * (t - t_j) * (w0 * data.coeffs[n][j] + f_t);
                }
                u += duhamel;
            }
            out.push(u);
        }
        Ok(out)
    }

    /// Mode coefficients u_n(t_j) on every time node, via the stable
    /// one-step recurrence of the trapezoid Duhamel sum; layout [time][mode].
    pub fn mode_series(&self) -> Vec<Vec<f64>> {
        let tg = self.time.grid();
        let dt = tg.spacing();
        let n_modes = self.pairs.len();
        let n_time = tg.count();
        let mut series = Vec::with_capacity(n_time);

        // Duhamel accumulators D_n(t_j).
        let mut duhamel = vec![0.0; n_modes];
        for j in 0..n_time {
            if j > 0 {
                let da = self.time.accumulated.value(j) - self.time.accumulated.value(j - 1);
                for (n, pair) in self.pairs.iter().enumerate() {
                    let decay = (-pair.lambda * da).exp();
                    let (f0, f1) = match &self.source {
                        Some(data) => (data.coeffs[n][j - 1], data.coeffs[n][j]),
                        None => (0.0, 0.0),
                    };
                    duhamel[n] = decay * (duhamel[n] + 0.5 * dt * f0) + 0.5 * dt * f1;
                }
            }
            let a_j = self.time.accumulated.value(j);
            let row: Vec<f64> = self
                .pairs
                .iter()
                .enumerate()
                .map(|(n, pair)| {
                    self.coefficients[n] * (-pair.lambda * a_j).exp() + duhamel[n]
                })
                .collect();
            series.push(row);
        }
        series
    }

    /// Assemble sum c_n phi_n on the spatial grid.
    pub fn assemble(&self, mode_coefficients: &[f64]) -> Result<SampledFunction> {
        let grid = self.space_grid();
        let mut values = vec![0.0; grid.count()];
        for (c, pair) in mode_coefficients.iter().zip(&self.pairs) {
            for (v, p) in values.iter_mut().zip(pair.phi.values()) {
                *v += c * p;
            }
        }
        SampledFunction::new(grid, values)
    }

    /// Truncated homogeneous series sum B_n e^(-lambda_n A(t)) phi_n,
    /// ignoring any source term.
    pub fn evolve_homogeneous(&self, t: f64) -> Result<SampledFunction> {
        self.time.check_time(t)?;
        let a_t = self.time.accumulated_at(t);
        let coeffs: Vec<f64> = self
            .pairs
            .iter()
            .zip(&self.coefficients)
            .map(|(pair, b)| b * (-pair.lambda * a_t).exp())
            .collect();
        self.assemble(&coeffs)
    }

    /// Full truncated series including the Duhamel term when a source is set.
    pub fn evolve(&self, t: f64) -> Result<SampledFunction> {
        let coeffs = self.mode_coefficients_at(t)?;
        self.assemble(&coeffs)
    }

    /// Termwise time derivative coefficients -a(t) lambda_n u_n(t) + f_n(t).
    pub fn time_derivative_coefficients(&self, t: f64) -> Result<Vec<f64>> {
        let a = self.time.a_at(t);
        let u = self.mode_coefficients_at(t)?;
        Ok(self
            .pairs
            .iter()
            .enumerate()
            .map(|(n, pair)| -a * pair.lambda * u[n] + self.source_coeff_at(n, t))
            .collect())
    }

    /// Termwise time derivative of the truncated series.
    pub fn time_derivative(&self, t: f64) -> Result<SampledFunction> {
        let coeffs = self.time_derivative_coefficients(t)?;
        self.assemble(&coeffs)
    }
}

/// Spectral Sobolev norm (sum lambda_n^k c_n^2)^(1/2).
///
/// Fractional or negative powers require a strictly positive spectrum.
pub fn sobolev_norm(coefficients: &[f64], lambdas: &[f64], k: f64) -> Result<f64> {
    if coefficients.len() != lambdas.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients vs {} lambdas",
            coefficients.len(),
            lambdas.len()
        )));
    }
    let integer_k = k.fract() == 0.0 && k >= 0.0;
    if !integer_k {
        if let Some((index, &lambda)) =
            lambdas.iter().enumerate().find(|(_, &l)| l <= 0.0)
        {
            return Err(Error::UndefinedFractionalPower { k, index, lambda });
        }
    }
    let mut acc = 0.0;
    for (&c, &l) in coefficients.iter().zip(lambdas) {
        let weight = if integer_k { l.powi(k as i32) } else { l.powf(k) };
        acc += weight * c * c;
    }
    Ok(acc.max(0.0).sqrt())
}

/// Crank-Nicolson oracle: theta = 1/2 implicit stepping of
/// u_t = -a(t)(-u_xx + q u) + f over the time grid of `time`, with a
/// tridiagonal solve per step. Snapshots are returned at the requested
/// output times, which must lie on the time grid.
pub fn crank_nicolson_oracle(
    q: &SampledFunction,
    time: &TimeCoefficient,
    u0: &SampledFunction,
    source: Option<&SourceTerm>,
    t_out: &[f64],
) -> Result<Vec<SampledFunction>> {
    q.check_same_grid(u0)?;
    if let Some(s) = source {
        if s.time_grid() != time.grid() {
            return Err(Error::GridMismatch("source on a different time grid".into()));
        }
        s.frame(0).check_same_grid(u0)?;
    }
    let grid = u0.grid();
    let n = grid.count();
    let h = grid.spacing();
    let tg = time.grid();
    let dt = tg.spacing();

    // Map requested times to grid indices.
    let mut wanted: Vec<(usize, usize)> = Vec::with_capacity(t_out.len());
    for (slot, &t) in t_out.iter().enumerate() {
        let j = ((t - tg.start()) / dt).round() as isize;
        if j < 0 || j as usize >= tg.count() || (tg.point(j as usize) - t).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "output time {t} is not a node of the time grid"
            )));
        }
        wanted.push((j as usize, slot));
    }
    wanted.sort_unstable();

    let mut out: Vec<Option<SampledFunction>> = vec![None; t_out.len()];
    let mut u = u0.values().to_vec();
    u[0] = 0.0;
    u[n - 1] = 0.0;

    let record = |j: usize, u: &[f64], out: &mut Vec<Option<SampledFunction>>| -> Result<()> {
        for &(_, slot) in wanted.iter().filter(|&&(node, _)| node == j) {
            out[slot] = Some(SampledFunction::new(grid, u.to_vec())?);
        }
        Ok(())
    };
    record(0, &u, &mut out)?;

    let inv_h2 = 1.0 / (h * h);
    let mut rhs = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut work_c = vec![0.0; n];
    let mut work_d = vec![0.0; n];

    for j in 0..tg.count() - 1 {
        let a0 = time.samples().value(j);
        let a1 = time.samples().value(j + 1);
        let c0 = 0.5 * dt * a0;
        let c1 = 0.5 * dt * a1;

        // rhs = (I - c0 L) u + dt/2 (f_j + f_{j+1}) on interior points
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        for i in 1..n - 1 {
            let lu = (-u[i - 1] + 2.0 * u[i] - u[i + 1]) * inv_h2 + q.value(i) * u[i];
            let mut v = u[i] - c0 * lu;
            if let Some(s) = source {
                v += 0.5 * dt * (s.frame(j).value(i) + s.frame(j + 1).value(i));
            }
            rhs[i] = v;
        }

        // (I + c1 L) u_new = rhs; Dirichlet rows pinned.
        for i in 1..n - 1 {
            diag[i] = 1.0 + c1 * (2.0 * inv_h2 + q.value(i));
        }
        let off = -c1 * inv_h2;
        // Thomas solve on the interior block.
        work_c[1] = off / diag[1];
        work_d[1] = rhs[1] / diag[1];
        for i in 2..n - 1 {
            let m = diag[i] - off * work_c[i - 1];
            work_c[i] = off / m;
            work_d[i] = (rhs[i] - off * work_d[i - 1]) / m;
        }
        u[n - 2] = work_d[n - 2];
        for i in (1..n - 2).rev() {
            u[i] = work_d[i] - work_c[i] * u[i + 1];
        }
        u[0] = 0.0;
        u[n - 1] = 0.0;

        record(j + 1, &u, &mut out)?;
    }

    out.into_iter()
        .enumerate()
        .map(|(slot, snap)| {
            snap.ok_or_else(|| {
                Error::InvalidParameter(format!("output time {} was never reached", t_out[slot]))
            })
        })
        .collect()
}
