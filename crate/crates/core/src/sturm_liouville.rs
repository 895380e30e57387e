//! Dirichlet eigenpairs of L = -d^2/dx^2 + q(x) on (0,1) for q = nu'.
//!
//! The eigenvalue problem is integrated in modified Prufer variables
//! (y, y' - nu y) = (r sin theta, sqrt(lambda) r cos theta), which stay
//! well-defined when q itself is only a distributional derivative. The
//! phase theta solves a first-order ODE with theta(0) = 0, eigenvalues are
//! shot from the condition theta(1, lambda) = pi n, and the amplitude r is
//! recovered in closed form from the phase trajectory. A dense
//! finite-difference eigensolver provides an independent oracle.

use crate::error::{Error, Result};
use crate::numerics::{self, quadrature, SampledFunction};
use rayon::prelude::*;
use std::cell::RefCell;
use std::f64::consts::PI;

/// Smallest admissible spectral parameter; guards the lambda^(-1/2) terms
/// of the phase equation.
pub const LAMBDA_MIN: f64 = 0.25;

/// Relative tolerance of the eigenvalue shooting bracket.
const SHOOT_TOLERANCE: f64 = 1e-10;

/// Phase, amplitude and phase-correction trajectories at one lambda.
#[derive(Debug, Clone)]
pub struct PruferTrajectory {
    pub lambda: f64,
    /// Phase theta(x, lambda), theta(0) = 0.
    pub theta: SampledFunction,
    /// Amplitude r(x, lambda) > 0, r(0) = 1.
    pub r: SampledFunction,
    /// Phase correction eta = theta - sqrt(lambda) x.
    pub eta: SampledFunction,
}

/// One Dirichlet eigenpair with its Prufer trajectory.
#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Mode index n >= 1.
    pub index: usize,
    pub lambda: f64,
    /// L^2-normalized eigenfunction.
    pub phi: SampledFunction,
    /// Norm of the unnormalized eigenfunction r_n sin(theta_n).
    pub phi_tilde_norm: f64,
    /// Quasi-derivative sqrt(lambda) r cos(theta) of the unnormalized
    /// eigenfunction; the classical derivative is this plus nu * phi-tilde.
    pub quasi_derivative: SampledFunction,
    pub trajectory: PruferTrajectory,
}

impl EigenPair {
    /// Classical derivative of the normalized eigenfunction,
    /// phi' = quasi-derivative / |phi-tilde| + nu * phi.
    pub fn phi_prime(&self, nu: &SampledFunction) -> Result<SampledFunction> {
        let scaled = self.quasi_derivative.scale(1.0 / self.phi_tilde_norm)?;
        scaled.zip_with(&self.phi.zip_with(nu, |p, v| p * v)?, |a, b| a + b)
    }

    /// Second derivative through the eigenvalue relation
    /// phi'' = (q - lambda) phi.
    pub fn phi_second(&self, q: &SampledFunction) -> Result<SampledFunction> {
        let lambda = self.lambda;
        self.phi.zip_with(q, move |p, qv| (qv - lambda) * p)
    }
}

/// Integrate the Prufer phase equation at a fixed lambda and recover the
/// amplitude from its closed-form exponential.
pub fn integrate_prufer(nu: &SampledFunction, lambda: f64) -> Result<PruferTrajectory> {
    if lambda < LAMBDA_MIN {
        return Err(Error::LambdaBelowMin { lambda, min: LAMBDA_MIN });
    }
    let grid = nu.grid();
    let sqrt_lambda = lambda.sqrt();
    let theta = phase_trajectory(nu, lambda)?;

    // r(x) = exp(-I1(x) - I2(x) / (2 sqrt(lambda))) with
    // I1 = int nu cos(2 theta), I2 = int nu^2 sin(2 theta).
    let integrand1 = theta.zip_with(nu, |th, v| v * (2.0 * th).cos())?;
    let integrand2 = theta.zip_with(nu, |th, v| v * v * (2.0 * th).sin())?;
    let i1 = quadrature::cumulative(&integrand1)?;
    let i2 = quadrature::cumulative(&integrand2)?;
    let r = i1.zip_with(&i2, |a, b| (-a - 0.5 * b / sqrt_lambda).exp())?;

    let eta = SampledFunction::new(
        grid,
        grid.points()
            .enumerate()
            .map(|(i, x)| theta.value(i) - sqrt_lambda * x)
            .collect(),
    )?;

    Ok(PruferTrajectory { lambda, theta, r, eta })
}

/// Solve the phase ODE theta' = sqrt(lambda) + nu^2 sin^2(theta)/sqrt(lambda)
/// + nu sin(2 theta) on the grid of nu.
fn phase_ivp(nu: &SampledFunction, lambda: f64) -> Result<numerics::Trajectory> {
    let grid = nu.grid();
    let sqrt_lambda = lambda.sqrt();
    numerics::solve_ivp(
        |x, y: &[f64], dy: &mut [f64]| {
            let v = nu.eval_cubic(x);
            // sin^2(theta) = (1 - cos(2 theta)) / 2 shares one sin_cos call.
            let (s2, c2) = (2.0 * y[0]).sin_cos();
            dy[0] = sqrt_lambda + v * v * (1.0 - c2) / (2.0 * sqrt_lambda) + v * s2;
        },
        &[0.0],
        (grid.start(), grid.end()),
        grid.spacing(),
    )
}

fn phase_trajectory(nu: &SampledFunction, lambda: f64) -> Result<SampledFunction> {
    phase_ivp(nu, lambda)?.component(0)
}

/// Terminal phase theta(1, lambda), the shooting functional.
fn terminal_phase(nu: &SampledFunction, lambda: f64) -> Result<f64> {
    Ok(phase_ivp(nu, lambda)?.last_state()[0])
}

/// Shoot the n-th Dirichlet eigenvalue from theta(1, lambda) = pi n.
///
/// The bracket is centered at the asymptotic value (pi n)^2 with half-width
/// `bracket_half_width` (default max(20, 4 |nu|_inf pi n)) and widened
/// geometrically while no sign change is found, up to ten doublings.
pub fn shoot_eigenvalue(
    nu: &SampledFunction,
    n: usize,
    bracket_half_width: Option<f64>,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("mode index must be >= 1".into()));
    }
    let target = PI * n as f64;
    let center = target * target;
    let mut width = bracket_half_width
        .unwrap_or_else(|| (4.0 * nu.max_abs() * target).max(20.0));

    let first_error: RefCell<Option<Error>> = RefCell::new(None);
    let objective = |lambda: f64| -> f64 {
        match terminal_phase(nu, lambda) {
            Ok(phase) => phase - target,
            Err(e) => {
                first_error.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };

    for _ in 0..=10 {
        let lo = (center - width).max(LAMBDA_MIN);
        let hi = center + width;
        let f_lo = objective(lo);
        let f_hi = objective(hi);
        if let Some(e) = first_error.borrow_mut().take() {
            return Err(e);
        }
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if f_lo * f_hi < 0.0 {
            // The closure is reused by later widening rounds, so it is passed
            // by reference.
            #[allow(clippy::needless_borrows_for_generic_args)]
            let root = numerics::find_root(&objective, lo, hi, SHOOT_TOLERANCE * center)?;
            if let Some(e) = first_error.borrow_mut().take() {
                return Err(e);
            }
            return Ok(root);
        }
        width *= 2.0;
    }

    let lo = (center - width / 2.0).max(LAMBDA_MIN);
    let hi = center + width / 2.0;
    Err(Error::BracketSearchFailed {
        mode: n,
        details: format!(
            "no sign change after widening to [{lo:.6}, {hi:.6}]; theta(1) - pi n = \
             {:.6} and {:.6}",
            objective(lo),
            objective(hi)
        ),
    })
}

/// Shoot the eigenvalue and assemble the normalized eigenpair.
pub fn build_eigenpair(nu: &SampledFunction, n: usize) -> Result<EigenPair> {
    let lambda = shoot_eigenvalue(nu, n, None)?;
    let trajectory = integrate_prufer(nu, lambda)?;
    let phi_tilde = trajectory.r.zip_with(&trajectory.theta, |rv, th| rv * th.sin())?;
    let phi_tilde_norm = quadrature::l2_norm(&phi_tilde)?;
    if phi_tilde_norm <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "degenerate eigenfunction norm for mode {n}"
        )));
    }
    let phi = phi_tilde.scale(1.0 / phi_tilde_norm)?;
    let sqrt_lambda = lambda.sqrt();
    let quasi_derivative = trajectory
        .r
        .zip_with(&trajectory.theta, |rv, th| sqrt_lambda * rv * th.cos())?;
    Ok(EigenPair { index: n, lambda, phi, phi_tilde_norm, quasi_derivative, trajectory })
}

/// Eigenpairs n = 1..=n_max; modes are independent and computed in parallel.
pub fn build_eigenpairs(nu: &SampledFunction, n_max: usize) -> Result<Vec<EigenPair>> {
    (1..=n_max)
        .into_par_iter()
        .map(|n| build_eigenpair(nu, n))
        .collect()
}

/// Independent dense oracle: eigen-decomposition of the symmetric
/// tridiagonal finite-difference discretization of -d^2/dx^2 + q with the
/// Dirichlet rows removed. Eigenvalues ascend; eigenvectors carry the grid
/// L^2 normalization and the positive-initial-slope sign convention.
pub fn matrix_oracle(
    q: &SampledFunction,
    count_modes: usize,
) -> Result<(Vec<f64>, Vec<SampledFunction>)> {
    let grid = q.grid();
    let n_interior = grid.count() - 2;
    if count_modes == 0 || count_modes >= n_interior {
        return Err(Error::InvalidParameter(format!(
            "count_modes = {count_modes} out of range for {} interior points",
            n_interior
        )));
    }
    let h = grid.spacing();
    let off = -1.0 / (h * h);
    let diag: Vec<f64> = (0..n_interior)
        .map(|i| 2.0 / (h * h) + q.value(i + 1))
        .collect();

    let radius = 2.0 * off.abs();
    let lo0 = diag.iter().cloned().fold(f64::INFINITY, f64::min) - radius;
    let hi0 = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + radius;

    let mut lambdas = Vec::with_capacity(count_modes);
    let mut vectors = Vec::with_capacity(count_modes);
    for k in 1..=count_modes {
        let lambda = bisect_eigenvalue(&diag, off, lo0, hi0, k);
        lambdas.push(lambda);
        let v = inverse_iteration(&diag, off, lambda);
        let mut full = vec![0.0; grid.count()];
        full[1..=n_interior].copy_from_slice(&v);
        let mut f = SampledFunction::new(grid, full)?;
        let norm = quadrature::l2_norm(&f)?;
        f = f.scale(1.0 / norm)?;
        if f.value(1) < 0.0 {
            f = f.scale(-1.0)?;
        }
        vectors.push(f);
    }
    Ok((lambdas, vectors))
}

/// Number of eigenvalues of the tridiagonal matrix strictly below x,
/// by the Sturm sequence of the shifted LDL^T recurrence.
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut d = f64::INFINITY;
    let off2 = off * off;
    for &di in diag {
        d = di - x - off2 / d;
        if d < 0.0 {
            count += 1;
        } else if d == 0.0 {
            d = f64::MIN_POSITIVE;
        }
    }
    count
}

fn bisect_eigenvalue(diag: &[f64], off: f64, mut lo: f64, mut hi: f64, k: usize) -> f64 {
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if count_below(diag, off, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// A few rounds of inverse iteration with a partially pivoted tridiagonal
/// solve; eigenvalues of the Dirichlet matrix are simple, so this converges
/// immediately for a slightly shifted factorization.
fn inverse_iteration(diag: &[f64], off: f64, lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let shift = lambda * (1.0 + 1e-12) + 1e-12;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (0.7 * (i as f64 + 1.0)).sin()).collect();
    normalize(&mut v);
    for _ in 0..3 {
        v = solve_shifted(diag, off, shift, &v);
        normalize(&mut v);
    }
    v
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Solve (T - shift I) x = b with partial pivoting (one fill-in band).
fn solve_shifted(diag: &[f64], off: f64, shift: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut main: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut upper = vec![off; n.saturating_sub(1)];
    let mut upper2 = vec![0.0; n.saturating_sub(2).max(1)];
    let mut rhs = b.to_vec();

    for i in 0..n - 1 {
        let sub = off;
        if sub.abs() > main[i].abs() {
            // Swap row i and i+1.
            let (mut a11, mut a12) = (main[i], upper[i]);
            let mut a13 = if i + 2 < n { upper2[i] } else { 0.0 };
            let (mut a21, mut a22) = (sub, main[i + 1]);
            let mut a23 = if i + 2 < n { upper[i + 1] } else { 0.0 };
            std::mem::swap(&mut a11, &mut a21);
            std::mem::swap(&mut a12, &mut a22);
            std::mem::swap(&mut a13, &mut a23);
            rhs.swap(i, i + 1);
            let m = a21 / a11;
            main[i] = a11;
            upper[i] = a12;
            if i + 2 < n {
                upper2[i] = a13;
            }
            main[i + 1] = a22 - m * a12;
            if i + 2 < n {
                upper[i + 1] = a23 - m * a13;
            }
            rhs[i + 1] -= m * rhs[i];
        } else {
            let m = sub / main[i];
            main[i + 1] -= m * upper[i];
            if i + 2 < n {
                // upper2[i] is zero before elimination without pivoting.
            }
            rhs[i + 1] -= m * rhs[i];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= upper[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= upper2[i] * x[i + 2];
        }
        x[i] = s / main[i];
    }
    x
}

/// Matrix of quadrature inner products of the normalized eigenfunctions.
pub fn gram_matrix(pairs: &[EigenPair]) -> Result<Vec<Vec<f64>>> {
    for pair in pairs.iter().skip(1) {
        pairs[0].phi.check_same_grid(&pair.phi)?;
    }
    let n = pairs.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = quadrature::inner_product(&pairs[i].phi, &pairs[j].phi)?;
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    Ok(g)
}
