//! Distributional data, Friedrichs mollification and moderateness fitting.
//!
//! Data (potential, time coefficient, initial condition, source) enters as a
//! symbolic [`DistributionSpec`]; a [`Mollifier`] turns it into a smooth
//! epsilon-family by convolution against a compactly supported unit-mass
//! kernel. Nets of norms indexed by epsilon are classified by
//! [`fit_moderateness`] and [`check_negligibility`].

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::numerics::{cumulative, quadrature, Grid, SampledFunction};
use serde::{Deserialize, Serialize};

/// A scalar profile given either in closed form or as samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Expr(Expr),
    Samples(SampledFunction),
}

impl Profile {
    /// Value inside the sample/expression domain; no extension applied.
    /// A profile depends on one variable only, so both `x` and `t` are
    /// bound to the same coordinate.
    fn eval_inside(&self, s: f64) -> f64 {
        match self {
            Profile::Expr(e) => e.eval(s, s),
            Profile::Samples(f) => f.eval_linear(s),
        }
    }
}

/// Symbolic description of a datum before regularization.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    /// A continuous function, in closed form or sampled.
    Smooth(Profile),
    /// A Dirac mass at an interior point of the interval.
    DeltaAt { location: f64, mass: f64 },
    /// The distributional derivative of an L^2 function `nu`.
    DerivativeOfL2(Profile),
    /// A bounded (possibly discontinuous) function given by samples.
    Bounded(SampledFunction),
}

impl DistributionSpec {
    pub fn smooth_expr(text: &str) -> Result<Self> {
        Ok(DistributionSpec::Smooth(Profile::Expr(Expr::parse(text)?)))
    }

    pub fn delta(location: f64, mass: f64) -> Self {
        DistributionSpec::DeltaAt { location, mass }
    }
}

/// Kernel families admissible as Friedrichs mollifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    /// exp(-1/(1-y^2)) on (-1, 1).
    Bump,
    /// A Gaussian restricted to [-1, 1] (sigma = 1/3).
    TruncatedGaussian,
}

/// Sigma of the truncated Gaussian. Small enough that the value cut off at
/// the support boundary (e^-32 ~ 1e-14) is invisible in double precision,
/// keeping the kernel numerically smooth at +-1.
const GAUSSIAN_SIGMA: f64 = 0.125;

impl Kernel {
    fn raw(&self, y: f64) -> f64 {
        if y.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Bump => (-1.0 / (1.0 - y * y)).exp(),
            Kernel::TruncatedGaussian => {
                let s2 = 2.0 * GAUSSIAN_SIGMA * GAUSSIAN_SIGMA;
                (-y * y / s2).exp() - (-1.0 / s2).exp()
            }
        }
    }

    fn raw_derivative(&self, y: f64) -> f64 {
        if y.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Bump => {
                let d = 1.0 - y * y;
                self.raw(y) * (-2.0 * y / (d * d))
            }
            Kernel::TruncatedGaussian => {
                let s2 = 2.0 * GAUSSIAN_SIGMA * GAUSSIAN_SIGMA;
                (-y * y / s2).exp() * (-y / (GAUSSIAN_SIGMA * GAUSSIAN_SIGMA))
            }
        }
    }
}

/// A normalized mollifier kernel with support in [-1, 1].
#[derive(Debug, Clone)]
pub struct Mollifier {
    kernel: Kernel,
    normalization: f64,
    cumulative: SampledFunction,
}

/// Node count of the internal kernel table; dense enough that the kernel
/// quadrature error sits far below every tolerance used by the harness.
const KERNEL_TABLE: usize = 4097;

impl Mollifier {
    pub fn new(kernel: Kernel) -> Self {
        let grid = Grid::uniform(-1.0, 1.0, KERNEL_TABLE).expect("static grid");
        let raw = SampledFunction::from_fn(grid, |y| kernel.raw(y)).expect("finite kernel");
        let total = quadrature::integrate(&raw).expect("finite kernel");
        let normalization = 1.0 / total;
        let cumulative = cumulative(&raw)
            .expect("finite kernel")
            .scale(normalization)
            .expect("finite scale");
        Self { kernel, normalization, cumulative }
    }

    pub fn bump() -> Self {
        Self::new(Kernel::Bump)
    }

    pub fn truncated_gaussian() -> Self {
        Self::new(Kernel::TruncatedGaussian)
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Normalized kernel value psi(y); unit mass, support in [-1, 1].
    pub fn psi(&self, y: f64) -> f64 {
        self.normalization * self.kernel.raw(y)
    }

    /// Derivative psi'(y).
    pub fn psi_prime(&self, y: f64) -> f64 {
        self.normalization * self.kernel.raw_derivative(y)
    }

    /// Cumulative integral of psi from -1 to `u`, clamped outside [-1, 1].
    pub fn psi_cumulative(&self, u: f64) -> f64 {
        if u <= -1.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            self.cumulative.eval_cubic(u)
        }
    }

    /// Scaled kernel psi_eps(z) = psi(z/eps)/eps.
    pub fn psi_eps(&self, z: f64, epsilon: f64) -> f64 {
        self.psi(z / epsilon) / epsilon
    }
}

/// How the datum is continued past the ends of its interval before the
/// convolution over a full kernel support window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extension {
    /// Extension by zero; boundary layers of width epsilon appear and are
    /// reported, not corrected.
    Zero,
    /// Extension by the boundary value. Preserves constants, so it keeps
    /// L-infinity regularizations convergent up to the interval ends; the
    /// harness uses it for time coefficients.
    Clamp,
}

/// Result of a mollification together with any boundary warnings.
#[derive(Debug, Clone)]
pub struct Mollified {
    pub samples: SampledFunction,
    pub warnings: Vec<String>,
}

/// Mollify a spec on a grid with extension by zero (the default continuation).
pub fn mollify(
    spec: &DistributionSpec,
    mollifier: &Mollifier,
    epsilon: f64,
    grid: Grid,
) -> Result<Mollified> {
    mollify_with_extension(spec, mollifier, epsilon, grid, Extension::Zero)
}

/// Mollify a spec on a grid with an explicit boundary continuation.
pub fn mollify_with_extension(
    spec: &DistributionSpec,
    mollifier: &Mollifier,
    epsilon: f64,
    grid: Grid,
    extension: Extension,
) -> Result<Mollified> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon}, need 0 < epsilon <= 1"
        )));
    }
    let h = grid.spacing();
    let mut warnings = Vec::new();
    if h > epsilon {
        return Err(Error::InvalidParameter(format!(
            "grid spacing {h} exceeds epsilon {epsilon}"
        )));
    }
    if h > epsilon / 10.0 {
        warnings.push(format!(
            "grid spacing {h:.3e} is coarser than epsilon/10 = {:.3e}",
            epsilon / 10.0
        ));
    }

    let samples = match spec {
        DistributionSpec::DeltaAt { location, mass } => {
            let (a, b) = (grid.start(), grid.end());
            if *location <= a || *location >= b {
                return Err(Error::InvalidParameter(format!(
                    "delta location {location} not strictly inside ({a}, {b})"
                )));
            }
            if *location - epsilon < a || *location + epsilon > b {
                warnings.push(format!(
                    "delta support [{}, {}] clipped by the interval ({a}, {b})",
                    location - epsilon,
                    location + epsilon
                ));
            }
            SampledFunction::from_fn(grid, |x| mass * mollifier.psi_eps(x - location, epsilon))?
        }
        DistributionSpec::Smooth(profile) => {
            convolve_profile(profile, mollifier, epsilon, grid, extension, false)?
        }
        DistributionSpec::Bounded(samples) => convolve_profile(
            &Profile::Samples(samples.clone()),
            mollifier,
            epsilon,
            grid,
            extension,
            false,
        )?,
        DistributionSpec::DerivativeOfL2(nu) => {
            // q = nu' regularizes as nu-tilde convolved with psi_eps',
            // which carries the boundary jumps of the zero extension.
            convolve_profile(nu, mollifier, epsilon, grid, Extension::Zero, true)?
        }
    };
    Ok(Mollified { samples, warnings })
}

/// Convolve a profile against the kernel (or its derivative) in the kernel
/// variable, splitting the quadrature at the points where the extended
/// profile loses smoothness.
fn convolve_profile(
    profile: &Profile,
    mollifier: &Mollifier,
    epsilon: f64,
    grid: Grid,
    extension: Extension,
    derivative_kernel: bool,
) -> Result<SampledFunction> {
    let (a, b) = (grid.start(), grid.end());
    let eval_extended = |s: f64| -> f64 {
        if s < a || s > b {
            match extension {
                Extension::Zero => 0.0,
                Extension::Clamp => profile.eval_inside(s.clamp(a, b)),
            }
        } else {
            profile.eval_inside(s)
        }
    };

    // Integrand in the kernel variable y; the profile is evaluated at x - eps*y.
    let kernel_at = |y: f64| -> f64 {
        if derivative_kernel {
            mollifier.psi_prime(y) / epsilon
        } else {
            mollifier.psi(y)
        }
    };

    let values = grid
        .points()
        .map(|x| {
            // Breakpoints where x - eps*y crosses an interval end.
            let mut cuts = vec![-1.0];
            for edge in [a, b] {
                let y = (x - edge) / epsilon;
                if y > -1.0 + 1e-14 && y < 1.0 - 1e-14 {
                    cuts.push(y);
                }
            }
            cuts.push(1.0);
            cuts.sort_by(f64::total_cmp);

            let mut acc = 0.0;
            for pair in cuts.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                if hi - lo < 1e-14 {
                    continue;
                }
                acc += simpson_panel(
                    |y| kernel_at(y) * eval_extended(x - epsilon * y),
                    lo,
                    hi,
                );
            }
            acc
        })
        .collect();
    SampledFunction::new(grid, values)
}

/// Composite Simpson on [lo, hi] with a node count scaled to the piece
/// length. Endpoint evaluations are nudged inward so that pieces meeting at
/// a discontinuity of the integrand each see their own one-sided limit.
fn simpson_panel(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    let panels = ((len * 192.0).ceil() as usize).clamp(16, 512);
    let n = 2 * panels;
    let h = len / n as f64;
    let nudge = 1e-12 * len;
    let mut acc = f(lo + nudge) + f(hi - nudge);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Regularized potential together with the antiderivative used by the
/// Prufer system: `nu_eps(x) = integral of q_eps from the interval start`,
/// so `q_eps = nu_eps'` holds on the grid up to quadrature error.
pub fn regularize_potential(
    q: &DistributionSpec,
    mollifier: &Mollifier,
    epsilon: f64,
    grid: Grid,
) -> Result<(Mollified, SampledFunction)> {
    let q_eps = mollify(q, mollifier, epsilon, grid)?;
    let nu_eps = cumulative(&q_eps.samples)?;
    Ok((q_eps, nu_eps))
}

/// An epsilon-indexed family of norms with a fitted bound C * eps^(-N).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModerateNet {
    pub epsilons: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fitted exponent N >= 0.
    pub exponent: u32,
    /// Fitted constant C > 0 such that every norm is below C * eps^(-N).
    pub constant: f64,
    /// Largest log-deviation from the least-squares line.
    pub residual: f64,
    /// Raw least-squares slope of log(norm) against log(1/eps).
    pub slope: f64,
    pub flags: Vec<String>,
}

/// Fit the moderateness bound `norm <= C * eps^(-N)` to a net of norms.
///
/// N is the least-squares slope of log(norm) vs log(1/eps), reduced by a
/// 0.1 allowance and rounded up, floored at zero; C is the smallest constant
/// making the bound hold on the data.
pub fn fit_moderateness(epsilons: &[f64], norms: &[f64]) -> Result<ModerateNet> {
    validate_net(epsilons)?;
    if norms.len() != epsilons.len() {
        return Err(Error::InvalidParameter(format!(
            "{} norms for {} epsilons",
            norms.len(),
            epsilons.len()
        )));
    }
    let mut flags = Vec::new();
    if decade_span(epsilons) < 2.0 {
        flags.push(format!(
            "epsilon net spans only {:.2} decades (< 2); exponent fit is less reliable",
            decade_span(epsilons)
        ));
    }
    if norms.iter().any(|&n| n < 0.0) {
        return Err(Error::InvalidParameter("negative norm in net".into()));
    }
    if norms.contains(&0.0) {
        let constant = norms.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        flags.push("identically small: at least one norm is exactly zero".into());
        return Ok(ModerateNet {
            epsilons: epsilons.to_vec(),
            norms: norms.to_vec(),
            exponent: 0,
            constant,
            residual: 0.0,
            slope: 0.0,
            flags,
        });
    }

    // Least squares of log(norm) against log(1/eps).
    let xs: Vec<f64> = epsilons.iter().map(|&e| -(e.ln())).collect();
    let ys: Vec<f64> = norms.iter().map(|&n| n.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);

    let exponent = if slope <= 0.1 { 0 } else { (slope - 0.1).ceil() as u32 };
    let constant = epsilons
        .iter()
        .zip(norms)
        .map(|(&e, &n)| n * e.powi(exponent as i32))
        .fold(0.0, f64::max);

    Ok(ModerateNet {
        epsilons: epsilons.to_vec(),
        norms: norms.to_vec(),
        exponent,
        constant,
        residual,
        slope,
        flags,
    })
}

/// Per-order negligibility verdicts for a net of difference norms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NegligibilityReport {
    pub epsilons: Vec<f64>,
    pub diff_norms: Vec<f64>,
    pub orders: Vec<OrderVerdict>,
    /// Raw log-log decay slope of the differences; infinity when the net
    /// vanishes identically.
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub order: u32,
    pub passes: bool,
    /// Fitted constant for `diff <= C * eps^order`.
    pub constant: f64,
    /// Max log-deviation from the fixed-slope line; pass means <= 0.5.
    pub residual: f64,
}

/// Floor applied before taking logarithms of difference norms.
const NORM_FLOOR: f64 = 1e-250;

/// Test whether a net of difference norms decays like eps^M for each order M.
pub fn check_negligibility(
    epsilons: &[f64],
    diff_norms: &[f64],
    orders_to_test: &[u32],
) -> Result<NegligibilityReport> {
    validate_net(epsilons)?;
    if diff_norms.len() != epsilons.len() {
        return Err(Error::InvalidParameter(format!(
            "{} diff norms for {} epsilons",
            diff_norms.len(),
            epsilons.len()
        )));
    }
    let all_zero = diff_norms.iter().all(|&d| d.abs() <= NORM_FLOOR);
    if all_zero {
        let orders = orders_to_test
            .iter()
            .map(|&order| OrderVerdict { order, passes: true, constant: 0.0, residual: 0.0 })
            .collect();
        return Ok(NegligibilityReport {
            epsilons: epsilons.to_vec(),
            diff_norms: diff_norms.to_vec(),
            orders,
            slope: f64::INFINITY,
        });
    }

    let xs: Vec<f64> = epsilons.iter().map(|&e| e.ln()).collect();
    let ys: Vec<f64> = diff_norms.iter().map(|&d| d.max(NORM_FLOOR).ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);

    let orders = orders_to_test
        .iter()
        .map(|&order| {
            // Fix the slope at `order` and fit only the constant.
            let shifted: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .map(|(&x, &y)| y - order as f64 * x)
                .collect();
            let log_c = shifted.iter().sum::<f64>() / shifted.len() as f64;
            let residual = shifted.iter().map(|&s| (s - log_c).abs()).fold(0.0, f64::max);
            OrderVerdict { order, passes: residual <= 0.5, constant: log_c.exp(), residual }
        })
        .collect();

    Ok(NegligibilityReport {
        epsilons: epsilons.to_vec(),
        diff_norms: diff_norms.to_vec(),
        orders,
        slope,
    })
}

fn validate_net(epsilons: &[f64]) -> Result<()> {
    if epsilons.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 epsilon values, got {}",
            epsilons.len()
        )));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) || epsilons.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidParameter(
            "epsilon net must be strictly decreasing and positive".into(),
        ));
    }
    Ok(())
}

fn decade_span(epsilons: &[f64]) -> f64 {
    (epsilons[0] / epsilons[epsilons.len() - 1]).log10()
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Default epsilon net 2^-3, ..., 2^-last (geometric, equal log spacing).
pub fn dyadic_net(first: u32, last: u32) -> Vec<f64> {
    (first..=last).map(|k| 2f64.powi(-(k as i32))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(count: usize) -> Grid {
        Grid::unit(count).unwrap()
    }

    #[test]
    fn bump_normalization_against_quadrature_oracle() {
        // Oracle: raw integral of exp(-1/(1-y^2)) over [-1,1] by dense
        // trapezoid, independent of the Mollifier table.
        let n = 200_001;
        let h = 2.0 / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let y: f64 = -1.0 + i as f64 * h;
            let v = if y.abs() >= 1.0 { 0.0 } else { (-1.0 / (1.0 - y * y)).exp() };
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            total += w * v * h;
        }
        assert!((total - 0.443994).abs() < 1e-5, "raw bump mass {total}");
        let m = Mollifier::bump();
        assert!((m.psi(0.0) - (-1.0f64).exp() / total).abs() < 1e-7);
    }

    #[test]
    fn kernels_have_unit_mass() {
        for kernel in [Kernel::Bump, Kernel::TruncatedGaussian] {
            let m = Mollifier::new(kernel);
            let g = Grid::uniform(-1.0, 1.0, 8193).unwrap();
            let f = SampledFunction::from_fn(g, |y| m.psi(y)).unwrap();
            let mass = quadrature::integrate(&f).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "{kernel:?} mass {mass}");
            assert!(f.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn linear_function_fixed_at_interior_point() {
        let spec = DistributionSpec::smooth_expr("x").unwrap();
        let m = Mollifier::bump();
        let grid = unit_grid(2001);
        let out = mollify(&spec, &m, 0.01, grid).unwrap();
        let mid = out.samples.value(1000);
        assert!((mid - 0.5).abs() < 1e-6, "got {mid}");
    }

    #[test]
    fn delta_peak_matches_kernel_height() {
        // Peak of the mollified delta is psi(0)/eps with
        // psi(0) = e^-1 / 0.443994 (bump normalization oracle above).
        let m = Mollifier::bump();
        let grid = unit_grid(4001);
        for eps in [0.1, 0.02] {
            let out = mollify(&DistributionSpec::delta(0.5, 1.0), &m, eps, grid).unwrap();
            let peak = out.samples.value(2000);
            assert!((peak - 0.828568 / eps).abs() < 1e-4 / eps, "eps {eps}: {peak}");
        }
    }

    #[test]
    fn delta_mass_is_preserved() {
        let grid = unit_grid(4001);
        for kernel in [Kernel::Bump, Kernel::TruncatedGaussian] {
            let m = Mollifier::new(kernel);
            let out = mollify(&DistributionSpec::delta(0.5, 1.0), &m, 0.02, grid).unwrap();
            let mass = quadrature::integrate(&out.samples).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "{kernel:?}: mass {mass}");
            assert!(out.warnings.is_empty());
        }
    }

    #[test]
    fn delta_support_is_local() {
        let grid = unit_grid(2001);
        let m = Mollifier::bump();
        let eps = 0.05;
        let out = mollify(&DistributionSpec::delta(0.5, 1.0), &m, eps, grid).unwrap();
        for (i, x) in grid.points().enumerate() {
            if x < 0.5 - eps || x > 0.5 + eps {
                assert!(out.samples.value(i).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn clipped_delta_warns() {
        let grid = unit_grid(2001);
        let m = Mollifier::bump();
        let out = mollify(&DistributionSpec::delta(0.03, 1.0), &m, 0.05, grid).unwrap();
        assert!(out.warnings.iter().any(|w| w.contains("clipped")));
        assert!(mollify(&DistributionSpec::delta(0.0, 1.0), &m, 0.05, grid).is_err());
    }

    #[test]
    fn smooth_spec_converges_monotonically() {
        let spec = DistributionSpec::smooth_expr("x*(1-x) + 0.3").unwrap();
        let m = Mollifier::bump();
        let grid = unit_grid(4001);
        let reference = SampledFunction::from_fn(grid, |x| x * (1.0 - x) + 0.3).unwrap();
        let mut previous = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let out = mollify(&spec, &m, eps, grid).unwrap();
            let err =
                quadrature::l2_norm(&out.samples.zip_with(&reference, |a, b| a - b).unwrap())
                    .unwrap();
            assert!(err <= previous * 1.1, "eps {eps}: {err} after {previous}");
            previous = err;
        }
    }

    #[test]
    fn clamp_extension_preserves_constants() {
        let spec = DistributionSpec::smooth_expr("1").unwrap();
        let m = Mollifier::bump();
        let grid = unit_grid(2001);
        let out =
            mollify_with_extension(&spec, &m, 0.05, grid, Extension::Clamp).unwrap();
        for &v in out.samples.values() {
            assert!((v - 1.0).abs() < 1e-8, "clamped constant drifted: {v}");
        }
        // Zero extension dips to ~1/2 at the ends instead.
        let zero = mollify(&spec, &m, 0.05, grid).unwrap();
        assert!((zero.samples.value(0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn potential_regularization_delta_gives_smoothed_step() {
        let m = Mollifier::bump();
        let grid = unit_grid(2001);
        let (_q, nu) =
            regularize_potential(&DistributionSpec::delta(0.5, 1.0), &m, 0.05, grid).unwrap();
        assert_eq!(nu.value(0), 0.0);
        assert!((nu.value(2000) - 1.0).abs() < 1e-8, "nu(1) = {}", nu.value(2000));
    }

    #[test]
    fn potential_regularization_zero_is_zero() {
        let m = Mollifier::bump();
        let grid = unit_grid(1001);
        let (q, nu) =
            regularize_potential(&DistributionSpec::smooth_expr("0").unwrap(), &m, 0.05, grid)
                .unwrap();
        assert!(q.samples.max_abs() <= 1e-14);
        assert!(nu.max_abs() <= 1e-14);
    }

    #[test]
    fn derivative_of_l2_matches_closed_form() {
        // nu(x) = x^2 so q = 2x away from the boundary layers.
        let spec = DistributionSpec::DerivativeOfL2(Profile::Expr(Expr::parse("x^2").unwrap()));
        let m = Mollifier::bump();
        let grid = unit_grid(2001);
        let eps = 0.02;
        let (q, nu) = regularize_potential(&spec, &m, eps, grid).unwrap();
        for (i, x) in grid.points().enumerate() {
            if x > 2.0 * eps && x < 1.0 - 2.0 * eps {
                assert!((q.samples.value(i) - 2.0 * x).abs() < 1e-6, "q({x})");
                assert!((nu.value(i) - x * x).abs() < 5.0 * eps * eps, "nu({x})");
            }
        }
    }

    #[test]
    fn nu_consistency_under_finite_differences() {
        let m = Mollifier::bump();
        let grid = unit_grid(2001);
        let h = grid.spacing();
        let (q, nu) =
            regularize_potential(&DistributionSpec::delta(0.5, 1.0), &m, 0.05, grid).unwrap();
        let q_inf = q.samples.max_abs();
        let mut worst = 0.0f64;
        let mut qpp = 0.0f64;
        for i in 1..grid.count() - 1 {
            let fd = (nu.value(i + 1) - nu.value(i - 1)) / (2.0 * h);
            worst = worst.max((fd - q.samples.value(i)).abs());
            let second =
                q.samples.value(i + 1) - 2.0 * q.samples.value(i) + q.samples.value(i - 1);
            qpp = qpp.max(second.abs() / (h * h));
        }
        // Centered difference of the trapezoid antiderivative equals the
        // neighbour average of q, so the defect is bounded by q'' h^2 / 4.
        assert!(worst <= 1e-6 * q_inf + qpp * h * h / 3.9, "worst {worst}");
    }

    #[test]
    fn moderateness_of_delta_peaks() {
        // Peak of the mollified delta grows like psi(0)/eps => N = 1.
        let m = Mollifier::bump();
        let psi0 = m.psi(0.0);
        let epsilons: Vec<f64> = vec![1e-1, 1e-2, 1e-3, 1e-4];
        let norms: Vec<f64> = epsilons.iter().map(|&e| psi0 / e).collect();
        let net = fit_moderateness(&epsilons, &norms).unwrap();
        assert_eq!(net.exponent, 1);
        assert!((net.constant - psi0).abs() < 1e-10);
        assert!(net.residual < 1e-10);
    }

    #[test]
    fn moderateness_of_constant_and_decaying_nets() {
        let epsilons = dyadic_net(3, 10);
        let constant: Vec<f64> = vec![5.0; epsilons.len()];
        let net = fit_moderateness(&epsilons, &constant).unwrap();
        assert_eq!(net.exponent, 0);
        assert!((net.constant - 5.0).abs() < 1e-12);

        let decaying: Vec<f64> = epsilons.iter().map(|&e| e * e).collect();
        let net = fit_moderateness(&epsilons, &decaying).unwrap();
        assert_eq!(net.exponent, 0);
        let max_norm = decaying.iter().cloned().fold(0.0, f64::max);
        assert!((net.constant - max_norm).abs() < 1e-12);
    }

    #[test]
    fn moderateness_flags_zero_norms() {
        let epsilons = dyadic_net(3, 6);
        let norms = vec![1.0, 0.5, 0.0, 0.1];
        let net = fit_moderateness(&epsilons, &norms).unwrap();
        assert_eq!(net.exponent, 0);
        assert!((net.constant - 1.0).abs() < 1e-12);
        assert!(net.flags.iter().any(|f| f.contains("identically small")));
    }

    #[test]
    fn negligibility_of_zero_and_linear_nets() {
        let epsilons = dyadic_net(3, 10);
        let zeros = vec![0.0; epsilons.len()];
        let report = check_negligibility(&epsilons, &zeros, &[1, 2, 3]).unwrap();
        assert!(report.orders.iter().all(|o| o.passes));
        assert!(report.slope.is_infinite());

        let linear: Vec<f64> = epsilons.clone();
        let report = check_negligibility(&epsilons, &linear, &[1, 3]).unwrap();
        assert!(report.orders[0].passes, "order 1 should pass");
        assert!(!report.orders[1].passes, "order 3 should fail");
        assert!((report.slope - 1.0).abs() < 1e-10);
    }

    #[test]
    fn net_validation() {
        assert!(fit_moderateness(&[0.1, 0.01], &[1.0, 1.0]).is_err());
        assert!(fit_moderateness(&[0.1, 0.2, 0.1, 0.05], &[1.0; 4]).is_err());
    }

    proptest! {
        #[test]
        fn moderateness_is_scale_equivariant(alpha in 1e-3f64..1e3) {
            let epsilons = dyadic_net(3, 10);
            let norms: Vec<f64> = epsilons.iter().map(|&e| 2.0 / e.sqrt()).collect();
            let base = fit_moderateness(&epsilons, &norms).unwrap();
            let scaled: Vec<f64> = norms.iter().map(|&n| alpha * n).collect();
            let fit = fit_moderateness(&epsilons, &scaled).unwrap();
            prop_assert_eq!(fit.exponent, base.exponent);
            prop_assert!((fit.constant / base.constant - alpha).abs() <= 1e-9 * alpha);
        }
    }
}
