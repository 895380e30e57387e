//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p sturm-heat-core --test acceptance -- --nocapture`
//! to see the per-criterion lines.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use sturm_heat::estimates::{
    verify_corollary1, verify_corollary2, verify_theorem1, verify_theorem2, EstimateSuite,
};
use sturm_heat::expr::Expr;
use sturm_heat::heat::{
    accumulate, crank_nicolson_oracle, SourceTerm, SpectralSolution, TimeCoefficient,
};
use sturm_heat::numerics::{quadrature, Grid, SampledFunction};
use sturm_heat::regularization::{dyadic_net, mollify, DistributionSpec, Mollifier};
use sturm_heat::sturm_liouville::{build_eigenpairs, gram_matrix, matrix_oracle, shoot_eigenvalue};
use sturm_heat::vws::{
    run_consistency, run_existence, run_uniqueness, InjectedPerturbation, RegularizationChoice,
    VwsNumerics, VwsProblem,
};

const SPACE: usize = 2001;

fn report(criterion: u32, name: &str, pass: bool, details: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion:02} {name}: {status} ({details})");
    assert!(pass, "criterion {criterion} ({name}) failed: {details}");
}

fn space_grid() -> Grid {
    Grid::unit(SPACE).unwrap()
}

fn zero_nu() -> SampledFunction {
    SampledFunction::zeros(space_grid())
}

fn shift_nu() -> SampledFunction {
    SampledFunction::from_fn(space_grid(), |x| 0.3 * x).unwrap()
}

fn delta_potential(location: f64, eps: f64) -> (SampledFunction, SampledFunction) {
    let q = mollify(
        &DistributionSpec::delta(location, 1.0),
        &Mollifier::bump(),
        eps,
        space_grid(),
    )
    .unwrap()
    .samples;
    let nu = quadrature::cumulative(&q).unwrap();
    (q, nu)
}

fn sin_pi_x() -> SampledFunction {
    SampledFunction::from_fn(space_grid(), |x| (PI * x).sin()).unwrap()
}

#[test]
fn criterion_01_classical_spectrum() {
    let nu = zero_nu();
    let pairs = build_eigenpairs(&nu, 10).unwrap();
    let mut worst_lambda = 0.0f64;
    let mut worst_phi = 0.0f64;
    for pair in &pairs {
        let exact = (PI * pair.index as f64).powi(2);
        worst_lambda = worst_lambda.max((pair.lambda - exact).abs() / exact);
        let n = pair.index as f64;
        let reference =
            SampledFunction::from_fn(space_grid(), |x| 2f64.sqrt() * (n * PI * x).sin()).unwrap();
        let diff = pair.phi.zip_with(&reference, |a, b| a - b).unwrap();
        worst_phi = worst_phi.max(quadrature::l2_norm(&diff).unwrap());
    }
    report(
        1,
        "classical spectrum",
        worst_lambda <= 1e-7 && worst_phi <= 1e-6,
        &format!("max relative eigenvalue error {worst_lambda:.2e}, max L2 error {worst_phi:.2e}"),
    );
}

#[test]
fn criterion_02_asymptotic_trend() {
    // Bounded potentials: constant 0.3 and a mollified unit delta at 0.3.
    let deviation = |nu: &SampledFunction, n: usize| {
        let lambda = shoot_eigenvalue(nu, n, None).unwrap();
        let base = (PI * n as f64).powi(2);
        n as f64 * (lambda / base - 1.0).abs()
    };
    let nu_a = shift_nu();
    let (_, nu_b) = delta_potential(0.3, 0.05);
    let (a2, a20) = (deviation(&nu_a, 2), deviation(&nu_a, 20));
    let (b2, b20) = (deviation(&nu_b, 2), deviation(&nu_b, 20));
    report(
        2,
        "asymptotic law",
        a20 <= a2 && b20 <= b2,
        &format!("q=0.3: {a20:.3e} <= {a2:.3e}; mollified delta: {b20:.3e} <= {b2:.3e}"),
    );
}

#[test]
fn criterion_03_oracle_cross_validation() {
    let h = space_grid().spacing();
    let q0 = SampledFunction::zeros(space_grid());
    let q_const = SampledFunction::from_fn(space_grid(), |_| 0.3).unwrap();
    let (q_delta, nu_delta) = delta_potential(0.5, 0.05);
    let cases: Vec<(&str, SampledFunction, SampledFunction)> = vec![
        ("q=0", q0, zero_nu()),
        ("q=0.3", q_const, shift_nu()),
        ("mollified delta", q_delta, nu_delta),
    ];
    let mut details = String::new();
    let mut pass = true;
    for (name, q, nu) in &cases {
        let (oracle, _) = matrix_oracle(q, 10).unwrap();
        let mut worst = 0.0f64;
        for n in 1..=10usize {
            let lambda = shoot_eigenvalue(nu, n, None).unwrap();
            let tol = (1e-4 * lambda).max(10.0 * h * h * lambda * lambda);
            let gap = (lambda - oracle[n - 1]).abs();
            worst = worst.max(gap / tol);
        }
        pass &= worst <= 1.0;
        details.push_str(&format!("{name}: worst gap/tol = {worst:.3}; "));
    }
    report(3, "Prufer vs matrix oracle", pass, &details);
}

#[test]
fn criterion_04_gram_identity() {
    let (_, nu_delta) = delta_potential(0.5, 0.05);
    let cases: Vec<(&str, SampledFunction)> =
        vec![("q=0", zero_nu()), ("q=0.3", shift_nu()), ("mollified delta", nu_delta)];
    let mut pass = true;
    let mut details = String::new();
    for (name, nu) in &cases {
        let pairs = build_eigenpairs(nu, 10).unwrap();
        let g = gram_matrix(&pairs).unwrap();
        let mut worst = 0.0f64;
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[i][j] - expected).abs());
            }
        }
        pass &= worst <= 1e-6;
        details.push_str(&format!("{name}: max deviation {worst:.2e}; "));
    }
    report(4, "Gram matrix identity", pass, &details);
}

#[test]
fn criterion_05_heat_closed_forms() {
    // Homogeneous: u0 = sin(pi x), a = 1, q = 0 at t = 0.1.
    let pairs = build_eigenpairs(&zero_nu(), 10).unwrap();
    let tc = TimeCoefficient::unit(1.0, 2001).unwrap();
    let sol = SpectralSolution::homogeneous(pairs.clone(), &sin_pi_x(), tc).unwrap();
    let u = sol.evolve(0.1).unwrap();
    let factor = (-PI * PI * 0.1).exp();
    let exact = SampledFunction::from_fn(space_grid(), |x| factor * (PI * x).sin()).unwrap();
    let decay_err = quadrature::l2_norm(&u.zip_with(&exact, |a, b| a - b).unwrap()).unwrap();

    // Stationary limit: f = sin(pi x), u0 = 0 at t = 2.
    let time_grid = Grid::uniform(0.0, 2.0, 2001).unwrap();
    let a = SampledFunction::from_fn(time_grid, |_| 1.0).unwrap();
    let f = SourceTerm::from_closure(|_t, x| (PI * x).sin(), time_grid, space_grid()).unwrap();
    let forced = SpectralSolution::with_source(
        pairs,
        &SampledFunction::zeros(space_grid()),
        accumulate(&a, 1.0).unwrap(),
        f,
    )
    .unwrap();
    let amplitude = forced.evolve(2.0).unwrap().value(SPACE / 2);
    let amp_err = (amplitude - 1.0 / (PI * PI)).abs();

    report(
        5,
        "heat closed forms",
        decay_err <= 1e-6 && amp_err <= 1e-5,
        &format!("decay L2 error {decay_err:.2e}, stationary amplitude error {amp_err:.2e}"),
    );
}

#[test]
fn criterion_06_spectral_vs_crank_nicolson() {
    let (q, nu) = delta_potential(0.5, 0.05);
    let pairs = build_eigenpairs(&nu, 40).unwrap();
    let tc = TimeCoefficient::unit(0.1, 1001).unwrap(); // dt = 1e-4
    let u0 = sin_pi_x();
    let sol = SpectralSolution::homogeneous(pairs, &u0, tc.clone()).unwrap();
    let spectral = sol.evolve(0.1).unwrap();
    let cn = crank_nicolson_oracle(&q, &tc, &u0, None, &[0.1]).unwrap();
    let err = quadrature::l2_norm(&spectral.zip_with(&cn[0], |a, b| a - b).unwrap()).unwrap();
    report(
        6,
        "spectral vs Crank-Nicolson",
        err <= 2e-3,
        &format!("L2 discrepancy at t = 0.1: {err:.2e}"),
    );
}

/// One estimate configuration of the acceptance matrix.
struct EstimateCase {
    label: &'static str,
    nu: SampledFunction,
    q: SampledFunction,
    u0: SampledFunction,
    u0_second: Option<SampledFunction>,
    a: fn(f64) -> f64,
    f: Option<Expr>,
}

fn estimate_cases() -> Vec<EstimateCase> {
    let g = space_grid();
    let (q_delta, nu_delta) = delta_potential(0.5, 0.05);
    let sin1 = sin_pi_x();
    let sin1_pp = SampledFunction::from_fn(g, |x| -PI * PI * (PI * x).sin()).unwrap();
    let parabola = SampledFunction::from_fn(g, |x| x * (1.0 - x)).unwrap();
    let parabola_pp = SampledFunction::from_fn(g, |_| -2.0).unwrap();
    let mixed =
        SampledFunction::from_fn(g, |x| (PI * x).sin() + 0.5 * (2.0 * PI * x).sin()).unwrap();
    let mixed_pp = SampledFunction::from_fn(g, |x| {
        -PI * PI * (PI * x).sin() - 2.0 * PI * PI * (2.0 * PI * x).sin()
    })
    .unwrap();
    vec![
        EstimateCase {
            label: "q=0, u0=sin",
            nu: zero_nu(),
            q: SampledFunction::zeros(g),
            u0: sin1.clone(),
            u0_second: Some(sin1_pp.clone()),
            a: |_| 1.0,
            f: None,
        },
        EstimateCase {
            label: "q=0.3, u0=x(1-x), a=1+t/2",
            nu: shift_nu(),
            q: SampledFunction::from_fn(g, |_| 0.3).unwrap(),
            u0: parabola.clone(),
            u0_second: Some(parabola_pp.clone()),
            a: |t| 1.0 + 0.5 * t,
            f: None,
        },
        EstimateCase {
            label: "mollified delta, u0=sin",
            nu: nu_delta.clone(),
            q: q_delta.clone(),
            u0: sin1.clone(),
            u0_second: Some(sin1_pp.clone()),
            a: |_| 1.0,
            f: None,
        },
        EstimateCase {
            label: "q=0, u0=0, f=sin",
            nu: zero_nu(),
            q: SampledFunction::zeros(g),
            u0: SampledFunction::zeros(g),
            u0_second: None,
            a: |_| 1.0,
            f: Some(Expr::parse("sin(pi*x)").unwrap()),
        },
        EstimateCase {
            label: "q=0.3, u0=mixed, f=exp(-t)sin",
            nu: shift_nu(),
            q: SampledFunction::from_fn(g, |_| 0.3).unwrap(),
            u0: mixed,
            u0_second: Some(mixed_pp),
            a: |t| 1.0 + 0.5 * t,
            f: Some(Expr::parse("exp(-t)*sin(pi*x)").unwrap()),
        },
        EstimateCase {
            label: "mollified delta, u0=x(1-x), f=sin",
            nu: nu_delta,
            q: q_delta,
            u0: parabola,
            u0_second: Some(parabola_pp),
            a: |_| 1.0,
            f: Some(Expr::parse("sin(pi*x)").unwrap()),
        },
    ]
}

fn run_estimate_case(case: &EstimateCase, scale: f64) -> Vec<EstimateSuite> {
    let time_grid = Grid::uniform(0.0, 1.0, 2001).unwrap();
    let a = SampledFunction::from_fn(time_grid, case.a).unwrap();
    let floor = a.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let tc = accumulate(&a, floor).unwrap();
    let pairs = build_eigenpairs(&case.nu, 40).unwrap();
    let u0 = case.u0.scale(scale).unwrap();
    let u0_second = case.u0_second.as_ref().map(|s| s.scale(scale).unwrap());
    match &case.f {
        None => {
            let sol = SpectralSolution::homogeneous(pairs, &u0, tc).unwrap();
            vec![
                verify_theorem1(&sol, &case.nu, &case.q, &u0, case.label).unwrap(),
                verify_corollary1(&sol, &case.nu, &case.q, &u0, u0_second.as_ref(), case.label)
                    .unwrap(),
            ]
        }
        Some(expr) => {
            let f = SourceTerm::from_expr(expr, time_grid, space_grid())
                .unwrap()
                .scale(scale)
                .unwrap();
            let sol = SpectralSolution::with_source(pairs, &u0, tc, f).unwrap();
            vec![
                verify_theorem2(&sol, &case.nu, &case.q, &u0, case.label).unwrap(),
                verify_corollary2(&sol, &case.nu, &case.q, &u0, u0_second.as_ref(), case.label)
                    .unwrap(),
            ]
        }
    }
}

#[test]
fn criterion_07_estimate_suite() {
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_drift = 0.0f64;
    for case in estimate_cases() {
        let base = run_estimate_case(&case, 1.0);
        for suite in &base {
            for r in &suite.reports {
                pass &= r.ratio.is_finite() && r.ratio <= 100.0;
                worst_ratio = worst_ratio.max(r.ratio);
            }
        }
        // Scaling the data by 10 must leave every ratio unchanged.
        let scaled = run_estimate_case(&case, 10.0);
        for (s0, s1) in base.iter().zip(&scaled) {
            for (r0, r1) in s0.reports.iter().zip(&s1.reports) {
                let denom = r0.ratio.abs().max(1e-300);
                let drift = (r0.ratio - r1.ratio).abs() / denom;
                worst_drift = worst_drift.max(drift);
                pass &= drift <= 1e-10;
            }
        }
    }
    report(
        7,
        "estimate suite",
        pass,
        &format!("6 configurations; worst ratio {worst_ratio:.3}, worst scaling drift {worst_drift:.2e}"),
    );
}

#[test]
fn criterion_08_existence_moderateness() {
    let problem = VwsProblem {
        q: DistributionSpec::delta(0.5, 1.0),
        a: DistributionSpec::smooth_expr("1").unwrap(),
        u0: DistributionSpec::smooth_expr("sin(pi*x)").unwrap(),
        horizon: 1.0,
        numerics: VwsNumerics::default(),
    };
    let choice = RegularizationChoice::new(Mollifier::bump(), dyadic_net(3, 8), "bump");
    let r = run_existence(&problem, &choice).unwrap();
    let u_net = r.u_net.clone().unwrap();
    let dtu_net = r.dtu_net.clone().unwrap();
    let pass = u_net.residual <= 0.5 && dtu_net.residual <= 0.5 && dtu_net.exponent == 1;
    report(
        8,
        "existence (moderate nets)",
        pass,
        &format!(
            "|u| net: N = {}, residual {:.3}; |du/dt| net: N = {}, residual {:.3}",
            u_net.exponent, u_net.residual, dtu_net.exponent, dtu_net.residual
        ),
    );
}

#[test]
fn criterion_09_uniqueness_surrogate() {
    let problem = VwsProblem {
        q: DistributionSpec::delta(0.5, 1.0),
        a: DistributionSpec::smooth_expr("1").unwrap(),
        u0: DistributionSpec::smooth_expr("sin(pi*x)").unwrap(),
        horizon: 1.0,
        numerics: VwsNumerics::default(),
    };
    let net = dyadic_net(3, 10);
    let bump = RegularizationChoice::new(Mollifier::bump(), net.clone(), "bump");
    let gauss =
        RegularizationChoice::new(Mollifier::truncated_gaussian(), net.clone(), "gauss");
    let r = run_uniqueness(&problem, &bump, &gauss).unwrap();
    let diffs: Vec<f64> = r.records.iter().map(|rec| rec.diff.unwrap()).collect();
    let monotone = diffs.windows(2).all(|w| w[1] <= w[0] * 1.1);
    let contraction = diffs.last().unwrap() / diffs.first().unwrap();

    // Self-test: an injected eps^3 difference must be recovered as slope 3.
    let plain = RegularizationChoice::new(Mollifier::bump(), net.clone(), "plain");
    let mut perturbed = RegularizationChoice::new(Mollifier::bump(), net, "eps3");
    perturbed.u0_perturbation = Some(InjectedPerturbation {
        order: 3,
        profile: Expr::parse("sin(2*pi*x)").unwrap(),
    });
    let self_test = run_uniqueness(&problem, &plain, &perturbed).unwrap();
    let slope = self_test.slope.unwrap();

    let pass = monotone && contraction <= 1e-2 && (slope - 3.0).abs() <= 0.2;
    report(
        9,
        "uniqueness surrogate",
        pass,
        &format!(
            "monotone = {monotone}, final/initial = {contraction:.2e}, self-test slope = {slope:.3}"
        ),
    );
}

#[test]
fn criterion_10_consistency() {
    let space = space_grid();
    let time = Grid::uniform(0.0, 1.0, 2001).unwrap();
    let q = SampledFunction::from_fn(space, |_| 0.3).unwrap();
    let a = SampledFunction::from_fn(time, |_| 1.0).unwrap();
    let u0 = sin_pi_x();
    let choice = RegularizationChoice::new(Mollifier::bump(), dyadic_net(3, 10), "bump");
    let r = run_consistency(&q, &a, &u0, &choice, &VwsNumerics::default()).unwrap();
    let errs: Vec<f64> = r.records.iter().map(|rec| rec.diff.unwrap()).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let contraction = errs.last().unwrap() / errs.first().unwrap();
    let slope = r.slope.unwrap();
    let pass = decreasing && slope >= 1.5 && contraction <= 1.0 / 50.0;
    report(
        10,
        "consistency",
        pass,
        &format!(
            "decreasing = {decreasing}, slope = {slope:.3}, E(2^-10)/E(2^-3) = {contraction:.2e}"
        ),
    );
}

#[test]
fn criterion_11_pde_residual() {
    // Every homogeneous configuration satisfies the termwise residual bound
    // at five sampled times.
    let g = space_grid();
    let h = g.spacing();
    let (q_delta, nu_delta) = delta_potential(0.5, 0.05);
    let configs: Vec<(&str, SampledFunction, SampledFunction, SampledFunction)> = vec![
        ("q=0, u0=sin", SampledFunction::zeros(g), zero_nu(), sin_pi_x()),
        (
            "q=0.3, u0=x(1-x)",
            SampledFunction::from_fn(g, |_| 0.3).unwrap(),
            shift_nu(),
            SampledFunction::from_fn(g, |x| x * (1.0 - x)).unwrap(),
        ),
        ("delta, u0=sin", q_delta, nu_delta, sin_pi_x()),
    ];
    let mut pass = true;
    let mut details = String::new();
    for (label, q, nu, u0) in &configs {
        let pairs = build_eigenpairs(nu, 40).unwrap();
        let time_grid = Grid::uniform(0.0, 1.0, 2001).unwrap();
        let a = SampledFunction::from_fn(time_grid, |t| 1.0 + 0.5 * t).unwrap();
        let sol =
            SpectralSolution::homogeneous(pairs, u0, accumulate(&a, 1.0).unwrap()).unwrap();
        let lambda_max = sol.lambdas().last().cloned().unwrap();
        let tol = 100.0 * (h * h * lambda_max * lambda_max + sol.truncation_tail().abs());
        let mut worst = 0.0f64;
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let u = sol.evolve(t).unwrap();
            let du = sol.time_derivative(t).unwrap();
            let a_t = sol.time_coefficient().a_at(t);
            let mut residual2 = 0.0;
            for i in 1..g.count() - 1 {
                let uxx = (u.value(i + 1) - 2.0 * u.value(i) + u.value(i - 1)) / (h * h);
                let res = du.value(i) + a_t * (-uxx + q.value(i) * u.value(i));
                residual2 += res * res * h;
            }
            worst = worst.max(residual2.sqrt());
        }
        pass &= worst <= tol;
        details.push_str(&format!("{label}: residual {worst:.3e} <= {tol:.3e}; "));
    }
    report(11, "PDE residual", pass, &details);
}
