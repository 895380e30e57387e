//! Experiment dispatch: assemble the problem from the config, run the
//! requested experiment and write reports.

use crate::config::{
    parse_spatial_spec, parse_time_spec, ExperimentKind, KernelName, RunConfig,
};
use crate::output::{self, Report, SolveReport};
use std::path::{Path, PathBuf};
use std::time::Instant;
use sturm_heat::estimates::{
    verify_corollary1, verify_corollary2, verify_theorem1, verify_theorem2, EstimateSuite,
};
use sturm_heat::expr::Expr;
use sturm_heat::heat::{accumulate, SourceTerm, SpectralSolution, TimeCoefficient};
use sturm_heat::numerics::{quadrature, Grid, SampledFunction};
use sturm_heat::regularization::{DistributionSpec, Mollifier, Profile};
use sturm_heat::sturm_liouville::build_eigenpairs;
use sturm_heat::vws::{
    regularize_problem, run_consistency, run_existence, run_uniqueness, RegularizationChoice,
    VwsNumerics, VwsProblem,
};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Solver(String),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
            RunError::Io(e) => write!(f, "io failure: {e}"),
        }
    }
}

impl From<sturm_heat::Error> for RunError {
    fn from(e: sturm_heat::Error) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// Outcome of a run; verdict failures map to a dedicated exit code for CI.
#[derive(Debug)]
pub enum Outcome {
    Pass,
    VerdictFail(String),
}

pub struct Options {
    pub output_dir: Option<PathBuf>,
    pub verbose: bool,
}

struct ParsedProblem {
    q: DistributionSpec,
    a: DistributionSpec,
    u0: DistributionSpec,
    f: Option<Expr>,
}

fn parse_problem(config: &RunConfig) -> Result<ParsedProblem, RunError> {
    let p = &config.problem;
    let q = parse_spatial_spec(&p.q, "problem.q").map_err(|e| RunError::Config(e.to_string()))?;
    let u0 =
        parse_spatial_spec(&p.u0, "problem.u0").map_err(|e| RunError::Config(e.to_string()))?;
    let a = parse_time_spec(&p.a, p.horizon, "problem.a")
        .map_err(|e| RunError::Config(e.to_string()))?;
    let f = match &p.f {
        None => None,
        Some(text) => Some(
            Expr::parse(text).map_err(|e| RunError::Config(format!("problem.f: {e}")))?,
        ),
    };
    Ok(ParsedProblem { q, a, u0, f })
}

fn vws_numerics(config: &RunConfig) -> VwsNumerics {
    VwsNumerics {
        spatial_points: config.numerics.spatial_points,
        time_points: config.numerics.time_points,
        n_max: config.numerics.n_max,
        a_floor: config.numerics.a_floor,
        mass_term_diagnostic: false,
    }
}

fn mollifiers(config: &RunConfig) -> Vec<Mollifier> {
    config
        .regularization
        .kernels
        .iter()
        .map(|&k| Mollifier::new(k.into()))
        .collect()
}

fn kernel_label(name: KernelName) -> &'static str {
    match name {
        KernelName::Bump => "bump",
        KernelName::TruncatedGaussian => "truncated_gaussian",
    }
}

/// Materialized (sampled, smooth) problem data for solve/estimates.
struct Materialized {
    q: SampledFunction,
    nu: SampledFunction,
    u0: SampledFunction,
    time: TimeCoefficient,
    warnings: Vec<String>,
}

/// Sample smooth specs directly; mollify distributional ones at the
/// configured epsilon through the experiment regularization path.
fn materialize(
    parsed: &ParsedProblem,
    config: &RunConfig,
    space: Grid,
    time_grid: Grid,
) -> Result<Materialized, RunError> {
    let needs_mollification = |spec: &DistributionSpec| {
        matches!(
            spec,
            DistributionSpec::DeltaAt { .. } | DistributionSpec::DerivativeOfL2(_)
        )
    };

    if needs_mollification(&parsed.q)
        || needs_mollification(&parsed.a)
        || needs_mollification(&parsed.u0)
    {
        let mollifier = mollifiers(config).remove(0);
        let problem = VwsProblem {
            q: parsed.q.clone(),
            a: parsed.a.clone(),
            u0: parsed.u0.clone(),
            horizon: config.problem.horizon,
            numerics: vws_numerics(config),
        };
        let choice = RegularizationChoice::new(
            mollifier,
            vec![config.regularization.epsilon],
            "solve",
        );
        let reg = regularize_problem(&problem, &choice, config.regularization.epsilon, space, time_grid)?;
        let mut warnings = reg.warnings;
        warnings.push(format!(
            "distributional data mollified at epsilon = {}",
            config.regularization.epsilon
        ));
        return Ok(Materialized {
            q: reg.q_eps,
            nu: reg.nu_eps,
            u0: reg.u0_eps,
            time: reg.time,
            warnings,
        });
    }

    // All data smooth: sample directly.
    let sample_profile = |profile: &Profile, grid: Grid, time_var: bool| -> Result<SampledFunction, RunError> {
        Ok(match profile {
            Profile::Expr(e) => SampledFunction::from_fn(grid, |s| {
                if time_var {
                    e.eval_t(s)
                } else {
                    e.eval_x(s)
                }
            })?,
            Profile::Samples(s) => SampledFunction::from_fn(grid, |x| s.eval_linear(x))?,
        })
    };
    let q = match &parsed.q {
        DistributionSpec::Smooth(p) => sample_profile(p, space, false)?,
        DistributionSpec::Bounded(s) => SampledFunction::from_fn(space, |x| s.eval_linear(x))?,
        _ => unreachable!(),
    };
    let u0 = match &parsed.u0 {
        DistributionSpec::Smooth(p) => sample_profile(p, space, false)?,
        DistributionSpec::Bounded(s) => SampledFunction::from_fn(space, |x| s.eval_linear(x))?,
        _ => unreachable!(),
    };
    let a = match &parsed.a {
        DistributionSpec::Smooth(p) => sample_profile(p, time_grid, true)?,
        DistributionSpec::Bounded(s) => SampledFunction::from_fn(time_grid, |t| s.eval_linear(t))?,
        _ => unreachable!(),
    };
    let floor = a.values().iter().cloned().fold(f64::INFINITY, f64::min);
    if !(floor > 0.0) {
        return Err(RunError::Config(format!(
            "problem.a must be strictly positive on [0, T]; minimum sample = {floor}"
        )));
    }
    let nu = quadrature::cumulative(&q)?;
    Ok(Materialized {
        q,
        nu,
        u0,
        time: accumulate(&a, floor)?,
        warnings: Vec::new(),
    })
}

fn build_solution(
    parsed: &ParsedProblem,
    config: &RunConfig,
) -> Result<(Materialized, SpectralSolution), RunError> {
    let space = Grid::unit(config.numerics.spatial_points)?;
    let time_grid = Grid::uniform(0.0, config.problem.horizon, config.numerics.time_points)?;
    let data = materialize(parsed, config, space, time_grid)?;
    let pairs = build_eigenpairs(&data.nu, config.numerics.n_max)?;
    let solution = match &parsed.f {
        None => SpectralSolution::homogeneous(pairs, &data.u0, data.time.clone())?,
        Some(expr) => {
            let source = SourceTerm::from_expr(expr, time_grid, space)?;
            SpectralSolution::with_source(pairs, &data.u0, data.time.clone(), source)?
        }
    };
    Ok((data, solution))
}

/// Run the configured experiment; artifacts land in the output directory.
pub fn execute(config: &RunConfig, options: &Options) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let out_dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.path));
    std::fs::create_dir_all(&out_dir)?;
    // Record the validated config with every default filled in.
    output::write_atomic(
        &out_dir.join("config_effective.toml"),
        crate::config::serialize_config(config).as_bytes(),
    )?;
    let parsed = parse_problem(config)?;

    let outcome = match config.experiment.kind {
        ExperimentKind::Solve => run_solve(&parsed, config, &out_dir, options)?,
        ExperimentKind::Estimates => run_estimates(&parsed, config, &out_dir, options)?,
        ExperimentKind::Existence => run_vws_existence(&parsed, config, &out_dir)?,
        ExperimentKind::Uniqueness => run_vws_uniqueness(&parsed, config, &out_dir)?,
        ExperimentKind::Consistency => run_vws_consistency(&parsed, config, &out_dir)?,
    };

    output::write_sidecar(&out_dir, started.elapsed().as_millis())?;
    Ok(outcome)
}

fn wants_json(config: &RunConfig) -> bool {
    config.output.format == "json" || config.output.format == "both"
}

fn wants_csv(config: &RunConfig) -> bool {
    config.output.format == "csv" || config.output.format == "both"
}

fn run_solve(
    parsed: &ParsedProblem,
    config: &RunConfig,
    out_dir: &Path,
    options: &Options,
) -> Result<Outcome, RunError> {
    let (data, solution) = build_solution(parsed, config)?;
    let times = config.output_times();
    let mut l2_norms = Vec::with_capacity(times.len());
    let mut rows = Vec::new();
    for &t in &times {
        let u = solution.evolve(t)?;
        l2_norms.push(quadrature::l2_norm(&u)?);
        if wants_csv(config) {
            for (i, x) in u.grid().points().enumerate() {
                rows.push(format!("{t},{x},{}", u.value(i)));
            }
        }
        if options.verbose {
            eprintln!("t = {t:.6}: |u|_L2 = {:.6e}", l2_norms.last().unwrap());
        }
    }

    if wants_csv(config) {
        output::write_csv(&out_dir.join("solution.csv"), "t,x,u", &rows)?;
        let eig_rows: Vec<String> = solution
            .pairs()
            .iter()
            .map(|p| format!("{},{}", p.index, p.lambda))
            .collect();
        output::write_csv(&out_dir.join("eigenvalues.csv"), "n,lambda", &eig_rows)?;
    }

    let verdict = format!(
        "solved: {} modes, lambda_1 = {:.6}, truncation tail = {:.3e}",
        solution.pairs().len(),
        solution.pairs()[0].lambda,
        solution.truncation_tail()
    );
    if wants_json(config) {
        let report = Report {
            schema_version: output::SCHEMA_VERSION,
            experiment: "solve".into(),
            verdict: verdict.clone(),
            warnings: data.warnings.clone(),
            config: config.clone(),
            solve: Some(SolveReport {
                eigenvalues: solution.lambdas(),
                truncation_tail: solution.truncation_tail(),
                times,
                l2_norms,
            }),
            estimates: None,
            vws: None,
        };
        output::write_json(&out_dir.join("report.json"), &report)?;
    }
    println!("solve: {verdict}");
    Ok(Outcome::Pass)
}

fn run_estimates(
    parsed: &ParsedProblem,
    config: &RunConfig,
    out_dir: &Path,
    options: &Options,
) -> Result<Outcome, RunError> {
    let (data, solution) = build_solution(parsed, config)?;
    let label = format!(
        "q = {}, a = {}, u0 = {}, f = {}",
        config.problem.q,
        config.problem.a,
        config.problem.u0,
        config.problem.f.as_deref().unwrap_or("0")
    );
    let mut suites: Vec<EstimateSuite> = Vec::new();
    if parsed.f.is_none() {
        suites.push(verify_theorem1(&solution, &data.nu, &data.q, &data.u0, &label)?);
        suites.push(verify_corollary1(&solution, &data.nu, &data.q, &data.u0, None, &label)?);
    } else {
        suites.push(verify_theorem2(&solution, &data.nu, &data.q, &data.u0, &label)?);
        suites.push(verify_corollary2(&solution, &data.nu, &data.q, &data.u0, None, &label)?);
    }

    let worst = suites.iter().map(|s| s.worst_ratio()).fold(0.0, f64::max);
    let ceiling = config.numerics.ratio_ceiling;
    let verdict = format!("worst ratio = {worst:.4} (ceiling {ceiling})");
    if options.verbose {
        for suite in &suites {
            for r in &suite.reports {
                eprintln!("{}: lhs {:.4e} rhs {:.4e} ratio {:.4}", r.id, r.lhs, r.rhs, r.ratio);
            }
        }
    }

    if wants_csv(config) {
        let rows: Vec<String> = suites
            .iter()
            .flat_map(|s| {
                s.reports.iter().map(|r| {
                    format!("{},{},{},{},{}", r.id, r.lhs, r.rhs, r.ratio, r.t_at_max)
                })
            })
            .collect();
        output::write_csv(&out_dir.join("estimates.csv"), "id,lhs,rhs,ratio,t_at_max", &rows)?;
    }
    if wants_json(config) {
        let report = Report {
            schema_version: output::SCHEMA_VERSION,
            experiment: "estimates".into(),
            verdict: verdict.clone(),
            warnings: data.warnings.clone(),
            config: config.clone(),
            solve: None,
            estimates: Some(suites.clone()),
            vws: None,
        };
        output::write_json(&out_dir.join("report.json"), &report)?;
    }
    println!("estimates: {verdict}");
    if worst > ceiling || !worst.is_finite() {
        return Ok(Outcome::VerdictFail(format!(
            "estimate ratio {worst} exceeds the ceiling {ceiling}"
        )));
    }
    Ok(Outcome::Pass)
}

fn write_vws_outputs(
    config: &RunConfig,
    out_dir: &Path,
    kind: &str,
    report: &sturm_heat::vws::ExperimentReport,
    net_header: &str,
    net_rows: Vec<String>,
) -> Result<(), RunError> {
    if wants_csv(config) {
        output::write_csv(&out_dir.join("net.csv"), net_header, &net_rows)?;
    }
    if wants_json(config) {
        let warnings: Vec<String> = report
            .records
            .iter()
            .flat_map(|r| r.warnings.iter().map(|w| format!("eps {}: {w}", r.epsilon)))
            .collect();
        let json = Report {
            schema_version: output::SCHEMA_VERSION,
            experiment: kind.into(),
            verdict: report.verdict.clone(),
            warnings,
            config: config.clone(),
            solve: None,
            estimates: None,
            vws: Some(report.clone()),
        };
        output::write_json(&out_dir.join("report.json"), &json)?;
    }
    Ok(())
}

fn run_vws_existence(
    parsed: &ParsedProblem,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    let problem = VwsProblem {
        q: parsed.q.clone(),
        a: parsed.a.clone(),
        u0: parsed.u0.clone(),
        horizon: config.problem.horizon,
        numerics: vws_numerics(config),
    };
    let mollifier = mollifiers(config).remove(0);
    let label = kernel_label(config.regularization.kernels[0]);
    let choice = RegularizationChoice::new(mollifier, config.epsilon_net(), label);
    let report = run_existence(&problem, &choice)?;

    let rows: Vec<String> = report
        .records
        .iter()
        .map(|r| {
            format!(
                "{},{},{}",
                r.epsilon,
                r.sup_u.map_or(String::from("nan"), |v| v.to_string()),
                r.sup_dtu.map_or(String::from("nan"), |v| v.to_string())
            )
        })
        .collect();
    write_vws_outputs(config, out_dir, "existence", &report, "epsilon,sup_u,sup_dtu", rows)?;
    println!("existence: {}", report.verdict);
    if report.verdict.starts_with("moderate") {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFail(report.verdict))
    }
}

fn run_vws_uniqueness(
    parsed: &ParsedProblem,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    let problem = VwsProblem {
        q: parsed.q.clone(),
        a: parsed.a.clone(),
        u0: parsed.u0.clone(),
        horizon: config.problem.horizon,
        numerics: vws_numerics(config),
    };
    let kernels = mollifiers(config);
    let net = config.epsilon_net();
    let choice_a = RegularizationChoice::new(
        kernels[0].clone(),
        net.clone(),
        kernel_label(config.regularization.kernels[0]),
    );
    let choice_b = RegularizationChoice::new(
        kernels[1].clone(),
        net,
        kernel_label(config.regularization.kernels[1]),
    );
    let report = run_uniqueness(&problem, &choice_a, &choice_b)?;

    let rows: Vec<String> = report
        .records
        .iter()
        .map(|r| {
            format!(
                "{},{}",
                r.epsilon,
                r.diff.map_or(String::from("nan"), |v| v.to_string())
            )
        })
        .collect();
    write_vws_outputs(config, out_dir, "uniqueness", &report, "epsilon,difference", rows)?;
    println!("uniqueness: {}", report.verdict);
    if report.verdict.starts_with("consistent with uniqueness") {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFail(report.verdict))
    }
}

fn run_vws_consistency(
    parsed: &ParsedProblem,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    // The classical reference needs bounded data given directly.
    let bounded = |spec: &DistributionSpec, key: &str| -> Result<(), RunError> {
        match spec {
            DistributionSpec::DeltaAt { .. } | DistributionSpec::DerivativeOfL2(_) => {
                Err(RunError::Config(format!(
                    "{key}: consistency requires bounded data given directly"
                )))
            }
            _ => Ok(()),
        }
    };
    bounded(&parsed.q, "problem.q")?;
    bounded(&parsed.a, "problem.a")?;
    bounded(&parsed.u0, "problem.u0")?;

    let space = Grid::unit(config.numerics.spatial_points)?;
    let time_grid = Grid::uniform(0.0, config.problem.horizon, config.numerics.time_points)?;
    let data = materialize(parsed, config, space, time_grid)?;
    let mollifier = mollifiers(config).remove(0);
    let label = kernel_label(config.regularization.kernels[0]);
    let choice = RegularizationChoice::new(mollifier, config.epsilon_net(), label);
    let numerics = vws_numerics(config);
    let report =
        run_consistency(&data.q, data.time.samples(), &data.u0, &choice, &numerics)?;

    let rows: Vec<String> = report
        .records
        .iter()
        .map(|r| {
            format!(
                "{},{}",
                r.epsilon,
                r.diff.map_or(String::from("nan"), |v| v.to_string())
            )
        })
        .collect();
    write_vws_outputs(config, out_dir, "consistency", &report, "epsilon,error", rows)?;
    println!("consistency: {}", report.verdict);
    if report.verdict.starts_with("consistent") {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFail(report.verdict))
    }
}
