//! Run configuration: TOML schema, validation and data-spec parsing.
//!
//! The exact key set is documented in docs/CONFIG.md. Unknown keys are
//! rejected with a list; data specs are expression strings extended by
//! `delta(x0[, mass])` and `dL2(expr)`.

use serde::{Deserialize, Serialize};
use sturm_heat::expr::{Expr, Var};
use sturm_heat::regularization::{DistributionSpec, Kernel, Profile};

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    UnknownKeys(Vec<String>),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::UnknownKeys(keys) => {
                write!(f, "unknown config keys: {}", keys.join(", "))
            }
            ConfigError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    /// Potential spec: expression, `delta(x0[, mass])` or `dL2(expr)`.
    pub q: String,
    /// Time coefficient spec on [0, horizon].
    pub a: String,
    /// Initial datum spec.
    pub u0: String,
    /// Optional source term f(t, x).
    pub f: Option<String>,
    /// Time horizon T.
    pub horizon: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            q: "0".into(),
            a: "1".into(),
            u0: "sin(pi*x)".into(),
            f: None,
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsConfig {
    pub spatial_points: usize,
    pub time_points: usize,
    pub n_max: usize,
    /// Positivity floor added when `a` is a delta spec.
    pub a_floor: f64,
    /// Estimate ratios above this value fail the estimates experiment.
    pub ratio_ceiling: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            spatial_points: 2001,
            time_points: 2001,
            n_max: 40,
            a_floor: 1.0,
            ratio_ceiling: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    Estimates,
    Existence,
    Uniqueness,
    Consistency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Output times of the solve experiment; defaults to 11 evenly spaced.
    pub output_times: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { kind: ExperimentKind::Solve, output_times: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Bump,
    TruncatedGaussian,
}

impl From<KernelName> for Kernel {
    fn from(k: KernelName) -> Kernel {
        match k {
            KernelName::Bump => Kernel::Bump,
            KernelName::TruncatedGaussian => Kernel::TruncatedGaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularizationConfig {
    /// One kernel for single-net experiments, two for uniqueness.
    pub kernels: Vec<KernelName>,
    /// Explicit epsilon net (strictly decreasing). Overrides the range.
    pub epsilon_net: Option<Vec<f64>>,
    /// Dyadic net 2^-first .. 2^-last when no explicit net is given.
    pub epsilon_log2_range: [u32; 2],
    /// Single epsilon used to mollify distributional data in the solve and
    /// estimates experiments.
    pub epsilon: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            kernels: vec![KernelName::Bump],
            epsilon_net: None,
            epsilon_log2_range: [3, 10],
            epsilon: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub path: String,
    /// "json", "csv" or "both".
    pub format: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: "out".into(), format: "both".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub numerics: NumericsConfig,
    pub experiment: ExperimentConfig,
    pub regularization: RegularizationConfig,
    pub output: OutputConfig,
}

/// Keys accepted in each table; anything else is reported as unknown.
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("problem", &["q", "a", "u0", "f", "horizon"]),
    ("numerics", &["spatial_points", "time_points", "n_max", "a_floor", "ratio_ceiling"]),
    ("experiment", &["kind", "output_times"]),
    ("regularization", &["kernels", "epsilon_net", "epsilon_log2_range", "epsilon"]),
    ("output", &["path", "format"]),
];

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let mut unknown = Vec::new();
    if let Some(table) = value.as_table() {
        for (section, entry) in table {
            match KNOWN_KEYS.iter().find(|(name, _)| name == section) {
                None => unknown.push(section.clone()),
                Some((_, keys)) => {
                    if let Some(sub) = entry.as_table() {
                        for key in sub.keys() {
                            if !keys.contains(&key.as_str()) {
                                unknown.push(format!("{section}.{key}"));
                            }
                        }
                    }
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }

    let config: RunConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate(&config)?;
    Ok(config)
}

/// Serialize a configuration back to its TOML document form.
pub fn serialize_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("config serializes")
}

fn validate(c: &RunConfig) -> Result<(), ConfigError> {
    let n = &c.numerics;
    if !(101..=100_001).contains(&n.spatial_points) {
        return Err(ConfigError::Invalid(format!(
            "numerics.spatial_points = {} outside [101, 100001]",
            n.spatial_points
        )));
    }
    if !(11..=100_001).contains(&n.time_points) {
        return Err(ConfigError::Invalid(format!(
            "numerics.time_points = {} outside [11, 100001]",
            n.time_points
        )));
    }
    if !(1..=2000).contains(&n.n_max) {
        return Err(ConfigError::Invalid(format!(
            "numerics.n_max = {} outside [1, 2000]",
            n.n_max
        )));
    }
    if !(c.problem.horizon > 0.0) {
        return Err(ConfigError::Invalid("problem.horizon must be positive".into()));
    }
    if !(c.regularization.epsilon > 0.0 && c.regularization.epsilon <= 1.0) {
        return Err(ConfigError::Invalid(format!(
            "regularization.epsilon = {} outside (0, 1]",
            c.regularization.epsilon
        )));
    }
    let [first, last] = c.regularization.epsilon_log2_range;
    if first < 1 || last < first || last > 30 {
        return Err(ConfigError::Invalid(format!(
            "regularization.epsilon_log2_range = [{first}, {last}] is not a valid dyadic range"
        )));
    }
    if let Some(net) = &c.regularization.epsilon_net {
        if net.is_empty()
            || net.iter().any(|&e| !(e > 0.0 && e <= 1.0))
            || net.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(ConfigError::Invalid(
                "regularization.epsilon_net must be strictly decreasing within (0, 1]".into(),
            ));
        }
    }
    if c.regularization.kernels.is_empty() {
        return Err(ConfigError::Invalid("regularization.kernels must not be empty".into()));
    }
    if c.experiment.kind == ExperimentKind::Uniqueness && c.regularization.kernels.len() < 2 {
        return Err(ConfigError::Invalid(
            "uniqueness requires two regularization choices (set two kernels)".into(),
        ));
    }
    match c.output.format.as_str() {
        "json" | "csv" | "both" => {}
        other => {
            return Err(ConfigError::Invalid(format!(
                "output.format = {other:?}, expected json, csv or both"
            )))
        }
    }

    // Data specs must parse and use the right variable.
    let q = parse_spatial_spec(&c.problem.q, "problem.q")?;
    check_delta_interior(&q, "problem.q")?;
    let u0 = parse_spatial_spec(&c.problem.u0, "problem.u0")?;
    check_delta_interior(&u0, "problem.u0")?;
    parse_time_spec(&c.problem.a, c.problem.horizon, "problem.a")?;
    if let Some(f) = &c.problem.f {
        Expr::parse(f).map_err(|e| ConfigError::Invalid(format!("problem.f: {e}")))?;
    }
    if let Some(times) = &c.experiment.output_times {
        if times.iter().any(|&t| t < 0.0 || t > c.problem.horizon) {
            return Err(ConfigError::Invalid(format!(
                "experiment.output_times must lie in [0, {}]",
                c.problem.horizon
            )));
        }
    }
    Ok(())
}

fn check_delta_interior(spec: &DistributionSpec, key: &str) -> Result<(), ConfigError> {
    if let DistributionSpec::DeltaAt { location, .. } = spec {
        if !(*location > 0.0 && *location < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "{key}: delta location {location} must lie strictly inside (0, 1)"
            )));
        }
    }
    Ok(())
}

/// Parse a spatial data spec: `delta(x0[, mass])`, `dL2(expr)` or an
/// expression in x.
pub fn parse_spatial_spec(text: &str, key: &str) -> Result<DistributionSpec, ConfigError> {
    let trimmed = text.trim();
    if let Some(args) = call_args(trimmed, "delta") {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.is_empty() || parts.len() > 2 {
            return Err(ConfigError::Invalid(format!(
                "{key}: delta takes one or two arguments, got {trimmed:?}"
            )));
        }
        let location: f64 = parts[0]
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("{key}: bad delta location {:?}", parts[0])))?;
        let mass: f64 = if parts.len() == 2 {
            parts[1]
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{key}: bad delta mass {:?}", parts[1])))?
        } else {
            1.0
        };
        return Ok(DistributionSpec::DeltaAt { location, mass });
    }
    if let Some(arg) = call_args(trimmed, "dL2") {
        let nu = Expr::parse(arg)
            .map_err(|e| ConfigError::Invalid(format!("{key}: dL2 argument: {e}")))?;
        if nu.uses(Var::T) {
            return Err(ConfigError::Invalid(format!("{key}: dL2 argument must depend on x only")));
        }
        return Ok(DistributionSpec::DerivativeOfL2(Profile::Expr(nu)));
    }
    let expr =
        Expr::parse(trimmed).map_err(|e| ConfigError::Invalid(format!("{key}: {e}")))?;
    if expr.uses(Var::T) {
        return Err(ConfigError::Invalid(format!("{key}: spatial spec must not depend on t")));
    }
    Ok(DistributionSpec::Smooth(Profile::Expr(expr)))
}

/// Parse a time coefficient spec: `delta(t0[, mass])` or an expression in t.
pub fn parse_time_spec(
    text: &str,
    horizon: f64,
    key: &str,
) -> Result<DistributionSpec, ConfigError> {
    let trimmed = text.trim();
    if let Some(args) = call_args(trimmed, "delta") {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let location: f64 = parts
            .first()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| ConfigError::Invalid(format!("{key}: bad delta location")))?;
        let mass: f64 = if parts.len() == 2 {
            parts[1]
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{key}: bad delta mass")))?
        } else {
            1.0
        };
        if !(location > 0.0 && location < horizon) {
            return Err(ConfigError::Invalid(format!(
                "{key}: delta location {location} must lie strictly inside (0, {horizon})"
            )));
        }
        return Ok(DistributionSpec::DeltaAt { location, mass });
    }
    let expr =
        Expr::parse(trimmed).map_err(|e| ConfigError::Invalid(format!("{key}: {e}")))?;
    if expr.uses(Var::X) {
        return Err(ConfigError::Invalid(format!("{key}: time spec must not depend on x")));
    }
    Ok(DistributionSpec::Smooth(Profile::Expr(expr)))
}

fn call_args<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    let rest = text.strip_prefix(name)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner)
}

impl RunConfig {
    /// The epsilon net: explicit when given, dyadic otherwise.
    pub fn epsilon_net(&self) -> Vec<f64> {
        match &self.regularization.epsilon_net {
            Some(net) => net.clone(),
            None => {
                let [first, last] = self.regularization.epsilon_log2_range;
                (first..=last).map(|k| 2f64.powi(-(k as i32))).collect()
            }
        }
    }

    /// Output times of the solve experiment.
    pub fn output_times(&self) -> Vec<f64> {
        match &self.experiment.output_times {
            Some(times) => times.clone(),
            None => (0..=10)
                .map(|i| self.problem.horizon * i as f64 / 10.0)
                .collect(),
        }
    }
}
