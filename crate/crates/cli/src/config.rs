//! Run configuration: a versioned TOML document.
//!
//! ```toml
//! schema_version = 1
//!
//! [problem]
//! dimension = 1
//! alpha = 0.5
//! box_length = 32.0
//! points = 256
//! potential = { class = "periodic", v_per = { mean = 1.0 } }
//! nonlinearity = { p = 3.5, q = 2.5, gamma = { mean = 1.0 }, k = { mean = 0.2 } }
//! ```
//!
//! Every other table (`[solver]`, `[dichotomy]`, `[validate]`, `[evolve]`,
//! `[decompose]`, `[sweep]`, `[output]`) is optional and defaulted.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nehari_core::inequalities::mu_star;
use nehari_core::nehari::DichotomyOptions;
use nehari_core::operators::critical_exponent;
use nehari_core::{NonlinearitySpec, PotentialClass, PotentialSpec, ProblemSpec, SolverOptions, TorusGrid};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum ConfigError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<nehari_core::Error> for ConfigError {
    fn from(e: nehari_core::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Solve,
    Validate,
    Dichotomy,
    Evolve,
    Decompose,
    Sweep,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Validate => "validate",
            Task::Dichotomy => "dichotomy",
            Task::Evolve => "evolve",
            Task::Decompose => "decompose",
            Task::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dimension: usize,
    pub alpha: f64,
    pub box_length: f64,
    pub points: usize,
    pub potential: PotentialSpec,
    pub nonlinearity: NonlinearitySpec,
}

impl ProblemConfig {
    pub fn grid(&self) -> nehari_core::Result<Arc<TorusGrid>> {
        Ok(Arc::new(TorusGrid::cubic(
            self.dimension,
            self.box_length,
            self.points,
        )?))
    }

    pub fn spec(&self) -> nehari_core::Result<ProblemSpec> {
        ProblemSpec::new(self.grid()?, self.alpha, self.potential.clone(), self.nonlinearity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DichotomyConfig {
    pub margin_factor: f64,
    pub escape_tolerance: f64,
    pub coarse_check: bool,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        let d = DichotomyOptions::default();
        Self {
            margin_factor: d.margin_factor,
            escape_tolerance: d.escape_tolerance,
            coarse_check: d.coarse_check,
        }
    }
}

/// Random corpus for the inequality validator. Centers and widths are given
/// as fractions of the box length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub fields: usize,
    pub center_fraction: f64,
    pub width_fraction: [f64; 2],
    /// `ε` values for the nodewise bound `|f| ≤ ε|u| + C_ε|u|^{p-1}`.
    pub epsilons: Vec<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            fields: 100,
            center_fraction: 0.1,
            width_fraction: [0.04, 0.08],
            epsilons: vec![0.01, 0.1, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub omega: f64,
    pub t_final: f64,
    pub dt: f64,
    /// NGSF real field to start from; the ground state is computed when absent.
    pub initial: Option<PathBuf>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            omega: 0.5,
            t_final: 1.0,
            dt: 1e-3,
            initial: None,
        }
    }
}

/// Bundle `u_0 + w(· - y)` with Gaussian `u_0` and `w` centered at the
/// origin and `y` along `axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub u0_width: f64,
    pub u0_amplitude: f64,
    pub profile_width: f64,
    pub profile_amplitude: f64,
    pub axis: usize,
    pub separations: Vec<f64>,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            u0_width: 1.2,
            u0_amplitude: 1.0,
            profile_width: 1.0,
            profile_amplitude: 0.8,
            axis: 0,
            separations: vec![5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    BoxLength,
    Points,
    Mu,
    VLocAmplitude,
    P,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write NGSF field files next to the reports.
    pub fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            fields: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub dichotomy: DichotomyConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

/// Reads and parses `path`, then validates it for `task`.
pub fn load_config(path: &Path, task: Task) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = parse_config(&text)?;
    cfg.validate(task)?;
    Ok(cfg)
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl RunConfig {
    /// Applies `value` to the sweep parameter of a copy of the problem.
    pub fn problem_at(&self, parameter: SweepParameter, value: f64) -> Result<ProblemConfig, ConfigError> {
        let mut p = self.problem.clone();
        match parameter {
            SweepParameter::Alpha => p.alpha = value,
            SweepParameter::BoxLength => p.box_length = value,
            SweepParameter::Points => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(invalid(format!("points must be a whole number, got {value}")));
                }
                p.points = value as usize;
            }
            SweepParameter::Mu => p.potential.mu = value,
            SweepParameter::VLocAmplitude => match p.potential.v_loc.as_mut() {
                Some(v) => v.amplitude = value,
                None => return Err(invalid("sweep over v_loc_amplitude needs problem.potential.v_loc")),
            },
            SweepParameter::P => p.nonlinearity.p = value,
            SweepParameter::Q => p.nonlinearity.q = value,
        }
        Ok(p)
    }

    /// Checks every invariant the given task depends on.
    pub fn validate(&self, task: Task) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let spec = self.problem.spec()?;
        self.solver.validate()?;
        match task {
            Task::Solve => {}
            Task::Validate => self.validate_corpus()?,
            Task::Dichotomy => {
                let d = &self.dichotomy;
                if !(d.margin_factor > 0.0 && d.escape_tolerance > 0.0) {
                    return Err(invalid("dichotomy margin_factor and escape_tolerance must be positive"));
                }
                if self.problem.potential.class != PotentialClass::CloseToPeriodic {
                    return Err(invalid(format!(
                        "dichotomy needs potential class close_to_periodic, got {}",
                        self.problem.potential.class.name()
                    )));
                }
            }
            Task::Evolve => {
                let e = &self.evolve;
                if !(e.dt > 0.0 && e.dt.is_finite() && e.t_final >= 0.0 && e.t_final.is_finite() && e.omega.is_finite())
                {
                    return Err(invalid(format!(
                        "evolve needs dt > 0, t_final >= 0 and finite omega, got dt={} t_final={} omega={}",
                        e.dt, e.t_final, e.omega
                    )));
                }
                let steps = (e.t_final / e.dt).round();
                if (steps * e.dt - e.t_final).abs() > 1e-9 * e.t_final.max(1.0) {
                    return Err(invalid(format!(
                        "t_final = {} is not a whole number of steps dt = {}",
                        e.t_final, e.dt
                    )));
                }
            }
            Task::Decompose => self.validate_decompose(&spec)?,
            Task::Sweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| invalid("sweep task needs a [sweep] table"))?;
                if sweep.values.is_empty() {
                    return Err(invalid("sweep values must not be empty"));
                }
                for &v in &sweep.values {
                    self.problem_at(sweep.parameter, v)?
                        .spec()
                        .map_err(|e| invalid(format!("sweep value {v}: {e}")))?;
                }
            }
        }
        Ok(())
    }

    fn validate_corpus(&self) -> Result<(), ConfigError> {
        let v = &self.validate;
        let [w0, w1] = v.width_fraction;
        if v.fields == 0 {
            return Err(invalid("validate.fields must be at least 1"));
        }
        if !(0.0 <= v.center_fraction && v.center_fraction < 0.5) {
            return Err(invalid(format!(
                "validate.center_fraction must lie in [0, 0.5), got {}",
                v.center_fraction
            )));
        }
        if !(0.0 < w0 && w0 <= w1) {
            return Err(invalid(format!(
                "validate.width_fraction needs 0 < lo <= hi, got [{w0}, {w1}]"
            )));
        }
        if v.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("validate.epsilons must be positive"));
        }
        Ok(())
    }

    fn validate_decompose(&self, spec: &ProblemSpec) -> Result<(), ConfigError> {
        let d = &self.decompose;
        if self.problem.potential.class == PotentialClass::Coercive {
            return Err(invalid("decompose is undefined for the coercive class"));
        }
        if d.axis >= self.problem.dimension {
            return Err(invalid(format!("decompose.axis {} out of range", d.axis)));
        }
        if !(d.u0_width > 0.0 && d.profile_width > 0.0) {
            return Err(invalid("decompose widths must be positive"));
        }
        if d.separations.is_empty() {
            return Err(invalid("decompose.separations must not be empty"));
        }
        let h = spec.grid().spacing(d.axis);
        for &s in &d.separations {
            let cells = s / h;
            if !(s > 0.0) || (cells - cells.round()).abs() > 1e-9 * cells.abs().max(1.0) {
                return Err(invalid(format!(
                    "separation {s} is not a positive whole number of cells (h = {h})"
                )));
            }
            if 2.0 * s > self.problem.box_length {
                return Err(invalid(format!(
                    "separation {s} exceeds half the box length {}",
                    self.problem.box_length
                )));
            }
        }
        Ok(())
    }

    /// Quantities implied by the problem, echoed into the manifest.
    pub fn derived(&self) -> Derived {
        let p = &self.problem;
        Derived {
            critical_exponent: critical_exponent(p.dimension, p.alpha),
            mu_star: mu_star(p.dimension, p.alpha).ok(),
            grid_spacing: p.box_length / p.points as f64,
            translation_step: p.spec().ok().and_then(|s| s.translation_step()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub critical_exponent: f64,
    pub mu_star: Option<f64>,
    pub grid_spacing: f64,
    /// Lattice period in cells, when the problem is translation invariant.
    pub translation_step: Option<Vec<i64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1

[problem]
dimension = 1
alpha = 0.5
box_length = 32.0
points = 256
potential = { class = "periodic", v_per = { mean = 1.0 } }
nonlinearity = { p = 3.5, q = 2.5, k = { mean = 0.2 } }
"#;

    fn with(replace: &str, by: &str) -> String {
        assert!(MINIMAL.contains(replace));
        MINIMAL.replace(replace, by)
    }

    #[test]
    fn minimal_config_is_accepted_with_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        cfg.validate(Task::Solve).unwrap();
        assert_eq!(cfg.solver, SolverOptions::default());
        assert_eq!(cfg.output.directory, PathBuf::from("out"));
        assert_eq!(cfg.problem.nonlinearity.gamma.mean, 1.0);
    }

    #[test]
    fn parse_errors_carry_position() {
        let text = with("points = 256", "points = \"many\"");
        match parse_config(&text) {
            Err(ConfigError::Parse { line, column, .. }) => {
                assert_eq!(line, 8);
                assert_eq!(column, 10);
            }
            other => panic!("{other:?}"),
        }
        let err = parse_config(&with("alpha = 0.5", "alpha = 0.5\nalpah = 1.0")).unwrap_err();
        assert!(err.to_string().contains("line 7"), "{err}");
    }

    #[test]
    fn exponent_violations_name_the_invariant() {
        let cfg = parse_config(&with("p = 3.5, q = 2.5", "p = 3.0, q = 4.0")).unwrap();
        let msg = cfg.validate(Task::Solve).unwrap_err().to_string();
        assert!(msg.contains("q < p violated: q=4.0 p=3.0"), "{msg}");

        let cfg = parse_config(&with("p = 3.5", "p = 5.0")).unwrap();
        let msg = cfg.validate(Task::Solve).unwrap_err().to_string();
        assert!(
            msg.contains("2 < q < p < 2*_alpha") && msg.contains("2*_alpha=4"),
            "{msg}"
        );
    }

    #[test]
    fn mu_at_critical_value_is_rejected() {
        let star = mu_star(3, 2.0).unwrap();
        let text = with(
            "dimension = 1\nalpha = 0.5\nbox_length = 32.0\npoints = 256\npotential = { class = \"periodic\", v_per = { mean = 1.0 } }",
            &format!(
                "dimension = 3\nalpha = 2.0\nbox_length = 8.0\npoints = 16\npotential = {{ class = \"hardy\", mu = {star:?} }}"
            ),
        )
        .replace("p = 3.5, q = 2.5", "p = 4.0, q = 3.0");
        let msg = parse_config(&text)
            .unwrap()
            .validate(Task::Solve)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("0 <= mu < mu* violated"), "{msg}");
    }

    #[test]
    fn task_specific_checks() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert!(cfg.validate(Task::Dichotomy).is_err());
        assert!(cfg.validate(Task::Sweep).is_err());
        let mut bad = cfg.clone();
        bad.evolve.dt = 0.3;
        assert!(bad.validate(Task::Evolve).is_err());
        let mut bad = cfg.clone();
        bad.decompose.separations = vec![5.01];
        assert!(bad.validate(Task::Decompose).is_err());
        let mut bad = cfg;
        bad.sweep = Some(SweepConfig {
            parameter: SweepParameter::P,
            values: vec![3.0, 4.5],
        });
        let msg = bad.validate(Task::Sweep).unwrap_err().to_string();
        assert!(msg.contains("sweep value 4.5"), "{msg}");
    }

    #[test]
    fn schema_version_is_checked() {
        let cfg = parse_config(&with("schema_version = 1", "schema_version = 2")).unwrap();
        assert!(cfg.validate(Task::Solve).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
