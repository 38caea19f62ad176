//! Run configuration files and their validation.
//!
//! A run config is a JSON document. Everything except `model` and `axes` has
//! a default, and unknown keys are rejected so typos surface before any
//! computation starts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use pexplore::analysis::{ErrorStudyConfig, Synthetic};
use pexplore::cycle::{CycleConfig, CycleFeature, FeatureKind};
use pexplore::explore::{ExplorationConfig, ExplorationMode};
use pexplore::grid::{build_grid, Grid, HyperbolicDomain, Interval};
use pexplore::model::{ModelRegistry, OdeSystem, ParameterVector};
use pexplore::relevance::RelevanceConfig;
use pexplore::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {}", join(.0))]
    Invalid(Vec<FieldError>),
}

impl ConfigError {
    pub fn fields(&self) -> &[FieldError] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A registered ODE model by name, or a closed-form test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Named(String),
    Synthetic(Synthetic),
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Named(n) => f.write_str(n),
            ModelSpec::Synthetic(Synthetic::SinSquare) => f.write_str("synthetic:sin-square"),
            ModelSpec::Synthetic(Synthetic::Constant { value }) => write!(f, "synthetic:constant({value})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationSettings {
    pub mode: ExplorationMode,
    pub tol: f64,
    /// Number of centers. Mutually exclusive with `fraction`.
    pub i_max: Option<usize>,
    /// Number of centers as a fraction of the grid size.
    pub fraction: Option<f64>,
    pub n_size: usize,
    pub seed: u64,
    pub g0: Option<Vec<Vec<usize>>>,
}

impl Default for ExplorationSettings {
    fn default() -> Self {
        let d = ExplorationConfig::default();
        Self { mode: d.mode, tol: d.tol, i_max: None, fraction: None, n_size: d.n_size, seed: d.seed, g0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    /// Overrides of the model's default parameter values.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    pub axes: Vec<AxisSpec>,
    #[serde(default = "default_feature")]
    pub feature: FeatureKind,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cycle: CycleConfig,
    #[serde(default)]
    pub relevance: RelevanceConfig,
    #[serde(default)]
    pub exploration: ExplorationSettings,
}

fn default_feature() -> FeatureKind {
    FeatureKind::MaxN
}

/// What is evaluated at each grid point.
#[derive(Clone)]
pub enum Target {
    Model { system: Arc<dyn OdeSystem>, feature: CycleFeature },
    Synthetic(Synthetic),
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Model { system, feature } => {
                f.debug_struct("Model").field("system", &system.name()).field("kind", &feature.kind).finish()
            }
            Target::Synthetic(s) => f.debug_tuple("Synthetic").field(s).finish(),
        }
    }
}

/// A validated config with everything built that computation needs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: Grid,
    pub target: Target,
    pub exploration: ExplorationConfig,
}

/// Names and starting values of the two synthetic parameters.
fn synthetic_parameters() -> ParameterVector {
    ParameterVector::unnamed(vec![1.0, 1.0]).expect("two parameters")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// The number of centers the exploration will process.
    pub fn centers(&self, grid_len: usize) -> Option<usize> {
        match (self.exploration.i_max, self.exploration.fraction) {
            (Some(i), _) => Some(i),
            (None, Some(f)) => Some(((f * grid_len as f64).round() as usize).max(1)),
            (None, None) => None,
        }
    }

    /// Checks every field against the registry and the grid it describes.
    /// All problems are reported together.
    pub fn resolve(&self, registry: &ModelRegistry) -> Result<Resolved, ConfigError> {
        let mut errs = Vec::new();
        let mut err = |field: String, reason: String| errs.push(FieldError { field, reason });

        let (system, mut base) = match &self.model {
            ModelSpec::Named(name) => match registry.get(name) {
                Some((s, d)) => (Some(s), d),
                None => {
                    let known: Vec<&str> = registry.names().collect();
                    err("model".into(), format!("unknown model '{name}', known models: {}", known.join(", ")));
                    return Err(ConfigError::Invalid(errs));
                }
            },
            ModelSpec::Synthetic(_) => (None, synthetic_parameters()),
        };

        for (name, value) in &self.parameters {
            if !value.is_finite() {
                err(format!("parameters.{name}"), format!("value {value} is not finite"));
            } else if base.set(name, *value).is_err() {
                err(format!("parameters.{name}"), format!("not a parameter of {}; expected one of {}", self.model, base.names.join(", ")));
            }
        }

        if self.axes.is_empty() {
            err("axes".into(), "at least one axis is required".into());
        }
        let mut axes_ok = true;
        for (i, a) in self.axes.iter().enumerate() {
            let field = format!("axes[{i}]");
            if base.index_of(&a.name).is_none() {
                err(format!("{field}.name"), format!("'{}' is not a parameter of {}; expected one of {}", a.name, self.model, base.names.join(", ")));
                axes_ok = false;
            }
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                err(format!("{field}.name"), format!("axis '{}' listed twice", a.name));
                axes_ok = false;
            }
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                err(field.clone(), format!("need finite lo < hi, got [{}, {}]", a.lo, a.hi));
                axes_ok = false;
            }
            if !(a.spacing > 0.0 && a.spacing.is_finite()) {
                err(format!("{field}.spacing"), format!("must be positive, got {}", a.spacing));
                axes_ok = false;
            }
        }

        let grid = if axes_ok && !self.axes.is_empty() {
            let domain = HyperbolicDomain::new(
                self.axes.iter().map(|a| Interval { name: a.name.clone(), lo: a.lo, hi: a.hi }).collect(),
            );
            let spacings: Vec<f64> = self.axes.iter().map(|a| a.spacing).collect();
            match domain.and_then(|d| build_grid(&d, &spacings)).and_then(|g| g.embed(&base)) {
                Ok(g) => Some(g),
                Err(e) => {
                    err("axes".into(), e.to_string());
                    None
                }
            }
        } else {
            None
        };

        if let Some(system) = &system {
            if let Err(e) = self.solver.validate(system.state_dim()) {
                err("solver".into(), e.to_string());
            }
            if let Err(e) = self.cycle.validate(system.state_dim()) {
                err("cycle".into(), e.to_string());
            }
        }
        if let Err(e) = self.relevance.validate() {
            err("relevance".into(), e.to_string());
        }

        let ex = &self.exploration;
        if !(ex.tol >= 0.0 && ex.tol.is_finite()) {
            err("exploration.tol".into(), format!("must be a non-negative number, got {}", ex.tol));
        }
        if ex.n_size == 0 {
            err("exploration.n_size".into(), "must be at least 1".into());
        }
        if ex.i_max.is_some() && ex.fraction.is_some() {
            err("exploration".into(), "give either i_max or fraction, not both".into());
        }
        if let Some(f) = ex.fraction {
            if !(f > 0.0 && f <= 1.0) {
                err("exploration.fraction".into(), format!("must lie in (0, 1], got {f}"));
            }
        }
        if ex.mode == ExplorationMode::Deterministic && ex.g0.is_none() {
            err("exploration.g0".into(), "deterministic mode needs explicit centers".into());
        }

        let mut exploration = None;
        if let Some(grid) = &grid {
            if self.relevance.k3 > grid.len() {
                err("relevance.k3".into(), format!("{} exceeds the {} grid points", self.relevance.k3, grid.len()));
            }
            // The corner has the fewest neighbours; a sampled point there must still yield k4 of them.
            let corner = grid.neighbors(0, self.relevance.n_size.max(1)).len();
            if self.relevance.k4 > corner {
                err(
                    "relevance.k4".into(),
                    format!("{} exceeds the {corner} neighbours of a corner point at n_size {}", self.relevance.k4, self.relevance.n_size),
                );
            }
            if let Some(i) = ex.i_max {
                if i == 0 || i > grid.len() {
                    err("exploration.i_max".into(), format!("must lie in 1..={}, got {i}", grid.len()));
                }
            }
            if let Some(g0) = &ex.g0 {
                for (k, idx) in g0.iter().enumerate() {
                    if let Err(e) = grid.linear_index(idx) {
                        err(format!("exploration.g0[{k}]"), e.to_string());
                    }
                }
            }
            exploration = Some(ExplorationConfig {
                mode: ex.mode,
                tol: ex.tol,
                i_max: self.centers(grid.len()).map(|i| i.min(grid.len())),
                n_size: ex.n_size,
                seed: ex.seed,
                g0: ex.g0.clone(),
            });
        }

        if !errs.is_empty() {
            return Err(ConfigError::Invalid(errs));
        }
        let (grid, exploration) = (grid.expect("grid built"), exploration.expect("exploration built"));
        let target = match (&self.model, system) {
            (ModelSpec::Synthetic(s), _) => Target::Synthetic(*s),
            (ModelSpec::Named(_), Some(system)) => {
                let mut feature = CycleFeature::new(Arc::clone(&system), self.feature);
                feature.solver = self.solver.clone();
                feature.cycle = self.cycle.clone();
                Target::Model { system, feature }
            }
            (ModelSpec::Named(_), None) => unreachable!("named models resolve to a system"),
        };
        Ok(Resolved { grid, target, exploration })
    }
}

/// Input of the `errorstudy` command: a study on a synthetic function or on a
/// model run config, whose axes give the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorStudyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<Synthetic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub study: ErrorStudyConfig,
}

impl ErrorStudyFile {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let file: Self = serde_json::from_str(&text)?;
        if file.synthetic.is_some() == file.run.is_some() {
            return Err(ConfigError::Invalid(vec![FieldError {
                field: "synthetic".into(),
                reason: "give exactly one of synthetic or run".into(),
            }]));
        }
        Ok(file)
    }
}
