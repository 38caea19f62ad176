//! Parametrized ODE systems `x' = f(x, p)` and the spruce budworm benchmark.
//!
//! Parameters are indexed from 0 internally; the budworm parameters keep their
//! external names `p1` .. `p7`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("singular input: {0}")]
    Singular(String),
    #[error("invalid parameter vector: {0}")]
    InvalidParameters(String),
}

/// An ordered parameter vector together with the parameter names and units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
    pub units: Vec<String>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, names: Vec<String>, units: Vec<String>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::InvalidParameters("at least one parameter is required".into()));
        }
        for (what, len) in [("names", names.len()), ("units", units.len())] {
            if len != values.len() {
                return Err(ModelError::Dimension {
                    what,
                    expected: values.len(),
                    got: len,
                });
            }
        }
        Ok(Self { values, names, units })
    }

    /// Parameter vector with generated names `p1`..`pk` and empty units.
    pub fn unnamed(values: Vec<f64>) -> Result<Self, ModelError> {
        let names = (1..=values.len()).map(|i| format!("p{i}")).collect();
        let units = vec![String::new(); values.len()];
        Self::new(values, names, units)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ModelError> {
        let i = self
            .index_of(name)
            .ok_or_else(|| ModelError::InvalidParameters(format!("unknown parameter '{name}'")))?;
        self.values[i] = value;
        Ok(())
    }
}

/// A parametrized vector field.
///
/// Analytic derivatives are optional; the `eval_*` functions fall back to
/// central finite differences when a system returns `None`.
pub trait OdeSystem: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    /// Writes `f(x, p)` into `out`. Callers guarantee matching dimensions.
    fn rhs(&self, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<(), ModelError>;

    fn state_jacobian(&self, _x: &[f64], _p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        None
    }

    fn param_derivatives(&self, _x: &[f64], _p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        None
    }

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.param_dim()).map(|i| format!("p{i}")).collect()
    }

    fn parameter_units(&self) -> Vec<String> {
        vec![String::new(); self.param_dim()]
    }

    /// Initial condition used when searching for an attracting cycle.
    fn initial_state(&self, _p: &[f64]) -> Vec<f64> {
        vec![1.0; self.state_dim()]
    }

    /// Whether trajectories must stay in the open positive orthant.
    fn positive_orthant(&self) -> bool {
        false
    }
}

fn check_dims(system: &dyn OdeSystem, x: &[f64], p: &[f64]) -> Result<(), ModelError> {
    if x.len() != system.state_dim() {
        return Err(ModelError::Dimension {
            what: "state",
            expected: system.state_dim(),
            got: x.len(),
        });
    }
    if p.len() != system.param_dim() {
        return Err(ModelError::Dimension {
            what: "parameters",
            expected: system.param_dim(),
            got: p.len(),
        });
    }
    Ok(())
}

fn check_shape(m: &DMatrix<f64>, rows: usize, cols: usize, what: &'static str) -> Result<(), ModelError> {
    if m.nrows() != rows {
        return Err(ModelError::Dimension { what, expected: rows, got: m.nrows() });
    }
    if m.ncols() != cols {
        return Err(ModelError::Dimension { what, expected: cols, got: m.ncols() });
    }
    Ok(())
}

pub fn eval_rhs(system: &dyn OdeSystem, x: &[f64], p: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_dims(system, x, p)?;
    let mut out = vec![0.0; system.state_dim()];
    system.rhs(x, p, &mut out)?;
    Ok(out)
}

/// `df/dx`, analytic when the system provides it.
pub fn eval_state_jacobian(system: &dyn OdeSystem, x: &[f64], p: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    check_dims(system, x, p)?;
    match system.state_jacobian(x, p) {
        Some(j) => {
            let j = j?;
            check_shape(&j, system.state_dim(), system.state_dim(), "state jacobian")?;
            Ok(j)
        }
        None => fd_state_jacobian(system, x, p),
    }
}

/// `df/dp` as an `n x k` matrix, analytic when the system provides it.
pub fn eval_param_derivatives(system: &dyn OdeSystem, x: &[f64], p: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    check_dims(system, x, p)?;
    match system.param_derivatives(x, p) {
        Some(d) => {
            let d = d?;
            check_shape(&d, system.state_dim(), system.param_dim(), "parameter derivatives")?;
            Ok(d)
        }
        None => fd_param_derivatives(system, x, p),
    }
}

/// Relative central-difference step: `1e-6 * max(|v|, 1)`.
pub fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

pub fn fd_state_jacobian(system: &dyn OdeSystem, x: &[f64], p: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    check_dims(system, x, p)?;
    let n = system.state_dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        system.rhs(&xp, p, &mut fp)?;
        xp[j] = x[j] - h;
        system.rhs(&xp, p, &mut fm)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

pub fn fd_param_derivatives(system: &dyn OdeSystem, x: &[f64], p: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    check_dims(system, x, p)?;
    let n = system.state_dim();
    let k = system.param_dim();
    let mut d = DMatrix::zeros(n, k);
    let mut pp = p.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for l in 0..k {
        let h = fd_step(p[l]);
        pp[l] = p[l] + h;
        system.rhs(x, &pp, &mut fp)?;
        pp[l] = p[l] - h;
        system.rhs(x, &pp, &mut fm)?;
        pp[l] = p[l];
        for i in 0..n {
            d[(i, l)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(d)
}

/// Seven-parameter spruce budworm model with state `(R, N)`:
///
/// ```text
/// R' = p1 R (1 - R/p3) - p7 N
/// N' = p2 N (1 - N/(p4 R)) - p5 N^2 / (p6^2 R^2 + N^2)
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct Budworm;

pub const BUDWORM_NAMES: [&str; 7] = ["p1", "p2", "p3", "p4", "p5", "p6", "p7"];
pub const BUDWORM_UNITS: [&str; 7] = [
    "1/yr",
    "1/yr",
    "branches/acre",
    "larvae/branch",
    "larvae/(acre*year)",
    "larvae/branch",
    "(branches*acre)/(yr*larvae)",
];
pub const BUDWORM_DESCRIPTIONS: [&str; 7] = [
    "intrinsic branch growth rate",
    "intrinsic budworm growth rate",
    "maximum branch density",
    "maximum budworm density",
    "maximum budworm predated",
    "half of maximum density for predation",
    "consumption rate of budworm",
];

/// Default values, exploration ranges and lattice spacings of the budworm study.
#[derive(Debug, Clone, PartialEq)]
pub struct BudwormDefaults {
    pub defaults: ParameterVector,
    pub ranges: Vec<(f64, f64)>,
    pub spacings: Vec<f64>,
}

impl BudwormDefaults {
    pub const VALUES: [f64; 7] = [0.15, 1.6, 24000.0, 200.0, 28000.0, 1.5, 0.0015];
    pub const RANGES: [(f64, f64); 7] = [
        (0.149, 0.151),
        (1.5, 1.7),
        (22000.0, 26000.0),
        (190.0, 210.0),
        (24000.0, 32000.0),
        (1.0, 2.0),
        (0.001, 0.002),
    ];
    pub const SPACINGS: [f64; 7] = [0.0001, 0.1, 250.0, 2.0, 500.0, 0.1, 0.0001];

    pub fn new() -> Self {
        let defaults = ParameterVector {
            values: Self::VALUES.to_vec(),
            names: BUDWORM_NAMES.iter().map(|s| s.to_string()).collect(),
            units: BUDWORM_UNITS.iter().map(|s| s.to_string()).collect(),
        };
        Self {
            defaults,
            ranges: Self::RANGES.to_vec(),
            spacings: Self::SPACINGS.to_vec(),
        }
    }
}

impl Default for BudwormDefaults {
    fn default() -> Self {
        Self::new()
    }
}

impl Budworm {
    fn check_r(r: f64) -> Result<(), ModelError> {
        if r == 0.0 || !r.is_finite() {
            return Err(ModelError::Singular(format!("budworm branch area R = {r}")));
        }
        Ok(())
    }
}

impl OdeSystem for Budworm {
    fn name(&self) -> &str {
        "budworm"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        7
    }

    fn rhs(&self, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let (r, n) = (x[0], x[1]);
        Self::check_r(r)?;
        let d = p[5] * p[5] * r * r + n * n;
        out[0] = p[0] * r * (1.0 - r / p[2]) - p[6] * n;
        out[1] = p[1] * n * (1.0 - n / (p[3] * r)) - if n == 0.0 { 0.0 } else { p[4] * n * n / d };
        Ok(())
    }

    fn state_jacobian(&self, x: &[f64], p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        let (r, n) = (x[0], x[1]);
        if let Err(e) = Self::check_r(r) {
            return Some(Err(e));
        }
        let p6sq = p[5] * p[5];
        let d = p6sq * r * r + n * n;
        let d2 = d * d;
        let drr = p[0] * (1.0 - 2.0 * r / p[2]);
        let drn = -p[6];
        let dnr = p[1] * n * n / (p[3] * r * r) + 2.0 * p[4] * n * n * p6sq * r / d2;
        let dnn = p[1] * (1.0 - 2.0 * n / (p[3] * r)) - 2.0 * p[4] * n * p6sq * r * r / d2;
        Some(Ok(DMatrix::from_row_slice(2, 2, &[drr, drn, dnr, dnn])))
    }

    fn param_derivatives(&self, x: &[f64], p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        let (r, n) = (x[0], x[1]);
        if let Err(e) = Self::check_r(r) {
            return Some(Err(e));
        }
        let d = p[5] * p[5] * r * r + n * n;
        let mut m = DMatrix::zeros(2, 7);
        m[(0, 0)] = r * (1.0 - r / p[2]);
        m[(0, 2)] = p[0] * r * r / (p[2] * p[2]);
        m[(0, 6)] = -n;
        m[(1, 1)] = n * (1.0 - n / (p[3] * r));
        m[(1, 3)] = p[1] * n * n / (p[3] * p[3] * r);
        if n != 0.0 {
            m[(1, 4)] = -n * n / d;
            m[(1, 5)] = 2.0 * p[4] * n * n * p[5] * r * r / (d * d);
        }
        Some(Ok(m))
    }

    fn parameter_names(&self) -> Vec<String> {
        BUDWORM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn parameter_units(&self) -> Vec<String> {
        BUDWORM_UNITS.iter().map(|s| s.to_string()).collect()
    }

    fn initial_state(&self, p: &[f64]) -> Vec<f64> {
        let r = 0.75 * p[2];
        vec![r, 0.1 * p[3] * r]
    }

    fn positive_orthant(&self) -> bool {
        true
    }
}

/// Linear system `x' = A x`, independent of the parameters.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub params: usize,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, params: usize) -> Self {
        assert!(a.is_square(), "linear system matrix must be square");
        Self { a, params }
    }
}

impl OdeSystem for LinearSystem {
    fn name(&self) -> &str {
        "linear"
    }
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn param_dim(&self) -> usize {
        self.params
    }
    fn rhs(&self, x: &[f64], _p: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..x.len()).map(|j| self.a[(i, j)] * x[j]).sum();
        }
        Ok(())
    }
    fn state_jacobian(&self, _x: &[f64], _p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        Some(Ok(self.a.clone()))
    }
    fn param_derivatives(&self, _x: &[f64], _p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        Some(Ok(DMatrix::zeros(self.a.nrows(), self.params)))
    }
}

/// Hopf normal form `x' = x - y - x r^2`, `y' = x + y - y r^2` with the unit
/// circle as attracting cycle of period `2 pi`. The parameters scale nothing;
/// they only give the system a parameter space.
#[derive(Debug, Clone, Copy)]
pub struct HopfOscillator {
    pub params: usize,
}

impl OdeSystem for HopfOscillator {
    fn name(&self) -> &str {
        "hopf"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        self.params
    }
    fn rhs(&self, x: &[f64], _p: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        let rr = x[0] * x[0] + x[1] * x[1];
        out[0] = x[0] - x[1] - x[0] * rr;
        out[1] = x[0] + x[1] - x[1] * rr;
        Ok(())
    }
    fn state_jacobian(&self, x: &[f64], _p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        let (a, b) = (x[0], x[1]);
        let rr = a * a + b * b;
        Some(Ok(DMatrix::from_row_slice(
            2,
            2,
            &[1.0 - rr - 2.0 * a * a, -1.0 - 2.0 * a * b, 1.0 - 2.0 * a * b, 1.0 - rr - 2.0 * b * b],
        )))
    }
    fn initial_state(&self, _p: &[f64]) -> Vec<f64> {
        vec![0.5, 0.0]
    }
}

type RhsFn = dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<(), ModelError> + Send + Sync;

/// A system backed by a closure; derivatives always use finite differences.
pub struct FnSystem {
    name: String,
    state_dim: usize,
    param_dim: usize,
    rhs: Box<RhsFn>,
    initial: Vec<f64>,
}

impl FnSystem {
    pub fn new<F>(name: impl Into<String>, state_dim: usize, param_dim: usize, rhs: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) -> Result<(), ModelError> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            state_dim,
            param_dim,
            rhs: Box::new(rhs),
            initial: vec![1.0; state_dim],
        }
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Self {
        self.initial = x0;
        self
    }
}

impl OdeSystem for FnSystem {
    fn name(&self) -> &str {
        &self.name
    }
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn rhs(&self, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        (self.rhs)(x, p, out)
    }
    fn initial_state(&self, _p: &[f64]) -> Vec<f64> {
        self.initial.clone()
    }
}

/// Hides the analytic derivatives of the wrapped system so that every
/// derivative goes through finite differences.
pub struct FiniteDifference<S>(pub S);

impl<S: OdeSystem> OdeSystem for FiniteDifference<S> {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }
    fn param_dim(&self) -> usize {
        self.0.param_dim()
    }
    fn rhs(&self, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        self.0.rhs(x, p, out)
    }
    fn parameter_names(&self) -> Vec<String> {
        self.0.parameter_names()
    }
    fn parameter_units(&self) -> Vec<String> {
        self.0.parameter_units()
    }
    fn initial_state(&self, p: &[f64]) -> Vec<f64> {
        self.0.initial_state(p)
    }
    fn positive_orthant(&self) -> bool {
        self.0.positive_orthant()
    }
}

/// Multiplies the vector field of the wrapped system by a constant.
pub struct Scaled<S> {
    pub inner: S,
    pub factor: f64,
}

impl<S: OdeSystem> OdeSystem for Scaled<S> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }
    fn rhs(&self, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        self.inner.rhs(x, p, out)?;
        out.iter_mut().for_each(|v| *v *= self.factor);
        Ok(())
    }
    fn state_jacobian(&self, x: &[f64], p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        self.inner.state_jacobian(x, p).map(|r| r.map(|j| j * self.factor))
    }
    fn param_derivatives(&self, x: &[f64], p: &[f64]) -> Option<Result<DMatrix<f64>, ModelError>> {
        self.inner.param_derivatives(x, p).map(|r| r.map(|j| j * self.factor))
    }
    fn parameter_names(&self) -> Vec<String> {
        self.inner.parameter_names()
    }
    fn initial_state(&self, p: &[f64]) -> Vec<f64> {
        self.inner.initial_state(p)
    }
    fn positive_orthant(&self) -> bool {
        self.inner.positive_orthant()
    }
}

/// Named systems together with their default parameter vectors.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, (Arc<dyn OdeSystem>, ParameterVector)>,
}

impl ModelRegistry {
    /// Registry holding the built-in `budworm` model.
    pub fn with_builtins() -> Self {
        let mut reg = Self::default();
        reg.register("budworm", Arc::new(Budworm), BudwormDefaults::new().defaults);
        reg
    }

    pub fn register(&mut self, name: impl Into<String>, system: Arc<dyn OdeSystem>, defaults: ParameterVector) {
        self.models.insert(name.into(), (system, defaults));
    }

    pub fn get(&self, name: &str) -> Option<(Arc<dyn OdeSystem>, ParameterVector)> {
        self.models.get(name).map(|(s, d)| (Arc::clone(s), d.clone()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}
