//! Linearly implicit Rosenbrock integrator of order 2 with an embedded error
//! estimate (the modified Rosenbrock triple of Shampine and Reichelt).
//!
//! Each step factors `W = I - h d J` once, with `d = 1/(2 + sqrt 2)`, and
//! solves for the two stages that advance the solution. A third solve reuses
//! `f(x_new)` (first same as last) to estimate the local error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{eval_state_jacobian, ModelError, OdeSystem};

const D: f64 = 0.292_893_218_813_452_5; // 1 / (2 + sqrt 2)
const E32: f64 = 7.414_213_562_373_095; // 6 + sqrt 2

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("invalid time span [{0}, {1}]")]
    TimeSpan(f64, f64),
    #[error("step {0} does not divide the time span")]
    StepDoesNotDivide(f64),
    #[error("singular iteration matrix I - h d J at t = {0}")]
    Singular(f64),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AbsTol {
    Scalar(f64),
    PerComponent(Vec<f64>),
}

impl AbsTol {
    fn get(&self, i: usize) -> f64 {
        match self {
            AbsTol::Scalar(v) => *v,
            AbsTol::PerComponent(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: AbsTol,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: AbsTol::Scalar(1e-9),
            h_init: 1e-3,
            h_max: 1.0,
            max_steps: 200_000,
        }
    }
}

impl SolverConfig {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn validate(&self, state_dim: usize) -> Result<(), SolverError> {
        if !(self.rtol > 0.0) {
            return Err(SolverError::Config(format!("rtol must be positive, got {}", self.rtol)));
        }
        match &self.atol {
            AbsTol::Scalar(a) if !(*a > 0.0) => {
                return Err(SolverError::Config(format!("atol must be positive, got {a}")))
            }
            AbsTol::PerComponent(v) => {
                if v.len() != state_dim {
                    return Err(SolverError::Config(format!(
                        "atol has {} components, state has {state_dim}",
                        v.len()
                    )));
                }
                if v.iter().any(|a| !(*a > 0.0)) {
                    return Err(SolverError::Config("atol components must be positive".into()));
                }
            }
            _ => {}
        }
        if !(self.h_init > 0.0) || !(self.h_max > 0.0) || self.h_init > self.h_max {
            return Err(SolverError::Config(format!(
                "need 0 < h_init <= h_max, got h_init = {}, h_max = {}",
                self.h_init, self.h_max
            )));
        }
        if self.max_steps == 0 {
            return Err(SolverError::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryStatus {
    Completed,
    StepBudgetExhausted,
    StepSizeUnderflow,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jacobian_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub status: TrajectoryStatus,
    pub stats: SolverStats,
    /// Step size proposed for a continuation of this trajectory.
    pub next_step: f64,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// Linear interpolation between accepted steps; `t` is clamped to the
    /// trajectory's time range.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let i = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => return self.states[i].clone(),
            Err(i) => i,
        };
        if i == 0 {
            return self.states[0].clone();
        }
        if i >= self.times.len() {
            return self.last_state().to_vec();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.states[i - 1]
            .iter()
            .zip(&self.states[i])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    pub fn is_completed(&self) -> bool {
        self.status == TrajectoryStatus::Completed
    }
}

struct Stepper<'a> {
    system: &'a dyn OdeSystem,
    p: &'a [f64],
    n: usize,
    stats: SolverStats,
}

struct StepResult {
    x_new: Vec<f64>,
    f_new: Vec<f64>,
    error: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn f(&mut self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.stats.rhs_evals += 1;
        let mut out = vec![0.0; self.n];
        self.system.rhs(x, self.p, &mut out)?;
        Ok(out)
    }

    /// One Rosenbrock step from `x` with `f0 = f(x)`. `Ok(None)` flags a
    /// singular `W` or a failed stage evaluation.
    fn step(&mut self, x: &[f64], f0: &[f64], h: f64, with_error: bool) -> Result<Option<StepResult>, ModelError> {
        let n = self.n;
        self.stats.jacobian_evals += 1;
        let jac = eval_state_jacobian(self.system, x, self.p)?;
        let w = DMatrix::<f64>::identity(n, n) - jac * (h * D);
        let lu = w.lu();
        let solve = |rhs: Vec<f64>| lu.solve(&DVector::from_vec(rhs));

        let Some(k1) = solve(f0.to_vec()) else { return Ok(None) };
        let x_half: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
        let Ok(f1) = self.f(&x_half) else { return Ok(None) };
        let Some(mut k2) = solve((0..n).map(|i| f1[i] - k1[i]).collect()) else { return Ok(None) };
        k2 += &k1;
        let x_new: Vec<f64> = (0..n).map(|i| x[i] + h * k2[i]).collect();
        if x_new.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let Ok(f_new) = self.f(&x_new) else { return Ok(None) };
        let error = if with_error {
            let rhs = (0..n)
                .map(|i| f_new[i] - E32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0[i]))
                .collect();
            let Some(k3) = solve(rhs) else { return Ok(None) };
            (0..n).map(|i| h / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i])).collect()
        } else {
            Vec::new()
        };
        Ok(Some(StepResult { x_new, f_new, error }))
    }
}

fn check_inputs(system: &dyn OdeSystem, x0: &[f64], p: &[f64], t_span: (f64, f64)) -> Result<(), SolverError> {
    if x0.len() != system.state_dim() {
        return Err(ModelError::Dimension {
            what: "state",
            expected: system.state_dim(),
            got: x0.len(),
        }
        .into());
    }
    if p.len() != system.param_dim() {
        return Err(ModelError::Dimension {
            what: "parameters",
            expected: system.param_dim(),
            got: p.len(),
        }
        .into());
    }
    let (t0, t1) = t_span;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(SolverError::TimeSpan(t0, t1));
    }
    Ok(())
}

/// Adaptive integration over `t_span` with local error control.
///
/// Budget exhaustion and step-size underflow are reported through
/// [`Trajectory::status`] together with the partial solution.
pub fn integrate(
    system: &dyn OdeSystem,
    x0: &[f64],
    p: &[f64],
    t_span: (f64, f64),
    config: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    check_inputs(system, x0, p, t_span)?;
    config.validate(system.state_dim())?;
    let (t0, t1) = t_span;
    let n = system.state_dim();
    let h_min = 1e-14 * (t1 - t0);

    let mut stepper = Stepper { system, p, n, stats: SolverStats::default() };
    let mut times = vec![t0];
    let mut states = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    let mut fx = stepper.f(&x)?;
    let mut t = t0;
    let mut h = config.h_init.min(t1 - t0);
    let mut steps = 0usize;

    let status = loop {
        if t >= t1 {
            break TrajectoryStatus::Completed;
        }
        if steps >= config.max_steps {
            break TrajectoryStatus::StepBudgetExhausted;
        }
        if h < h_min {
            break TrajectoryStatus::StepSizeUnderflow;
        }
        let last = t + h >= t1;
        let h_step = if last { t1 - t } else { h };
        steps += 1;

        let Some(res) = stepper.step(&x, &fx, h_step, true)? else {
            stepper.stats.rejected += 1;
            h = h_step * 0.2;
            continue;
        };
        let err = res
            .error
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let scale = config.atol.get(i) + config.rtol * x[i].abs().max(res.x_new[i].abs());
                (e / scale).abs()
            })
            .fold(0.0, f64::max);
        if !err.is_finite() {
            stepper.stats.rejected += 1;
            h = h_step * 0.2;
            continue;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.5)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            stepper.stats.accepted += 1;
            t = if last { t1 } else { t + h_step };
            x = res.x_new;
            fx = res.f_new;
            times.push(t);
            states.push(x.clone());
            // Do not let the shortened final step shrink the proposal.
            h = if last { h.max(h_step * factor) } else { h_step * factor };
        } else {
            stepper.stats.rejected += 1;
            h = h_step * factor.min(1.0);
        }
        h = h.min(config.h_max);
    };

    Ok(Trajectory {
        times,
        states,
        status,
        stats: stepper.stats,
        next_step: h,
    })
}

/// Constant-step integration with the same stages and no error control.
pub fn integrate_fixed_step(
    system: &dyn OdeSystem,
    x0: &[f64],
    p: &[f64],
    t_span: (f64, f64),
    h: f64,
) -> Result<Trajectory, SolverError> {
    check_inputs(system, x0, p, t_span)?;
    let (t0, t1) = t_span;
    if !(h > 0.0) {
        return Err(SolverError::Config(format!("step must be positive, got {h}")));
    }
    let ratio = (t1 - t0) / h;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(SolverError::StepDoesNotDivide(h));
    }
    let steps = steps as usize;
    let n = system.state_dim();
    let mut stepper = Stepper { system, p, n, stats: SolverStats::default() };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    let mut fx = stepper.f(&x)?;
    for i in 1..=steps {
        let t = t0 + (i - 1) as f64 * h;
        let res = stepper.step(&x, &fx, h, false)?.ok_or(SolverError::Singular(t))?;
        stepper.stats.accepted += 1;
        x = res.x_new;
        fx = res.f_new;
        times.push(if i == steps { t1 } else { t0 + i as f64 * h });
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        status: TrajectoryStatus::Completed,
        stats: stepper.stats,
        next_step: h,
    })
}
