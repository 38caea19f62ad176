//! Attracting limit cycles and their scalar measures.
//!
//! A cycle is located by integrating past a transient and watching upward
//! crossings of a Poincaré section: the section coordinate crossing its
//! trailing time-mean. Once two consecutive periods agree, the last period is
//! resampled at uniform time spacing.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::model::OdeSystem;
use crate::solver::{integrate, SolverConfig, SolverError, Trajectory, TrajectoryStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CycleError {
    #[error("no recurrent section crossing within t = {max_time} (point may lie outside the hyperbolic domain)")]
    NoCycle { max_time: f64 },
    #[error("trajectory left the positive orthant at t = {t}")]
    DomainViolation { t: f64 },
    #[error("integration stopped early ({status:?}) at t = {t}")]
    Integration { status: TrajectoryStatus, t: f64 },
    #[error("invalid cycle configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleConfig {
    pub transient_time: f64,
    pub max_time: f64,
    /// Relative tolerance for two consecutive periods to count as closed.
    pub closure_tol: f64,
    pub section_coordinate: usize,
    /// Number of uniformly spaced samples stored for one period.
    pub samples_per_period: usize,
    /// Integration is extended in chunks of this length until closure.
    pub chunk_time: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            transient_time: 200.0,
            max_time: 1000.0,
            closure_tol: 1e-3,
            section_coordinate: 0,
            samples_per_period: 1024,
            chunk_time: 100.0,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self, state_dim: usize) -> Result<(), CycleError> {
        if !(self.transient_time >= 0.0 && self.transient_time < self.max_time) {
            return Err(CycleError::Config(format!(
                "need 0 <= transient_time < max_time, got {} and {}",
                self.transient_time, self.max_time
            )));
        }
        if !(self.closure_tol > 0.0) {
            return Err(CycleError::Config("closure_tol must be positive".into()));
        }
        if self.section_coordinate >= state_dim {
            return Err(CycleError::Config(format!(
                "section coordinate {} out of range for a {state_dim}-dimensional state",
                self.section_coordinate
            )));
        }
        if self.samples_per_period < 32 {
            return Err(CycleError::Config("need at least 32 samples per period".into()));
        }
        if !(self.chunk_time > 0.0) {
            return Err(CycleError::Config("chunk_time must be positive".into()));
        }
        Ok(())
    }
}

/// One period of an attracting cycle, sampled uniformly in time. The sample
/// after the last point is the first point again.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    pub points: Vec<Vec<f64>>,
    pub period: f64,
    pub parameter: Vec<f64>,
}

impl LimitCycle {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coordinate(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(move |x| x[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Maximum of the second state coordinate (budworm density `N`).
    #[serde(rename = "max-N")]
    MaxN,
    /// Maximum of the first state coordinate (branch area `R`).
    #[serde(rename = "max-R")]
    MaxR,
}

impl FeatureKind {
    pub fn coordinate(self) -> usize {
        match self {
            FeatureKind::MaxR => 0,
            FeatureKind::MaxN => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeasure {
    pub value: f64,
    pub kind: FeatureKind,
}

fn check_orthant(system: &dyn OdeSystem, tr: &Trajectory) -> Result<(), CycleError> {
    if !system.positive_orthant() {
        return Ok(());
    }
    match tr.states.iter().position(|x| x.iter().any(|v| *v <= 0.0)) {
        Some(i) => Err(CycleError::DomainViolation { t: tr.times[i] }),
        None => Ok(()),
    }
}

fn integrate_checked(
    system: &dyn OdeSystem,
    x0: &[f64],
    p: &[f64],
    span: (f64, f64),
    solver: &SolverConfig,
) -> Result<Trajectory, CycleError> {
    let tr = integrate(system, x0, p, span, solver)?;
    check_orthant(system, &tr)?;
    if !tr.is_completed() {
        return Err(CycleError::Integration { status: tr.status, t: tr.last_time() });
    }
    Ok(tr)
}

struct Crossing {
    t: f64,
    x: Vec<f64>,
}

/// Time-weighted mean of coordinate `c` over the sampled trajectory.
fn trailing_mean(times: &[f64], states: &[Vec<f64>], c: usize) -> f64 {
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += 0.5 * (states[i - 1][c] + states[i][c]) * (times[i] - times[i - 1]);
    }
    acc / (times[times.len() - 1] - times[0])
}

fn upward_crossings(times: &[f64], states: &[Vec<f64>], c: usize, level: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    for i in 1..times.len() {
        let (a, b) = (states[i - 1][c], states[i][c]);
        if a < level && b >= level {
            let w = (level - a) / (b - a);
            let t = times[i - 1] + w * (times[i] - times[i - 1]);
            let x = states[i - 1]
                .iter()
                .zip(&states[i])
                .map(|(u, v)| u + w * (v - u))
                .collect();
            out.push(Crossing { t, x });
        }
    }
    out
}

/// Range (max - min) of each coordinate over `[t0, t1]`.
fn ranges(times: &[f64], states: &[Vec<f64>], t0: f64, t1: f64) -> Vec<f64> {
    let n = states[0].len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (t, x) in times.iter().zip(states) {
        if *t >= t0 && *t <= t1 {
            for j in 0..n {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| b - a).collect()
}

/// Checks the last two full periods between the last three crossings.
/// Returns the `(start, end)` time of the last period when they agree.
fn closed_period(times: &[f64], states: &[Vec<f64>], cfg: &CycleConfig) -> Option<(f64, f64)> {
    let c = cfg.section_coordinate;
    let mean = trailing_mean(times, states, c);
    let crossings = upward_crossings(times, states, c, mean);
    if crossings.len() < 3 {
        return None;
    }
    let k = crossings.len();
    let (a, b, z) = (&crossings[k - 3], &crossings[k - 2], &crossings[k - 1]);
    let (t_prev, t_last) = (b.t - a.t, z.t - b.t);
    if (t_last - t_prev).abs() > cfg.closure_tol * t_last {
        return None;
    }
    let r_prev = ranges(times, states, a.t, b.t);
    let r_last = ranges(times, states, b.t, z.t);
    let scale = r_last.iter().cloned().fold(0.0, f64::max);
    // A trajectory settling onto an equilibrium has no amplitude left.
    if r_last[c] <= 1e-8 * mean.abs().max(1.0) {
        return None;
    }
    for j in 0..r_last.len() {
        let s = r_last[j].max(1e-12 * scale);
        if (r_last[j] - r_prev[j]).abs() > cfg.closure_tol * s {
            return None;
        }
        if (z.x[j] - b.x[j]).abs() > cfg.closure_tol * s {
            return None;
        }
    }
    Some((b.t, z.t))
}

/// Integrates from the system's default initial condition and returns one
/// period of the attracting cycle at parameters `p`.
pub fn find_limit_cycle(
    system: &dyn OdeSystem,
    p: &[f64],
    solver: &SolverConfig,
    cfg: &CycleConfig,
) -> Result<LimitCycle, CycleError> {
    cfg.validate(system.state_dim())?;
    let x0 = system.initial_state(p);
    let mut solver = solver.clone();
    let mut x = x0;
    if cfg.transient_time > 0.0 {
        let tr = integrate_checked(system, &x, p, (0.0, cfg.transient_time), &solver)?;
        x = tr.last_state().to_vec();
        solver.h_init = tr.next_step.min(solver.h_max);
    }

    let mut times = vec![cfg.transient_time];
    let mut states = vec![x.clone()];
    let mut t = cfg.transient_time;
    while t < cfg.max_time {
        let t_end = (t + cfg.chunk_time).min(cfg.max_time);
        let tr = integrate_checked(system, &x, p, (t, t_end), &solver)?;
        solver.h_init = tr.next_step.min(solver.h_max);
        x = tr.last_state().to_vec();
        times.extend_from_slice(&tr.times[1..]);
        states.extend_from_slice(&tr.states[1..]);
        t = t_end;

        if let Some((start, end)) = closed_period(&times, &states, cfg) {
            let period = end - start;
            let m = cfg.samples_per_period;
            let full = Trajectory {
                times,
                states,
                status: TrajectoryStatus::Completed,
                stats: Default::default(),
                next_step: 0.0,
            };
            let points = (0..m)
                .map(|i| full.state_at(start + period * i as f64 / m as f64))
                .collect();
            return Ok(LimitCycle { points, period, parameter: p.to_vec() });
        }
    }
    Err(CycleError::NoCycle { max_time: cfg.max_time })
}

/// Maximum of `values` (read cyclically) with one parabolic refinement
/// through the discrete maximum and its two neighbours.
pub fn cyclic_peak(values: &[f64], refine: bool) -> f64 {
    let (imax, &ymax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty values");
    if !refine || values.len() < 3 {
        return ymax;
    }
    let n = values.len();
    let y0 = values[(imax + n - 1) % n];
    let y2 = values[(imax + 1) % n];
    let curvature = y0 - 2.0 * ymax + y2;
    if curvature >= 0.0 {
        return ymax;
    }
    let delta = (0.5 * (y0 - y2) / curvature).clamp(-1.0, 1.0);
    let refined = ymax - 0.25 * (y0 - y2) * delta;
    refined.max(ymax)
}

pub fn measure(cycle: &LimitCycle, kind: FeatureKind) -> FeatureMeasure {
    let values: Vec<f64> = cycle.coordinate(kind.coordinate()).collect();
    FeatureMeasure { value: cyclic_peak(&values, true), kind }
}

/// `m` cycle points at uniform index spacing, starting at `start`.
pub fn sample_cycle_points_from(cycle: &LimitCycle, m: usize, start: usize) -> Vec<Vec<f64>> {
    let len = cycle.len();
    assert!(m >= 1 && m <= len, "need 1 <= m <= {len}, got {m}");
    (0..m)
        .map(|j| cycle.points[(start + j * len / m) % len].clone())
        .collect()
}

/// Like [`sample_cycle_points_from`] with a uniformly random start index.
pub fn sample_cycle_points<R: Rng + ?Sized>(cycle: &LimitCycle, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let start = rng.gen_range(0..cycle.len());
    sample_cycle_points_from(cycle, m, start)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error("{0}")]
    Other(String),
}

/// The expensive scalar map `C(p)` over full parameter vectors.
pub trait FeatureMap: Sync {
    fn evaluate(&self, p: &[f64]) -> Result<f64, EvalError>;
}

impl<F> FeatureMap for F
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    fn evaluate(&self, p: &[f64]) -> Result<f64, EvalError> {
        self(p)
    }
}

/// `C(p)`: the chosen measure of the attracting cycle at `p`.
#[derive(Clone)]
pub struct CycleFeature {
    pub system: Arc<dyn OdeSystem>,
    pub solver: SolverConfig,
    pub cycle: CycleConfig,
    pub kind: FeatureKind,
}

impl CycleFeature {
    pub fn new(system: Arc<dyn OdeSystem>, kind: FeatureKind) -> Self {
        Self {
            system,
            solver: SolverConfig::default(),
            cycle: CycleConfig::default(),
            kind,
        }
    }
}

impl FeatureMap for CycleFeature {
    fn evaluate(&self, p: &[f64]) -> Result<f64, EvalError> {
        let cycle = find_limit_cycle(self.system.as_ref(), p, &self.solver, &self.cycle)?;
        Ok(measure(&cycle, self.kind).value)
    }
}
