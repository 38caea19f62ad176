//! grid → phase sample → relevance → exploration, for one run config.

use std::time::Instant;

use pexplore::analysis::Synthetic;
use pexplore::cycle::{EvalError, FeatureMap};
use pexplore::explore::{run_exploration, run_full, ExploreError, ResultSet};
use pexplore::grid::Grid;
use pexplore::model::ModelRegistry;
use pexplore::relevance::{build_relevance_model, FnRelevance, PhaseSample, RelevanceConfig, RelevanceError, RelevanceVariant};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Resolved, RunConfig, Target};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("relevance: {0}")]
    Relevance(#[from] RelevanceError),
    #[error("exploration: {0}")]
    Explore(#[from] ExploreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Explore,
    Full,
}

/// What the relevance stage produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceRecord {
    pub r: f64,
    pub variant: Option<RelevanceVariant>,
    pub sample: Option<PhaseSample>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub relevance_secs: f64,
    pub exploration_secs: f64,
}

/// A finished run before it is given an id.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub kind: RunKind,
    pub config: RunConfig,
    pub grid: Grid,
    pub relevance: Option<RelevanceRecord>,
    pub result: ResultSet,
    pub timing: Timing,
}

/// `r` for a relevance function given directly on parameters, estimated from
/// the same `k3` lattice points and `k4` neighbours as for an ODE model.
pub fn sampled_relevance_scale(
    grid: &Grid,
    config: &RelevanceConfig,
    m: impl Fn(&[f64]) -> f64,
) -> Result<f64, RelevanceError> {
    config.validate()?;
    if config.k3 > grid.len() {
        return Err(RelevanceError::Config(format!("k3 = {} exceeds the {} lattice points", config.k3, grid.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut total = 0.0;
    for j in index::sample(&mut rng, grid.len(), config.k3) {
        let omega = grid.neighbors(j, config.n_size);
        if omega.len() < config.k4 {
            return Err(RelevanceError::InsufficientNeighbors { index: j, available: omega.len(), k4: config.k4 });
        }
        let mp = m(&grid.parameters(j));
        for q in index::sample(&mut rng, omega.len(), config.k4) {
            total += (mp - m(&grid.parameters(omega[q]))).abs();
        }
    }
    Ok(total / (config.k3 * config.k4) as f64)
}

fn synthetic_map(s: Synthetic) -> impl Fn(&[f64]) -> Result<f64, EvalError> + Sync {
    move |p: &[f64]| Ok(s.value(p))
}

/// Validates `config` and runs it to completion.
pub fn run(config: &RunConfig, registry: &ModelRegistry, kind: RunKind) -> Result<RunOutput, PipelineError> {
    let resolved = config.resolve(registry)?;
    run_resolved(config, resolved, kind)
}

pub fn run_resolved(config: &RunConfig, resolved: Resolved, kind: RunKind) -> Result<RunOutput, PipelineError> {
    let Resolved { grid, target, exploration } = resolved;
    let mut timing = Timing::default();

    let (result, relevance) = match (&target, kind) {
        (Target::Model { feature, .. }, RunKind::Full) => {
            let t = Instant::now();
            let res = run_full(&grid, feature);
            timing.exploration_secs = t.elapsed().as_secs_f64();
            (res, None)
        }
        (Target::Synthetic(s), RunKind::Full) => {
            let t = Instant::now();
            let res = run_full(&grid, &synthetic_map(*s));
            timing.exploration_secs = t.elapsed().as_secs_f64();
            (res, None)
        }
        (Target::Model { system, feature }, RunKind::Explore) => {
            let t = Instant::now();
            let model = build_relevance_model(system.as_ref(), &grid, &config.relevance, &feature.solver, &feature.cycle)?;
            timing.relevance_secs = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let res = run_exploration(&grid, &model.bind(system.as_ref()), &exploration, feature)?;
            timing.exploration_secs = t.elapsed().as_secs_f64();
            let record = RelevanceRecord { r: model.r, variant: Some(model.variant), sample: Some(model.sample) };
            (res, Some(record))
        }
        (Target::Synthetic(s), RunKind::Explore) => {
            let s = *s;
            let t = Instant::now();
            let r = sampled_relevance_scale(&grid, &config.relevance, |p| s.value(p))?;
            timing.relevance_secs = t.elapsed().as_secs_f64();
            let oracle = FnRelevance { r, m: move |p: &[f64]| s.value(p) };
            let t = Instant::now();
            let res = run_exploration(&grid, &oracle, &exploration, &synthetic_map(s))?;
            timing.exploration_secs = t.elapsed().as_secs_f64();
            (res, Some(RelevanceRecord { r, variant: None, sample: None }))
        }
    };
    Ok(RunOutput { kind, config: config.clone(), grid, relevance, result, timing })
}

/// The feature map of a resolved target, for callers that drive the engine
/// themselves.
pub fn feature_map(target: &Target) -> Box<dyn FeatureMap + '_> {
    match target {
        Target::Model { feature, .. } => Box::new(feature.clone()),
        Target::Synthetic(s) => Box::new(synthetic_map(*s)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pexplore::explore::Flag;

    fn toy(extra: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"model": {{"kind": "sin-square"}}, "axes": [
                {{"name": "p1", "lo": 0, "hi": 2, "spacing": 0.5}},
                {{"name": "p2", "lo": 0, "hi": 2, "spacing": 0.5}}
            ], "relevance": {{"k4": 2}}{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn tol_zero_full_budget_copies_nothing() {
        let out = run(&toy(""), &ModelRegistry::with_builtins(), RunKind::Explore).unwrap();
        assert_eq!(out.result.counters.neighbors_copied, 0);
        assert_eq!(out.result.len(), 25);
        assert!(out.result.entries.values().all(|e| e.flag == Flag::Computed));
    }

    #[test]
    fn full_run_computes_everything() {
        let cfg = RunConfig::from_json(
            r#"{"model": {"kind": "sin-square"}, "axes": [
                {"name": "p1", "lo": 0, "hi": 2, "spacing": 1},
                {"name": "p2", "lo": 0, "hi": 2, "spacing": 1}
            ], "relevance": {"k3": 4, "k4": 2}}"#,
        )
        .unwrap();
        let out = run(&cfg, &ModelRegistry::with_builtins(), RunKind::Full).unwrap();
        assert_eq!(out.result.with_flag(Flag::Computed).len(), 9);
        assert!(out.relevance.is_none());
    }

    #[test]
    fn synthetic_scale_matches_hand_sum() {
        let cfg = toy("");
        let grid = cfg.resolve(&ModelRegistry::with_builtins()).unwrap().grid;
        let rc = RelevanceConfig { k3: 25, k4: 2, ..RelevanceConfig::default() };
        // A function of p1 only, with unit steps of 0.5 in M along p1.
        let r = sampled_relevance_scale(&grid, &rc, |p| p[0]).unwrap();
        assert!(r > 0.0 && r <= 0.5);
        let flat = sampled_relevance_scale(&grid, &rc, |_| 3.0).unwrap();
        assert_eq!(flat, 0.0);
    }
}
