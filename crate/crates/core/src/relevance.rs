//! Vector-field surrogates for the variation of the feature map.
//!
//! A handful of cycles supply a fixed phase sample `S_x`. The relevance
//! function `M(p)` averages `|f(x, p)|` over `S_x`; the relevance measure `r`
//! is the mean variation of `M` between random lattice points and their
//! neighbours, and sets the scale against which exploration compares.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle::{find_limit_cycle, sample_cycle_points, CycleConfig, CycleError, EvalError};
use crate::grid::Grid;
use crate::model::{eval_param_derivatives, eval_rhs, ModelError, OdeSystem};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelevanceError {
    #[error("invalid relevance config: {0}")]
    Config(String),
    #[error("lattice point {index} has {available} neighbours within the radius, need {k4}")]
    InsufficientNeighbors { index: usize, available: usize, k4: usize },
    #[error("no attracting cycle found at {attempts} random lattice points; the box is not a hyperbolic domain")]
    HyperbolicDomainViolated { attempts: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceVariant {
    /// `|f(x, p)|`.
    #[default]
    Norm,
    /// `|df/dp_l (x, p)|`, summed over all model parameters.
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelevanceConfig {
    pub k1: usize,
    pub m: usize,
    pub k3: usize,
    pub k4: usize,
    pub n_size: usize,
    pub variant: RelevanceVariant,
    pub seed: u64,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self { k1: 4, m: 4, k3: 8, k4: 3, n_size: 1, variant: RelevanceVariant::Norm, seed: 0 }
    }
}

impl RelevanceConfig {
    pub fn validate(&self) -> Result<(), RelevanceError> {
        for (name, v) in [("k1", self.k1), ("m", self.m), ("k3", self.k3), ("k4", self.k4), ("n_size", self.n_size)] {
            if v == 0 {
                return Err(RelevanceError::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Fixed phase-space points taken from cycles at random lattice points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub points: Vec<Vec<f64>>,
    /// Parameter vectors whose cycles supplied the points.
    pub sources: Vec<Vec<f64>>,
    pub per_cycle: usize,
}

impl PhaseSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `k1` lattice points, computes their cycles and keeps `m` points of
/// each. Points without a cycle are redrawn, up to `10 * k1` draws in total.
pub fn build_phase_sample<R: Rng + ?Sized>(
    system: &dyn OdeSystem,
    grid: &Grid,
    k1: usize,
    m: usize,
    solver: &SolverConfig,
    cycle: &CycleConfig,
    rng: &mut R,
) -> Result<PhaseSample, RelevanceError> {
    if k1 == 0 || m == 0 {
        return Err(RelevanceError::Config("k1 and m must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(RelevanceError::Config("empty grid".into()));
    }
    let budget = 10 * k1;
    let mut points = Vec::with_capacity(k1 * m);
    let mut sources = Vec::with_capacity(k1);
    let mut attempts = 0;
    while sources.len() < k1 {
        if attempts == budget {
            return Err(RelevanceError::HyperbolicDomainViolated { attempts });
        }
        attempts += 1;
        let p = grid.parameters(rng.gen_range(0..grid.len()));
        match find_limit_cycle(system, &p, solver, cycle) {
            Ok(c) => {
                if m > c.len() {
                    return Err(RelevanceError::Config(format!("m = {m} exceeds the {} points per cycle", c.len())));
                }
                points.extend(sample_cycle_points(&c, m, rng));
                sources.push(p);
            }
            Err(CycleError::NoCycle { .. } | CycleError::DomainViolation { .. } | CycleError::Integration { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(PhaseSample { points, sources, per_cycle: m })
}

/// `sum_i |f(x_i, p)|` or `sum_i sum_l |df/dp_l(x_i, p)|`.
fn summed_norms(system: &dyn OdeSystem, sample: &PhaseSample, p: &[f64], variant: RelevanceVariant) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for x in &sample.points {
        match variant {
            RelevanceVariant::Norm => total += norm(&eval_rhs(system, x, p)?),
            RelevanceVariant::Derivative => {
                let d = eval_param_derivatives(system, x, p)?;
                total += d.column_iter().map(|c| c.norm()).sum::<f64>();
            }
        }
    }
    Ok(total)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn normalizer(system: &dyn OdeSystem, sample: &PhaseSample, variant: RelevanceVariant) -> f64 {
    let k2 = sample.len() as f64;
    match variant {
        RelevanceVariant::Norm => k2,
        RelevanceVariant::Derivative => k2 * system.param_dim() as f64,
    }
}

/// `M(p)` for the given variant.
pub fn relevance_function(
    system: &dyn OdeSystem,
    sample: &PhaseSample,
    p: &[f64],
    variant: RelevanceVariant,
) -> Result<f64, ModelError> {
    if sample.is_empty() {
        return Err(ModelError::InvalidParameters("empty phase sample".into()));
    }
    Ok(summed_norms(system, sample, p, variant)? / normalizer(system, sample, variant))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceModel {
    pub sample: PhaseSample,
    pub r: f64,
    pub variant: RelevanceVariant,
}

impl RelevanceModel {
    pub fn relevance(&self, system: &dyn OdeSystem, p: &[f64]) -> Result<f64, ModelError> {
        relevance_function(system, &self.sample, p, self.variant)
    }

    pub fn bind<'a>(&'a self, system: &'a dyn OdeSystem) -> BoundRelevance<'a> {
        BoundRelevance { model: self, system }
    }
}

/// Estimates `r` from `k3` distinct lattice points and `k4` distinct
/// neighbours of each.
pub fn relevance_measure<R: Rng + ?Sized>(
    system: &dyn OdeSystem,
    sample: &PhaseSample,
    grid: &Grid,
    config: &RelevanceConfig,
    rng: &mut R,
) -> Result<RelevanceModel, RelevanceError> {
    config.validate()?;
    if sample.is_empty() {
        return Err(RelevanceError::Config("empty phase sample".into()));
    }
    if config.k3 > grid.len() {
        return Err(RelevanceError::Config(format!("k3 = {} exceeds the {} lattice points", config.k3, grid.len())));
    }
    let variant = config.variant;
    let mut total = 0.0;
    for j in index::sample(rng, grid.len(), config.k3) {
        let omega = grid.neighbors(j, config.n_size);
        if omega.len() < config.k4 {
            return Err(RelevanceError::InsufficientNeighbors { index: j, available: omega.len(), k4: config.k4 });
        }
        let s_p = summed_norms(system, sample, &grid.parameters(j), variant)?;
        for q in index::sample(rng, omega.len(), config.k4) {
            let s_q = summed_norms(system, sample, &grid.parameters(omega[q]), variant)?;
            total += (s_p - s_q).abs();
        }
    }
    let r = total / (normalizer(system, sample, variant) * (config.k3 * config.k4) as f64);
    Ok(RelevanceModel { sample: sample.clone(), r, variant })
}

/// Phase sample and relevance measure from a seeded generator.
pub fn build_relevance_model(
    system: &dyn OdeSystem,
    grid: &Grid,
    config: &RelevanceConfig,
    solver: &SolverConfig,
    cycle: &CycleConfig,
) -> Result<RelevanceModel, RelevanceError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sample = build_phase_sample(system, grid, config.k1, config.m, solver, cycle, &mut rng)?;
    relevance_measure(system, &sample, grid, config, &mut rng)
}

/// What the exploration engine needs: `r` and `M(p)`.
pub trait RelevanceOracle: Sync {
    fn r(&self) -> f64;
    fn relevance(&self, p: &[f64]) -> Result<f64, EvalError>;
}

pub struct BoundRelevance<'a> {
    pub model: &'a RelevanceModel,
    pub system: &'a dyn OdeSystem,
}

impl RelevanceOracle for BoundRelevance<'_> {
    fn r(&self) -> f64 {
        self.model.r
    }

    fn relevance(&self, p: &[f64]) -> Result<f64, EvalError> {
        self.model.relevance(self.system, p).map_err(|e| EvalError::Other(e.to_string()))
    }
}

/// Relevance given directly by a closure; handy for synthetic problems.
pub struct FnRelevance<F> {
    pub r: f64,
    pub m: F,
}

impl<F> RelevanceOracle for FnRelevance<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn r(&self) -> f64 {
        self.r
    }

    fn relevance(&self, p: &[f64]) -> Result<f64, EvalError> {
        Ok((self.m)(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, HyperbolicDomain, Interval};
    use crate::model::{Budworm, BudwormDefaults, FiniteDifference, FnSystem, Scaled};

    fn table2_grid() -> Grid {
        let d = BudwormDefaults::new();
        let domain = HyperbolicDomain::new(
            d.defaults
                .names
                .iter()
                .zip(&d.ranges)
                .map(|(n, (lo, hi))| Interval { name: n.clone(), lo: *lo, hi: *hi })
                .collect(),
        )
        .unwrap();
        build_grid(&domain, &d.spacings).unwrap().embed(&d.defaults).unwrap()
    }

    fn budworm_sample(seed: u64) -> PhaseSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        build_phase_sample(&Budworm, &table2_grid(), 4, 4, &SolverConfig::default(), &CycleConfig::default(), &mut rng).unwrap()
    }

    fn p_free() -> FnSystem {
        FnSystem::new("rot", 2, 1, |x, _p, out| {
            out[0] = -x[1];
            out[1] = x[0];
            Ok(())
        })
    }

    fn line_grid(n: usize) -> Grid {
        let d = HyperbolicDomain::new(vec![Interval { name: "p1".into(), lo: 0.0, hi: (n - 1) as f64 }]).unwrap();
        build_grid(&d, &[1.0]).unwrap()
    }

    #[test]
    fn sample_size_and_determinism() {
        let a = budworm_sample(3);
        assert_eq!(a.len(), 16);
        assert_eq!(a.sources.len(), 4);
        assert_eq!(a, budworm_sample(3));
    }

    #[test]
    fn single_point_sample_lies_on_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grid = table2_grid();
        let s = build_phase_sample(&Budworm, &grid, 1, 1, &SolverConfig::default(), &CycleConfig::default(), &mut rng).unwrap();
        let c = find_limit_cycle(&Budworm, &s.sources[0], &SolverConfig::default(), &CycleConfig::default()).unwrap();
        assert!(c.points.contains(&s.points[0]));
    }

    #[test]
    fn relevance_function_matches_resummation() {
        let s = budworm_sample(5);
        let p = BudwormDefaults::VALUES;
        let mut oracle = 0.0;
        for x in &s.points {
            let (r, n) = (x[0], x[1]);
            let dr = p[0] * r * (1.0 - r / p[2]) - p[6] * n;
            let dn = p[1] * n * (1.0 - n / (p[3] * r)) - p[4] * n * n / (p[5] * p[5] * r * r + n * n);
            oracle += dr.hypot(dn);
        }
        oracle /= 16.0;
        let m = relevance_function(&Budworm, &s, &p, RelevanceVariant::Norm).unwrap();
        assert!((m - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn parameter_free_field() {
        let sys = p_free();
        let s = PhaseSample { points: vec![vec![1.0, 2.0], vec![0.5, -1.0]], sources: vec![], per_cycle: 1 };
        let m0 = relevance_function(&sys, &s, &[0.0], RelevanceVariant::Norm).unwrap();
        assert_eq!(m0, relevance_function(&sys, &s, &[7.0], RelevanceVariant::Norm).unwrap());
        let cfg = RelevanceConfig { k3: 5, k4: 1, ..Default::default() };
        let model = relevance_measure(&sys, &s, &line_grid(5), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(model.r, 0.0);
    }

    #[test]
    fn two_point_grid_by_hand() {
        let sys = FnSystem::new("lin", 1, 1, |x, p, out| {
            out[0] = p[0] * x[0];
            Ok(())
        });
        let d = HyperbolicDomain::new(vec![Interval { name: "p1".into(), lo: 1.0, hi: 3.0 }]).unwrap();
        let grid = build_grid(&d, &[2.0]).unwrap();
        let s = PhaseSample { points: vec![vec![-2.0]], sources: vec![], per_cycle: 1 };
        let cfg = RelevanceConfig { k3: 1, k4: 1, ..Default::default() };
        let model = relevance_measure(&sys, &s, &grid, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        // |(|1 * -2| - |3 * -2|)| whichever point is drawn.
        assert_eq!(model.r, 4.0);
    }

    #[test]
    fn insufficient_neighbors() {
        let s = PhaseSample { points: vec![vec![1.0, 0.0]], sources: vec![], per_cycle: 1 };
        let cfg = RelevanceConfig { k3: 2, k4: 3, ..Default::default() };
        let err = relevance_measure(&p_free(), &s, &line_grid(4), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, RelevanceError::InsufficientNeighbors { k4: 3, .. }));
    }

    #[test]
    fn scaling_by_constant() {
        let s = budworm_sample(2);
        let grid = table2_grid();
        let scaled = Scaled { inner: Budworm, factor: 4.0 };
        for variant in [RelevanceVariant::Norm, RelevanceVariant::Derivative] {
            let cfg = RelevanceConfig { variant, seed: 11, ..Default::default() };
            let a = relevance_measure(&Budworm, &s, &grid, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let b = relevance_measure(&scaled, &s, &grid, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_eq!(b.r, 4.0 * a.r);
            for i in [0, 1234, 99_999] {
                let p = grid.parameters(i);
                assert_eq!(b.relevance(&scaled, &p).unwrap(), 4.0 * a.relevance(&Budworm, &p).unwrap());
            }
        }
    }

    #[test]
    fn derivative_variant_finite_difference_agreement() {
        let s = budworm_sample(4);
        let grid = table2_grid();
        let cfg = RelevanceConfig { variant: RelevanceVariant::Derivative, ..Default::default() };
        let a = relevance_measure(&Budworm, &s, &grid, &cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let b = relevance_measure(&FiniteDifference(Budworm), &s, &grid, &cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert!(a.r > 0.0);
        assert!((a.r - b.r).abs() <= 1e-3 * a.r, "{} vs {}", a.r, b.r);
        let p = BudwormDefaults::VALUES;
        let ma = a.relevance(&Budworm, &p).unwrap();
        let mb = b.relevance(&FiniteDifference(Budworm), &p).unwrap();
        assert!((ma - mb).abs() <= 1e-3 * ma);
    }

    #[test]
    fn budworm_seed_ensemble() {
        let grid = table2_grid();
        let rs: Vec<f64> = (0..10)
            .map(|seed| {
                let cfg = RelevanceConfig { seed, ..Default::default() };
                build_relevance_model(&Budworm, &grid, &cfg, &SolverConfig::default(), &CycleConfig::default()).unwrap().r
            })
            .collect();
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        let std = (rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rs.len() - 1) as f64).sqrt();
        assert!(rs.iter().all(|r| *r > 0.0));
        assert!(std <= 0.5 * mean, "ensemble mean {mean}, std {std}, all {rs:?}");
    }
}
