//! Monte-Carlo estimate of the integral of the feature map and the empirical
//! error law of the interpolated field under grid refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::cycle::{EvalError, FeatureMap};
use crate::explore::{run_full, run_random_exploration, ExplorationConfig, ExploreError, Memoized, ResultSet};
use crate::grid::{build_grid, Grid, GridError, HyperbolicDomain, Interval};
use crate::interp::{InterpError, InterpolatedField};
use crate::model::ParameterVector;
use crate::relevance::{FnRelevance, RelevanceOracle};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid error-study config: {0}")]
    Config(String),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `I_A`: the mean of `C_A` over `points`.
pub fn mc_integral_estimate(field: &InterpolatedField, points: &[Vec<f64>]) -> Result<f64, InterpError> {
    if points.is_empty() {
        return Err(InterpError::NoData);
    }
    let mut total = 0.0;
    for p in points {
        total += field.interpolate(p)?;
    }
    Ok(total / points.len() as f64)
}

/// Midpoints of all lattice cells, in grid-axis coordinates.
fn cell_midpoints(grid: &Grid) -> Vec<Vec<f64>> {
    let cells: Vec<usize> = grid.axes.iter().map(|a| a.count - 1).collect();
    let total: usize = cells.iter().product();
    (0..total)
        .map(|mut c| {
            let mut p = vec![0.0; cells.len()];
            for a in (0..cells.len()).rev() {
                let i = c % cells[a];
                c /= cells[a];
                let ax = &grid.axes[a];
                p[a] = 0.5 * (ax.value(i) + ax.value(i + 1));
            }
            p
        })
        .collect()
}

/// Midpoint-rule estimate of `|C_A - C|` integrated over the box, whose
/// volume is normalized to one. `C` is the interpolant of a full-grid result
/// set. Where `C_A` has no data hull the hole-filled interpolant stands in.
pub fn l1_error(field: &InterpolatedField, reference: &ResultSet) -> Result<f64, AnalysisError> {
    let grid = field.grid();
    if reference.grid_len != grid.len() {
        return Err(AnalysisError::Config(format!(
            "reference grid has {} points, field grid has {}",
            reference.grid_len,
            grid.len()
        )));
    }
    if reference.len() != grid.len() {
        return Err(AnalysisError::Config(format!(
            "reference covers {} of {} lattice points",
            reference.len(),
            grid.len()
        )));
    }
    let exact = InterpolatedField::new(grid, reference)?;
    let mids = cell_midpoints(grid);
    let mut total = 0.0;
    for p in &mids {
        let a = match field.interpolate(p) {
            Ok(v) => v,
            Err(InterpError::OutsideHull(_)) => field.interpolate_filled(p)?,
            Err(e) => return Err(e.into()),
        };
        total += (a - exact.interpolate(p)?).abs();
    }
    Ok(total / mids.len() as f64)
}

/// Trapezoid rule over the lattice, normalized by the box volume.
pub fn trapezoid_mean(grid: &Grid, values: &ResultSet) -> Option<f64> {
    let mut total = 0.0;
    let mut weight = 0.0;
    for i in 0..grid.len() {
        let w: f64 = grid
            .multi_index(i)
            .iter()
            .zip(&grid.axes)
            .map(|(j, a)| if *j == 0 || *j == a.count - 1 { 0.5 } else { 1.0 })
            .product();
        total += w * values.value(i)?;
        weight += w;
    }
    Some(total / weight)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorStudyConfig {
    /// Points per axis at each refinement level.
    pub levels: Vec<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub tol: f64,
    /// Centers per run as a fraction of the level's grid size.
    pub center_fraction: f64,
    pub n_size: usize,
}

impl Default for ErrorStudyConfig {
    fn default() -> Self {
        Self {
            levels: [5, 10, 20, 40].iter().map(|m| vec![*m, *m]).collect(),
            seeds: (0..20).collect(),
            tol: 0.0,
            center_fraction: 0.1,
            n_size: 1,
        }
    }
}

/// What a convergence study runs on.
pub struct StudyTarget<'a> {
    pub domain: HyperbolicDomain,
    /// Full parameter vector the grid axes are embedded into, if any.
    pub base: Option<ParameterVector>,
    pub feature: &'a dyn FeatureMap,
    pub relevance: &'a dyn RelevanceOracle,
    /// Mean of `C` over the box when known in closed form.
    pub exact_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub grid_points: usize,
    /// Mean size of `G*` over seeds.
    pub n: f64,
    pub integral_estimate: f64,
    pub integral: f64,
    /// Mean of `|I_A - I|` over seeds.
    pub integral_error: f64,
    pub l1_mean: f64,
    pub l1_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub value: f64,
    /// 95% confidence interval.
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub levels: Vec<LevelRecord>,
    /// Log-log slope of the mean L1 error against `n`.
    pub l1_slope: Option<Slope>,
    /// Log-log slope of the mean integral error against `n`.
    pub integral_slope: Option<Slope>,
    /// Every error vanished: the approximation is exact at every level.
    pub exact: bool,
}

/// Least-squares slope of `ln y` on `ln x` with a 95% t-interval; `None`
/// when fewer than three levels or a non-positive value.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<Slope> {
    if x.len() < 3 || x.len() != y.len() || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let resid: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = (resid / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0).ok()?.inverse_cdf(0.975);
    Some(Slope { value: slope, low: slope - t * se, high: slope + t * se })
}

fn level_grid(target: &StudyTarget, counts: &[usize]) -> Result<Grid, AnalysisError> {
    if counts.len() != target.domain.axes.len() {
        return Err(AnalysisError::Config(format!("level {counts:?} does not match the {} axes", target.domain.axes.len())));
    }
    if counts.iter().any(|c| *c < 2) {
        return Err(AnalysisError::Config(format!("level {counts:?} needs at least two points per axis")));
    }
    let spacings: Vec<f64> = target.domain.axes.iter().zip(counts).map(|(a, c)| (a.hi - a.lo) / (*c - 1) as f64).collect();
    let mut grid = build_grid(&target.domain, &spacings)?;
    if let Some(base) = &target.base {
        grid = grid.embed(base)?;
    }
    debug_assert_eq!(grid.counts(), counts);
    Ok(grid)
}

/// Runs the exploration engine on every level and seed, measures the
/// integral and L1 errors against a full computation of the level, and fits
/// the decay of both against `n = |G*|`.
pub fn convergence_study(target: &StudyTarget, config: &ErrorStudyConfig) -> Result<ErrorReport, AnalysisError> {
    if config.levels.len() < 3 {
        return Err(AnalysisError::Config(format!("need at least 3 levels, got {}", config.levels.len())));
    }
    if config.seeds.is_empty() {
        return Err(AnalysisError::Config("need at least one seed".into()));
    }
    if !(config.center_fraction > 0.0 && config.center_fraction <= 1.0) {
        return Err(AnalysisError::Config(format!("center_fraction must lie in (0, 1], got {}", config.center_fraction)));
    }
    let grids = config.levels.iter().map(|c| level_grid(target, c)).collect::<Result<Vec<_>, _>>()?;
    if grids.windows(2).any(|w| w[1].len() <= w[0].len()) {
        return Err(AnalysisError::Config("levels must grow strictly".into()));
    }
    let feature = Memoized::new(target.feature);

    let mut levels = Vec::with_capacity(grids.len());
    for grid in &grids {
        let full = run_full(grid, &feature);
        if !full.failed.is_empty() {
            return Err(AnalysisError::Config(format!("{} lattice points failed in the full computation", full.failed.len())));
        }
        let integral = match target.exact_mean {
            Some(v) => v,
            None => trapezoid_mean(grid, &full).expect("full coverage"),
        };
        let i_max = ((config.center_fraction * grid.len() as f64).round() as usize).clamp(1, grid.len());
        let runs = config
            .seeds
            .par_iter()
            .map(|&seed| -> Result<(f64, f64, f64), AnalysisError> {
                let cfg = ExplorationConfig { tol: config.tol, i_max: Some(i_max), n_size: config.n_size, seed, ..Default::default() };
                let res = run_random_exploration(grid, target.relevance, &cfg, &feature)?;
                let field = InterpolatedField::new(grid, &res)?;
                let points: Vec<Vec<f64>> = res.entries.keys().map(|&i| grid.coords(i)).collect();
                let estimate = mc_integral_estimate(&field, &points)?;
                Ok((res.len() as f64, estimate, l1_error(&field, &full)?))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let k = runs.len() as f64;
        let n = runs.iter().map(|r| r.0).sum::<f64>() / k;
        let integral_estimate = runs.iter().map(|r| r.1).sum::<f64>() / k;
        let integral_error = runs.iter().map(|r| (r.1 - integral).abs()).sum::<f64>() / k;
        let l1_mean = runs.iter().map(|r| r.2).sum::<f64>() / k;
        let l1_std = if runs.len() > 1 {
            (runs.iter().map(|r| (r.2 - l1_mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        levels.push(LevelRecord { grid_points: grid.len(), n, integral_estimate, integral, integral_error, l1_mean, l1_std });
    }
    let n: Vec<f64> = levels.iter().map(|l| l.n).collect();
    let l1: Vec<f64> = levels.iter().map(|l| l.l1_mean).collect();
    let ie: Vec<f64> = levels.iter().map(|l| l.integral_error).collect();
    let exact = l1.iter().chain(&ie).all(|v| *v == 0.0);
    Ok(ErrorReport { l1_slope: loglog_slope(&n, &l1), integral_slope: loglog_slope(&n, &ie), exact, levels })
}

/// Closed-form test functions for convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Synthetic {
    /// `sin(p1) * p2^2` on `[0, 2]^2`.
    SinSquare,
    /// A constant on `[0, 1]^2`.
    Constant { value: f64 },
}

impl Synthetic {
    pub fn domain(&self) -> HyperbolicDomain {
        let hi = match self {
            Synthetic::SinSquare => 2.0,
            Synthetic::Constant { .. } => 1.0,
        };
        HyperbolicDomain::new(vec![
            Interval { name: "p1".into(), lo: 0.0, hi },
            Interval { name: "p2".into(), lo: 0.0, hi },
        ])
        .expect("valid box")
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        match self {
            Synthetic::SinSquare => p[0].sin() * p[1] * p[1],
            Synthetic::Constant { value } => *value,
        }
    }

    /// Mean over the box.
    pub fn exact_mean(&self) -> f64 {
        match self {
            // (1 - cos 2) * (8 / 3) / 4
            Synthetic::SinSquare => (1.0 - 2f64.cos()) * 2.0 / 3.0,
            Synthetic::Constant { value } => *value,
        }
    }

    pub fn study(&self, config: &ErrorStudyConfig) -> Result<ErrorReport, AnalysisError> {
        let feature = |p: &[f64]| -> Result<f64, EvalError> { Ok(self.value(p)) };
        let relevance = FnRelevance { r: 1.0, m: |p: &[f64]| self.value(p) };
        let target = StudyTarget {
            domain: self.domain(),
            base: None,
            feature: &feature,
            relevance: &relevance,
            exact_mean: Some(self.exact_mean()),
        };
        convergence_study(&target, config)
    }
}
