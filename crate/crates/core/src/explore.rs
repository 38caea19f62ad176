//! Exploration of the lattice with neighbour comparison.
//!
//! A center is evaluated exactly; each unmarked neighbour `q` is then either
//! evaluated too or receives a copy of the center's value, depending on how
//! much the relevance function changes between the two points.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle::{EvalError, FeatureMap};
use crate::grid::{Grid, GridError};
use crate::relevance::RelevanceOracle;

/// Consecutive failed centers at the start of a run that abort it.
pub const ABORT_AFTER_FAILURES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExploreError {
    #[error("invalid exploration config: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("the first {0} centers all failed to evaluate")]
    AllCentersFailed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Computed,
    Copied,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Computed => "computed",
            Flag::Copied => "copied",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub value: f64,
    pub flag: Flag,
    /// The center a copied value came from.
    pub source: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub centers_computed: usize,
    pub neighbors_computed: usize,
    pub neighbors_copied: usize,
    pub failures: usize,
    /// Calls to the feature map, failed ones included.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplorationMode {
    Deterministic,
    #[default]
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    pub mode: ExplorationMode,
    pub tol: f64,
    /// Number of centers; defaults to the whole grid.
    pub i_max: Option<usize>,
    pub n_size: usize,
    pub seed: u64,
    /// Explicit centers (multi-indices) for deterministic mode.
    pub g0: Option<Vec<Vec<usize>>>,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self { mode: ExplorationMode::Random, tol: 0.0, i_max: None, n_size: 1, seed: 0, g0: None }
    }
}

impl ExplorationConfig {
    pub fn validate(&self, grid: &Grid) -> Result<(), ExploreError> {
        if !(self.tol >= 0.0) {
            return Err(ExploreError::Config(format!("tol must be a non-negative number, got {}", self.tol)));
        }
        if self.n_size == 0 {
            return Err(ExploreError::Config("n_size must be at least 1".into()));
        }
        if let Some(i) = self.i_max {
            if i == 0 || i > grid.len() {
                return Err(ExploreError::Config(format!("i_max must lie in 1..={}, got {i}", grid.len())));
            }
        }
        if self.mode == ExplorationMode::Deterministic && self.g0.is_none() {
            return Err(ExploreError::Config("deterministic mode needs g0".into()));
        }
        Ok(())
    }
}

/// The partial value map `G*` with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub grid_len: usize,
    pub entries: BTreeMap<usize, Entry>,
    pub failed: BTreeSet<usize>,
    /// Centers in processing order, failed ones included.
    pub centers: Vec<usize>,
    pub counters: Counters,
    pub tol: f64,
    pub relevance_r: Option<f64>,
}

impl ResultSet {
    pub fn new(grid_len: usize, tol: f64, relevance_r: Option<f64>) -> Self {
        Self {
            grid_len,
            entries: BTreeMap::new(),
            failed: BTreeSet::new(),
            centers: Vec::new(),
            counters: Counters::default(),
            tol,
            relevance_r,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        self.entries.get(&i).map(|e| e.value)
    }

    pub fn with_flag(&self, flag: Flag) -> BTreeSet<usize> {
        self.entries.iter().filter(|(_, e)| e.flag == flag).map(|(i, _)| *i).collect()
    }

    /// Copied entries equal their computed source; counters match the flags.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (i, e) in &self.entries {
            if e.flag == Flag::Copied {
                let src = e.source.ok_or_else(|| format!("copied entry {i} has no source"))?;
                let s = self.entries.get(&src).ok_or_else(|| format!("source {src} of {i} missing"))?;
                if s.flag != Flag::Computed || s.value.to_bits() != e.value.to_bits() {
                    return Err(format!("entry {i} differs from its source {src}"));
                }
            }
        }
        let c = &self.counters;
        let computed = self.with_flag(Flag::Computed).len();
        if computed != c.centers_computed + c.neighbors_computed || self.with_flag(Flag::Copied).len() != c.neighbors_copied {
            return Err("counters disagree with flags".into());
        }
        if c.evaluations != computed + c.failures {
            return Err("evaluation count disagrees with entries".into());
        }
        Ok(())
    }
}

/// Marking state of a run in progress.
pub struct ExplorationState {
    pub marked: Vec<bool>,
    pub result: ResultSet,
}

impl ExplorationState {
    pub fn new(grid: &Grid, tol: f64, relevance_r: Option<f64>) -> Self {
        Self { marked: vec![false; grid.len()], result: ResultSet::new(grid.len(), tol, relevance_r) }
    }
}

fn evaluate_all(grid: &Grid, evaluator: &dyn FeatureMap, points: &[usize]) -> Vec<Result<f64, EvalError>> {
    points.par_iter().map(|&q| evaluator.evaluate(&grid.parameters(q))).collect()
}

/// Whether the relevance change between center and neighbour calls for an
/// exact evaluation. A vanishing change never does unless `tol` is zero, so
/// that a parameter-independent relevance function (`r = 0`) copies.
pub fn shows_relevant_variation(delta: f64, tol: f64, r: f64) -> bool {
    tol == 0.0 || (delta >= tol * r && delta > 0.0)
}

fn needs_evaluation(
    grid: &Grid,
    relevance: &dyn RelevanceOracle,
    tol: f64,
    m_center: &Result<f64, EvalError>,
    q: usize,
) -> bool {
    if tol == 0.0 {
        return true;
    }
    // A relevance function that cannot be evaluated gives no reason to copy.
    match (m_center, relevance.relevance(&grid.parameters(q))) {
        (Ok(a), Ok(b)) => shows_relevant_variation((a - b).abs(), tol, relevance.r()),
        _ => true,
    }
}

/// Evaluates or copies every unmarked neighbour of `center`, whose value
/// must already be stored, and marks them all.
pub fn neighbor_compare(
    grid: &Grid,
    center: usize,
    n_size: usize,
    state: &mut ExplorationState,
    relevance: &dyn RelevanceOracle,
    tol: f64,
    evaluator: &dyn FeatureMap,
) {
    let c_value = state.result.entries[&center].value;
    let fresh: Vec<usize> = grid.neighbors(center, n_size).into_iter().filter(|q| !state.marked[*q]).collect();
    let m_center = if tol == 0.0 { Ok(0.0) } else { relevance.relevance(&grid.parameters(center)) };
    let decisions: Vec<bool> = fresh.par_iter().map(|&q| needs_evaluation(grid, relevance, tol, &m_center, q)).collect();
    let to_compute: Vec<usize> = fresh.iter().zip(&decisions).filter(|(_, d)| **d).map(|(q, _)| *q).collect();
    let values = evaluate_all(grid, evaluator, &to_compute);

    let res = &mut state.result;
    for &q in fresh.iter().zip(&decisions).filter(|(_, d)| !**d).map(|(q, _)| q) {
        res.entries.insert(q, Entry { value: c_value, flag: Flag::Copied, source: Some(center) });
        res.counters.neighbors_copied += 1;
    }
    for (&q, v) in to_compute.iter().zip(values) {
        res.counters.evaluations += 1;
        match v {
            Ok(value) => {
                res.entries.insert(q, Entry { value, flag: Flag::Computed, source: None });
                res.counters.neighbors_computed += 1;
            }
            Err(_) => {
                res.failed.insert(q);
                res.counters.failures += 1;
            }
        }
    }
    for q in fresh {
        state.marked[q] = true;
    }
}

/// Records the exact value of a center. Returns whether it succeeded.
fn record_center(state: &mut ExplorationState, center: usize, value: Result<f64, EvalError>) -> bool {
    let res = &mut state.result;
    res.centers.push(center);
    res.counters.evaluations += 1;
    state.marked[center] = true;
    match value {
        Ok(value) => {
            res.entries.insert(center, Entry { value, flag: Flag::Computed, source: None });
            res.counters.centers_computed += 1;
            true
        }
        Err(_) => {
            res.failed.insert(center);
            res.counters.failures += 1;
            false
        }
    }
}

/// Unmarked points with O(1) uniform draws and removals.
struct Unmarked {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl Unmarked {
    fn new(n: usize) -> Self {
        Self { items: (0..n).collect(), pos: (0..n).collect() }
    }

    fn remove(&mut self, i: usize) {
        let at = self.pos[i];
        if at == usize::MAX {
            return;
        }
        let last = *self.items.last().expect("non-empty");
        self.items.swap_remove(at);
        if last != i {
            self.pos[last] = at;
        }
        self.pos[i] = usize::MAX;
    }
}

/// Draws unmarked centers uniformly at random until `i_max` centers are
/// processed or every point is marked.
pub fn run_random_exploration(
    grid: &Grid,
    relevance: &dyn RelevanceOracle,
    config: &ExplorationConfig,
    evaluator: &dyn FeatureMap,
) -> Result<ResultSet, ExploreError> {
    config.validate(grid)?;
    let i_max = config.i_max.unwrap_or(grid.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = ExplorationState::new(grid, config.tol, Some(relevance.r()));
    let mut unmarked = Unmarked::new(grid.len());
    let mut any_success = false;

    while state.result.centers.len() < i_max && !unmarked.items.is_empty() {
        let center = unmarked.items[rng.gen_range(0..unmarked.items.len())];
        let value = evaluator.evaluate(&grid.parameters(center));
        unmarked.remove(center);
        if record_center(&mut state, center, value) {
            any_success = true;
            let before: Vec<usize> = grid.neighbors(center, config.n_size);
            neighbor_compare(grid, center, config.n_size, &mut state, relevance, config.tol, evaluator);
            for q in before {
                unmarked.remove(q);
            }
        } else if !any_success && state.result.centers.len() == ABORT_AFTER_FAILURES {
            return Err(ExploreError::AllCentersFailed(ABORT_AFTER_FAILURES));
        }
    }
    Ok(state.result)
}

/// Centers whose neighbourhoods, apart from other centers, overlap.
fn check_disjoint(grid: &Grid, centers: &[usize], n_size: usize) -> Result<(), ExploreError> {
    let set: BTreeSet<usize> = centers.iter().copied().collect();
    if set.len() != centers.len() {
        return Err(ExploreError::Config("g0 lists a point twice".into()));
    }
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for &c in centers {
        for q in grid.neighbors(c, n_size) {
            if set.contains(&q) {
                continue;
            }
            if let Some(other) = owner.insert(q, c) {
                return Err(ExploreError::Config(format!(
                    "neighbourhoods of g0 points {:?} and {:?} intersect at {:?}",
                    grid.point(other).index,
                    grid.point(c).index,
                    grid.point(q).index
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates every center of `g0`, then compares each neighbourhood.
pub fn run_deterministic_exploration(
    grid: &Grid,
    g0: &[Vec<usize>],
    relevance: &dyn RelevanceOracle,
    config: &ExplorationConfig,
    evaluator: &dyn FeatureMap,
) -> Result<ResultSet, ExploreError> {
    let centers = g0.iter().map(|i| grid.linear_index(i)).collect::<Result<Vec<_>, _>>()?;
    if centers.is_empty() {
        return Err(ExploreError::Config("g0 is empty".into()));
    }
    check_disjoint(grid, &centers, config.n_size)?;
    let mut state = ExplorationState::new(grid, config.tol, Some(relevance.r()));
    let values = evaluate_all(grid, evaluator, &centers);
    let ok: Vec<bool> = centers.iter().zip(values).map(|(&c, v)| record_center(&mut state, c, v)).collect();
    for (&c, ok) in centers.iter().zip(ok) {
        if ok {
            neighbor_compare(grid, c, config.n_size, &mut state, relevance, config.tol, evaluator);
        }
    }
    Ok(state.result)
}

/// Runs the mode selected in `config`.
pub fn run_exploration(
    grid: &Grid,
    relevance: &dyn RelevanceOracle,
    config: &ExplorationConfig,
    evaluator: &dyn FeatureMap,
) -> Result<ResultSet, ExploreError> {
    config.validate(grid)?;
    match config.mode {
        ExplorationMode::Random => run_random_exploration(grid, relevance, config, evaluator),
        ExplorationMode::Deterministic => {
            let g0 = config.g0.as_deref().unwrap_or_default();
            run_deterministic_exploration(grid, g0, relevance, config, evaluator)
        }
    }
}

/// Evaluates the feature map at every lattice point.
pub fn run_full(grid: &Grid, evaluator: &dyn FeatureMap) -> ResultSet {
    let all: Vec<usize> = (0..grid.len()).collect();
    let values = evaluate_all(grid, evaluator, &all);
    let mut res = ResultSet::new(grid.len(), 0.0, None);
    for (i, v) in values.into_iter().enumerate() {
        res.counters.evaluations += 1;
        match v {
            Ok(value) => {
                res.entries.insert(i, Entry { value, flag: Flag::Computed, source: None });
                res.counters.centers_computed += 1;
            }
            Err(_) => {
                res.failed.insert(i);
                res.counters.failures += 1;
            }
        }
    }
    res.centers = all;
    res
}

/// Caches values of an expensive feature map by exact parameter vector.
pub struct Memoized<'a> {
    inner: &'a dyn FeatureMap,
    cache: Mutex<HashMap<Vec<u64>, Result<f64, EvalError>>>,
}

impl<'a> Memoized<'a> {
    pub fn new(inner: &'a dyn FeatureMap) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

impl FeatureMap for Memoized<'_> {
    fn evaluate(&self, p: &[f64]) -> Result<f64, EvalError> {
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return v.clone();
        }
        let v = self.inner.evaluate(p);
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, HyperbolicDomain, Interval};
    use crate::relevance::FnRelevance;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn square(nx: usize, ny: usize) -> Grid {
        let d = HyperbolicDomain::new(vec![
            Interval { name: "a".into(), lo: 0.0, hi: (nx - 1) as f64 },
            Interval { name: "b".into(), lo: 0.0, hi: (ny - 1) as f64 },
        ])
        .unwrap();
        build_grid(&d, &[1.0, 1.0]).unwrap()
    }

    fn smooth(p: &[f64]) -> Result<f64, EvalError> {
        Ok((0.3 * p[0]).sin() + 0.1 * p[1] * p[1])
    }

    fn wavy() -> FnRelevance<impl Fn(&[f64]) -> f64 + Sync> {
        FnRelevance { r: 0.2, m: |p: &[f64]| (0.7 * p[0]).cos() + 0.05 * p[1] * p[0] }
    }

    fn flat() -> FnRelevance<impl Fn(&[f64]) -> f64 + Sync> {
        FnRelevance { r: 0.0, m: |_: &[f64]| 1.0 }
    }

    fn random(tol: f64, i_max: Option<usize>, seed: u64) -> ExplorationConfig {
        ExplorationConfig { tol, i_max, seed, ..Default::default() }
    }

    #[test]
    fn tol_zero_computes_every_neighbor() {
        let g = square(6, 6);
        let res = run_random_exploration(&g, &wavy(), &random(0.0, Some(3), 1), &smooth).unwrap();
        assert_eq!(res.counters.neighbors_copied, 0);
        assert!(res.counters.neighbors_computed > 0);
        res.check_consistency().unwrap();
    }

    #[test]
    fn huge_tol_copies_every_neighbor() {
        let g = square(6, 6);
        let rel = wavy();
        let spread = (0..g.len()).map(|i| rel.relevance(&g.parameters(i)).unwrap()).fold(0.0f64, |a, b| a.max(b.abs()));
        let tol = (1.0 + 2.0 * spread) / rel.r;
        let res = run_random_exploration(&g, &rel, &random(tol, Some(4), 2), &smooth).unwrap();
        assert_eq!(res.counters.neighbors_computed, 0);
        assert!(res.counters.neighbors_copied > 0);
    }

    #[test]
    fn two_point_rule() {
        let d = HyperbolicDomain::new(vec![Interval { name: "a".into(), lo: 0.0, hi: 1.0 }]).unwrap();
        let g = build_grid(&d, &[1.0]).unwrap();
        let rel = FnRelevance { r: 1.0, m: |p: &[f64]| 0.5 * p[0] };
        let f = |p: &[f64]| -> Result<f64, EvalError> { Ok(p[0] + 1.0) };
        for (tol, flag) in [(0.4, Flag::Computed), (0.6, Flag::Copied)] {
            let res = run_random_exploration(&g, &rel, &random(tol, Some(1), 0), &f).unwrap();
            let other = 1 - res.centers[0];
            assert_eq!(res.entries[&other].flag, flag, "tol {tol}");
        }
        assert!(shows_relevant_variation(0.5, 0.5, 1.0));
    }

    #[test]
    fn full_grid_equivalence() {
        let g = square(9, 9);
        let full = run_full(&g, &smooth);
        let res = run_random_exploration(&g, &wavy(), &random(0.0, Some(g.len()), 5), &smooth).unwrap();
        assert_eq!(res.len(), 81);
        for (i, e) in &full.entries {
            assert_eq!(res.entries[i].value.to_bits(), e.value.to_bits());
            assert_eq!(res.entries[i].flag, e.flag);
        }
    }

    #[test]
    fn single_center_with_huge_tol() {
        let g = square(5, 5);
        let mut interior_seen = false;
        for seed in 0..40 {
            let res = run_random_exploration(&g, &wavy(), &random(1e9, Some(1), seed), &smooth).unwrap();
            let c = g.point(res.centers[0]).index;
            let interior = c.iter().all(|&i| i > 0 && i < 4);
            interior_seen |= interior;
            assert_eq!(res.counters.centers_computed, 1);
            assert_eq!(res.counters.neighbors_copied, g.neighbors(res.centers[0], 1).len());
            if interior {
                assert_eq!(res.counters.neighbors_copied, 4);
            }
        }
        assert!(interior_seen);
    }

    #[test]
    fn deterministic_seeded_runs() {
        let g = square(7, 5);
        let a = run_random_exploration(&g, &wavy(), &random(0.5, Some(6), 42), &smooth).unwrap();
        let b = run_random_exploration(&g, &wavy(), &random(0.5, Some(6), 42), &smooth).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_mode() {
        let g = square(3, 3);
        let all: Vec<Vec<usize>> = (0..9).map(|i| g.point(i).index).collect();
        let cfg = ExplorationConfig { mode: ExplorationMode::Deterministic, g0: Some(all.clone()), ..Default::default() };
        let res = run_exploration(&g, &wavy(), &cfg, &smooth).unwrap();
        assert_eq!(res, {
            let mut full = run_full(&g, &smooth);
            full.relevance_r = Some(0.2);
            full
        });

        let corner = run_deterministic_exploration(&g, &[vec![0, 0]], &wavy(), &random(0.0, None, 0), &smooth).unwrap();
        assert_eq!(corner.counters.centers_computed, 1);
        assert_eq!(corner.counters.neighbors_computed + corner.counters.neighbors_copied, 2);

        let overlap = run_deterministic_exploration(&g, &[vec![0, 0], vec![1, 1]], &wavy(), &random(0.0, None, 0), &smooth);
        assert!(matches!(overlap, Err(ExploreError::Config(_))));
        let ok = run_deterministic_exploration(&g, &[vec![0, 0], vec![2, 2]], &wavy(), &random(0.0, None, 0), &smooth).unwrap();
        assert_eq!(ok.len(), 6);
    }

    #[test]
    fn flat_relevance_copies_beyond_centers() {
        let g = square(8, 8);
        for tol in [1e-9, 0.5, 3.0] {
            let res = run_random_exploration(&g, &flat(), &random(tol, Some(10), 3), &smooth).unwrap();
            assert_eq!(res.counters.neighbors_computed, 0);
            assert_eq!(res.with_flag(Flag::Computed), res.centers.iter().copied().collect());
        }
    }

    #[test]
    fn failed_centers_and_abort() {
        let g = square(6, 6);
        let never = |_: &[f64]| -> Result<f64, EvalError> { Err(EvalError::Other("no cycle".into())) };
        assert_eq!(
            run_random_exploration(&g, &wavy(), &random(0.0, None, 0), &never),
            Err(ExploreError::AllCentersFailed(ABORT_AFTER_FAILURES))
        );
        let sometimes = |p: &[f64]| if p[0] == 2.0 { Err(EvalError::Other("no cycle".into())) } else { smooth(p) };
        let res = run_random_exploration(&g, &wavy(), &random(0.0, None, 0), &sometimes).unwrap();
        assert_eq!(res.failed.len(), 6);
        assert_eq!(res.len(), 30);
        res.check_consistency().unwrap();
    }

    #[test]
    fn memoized_calls_once() {
        let calls = AtomicUsize::new(0);
        let f = |p: &[f64]| {
            calls.fetch_add(1, Ordering::SeqCst);
            smooth(p)
        };
        let m = Memoized::new(&f);
        let g = square(4, 4);
        let a = run_full(&g, &m);
        let b = run_full(&g, &m);
        assert_eq!(a, b);
        assert_eq!(calls.load(Ordering::SeqCst), 16);
        assert_eq!(m.cached(), 16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn soundness_and_budget(nx in 2usize..9, ny in 2usize..9, tol in 0.0f64..4.0, i_max in 1usize..20, seed in 0u64..1000, n_size in 1usize..3) {
            let g = square(nx, ny);
            let i_max = i_max.min(g.len());
            let cfg = ExplorationConfig { n_size, ..random(tol, Some(i_max), seed) };
            let res = run_random_exploration(&g, &wavy(), &cfg, &smooth).unwrap();
            prop_assert!(res.check_consistency().is_ok());
            let bound: usize = res.centers.iter().map(|&c| g.neighbors(c, n_size).len()).sum::<usize>() + i_max;
            prop_assert!(res.counters.evaluations <= bound);
            for e in res.entries.values().filter(|e| e.flag == Flag::Copied) {
                prop_assert!(res.centers.contains(&e.source.unwrap()));
            }
        }

        #[test]
        fn computed_sets_nest_in_tol(seed in 0u64..1000, t1 in 0.0f64..3.0, dt in 0.0f64..3.0, i_max in 1usize..30) {
            let g = square(8, 7);
            let a = run_random_exploration(&g, &wavy(), &random(t1, Some(i_max), seed), &smooth).unwrap();
            let b = run_random_exploration(&g, &wavy(), &random(t1 + dt, Some(i_max), seed), &smooth).unwrap();
            prop_assert!(b.with_flag(Flag::Computed).is_subset(&a.with_flag(Flag::Computed)));
            prop_assert_eq!(a.centers, b.centers);
        }

        #[test]
        fn relevance_scaling_invariance(seed in 0u64..1000, tol in 0.0f64..3.0) {
            let g = square(7, 7);
            let base = wavy();
            let scaled = FnRelevance { r: 8.0 * base.r, m: |p: &[f64]| 8.0 * (base.m)(p) };
            let a = run_random_exploration(&g, &base, &random(tol, Some(8), seed), &smooth).unwrap();
            let b = run_random_exploration(&g, &scaled, &random(tol, Some(8), seed), &smooth).unwrap();
            prop_assert_eq!(a.entries, b.entries);
        }
    }
}
