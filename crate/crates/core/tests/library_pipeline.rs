use std::sync::Arc;

use pexplore::cycle::{CycleFeature, EvalError, FeatureKind};
use pexplore::explore::{run_full, run_random_exploration, ExplorationConfig, Flag};
use pexplore::grid::{build_grid, HyperbolicDomain, Interval};
use pexplore::interp::{extract_slice, CellFlag, FixedValue, InterpolatedField};
use pexplore::model::{Budworm, BudwormDefaults};
use pexplore::relevance::{build_relevance_model, FnRelevance, RelevanceConfig};
use proptest::prelude::*;

fn budworm_box(axes: &[(&str, f64, f64, f64)]) -> pexplore::grid::Grid {
    let domain = HyperbolicDomain::new(
        axes.iter().map(|(n, lo, hi, _)| Interval { name: n.to_string(), lo: *lo, hi: *hi }).collect(),
    )
    .unwrap();
    let spacings: Vec<f64> = axes.iter().map(|a| a.3).collect();
    build_grid(&domain, &spacings).unwrap().embed(&BudwormDefaults::new().defaults).unwrap()
}

#[test]
fn budworm_plane_end_to_end() {
    let grid = budworm_box(&[("p3", 22000.0, 26000.0, 1000.0), ("p6", 1.0, 2.0, 0.25)]);
    assert_eq!(grid.counts(), vec![5, 5]);
    let feature = CycleFeature::new(Arc::new(Budworm), FeatureKind::MaxN);
    let rc = RelevanceConfig { k3: 6, k4: 2, ..RelevanceConfig::default() };
    let model = build_relevance_model(&Budworm, &grid, &rc, &feature.solver, &feature.cycle).unwrap();
    assert!(model.r > 0.0);

    let cfg = ExplorationConfig { tol: 1.1, i_max: Some(6), seed: 2, ..Default::default() };
    let res = run_random_exploration(&grid, &model.bind(&Budworm), &cfg, &feature).unwrap();
    res.check_consistency().unwrap();
    assert!(res.counters.evaluations < grid.len());

    let full = run_full(&grid, &feature);
    for i in res.with_flag(Flag::Computed) {
        assert_eq!(res.entries[&i].value.to_bits(), full.entries[&i].value.to_bits());
    }

    let field = InterpolatedField::new(&grid, &res).unwrap();
    let slice = extract_slice(&field, ["p3", "p6"], &[]).unwrap();
    for (i, row) in slice.flags.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            let lin = grid.linear_index(&[i, j]).unwrap();
            match res.entries.get(&lin) {
                Some(e) if e.flag == Flag::Computed => assert_eq!(*f, CellFlag::Computed),
                Some(_) => assert_eq!(*f, CellFlag::Copied),
                None => assert!(matches!(f, CellFlag::Interpolated | CellFlag::Missing)),
            }
        }
    }
}

#[test]
fn slice_of_full_cube_has_only_computed_cells() {
    let grid = budworm_box(&[("p3", 22000.0, 26000.0, 2000.0), ("p5", 24000.0, 32000.0, 4000.0), ("p6", 1.0, 2.0, 0.5)]);
    let f = |p: &[f64]| -> Result<f64, EvalError> { Ok(p[2] * 1e-4 - p[5] + p[4] * 1e-5) };
    let full = run_full(&grid, &f);
    let field = InterpolatedField::new(&grid, &full).unwrap();
    let slice = extract_slice(&field, ["p3", "p6"], &[FixedValue { name: "p5".into(), value: 28000.0 }]).unwrap();
    assert!(slice.flags.iter().flatten().all(|f| *f == CellFlag::Computed));
    for (i, x) in slice.coords[0].iter().enumerate() {
        for (j, y) in slice.coords[1].iter().enumerate() {
            let expect = x * 1e-4 - y + 0.28;
            assert!((slice.values[i][j].unwrap() - expect).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Interpolating a partial tol = 0 run reproduces every stored value and
    /// the flag counts add up.
    #[test]
    fn partial_runs_are_consistent(seed in 0u64..1000, i_max in 1usize..30, tol in 0.0f64..3.0) {
        let domain = HyperbolicDomain::new(vec![
            Interval { name: "a".into(), lo: 0.0, hi: 1.0 },
            Interval { name: "b".into(), lo: 0.0, hi: 1.0 },
        ]).unwrap();
        let grid = build_grid(&domain, &[0.1, 0.125]).unwrap();
        let c = |p: &[f64]| -> Result<f64, EvalError> { Ok((3.0 * p[0]).sin() + p[1] * p[1]) };
        let rel = FnRelevance { r: 0.2, m: |p: &[f64]| (3.0 * p[0]).sin() };
        let cfg = ExplorationConfig { tol, i_max: Some(i_max), seed, ..Default::default() };
        let res = run_random_exploration(&grid, &rel, &cfg, &c).unwrap();
        prop_assert!(res.check_consistency().is_ok());
        let computed = res.with_flag(Flag::Computed).len();
        let copied = res.with_flag(Flag::Copied).len();
        prop_assert_eq!(computed + copied, res.len());
        prop_assert_eq!(computed, res.counters.centers_computed + res.counters.neighbors_computed);
        prop_assert_eq!(copied, res.counters.neighbors_copied);
        if res.len() >= 3 {
            if let Ok(field) = InterpolatedField::new(&grid, &res) {
                for (&k, e) in &res.entries {
                    let v = field.interpolate(&grid.coords(k)).unwrap();
                    prop_assert_eq!(v.to_bits(), e.value.to_bits());
                }
            }
        }
    }
}
