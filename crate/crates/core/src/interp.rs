//! Extension of the partial value map `G*` to the whole box.
//!
//! Grids of up to three axes use piecewise-linear interpolation on the
//! Delaunay triangulation of `G*` (plain linear interpolation for one axis).
//! Larger grids use multilinear interpolation after filling the holes of the
//! lattice with the value of the nearest point of `G*` in the lattice graph.
//! Nothing is extrapolated: queries outside the data hull are errors.

use std::collections::{BTreeMap, VecDeque};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delaunay::{DelaunayError, Triangulation, MAX_COORDINATE};
use crate::explore::{Entry, Flag, ResultSet};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("query {0:?} lies outside the hull of the available data")]
    OutsideHull(Vec<f64>),
    #[error("query has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("no data to interpolate")]
    NoData,
    #[error("result set covers {got} lattice points, the grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Triangulation(#[from] DelaunayError),
    #[error("invalid interpolation input: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpMethod {
    SimplexLinear,
    MultilinearFilled,
}

/// `C_A`: the interpolant of a result set.
pub struct InterpolatedField {
    grid: Grid,
    entries: BTreeMap<usize, Entry>,
    /// Lattice index of each triangulation vertex.
    keys: Vec<usize>,
    method: InterpMethod,
    /// Smallest and largest lattice index of `G*` per axis.
    lo: Vec<usize>,
    hi: Vec<usize>,
    tri: Option<Triangulation>,
    line: Vec<(f64, f64)>,
    filled: OnceLock<Vec<f64>>,
}

impl InterpolatedField {
    pub fn new(grid: &Grid, result: &ResultSet) -> Result<Self, InterpError> {
        if result.grid_len != grid.len() {
            return Err(InterpError::GridMismatch { expected: grid.len(), got: result.grid_len });
        }
        Self::from_entries(grid, result.entries.clone())
    }

    pub fn from_entries(grid: &Grid, entries: BTreeMap<usize, Entry>) -> Result<Self, InterpError> {
        if entries.is_empty() {
            return Err(InterpError::NoData);
        }
        if let Some((&i, _)) = entries.iter().next_back().filter(|(i, _)| **i >= grid.len()) {
            return Err(InterpError::Config(format!("entry {i} outside the grid")));
        }
        let k = grid.dim();
        let mut lo = vec![usize::MAX; k];
        let mut hi = vec![0; k];
        for &i in entries.keys() {
            for (a, v) in grid.multi_index(i).into_iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        let method = if k <= 3 { InterpMethod::SimplexLinear } else { InterpMethod::MultilinearFilled };
        let keys = entries.keys().copied().collect();
        let mut field = Self { grid: grid.clone(), entries, keys, method, lo, hi, tri: None, line: Vec::new(), filled: OnceLock::new() };
        match k {
            1 => field.line = field.entries.iter().map(|(i, e)| (*i as f64, e.value)).collect(),
            2 | 3 => {
                let pts: Vec<[i64; 3]> = field
                    .entries
                    .keys()
                    .map(|&i| {
                        let mut p = [0i64; 3];
                        for (a, v) in grid.multi_index(i).into_iter().enumerate() {
                            p[a] = (v - field.lo[a]) as i64;
                        }
                        p
                    })
                    .collect();
                if pts.iter().flatten().any(|c| *c > MAX_COORDINATE) {
                    return Err(InterpError::Config("grid too large for simplex interpolation".into()));
                }
                field.tri = Some(Triangulation::new(k, &pts)?);
            }
            _ => {}
        }
        Ok(field)
    }

    pub fn method(&self) -> InterpMethod {
        self.method
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &BTreeMap<usize, Entry> {
        &self.entries
    }

    /// Fractional lattice position of parameter coordinates.
    fn position(&self, p: &[f64]) -> Result<Vec<f64>, InterpError> {
        if p.len() != self.grid.dim() {
            return Err(InterpError::Dimension { expected: self.grid.dim(), got: p.len() });
        }
        Ok(self.grid.axes.iter().zip(p).map(|(a, v)| a.position(*v)).collect())
    }

    fn node(&self, p: &[f64]) -> Option<f64> {
        let idx: Option<Vec<usize>> = self.grid.axes.iter().zip(p).map(|(a, v)| a.plane_index(*v)).collect();
        let lin = self.grid.linear_index(&idx?).ok()?;
        self.entries.get(&lin).map(|e| e.value)
    }

    /// `C_A(p)` at grid-axis coordinates `p`.
    pub fn interpolate(&self, p: &[f64]) -> Result<f64, InterpError> {
        let t = self.position(p)?;
        if let Some(v) = self.node(p) {
            return Ok(v);
        }
        let outside = || InterpError::OutsideHull(p.to_vec());
        match self.grid.dim() {
            1 => {
                let lin = t[0];
                let (x0, x1) = (self.line[0].0, self.line[self.line.len() - 1].0);
                if !(lin >= x0 - 1e-12 && lin <= x1 + 1e-12) {
                    return Err(outside());
                }
                Ok(linear_on_sorted(&self.line, lin.clamp(x0, x1)))
            }
            2 | 3 => {
                let x: Vec<f64> = t.iter().zip(&self.lo).map(|(v, l)| v - *l as f64).collect();
                let tri = self.tri.as_ref().expect("triangulated");
                let (s, lam) = tri.locate(&x).ok_or_else(outside)?;
                // Difference form: exact for constant data.
                let v0 = self.entries[&self.keys[s.verts[0]]].value;
                Ok(v0 + s.verts[1..].iter().zip(&lam[1..]).map(|(&v, l)| l * (self.entries[&self.keys[v]].value - v0)).sum::<f64>())
            }
            _ => {
                let inside = t.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l as f64 - 1e-9 && *v <= *h as f64 + 1e-9);
                if !inside {
                    return Err(outside());
                }
                Ok(self.multilinear(self.filled(), &t))
            }
        }
    }

    /// Lattice values with every hole filled from its nearest `G*` point in
    /// the lattice graph; ties go to the point reached first by a
    /// breadth-first search seeded in index order.
    pub fn filled(&self) -> &[f64] {
        self.filled.get_or_init(|| {
            let n = self.grid.len();
            let mut vals = vec![f64::NAN; n];
            let mut seen = vec![false; n];
            let mut queue = VecDeque::new();
            for (&i, e) in &self.entries {
                vals[i] = e.value;
                seen[i] = true;
                queue.push_back(i);
            }
            while let Some(u) = queue.pop_front() {
                for v in self.grid.neighbors(u, 1) {
                    if !seen[v] {
                        seen[v] = true;
                        vals[v] = vals[u];
                        queue.push_back(v);
                    }
                }
            }
            vals
        })
    }

    /// Multilinear interpolation of the hole-filled lattice; defined on the
    /// whole box, queries outside it are clamped.
    pub fn interpolate_filled(&self, p: &[f64]) -> Result<f64, InterpError> {
        let t = self.position(p)?;
        if let Some(v) = self.node(p) {
            return Ok(v);
        }
        Ok(self.multilinear(self.filled(), &t))
    }

    fn multilinear(&self, vals: &[f64], t: &[f64]) -> f64 {
        let k = t.len();
        let mut base = vec![0usize; k];
        let mut frac = vec![0.0; k];
        for (a, ax) in self.grid.axes.iter().enumerate() {
            let top = (ax.count - 1) as f64;
            let x = t[a].clamp(0.0, top);
            let b = (x.floor() as usize).min(ax.count - 2);
            base[a] = b;
            frac[a] = x - b as f64;
        }
        // Corner values, reduced one axis at a time by linear blends.
        let mut vals_c: Vec<f64> = (0..(1usize << k))
            .map(|corner| {
                let idx: Vec<usize> = (0..k).map(|a| base[a] + ((corner >> a) & 1)).collect();
                vals[self.grid.linear_index(&idx).expect("in range")]
            })
            .collect();
        for a in 0..k {
            let half = vals_c.len() / 2;
            vals_c = (0..half)
                .map(|c| {
                    let (lo, hi) = (vals_c[2 * c], vals_c[2 * c + 1]);
                    if frac[a] == 0.0 { lo } else { lo + frac[a] * (hi - lo) }
                })
                .collect();
        }
        vals_c[0]
    }
}

pub fn interpolate(field: &InterpolatedField, p: &[f64]) -> Result<f64, InterpError> {
    field.interpolate(p)
}

fn linear_on_sorted(pts: &[(f64, f64)], x: f64) -> f64 {
    let j = pts.partition_point(|(xi, _)| *xi <= x).clamp(1, pts.len() - 1);
    let ((x0, y0), (x1, y1)) = (pts[j - 1], pts[j]);
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method1d {
    Linear,
    CubicSpline,
}

/// One-dimensional linear or natural cubic spline interpolation through
/// points sorted by `x`.
pub fn interpolate_1d(points: &[(f64, f64)], query: f64, method: Method1d) -> Result<f64, InterpError> {
    if points.len() < 2 {
        return Err(InterpError::NoData);
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(InterpError::Config("points must be sorted by strictly increasing x".into()));
    }
    let (x0, x1) = (points[0].0, points[points.len() - 1].0);
    if !(query >= x0 && query <= x1) {
        return Err(InterpError::OutsideHull(vec![query]));
    }
    match method {
        Method1d::Linear => Ok(linear_on_sorted(points, query)),
        Method1d::CubicSpline => Ok(natural_spline(points, query)),
    }
}

fn natural_spline(pts: &[(f64, f64)], x: f64) -> f64 {
    let n = pts.len();
    let h: Vec<f64> = pts.windows(2).map(|w| w[1].0 - w[0].0).collect();
    // Second derivatives m_i with m_0 = m_{n-1} = 0 (Thomas algorithm).
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((pts[i + 2].1 - pts[i + 1].1) / h[i + 1] - (pts[i + 1].1 - pts[i].1) / h[i]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
        }
    }
    let j = pts.partition_point(|(xi, _)| *xi <= x).clamp(1, n - 1) - 1;
    let (xa, ya) = pts[j];
    let (xb, yb) = pts[j + 1];
    let hj = h[j];
    let (a, b) = ((xb - x) / hj, (x - xa) / hj);
    a * ya + b * yb + ((a * a * a - a) * m[j] + (b * b * b - b) * m[j + 1]) * hj * hj / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellFlag {
    Computed,
    Copied,
    Interpolated,
    Missing,
}

impl CellFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            CellFlag::Computed => "computed",
            CellFlag::Copied => "copied",
            CellFlag::Interpolated => "interpolated",
            CellFlag::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedValue {
    pub name: String,
    pub value: f64,
}

/// Values of the field on the 2-D sub-grid spanned by two axes, with the
/// remaining axes held on grid planes. `values[i][j]` sits at
/// `(coords[0][i], coords[1][j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub axes: Vec<String>,
    pub fixed: Vec<FixedValue>,
    pub coords: Vec<Vec<f64>>,
    pub values: Vec<Vec<Option<f64>>>,
    pub flags: Vec<Vec<CellFlag>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SliceError {
    #[error("unknown axis '{0}'")]
    UnknownAxis(String),
    #[error("the two free axes must differ")]
    SameAxis,
    #[error("free axis '{0}' cannot also be fixed")]
    FreeAxisFixed(String),
    #[error("axis '{0}' fixed more than once")]
    DuplicateFixed(String),
    #[error("no value given for axes {0:?}")]
    MissingFixed(Vec<String>),
    #[error("{axis} = {value} is not on a grid plane; nearest planes are {lower} and {upper}")]
    NotOnGrid { axis: String, value: f64, lower: f64, upper: f64 },
}

pub fn extract_slice(field: &InterpolatedField, free_axes: [&str; 2], fixed: &[FixedValue]) -> Result<Slice, SliceError> {
    let grid = field.grid();
    let a = grid.axis_index(free_axes[0]).ok_or_else(|| SliceError::UnknownAxis(free_axes[0].into()))?;
    let b = grid.axis_index(free_axes[1]).ok_or_else(|| SliceError::UnknownAxis(free_axes[1].into()))?;
    if a == b {
        return Err(SliceError::SameAxis);
    }
    let mut index = vec![usize::MAX; grid.dim()];
    let mut point = vec![f64::NAN; grid.dim()];
    for f in fixed {
        let ax = grid.axis_index(&f.name).ok_or_else(|| SliceError::UnknownAxis(f.name.clone()))?;
        if ax == a || ax == b {
            return Err(SliceError::FreeAxisFixed(f.name.clone()));
        }
        if index[ax] != usize::MAX {
            return Err(SliceError::DuplicateFixed(f.name.clone()));
        }
        let axis = &grid.axes[ax];
        let i = axis.plane_index(f.value).ok_or_else(|| {
            let (lower, upper) = axis.nearest_planes(f.value);
            SliceError::NotOnGrid { axis: f.name.clone(), value: f.value, lower, upper }
        })?;
        index[ax] = i;
        point[ax] = axis.value(i);
    }
    let missing: Vec<String> = (0..grid.dim())
        .filter(|&i| i != a && i != b && index[i] == usize::MAX)
        .map(|i| grid.axes[i].name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(SliceError::MissingFixed(missing));
    }

    let (xa, xb) = (grid.axes[a].values(), grid.axes[b].values());
    let mut values = vec![vec![None; xb.len()]; xa.len()];
    let mut flags = vec![vec![CellFlag::Missing; xb.len()]; xa.len()];
    for i in 0..xa.len() {
        for j in 0..xb.len() {
            index[a] = i;
            index[b] = j;
            point[a] = xa[i];
            point[b] = xb[j];
            let lin = grid.linear_index(&index).expect("slice index in range");
            let (v, f) = match field.entries().get(&lin) {
                Some(e) => (Some(e.value), if e.flag == Flag::Computed { CellFlag::Computed } else { CellFlag::Copied }),
                None => match field.interpolate(&point) {
                    Ok(v) => (Some(v), CellFlag::Interpolated),
                    Err(_) => (None, CellFlag::Missing),
                },
            };
            values[i][j] = v;
            flags[i][j] = f;
        }
    }
    Ok(Slice {
        axes: vec![free_axes[0].to_string(), free_axes[1].to_string()],
        fixed: fixed.to_vec(),
        coords: vec![xa, xb],
        values,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::EvalError;
    use crate::explore::{run_full, run_random_exploration, ExplorationConfig};
    use crate::grid::{build_grid, HyperbolicDomain, Interval};
    use crate::relevance::FnRelevance;
    use proptest::prelude::*;

    fn boxed(counts: &[usize], spacing: f64) -> Grid {
        let d = HyperbolicDomain::new(
            counts
                .iter()
                .enumerate()
                .map(|(i, c)| Interval { name: format!("x{i}"), lo: -1.0, hi: -1.0 + spacing * (*c - 1) as f64 })
                .collect(),
        )
        .unwrap();
        build_grid(&d, &vec![spacing; counts.len()]).unwrap()
    }

    fn affine(p: &[f64]) -> Result<f64, EvalError> {
        Ok(0.5 + p.iter().enumerate().map(|(i, v)| (i as f64 + 1.5) * v).sum::<f64>())
    }

    fn partial(grid: &Grid, i_max: usize, seed: u64, f: &dyn crate::cycle::FeatureMap) -> ResultSet {
        let rel = FnRelevance { r: 1.0, m: |_: &[f64]| 0.0 };
        let cfg = ExplorationConfig { tol: 0.0, i_max: Some(i_max), seed, ..Default::default() };
        run_random_exploration(grid, &rel, &cfg, f).unwrap()
    }

    const PROBLEM1: [(f64, f64); 3] = [(0.0, 0.3), (0.5, 0.25), (1.0, 0.3)];
    const PROBLEM2: [(f64, f64); 4] = [(0.0, 0.3), (0.5, 0.25), (0.58, 0.04), (1.0, 0.3)];

    #[test]
    fn problem1_linear() {
        let v = interpolate_1d(&PROBLEM1, 0.75, Method1d::Linear).unwrap();
        assert!((v - 0.275).abs() < 1e-15);
        for (x, y) in PROBLEM1 {
            assert_eq!(interpolate_1d(&PROBLEM1, x, Method1d::Linear).unwrap(), y);
        }
    }

    #[test]
    fn problem2_linear_and_spline() {
        let v = interpolate_1d(&PROBLEM2, 0.54, Method1d::Linear).unwrap();
        assert!((v - 0.145).abs() < 1e-15);
        let dips = (1..1000)
            .map(|i| 0.5 + 0.5 * i as f64 / 1000.0)
            .any(|x| interpolate_1d(&PROBLEM2, x, Method1d::CubicSpline).unwrap() < 0.04);
        assert!(dips);
        for (x, y) in PROBLEM2 {
            assert!((interpolate_1d(&PROBLEM2, x, Method1d::CubicSpline).unwrap() - y).abs() < 1e-15);
        }
        assert!(interpolate_1d(&PROBLEM2, 1.1, Method1d::Linear).is_err());
    }

    #[test]
    fn spline_oracle() {
        // A natural spline reproduces a straight line exactly.
        let pts: Vec<(f64, f64)> = [0.0, 0.3, 1.1, 2.0, 2.2].iter().map(|x| (*x, 2.0 * x - 1.0)).collect();
        for x in [0.1, 0.7, 1.9, 2.15] {
            assert!((interpolate_1d(&pts, x, Method1d::CubicSpline).unwrap() - (2.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn one_axis_field() {
        let d = HyperbolicDomain::new(vec![Interval { name: "x".into(), lo: 0.0, hi: 1.0 }]).unwrap();
        let g = build_grid(&d, &[0.5]).unwrap();
        let full = run_full(&g, &|p: &[f64]| Ok(PROBLEM1.iter().find(|(x, _)| *x == p[0]).unwrap().1));
        let f = InterpolatedField::new(&g, &full).unwrap();
        assert!((f.interpolate(&[0.75]).unwrap() - 0.275).abs() < 1e-15);
        assert!(matches!(f.interpolate(&[1.5]), Err(InterpError::OutsideHull(_))));
    }

    #[test]
    fn affine_reproduction_full_grids() {
        for counts in [vec![7, 5], vec![4, 5, 3], vec![3, 3, 2, 3]] {
            let g = boxed(&counts, 0.25);
            let f = InterpolatedField::new(&g, &run_full(&g, &affine)).unwrap();
            for q in 0..200 {
                let p: Vec<f64> = g.axes.iter().enumerate().map(|(i, a)| a.lo + (a.hi - a.lo) * (((q * (i + 3) * 37) % 101) as f64 / 100.0)).collect();
                let v = f.interpolate(&p).unwrap();
                assert!((v - affine(&p).unwrap()).abs() < 1e-12, "{counts:?} {p:?}");
            }
        }
    }

    #[test]
    fn slices() {
        let g = boxed(&[5, 4, 3], 0.5);
        let full = run_full(&g, &affine);
        let f = InterpolatedField::new(&g, &full).unwrap();
        let s = extract_slice(&f, ["x0", "x2"], &[FixedValue { name: "x1".into(), value: 0.0 }]).unwrap();
        assert_eq!((s.values.len(), s.values[0].len()), (5, 3));
        assert!(s.flags.iter().flatten().all(|f| *f == CellFlag::Computed));
        assert_eq!(s.values[2][1], Some(affine(&[0.0, 0.0, -0.5]).unwrap()));

        let err = extract_slice(&f, ["x0", "x2"], &[FixedValue { name: "x1".into(), value: 0.2 }]).unwrap_err();
        assert_eq!(err, SliceError::NotOnGrid { axis: "x1".into(), value: 0.2, lower: 0.0, upper: 0.5 });
        assert!(matches!(extract_slice(&f, ["x0", "q"], &[]), Err(SliceError::UnknownAxis(_))));
        assert!(matches!(extract_slice(&f, ["x0", "x2"], &[]), Err(SliceError::MissingFixed(_))));

        // A sparse run leaves holes: every cell has exactly one flag and
        // missing cells carry no value.
        let sparse = partial(&g, 2, 4, &affine);
        let f = InterpolatedField::new(&g, &sparse).unwrap();
        let s = extract_slice(&f, ["x0", "x1"], &[FixedValue { name: "x2".into(), value: -1.0 }]).unwrap();
        for (row, frow) in s.values.iter().zip(&s.flags) {
            for (v, fl) in row.iter().zip(frow) {
                assert_eq!(v.is_none(), *fl == CellFlag::Missing);
            }
        }
    }

    #[test]
    fn filled_grid_ties_and_values() {
        let g = boxed(&[5, 1 + 1, 2, 2], 1.0);
        let mut entries = BTreeMap::new();
        entries.insert(0, Entry { value: 1.0, flag: Flag::Computed, source: None });
        entries.insert(g.len() - 1, Entry { value: 3.0, flag: Flag::Computed, source: None });
        let f = InterpolatedField::from_entries(&g, entries).unwrap();
        assert_eq!(f.method(), InterpMethod::MultilinearFilled);
        let filled = f.filled();
        assert!(filled.iter().all(|v| *v == 1.0 || *v == 3.0));
        assert_eq!(filled[1], 1.0);
        assert_eq!(filled[g.len() - 2], 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn node_reproduction_and_hull(nx in 3usize..8, ny in 3usize..8, nz in 1usize..4, i_max in 1usize..12, seed in 0u64..500) {
            let counts: Vec<usize> = if nz == 1 { vec![nx, ny] } else { vec![nx, ny, nz] };
            let g = boxed(&counts, 0.5);
            let wavy = |p: &[f64]| -> Result<f64, EvalError> { Ok((3.0 * p[0]).sin() * p[1] + p.len() as f64) };
            let res = partial(&g, i_max.min(g.len()), seed, &wavy);
            let f = InterpolatedField::new(&g, &res).unwrap();
            for (&i, e) in &res.entries {
                prop_assert_eq!(f.interpolate(&g.coords(i)).unwrap().to_bits(), e.value.to_bits());
            }
            // Values anywhere lie within the data range; outside the box always errors.
            let (mn, mx) = res.entries.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e.value), b.max(e.value)));
            for i in 0..g.len() {
                if let Ok(v) = f.interpolate(&g.coords(i)) {
                    prop_assert!(v >= mn - 1e-12 && v <= mx + 1e-12);
                }
            }
            let mut out = g.coords(0);
            out[0] -= 0.25;
            prop_assert!(matches!(f.interpolate(&out), Err(InterpError::OutsideHull(_))));
        }

        #[test]
        fn affine_reproduction_partial(i_max in 2usize..10, seed in 0u64..500) {
            let g = boxed(&[8, 6], 0.5);
            let res = partial(&g, i_max, seed, &affine);
            let f = InterpolatedField::new(&g, &res).unwrap();
            for i in 0..g.len() {
                let p = g.coords(i);
                if let Ok(v) = f.interpolate(&p) {
                    prop_assert!((v - affine(&p).unwrap()).abs() < 1e-12);
                }
            }
        }
    }
}
