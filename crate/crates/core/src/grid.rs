//! Lattice discretization of a box of parameters.
//!
//! Each axis is anchored at its lower bound, so `lo + i * spacing` for
//! `i < count` are the grid planes. Two lattice points are adjacent when they
//! differ by one step along one axis; the graph distance is therefore the L1
//! distance between index vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ParameterVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("axis '{axis}': need lo < hi, got [{lo}, {hi}]")]
    EmptyInterval { axis: String, lo: f64, hi: f64 },
    #[error("axis '{axis}': spacing {spacing} leaves fewer than two points on [{lo}, {hi}]")]
    DegenerateAxis { axis: String, lo: f64, hi: f64, spacing: f64 },
    #[error("axis '{0}' appears more than once")]
    DuplicateAxis(String),
    #[error("expected {expected} spacings, got {got}")]
    SpacingCount { expected: usize, got: usize },
    #[error("axis '{0}' is not a parameter of the model")]
    UnknownParameter(String),
    #[error("point has {got} coordinates, grid has {expected} axes")]
    Dimension { expected: usize, got: usize },
    #[error("index {index} out of range on axis '{axis}' with {count} points")]
    IndexOutOfRange { axis: String, index: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// A box of parameters on which the feature persists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicDomain {
    pub axes: Vec<Interval>,
}

impl HyperbolicDomain {
    pub fn new(axes: Vec<Interval>) -> Result<Self, GridError> {
        for (i, a) in axes.iter().enumerate() {
            if !(a.lo < a.hi) {
                return Err(GridError::EmptyInterval { axis: a.name.clone(), lo: a.lo, hi: a.hi });
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(GridError::DuplicateAxis(a.name.clone()));
            }
        }
        Ok(Self { axes })
    }

    /// The box `default_i +- delta_i`.
    pub fn around(center: &ParameterVector, deltas: &[f64]) -> Result<Self, GridError> {
        Self::new(
            center
                .names
                .iter()
                .zip(&center.values)
                .zip(deltas)
                .map(|((name, v), d)| Interval { name: name.clone(), lo: v - d, hi: v + d })
                .collect(),
        )
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.axes.len() && self.axes.iter().zip(p).all(|(a, v)| a.lo <= *v && *v <= a.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub spacing: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn value(&self, i: usize) -> f64 {
        (self.lo + i as f64 * self.spacing).min(self.hi)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }

    /// Fractional index of `v`; `lo` maps to 0.
    pub fn position(&self, v: f64) -> f64 {
        (v - self.lo) / self.spacing
    }

    /// Index of the grid plane through `v`, if `v` lies on one.
    pub fn plane_index(&self, v: f64) -> Option<usize> {
        let t = self.position(v);
        let i = t.round();
        if i < 0.0 || i >= self.count as f64 || (t - i).abs() > 1e-9 {
            return None;
        }
        Some(i as usize)
    }

    /// The grid planes enclosing `v`, clipped to the axis.
    pub fn nearest_planes(&self, v: f64) -> (f64, f64) {
        let t = self.position(v).clamp(0.0, (self.count - 1) as f64);
        let i0 = t.floor() as usize;
        let i1 = (i0 + 1).min(self.count - 1);
        (self.value(i0), self.value(i1))
    }
}

/// Multi-index of a lattice point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: Vec<usize>,
}

impl GridPoint {
    pub fn new(index: Vec<usize>) -> Self {
        Self { index }
    }
}

/// Maps grid coordinates into a full parameter vector of the model; the
/// parameters without an axis keep their base values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub base: ParameterVector,
    pub param_index: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<GridAxis>,
    strides: Vec<usize>,
    len: usize,
    embedding: Option<Embedding>,
}

/// Lattice of spacing `spacings[i]` on axis `i`, anchored at the lower bounds.
pub fn build_grid(domain: &HyperbolicDomain, spacings: &[f64]) -> Result<Grid, GridError> {
    if spacings.len() != domain.axes.len() {
        return Err(GridError::SpacingCount { expected: domain.axes.len(), got: spacings.len() });
    }
    let mut axes = Vec::with_capacity(spacings.len());
    for (a, &s) in domain.axes.iter().zip(spacings) {
        let span = a.hi - a.lo;
        if !(s > 0.0) || !(s <= span * (1.0 + 1e-12)) {
            return Err(GridError::DegenerateAxis { axis: a.name.clone(), lo: a.lo, hi: a.hi, spacing: s });
        }
        let count = (span / s + 1e-9).floor() as usize + 1;
        axes.push(GridAxis { name: a.name.clone(), lo: a.lo, hi: a.hi, spacing: s, count });
    }
    Ok(Grid::from_axes(axes))
}

impl Grid {
    fn from_axes(axes: Vec<GridAxis>) -> Self {
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].count;
        }
        let len = axes.iter().map(|a| a.count).product();
        Self { axes, strides, len, embedding: None }
    }

    /// Attaches the model's base parameter vector; axes are matched by name.
    pub fn embed(mut self, base: &ParameterVector) -> Result<Self, GridError> {
        let param_index = self
            .axes
            .iter()
            .map(|a| base.index_of(&a.name).ok_or_else(|| GridError::UnknownParameter(a.name.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        self.embedding = Some(Embedding { base: base.clone(), param_index });
        Ok(self)
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn point(&self, linear: usize) -> GridPoint {
        GridPoint::new(self.multi_index(linear))
    }

    pub fn multi_index(&self, linear: usize) -> Vec<usize> {
        debug_assert!(linear < self.len);
        self.strides
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| (linear / s) % a.count)
            .collect()
    }

    pub fn linear(&self, point: &GridPoint) -> Result<usize, GridError> {
        self.linear_index(&point.index)
    }

    pub fn linear_index(&self, index: &[usize]) -> Result<usize, GridError> {
        if index.len() != self.dim() {
            return Err(GridError::Dimension { expected: self.dim(), got: index.len() });
        }
        let mut out = 0;
        for ((i, a), s) in index.iter().zip(&self.axes).zip(&self.strides) {
            if *i >= a.count {
                return Err(GridError::IndexOutOfRange { axis: a.name.clone(), index: *i, count: a.count });
            }
            out += i * s;
        }
        Ok(out)
    }

    /// Coordinates of a lattice point along the grid axes.
    pub fn coords(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear)
            .iter()
            .zip(&self.axes)
            .map(|(i, a)| a.value(*i))
            .collect()
    }

    /// Full model parameter vector of a lattice point (the grid coordinates
    /// when no embedding is attached).
    pub fn parameters(&self, linear: usize) -> Vec<f64> {
        let coords = self.coords(linear);
        match &self.embedding {
            None => coords,
            Some(e) => {
                let mut p = e.base.values.clone();
                for (c, &j) in coords.iter().zip(&e.param_index) {
                    p[j] = *c;
                }
                p
            }
        }
    }

    /// Linear indices of all lattice points `q` with `0 < d(p, q) <= n_size`,
    /// ascending.
    pub fn neighbors(&self, linear: usize, n_size: usize) -> Vec<usize> {
        let center = self.multi_index(linear);
        let mut out = Vec::new();
        self.collect_neighbors(&center, 0, n_size, linear as isize, &mut out);
        out.retain(|&q| q != linear);
        out.sort_unstable();
        out
    }

    fn collect_neighbors(&self, center: &[usize], axis: usize, budget: usize, acc: isize, out: &mut Vec<usize>) {
        if axis == self.dim() {
            out.push(acc as usize);
            return;
        }
        let c = center[axis] as isize;
        let count = self.axes[axis].count as isize;
        let b = budget as isize;
        for off in -b..=b {
            let j = c + off;
            if j < 0 || j >= count {
                continue;
            }
            let rest = budget - off.unsigned_abs();
            self.collect_neighbors(center, axis + 1, rest, acc + off * self.strides[axis] as isize, out);
        }
    }
}

/// Number of lattice edges on a shortest path between `a` and `b`.
pub fn graph_distance(a: &GridPoint, b: &GridPoint) -> usize {
    a.index.iter().zip(&b.index).map(|(x, y)| x.abs_diff(*y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: GridPoint,
    pub radius: usize,
    pub members: Vec<GridPoint>,
}

pub fn neighborhood(grid: &Grid, p: &GridPoint, n_size: usize) -> Result<Neighborhood, GridError> {
    let linear = grid.linear(p)?;
    Ok(Neighborhood {
        center: p.clone(),
        radius: n_size,
        members: grid.neighbors(linear, n_size).into_iter().map(|q| grid.point(q)).collect(),
    })
}
