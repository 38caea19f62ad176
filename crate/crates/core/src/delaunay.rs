//! Delaunay triangulation of integer lattice points in two or three dimensions.
//!
//! Incremental Bowyer-Watson insertion with exact `i128` predicates. The hull
//! is closed by a symbolic vertex at infinity: every hull facet carries an
//! infinite cell, whose "circumball" is the open half-space beyond the facet
//! plus the facet's own circumball within its hyperplane.

use std::collections::HashMap;

use thiserror::Error;

/// Coordinates beyond this magnitude could overflow the predicates.
pub const MAX_COORDINATE: i64 = 1 << 12;

const INF: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DelaunayError {
    #[error("dimension {0} not supported; use 2 or 3")]
    Dimension(usize),
    #[error("coordinate {0} outside the supported range")]
    Range(i64),
    #[error("point {0} appears twice")]
    Duplicate(usize),
}

type P = [i64; 3];

fn det(m: &[[i128; 4]; 4], n: usize) -> i128 {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            let mut total = 0;
            for col in 0..n {
                if m[0][col] == 0 {
                    continue;
                }
                let mut minor = [[0i128; 4]; 4];
                for r in 1..n {
                    let mut c2 = 0;
                    for c in 0..n {
                        if c != col {
                            minor[r - 1][c2] = m[r][c];
                            c2 += 1;
                        }
                    }
                }
                let term = m[0][col] * det(&minor, n - 1);
                total += if col % 2 == 0 { term } else { -term };
            }
            total
        }
    }
}

/// `det[p_i - p_d]` over the first `d` points against the last.
fn orient(d: usize, pts: &[P]) -> i128 {
    let mut m = [[0i128; 4]; 4];
    let last = pts[d];
    for (i, row) in m.iter_mut().enumerate().take(d) {
        for (j, v) in row.iter_mut().enumerate().take(d) {
            *v = (pts[i][j] - last[j]) as i128;
        }
    }
    det(&m, d)
}

/// Lifted determinant `det[p_i - e, |p_i - e|^2]`; `e` lies strictly inside the
/// circumball of `pts` iff this has the sign of `orient(pts)`.
fn insphere(d: usize, pts: &[P], e: &P) -> i128 {
    let mut m = [[0i128; 4]; 4];
    for (i, row) in m.iter_mut().enumerate().take(d + 1) {
        let mut sq = 0i128;
        for j in 0..d {
            let v = (pts[i][j] - e[j]) as i128;
            row[j] = v;
            sq += v * v;
        }
        row[d] = sq;
    }
    det(&m, d + 1)
}

fn signum(v: i128) -> i8 {
    v.signum() as i8
}

#[derive(Debug, Clone)]
struct Cell {
    verts: [usize; 4],
    /// Circumcenter and squared radius for finite cells.
    ball: Option<([f64; 3], f64)>,
    /// Orientation sign of the interior reference against the facet, for
    /// infinite cells.
    inner_sign: i8,
}

#[derive(Debug, Clone)]
pub struct Simplex {
    pub verts: Vec<usize>,
    /// Adjugate rows and determinant of the edge matrix, for barycentrics.
    adj: [[f64; 3]; 3],
    det: f64,
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    dim: usize,
    points: Vec<P>,
    simplices: Vec<Simplex>,
    buckets: HashMap<P, Vec<u32>>,
    extent: P,
}

impl Triangulation {
    /// Triangulates `points` (first `dim` coordinates used). Returns a
    /// triangulation without simplices when the points are affinely degenerate.
    pub fn new(dim: usize, points: &[[i64; 3]]) -> Result<Self, DelaunayError> {
        if dim != 2 && dim != 3 {
            return Err(DelaunayError::Dimension(dim));
        }
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            let mut q = [0i64; 3];
            for j in 0..dim {
                if p[j].abs() > MAX_COORDINATE {
                    return Err(DelaunayError::Range(p[j]));
                }
                q[j] = p[j];
            }
            pts.push(q);
        }
        let mut seen = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            if seen.insert(*p, i).is_some() {
                return Err(DelaunayError::Duplicate(i));
            }
        }
        let mut extent = [0i64; 3];
        for p in &pts {
            for j in 0..3 {
                extent[j] = extent[j].max(p[j]);
            }
        }
        let mut builder = Builder { dim, pts: &pts, cells: Vec::new(), reference: [0; 3] };
        let cells = builder.run();
        let mut tri = Triangulation { dim, points: pts.clone(), simplices: Vec::new(), buckets: HashMap::new(), extent };
        for c in cells.into_iter().filter(|c| c.ball.is_some()) {
            tri.push_simplex(c.verts[..=dim].to_vec());
        }
        Ok(tri)
    }

    fn push_simplex(&mut self, verts: Vec<usize>) {
        let d = self.dim;
        let v0 = self.points[verts[0]];
        let mut e = [[0i128; 4]; 4];
        for i in 0..d {
            for j in 0..d {
                // Column i is the edge v_{i+1} - v0.
                e[j][i] = (self.points[verts[i + 1]][j] - v0[j]) as i128;
            }
        }
        let dt = det(&e, d);
        let mut adj = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                // adj[i][j] = (-1)^{i+j} * minor(j, i)
                let mut minor = [[0i128; 4]; 4];
                let (mut r2, mut any) = (0, false);
                for r in 0..d {
                    if r == j {
                        continue;
                    }
                    let mut c2 = 0;
                    for c in 0..d {
                        if c == i {
                            continue;
                        }
                        minor[r2][c2] = e[r][c];
                        c2 += 1;
                        any = true;
                    }
                    r2 += 1;
                }
                let m = if any { det(&minor, d - 1) } else { 1 };
                adj[i][j] = if (i + j) % 2 == 0 { m as f64 } else { -(m as f64) };
            }
        }
        let id = self.simplices.len() as u32;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for j in 0..d {
            lo[j] = verts.iter().map(|&v| self.points[v][j]).min().unwrap();
            hi[j] = verts.iter().map(|&v| self.points[v][j]).max().unwrap();
        }
        let mut key = lo;
        loop {
            self.buckets.entry(key).or_default().push(id);
            let mut j = 0;
            while j < d {
                key[j] += 1;
                if key[j] <= hi[j] {
                    break;
                }
                key[j] = lo[j];
                j += 1;
            }
            if j == d {
                break;
            }
        }
        self.simplices.push(Simplex { verts, adj, det: dt as f64 });
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn is_degenerate(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Barycentric coordinates of `x` in simplex `s`.
    pub fn barycentric(&self, s: &Simplex, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let v0 = self.points[s.verts[0]];
        let mut lam = vec![0.0; d + 1];
        let mut rest = 1.0;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += s.adj[i][j] * (x[j] - v0[j] as f64);
            }
            lam[i + 1] = acc / s.det;
            rest -= lam[i + 1];
        }
        lam[0] = rest;
        lam
    }

    /// A simplex containing `x` with its barycentric coordinates.
    pub fn locate(&self, x: &[f64]) -> Option<(&Simplex, Vec<f64>)> {
        let mut key = [0i64; 3];
        for j in 0..self.dim {
            if !(x[j] >= -1e-9 && x[j] <= self.extent[j] as f64 + 1e-9) {
                return None;
            }
            key[j] = (x[j].floor() as i64).clamp(0, self.extent[j]);
        }
        let mut best: Option<(&Simplex, Vec<f64>)> = None;
        for &id in self.buckets.get(&key)? {
            let s = &self.simplices[id as usize];
            let lam = self.barycentric(s, x);
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some((s, lam));
            }
            if worst >= -1e-12 && best.as_ref().is_none_or(|(_, b)| b.iter().cloned().fold(f64::INFINITY, f64::min) < worst) {
                best = Some((s, lam));
            }
        }
        best
    }
}

struct Builder<'a> {
    dim: usize,
    pts: &'a [P],
    cells: Vec<Cell>,
    /// Sum of the initial simplex vertices: `(dim + 1)` times an interior point.
    reference: P,
}

impl Builder<'_> {
    fn scaled_orient(&self, facet: &[usize], x: &P) -> i128 {
        let d = self.dim;
        let k = (d + 1) as i64;
        let mut pts = [[0i64; 3]; 4];
        for (i, &v) in facet.iter().enumerate() {
            for j in 0..d {
                pts[i][j] = k * self.pts[v][j];
            }
        }
        pts[d] = *x;
        orient(d, &pts[..=d])
    }

    fn finite_cell(&self, verts: [usize; 4]) -> Cell {
        let d = self.dim;
        let v: Vec<P> = verts[..=d].iter().map(|&i| self.pts[i]).collect();
        // Circumcenter c solves 2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2.
        let mut a = [[0i128; 4]; 4];
        let mut rhs = [0i128; 4];
        for i in 0..d {
            let mut s = 0i128;
            for j in 0..d {
                a[i][j] = 2 * (v[i + 1][j] - v[0][j]) as i128;
                s += (v[i + 1][j] as i128).pow(2) - (v[0][j] as i128).pow(2);
            }
            rhs[i] = s;
        }
        let da = det(&a, d);
        debug_assert!(da != 0, "degenerate cell");
        let mut center = [0.0; 3];
        for (k, c) in center.iter_mut().enumerate().take(d) {
            let mut ak = a;
            for i in 0..d {
                ak[i][k] = rhs[i];
            }
            *c = det(&ak, d) as f64 / da as f64;
        }
        let r2 = (0..d).map(|j| (v[0][j] as f64 - center[j]).powi(2)).sum();
        Cell { verts, ball: Some((center, r2)), inner_sign: 0 }
    }

    fn infinite_cell(&self, facet: &[usize]) -> Cell {
        let mut verts = [INF; 4];
        verts[..self.dim].copy_from_slice(facet);
        let s = signum(self.scaled_orient(facet, &self.reference));
        debug_assert!(s != 0, "reference point on a hull facet");
        Cell { verts, ball: None, inner_sign: s }
    }

    fn in_conflict(&self, cell: &Cell, p: &P) -> bool {
        let d = self.dim;
        match cell.ball {
            Some((c, r2)) => {
                let d2: f64 = (0..d).map(|j| (p[j] as f64 - c[j]).powi(2)).sum();
                let margin = 1e-9 * (r2 + d2) + 1e-9;
                if d2 > r2 + margin {
                    return false;
                }
                if d2 < r2 - margin {
                    return true;
                }
                let v: Vec<P> = cell.verts[..=d].iter().map(|&i| self.pts[i]).collect();
                let o = signum(orient(d, &v));
                let l = signum(insphere(d, &v, p));
                l != 0 && l == o
            }
            None => {
                let facet = &cell.verts[..d];
                let k = (d + 1) as i64;
                let scaled = [k * p[0], k * p[1], k * p[2]];
                let o = signum(self.scaled_orient(facet, &scaled));
                if o != 0 {
                    return o == -cell.inner_sign;
                }
                // On the facet hyperplane: strictly inside the facet circumball.
                let mut v: Vec<P> = facet.iter().map(|&i| self.pts[i]).collect();
                let a = v[0];
                let n = if d == 2 {
                    [-(v[1][1] - a[1]), v[1][0] - a[0], 0]
                } else {
                    let (u, w) = (sub(&v[1], &a), sub(&v[2], &a));
                    [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]]
                };
                v.push([a[0] + n[0], a[1] + n[1], a[2] + n[2]]);
                let o = signum(orient(d, &v));
                let l = signum(insphere(d, &v, p));
                l != 0 && l == o
            }
        }
    }

    fn initial_simplex(&self) -> Option<Vec<usize>> {
        let pts = self.pts;
        let a = 0;
        let b = (1..pts.len()).next()?;
        let ab = sub(&pts[b], &pts[a]);
        let c = (2..pts.len()).find(|&c| {
            let ac = sub(&pts[c], &pts[a]);
            if self.dim == 2 {
                ab[0] * ac[1] - ab[1] * ac[0] != 0
            } else {
                cross(&ab, &ac) != [0, 0, 0]
            }
        })?;
        if self.dim == 2 {
            return Some(vec![a, b, c]);
        }
        let d = (2..pts.len()).find(|&d| orient(3, &[pts[a], pts[b], pts[c], pts[d]]) != 0)?;
        Some(vec![a, b, c, d])
    }

    fn run(&mut self) -> Vec<Cell> {
        let d = self.dim;
        let Some(first) = self.initial_simplex() else {
            return Vec::new();
        };
        let mut reference = [0i64; 3];
        for &v in &first {
            for j in 0..d {
                reference[j] += self.pts[v][j];
            }
        }
        self.reference = reference;
        let mut verts = [INF; 4];
        verts[..=d].copy_from_slice(&first);
        self.cells.push(self.finite_cell(verts));
        for skip in 0..=d {
            let facet: Vec<usize> = (0..=d).filter(|&i| i != skip).map(|i| first[i]).collect();
            let cell = self.infinite_cell(&facet);
            self.cells.push(cell);
        }
        for i in 0..self.pts.len() {
            if !first.contains(&i) {
                self.insert(i);
            }
        }
        std::mem::take(&mut self.cells)
    }

    fn insert(&mut self, pi: usize) {
        let d = self.dim;
        let p = self.pts[pi];
        let conflict: Vec<bool> = self.cells.iter().map(|c| self.in_conflict(c, &p)).collect();
        let mut faces: HashMap<[usize; 3], usize> = HashMap::new();
        for (cell, _) in self.cells.iter().zip(&conflict).filter(|(_, c)| **c) {
            for skip in 0..=d {
                let mut key = [INF; 3];
                let mut k = 0;
                for (i, &v) in cell.verts[..=d].iter().enumerate() {
                    if i != skip {
                        key[k] = v;
                        k += 1;
                    }
                }
                key[..d].sort_unstable();
                *faces.entry(key).or_insert(0) += 1;
            }
        }
        debug_assert!(!faces.is_empty(), "point {pi} conflicts with no cell");
        let mut keep = conflict.iter().map(|c| !c);
        self.cells.retain(|_| keep.next().unwrap());
        let mut boundary: Vec<[usize; 3]> = faces.into_iter().filter(|(_, n)| *n == 1).map(|(f, _)| f).collect();
        boundary.sort_unstable();
        for f in boundary {
            let face = &f[..d];
            if face.contains(&INF) {
                let mut facet: Vec<usize> = face.iter().copied().filter(|&v| v != INF).collect();
                facet.push(pi);
                let cell = self.infinite_cell(&facet);
                self.cells.push(cell);
            } else {
                let mut verts = [INF; 4];
                verts[..d].copy_from_slice(face);
                verts[d] = pi;
                let cell = self.finite_cell(verts);
                self.cells.push(cell);
            }
        }
    }
}

fn sub(a: &P, b: &P) -> P {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &P, b: &P) -> P {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
