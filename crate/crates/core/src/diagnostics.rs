//! Gauss map and curvature, gradient-winding critical points, discrete
//! Morse counting on gridded patches, and asymptote fits.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{tilt_slope, AnalyticError, TiltedReaperParams};
use crate::geometry::{GeometryError, Grid, PlanarDomain, ScalarField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("gradient nearly vanishes on the winding loop around cell ({i}, {j}); refine the grid")]
    UnresolvedCritical { i: usize, j: usize },
    #[error("level {level} is not regular: node value {value} is within 1e-8")]
    NonRegularLevel { level: f64, value: f64 },
    #[error("patch is not a manifold with boundary near node ({i}, {j})")]
    NonManifoldPatch { i: usize, j: usize },
    #[error("patch has no cells")]
    EmptyPatch,
    #[error("fit window needs the domain to span at least {need} in x, got {have}")]
    WindowTooSmall { need: f64, have: f64 },
    #[error("fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// Upward unit normal `(-u_x, -u_y, 1)/W` at every node.
pub fn gauss_map(u: &ScalarField) -> Vec<[f64; 3]> {
    let g = u.grid;
    let mut out = Vec::with_capacity(g.len());
    for j in 0..g.n_t {
        for i in 0..g.n_s {
            let [p, q] = u.gradient(i, j);
            out.push(normal(p, q));
        }
    }
    out
}

fn normal(p: f64, q: f64) -> [f64; 3] {
    let w = (1.0 + p * p + q * q).sqrt();
    [-p / w, -q / w, 1.0 / w]
}

/// Gauss curvature `(u_xx u_yy - u_xy²) / W⁴` at interior nodes; boundary
/// entries are zero.
pub fn gauss_curvature(u: &ScalarField) -> ScalarField {
    let g = u.grid;
    let mut k = vec![0.0; g.len()];
    for j in 1..g.n_t - 1 {
        for i in 1..g.n_s - 1 {
            k[g.index(i, j)] = node_curvature(u, i, j);
        }
    }
    ScalarField::new(g, k).expect("curvature of a finite field is finite")
}

fn node_curvature(u: &ScalarField, i: usize, j: usize) -> f64 {
    let [p, q] = u.gradient(i, j);
    let [a, b, c] = u.hessian(i, j);
    let w2 = 1.0 + p * p + q * q;
    (a * c - b * b) / (w2 * w2)
}

/// Counts of curvature signs over interior nodes outside the one-cell
/// corner ring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSigns {
    pub negative: usize,
    pub zero_or_positive: usize,
    /// Largest curvature seen (the least negative when all are negative).
    pub max_curvature: f64,
}

impl CurvatureSigns {
    pub fn negative_fraction(&self) -> f64 {
        let n = self.negative + self.zero_or_positive;
        if n == 0 {
            0.0
        } else {
            self.negative as f64 / n as f64
        }
    }
}

pub fn curvature_signs(u: &ScalarField) -> CurvatureSigns {
    let g = u.grid;
    let k = gauss_curvature(u);
    let mut s = CurvatureSigns {
        negative: 0,
        zero_or_positive: 0,
        max_curvature: f64::NEG_INFINITY,
    };
    for j in 1..g.n_t - 1 {
        for i in 1..g.n_s - 1 {
            if !g.outside_corner_ring(i, j, 1) {
                continue;
            }
            let v = k.get(i, j);
            s.max_curvature = s.max_curvature.max(v);
            if v < 0.0 {
                s.negative += 1;
            } else {
                s.zero_or_positive += 1;
            }
        }
    }
    s
}

/// `∬ |K| sqrt(1 + |∇u|²) dx dy` over the cells of `region` whose four
/// corners are interior nodes, midpoint rule with cell-averaged Hessians.
/// Less accurate than [`total_curvature`] where the graph is steep.
pub fn total_curvature_midpoint(u: &ScalarField, region: &PlanarDomain) -> Result<f64, DiagnosticsError> {
    let g = u.grid;
    let mut hess = vec![[0.0; 3]; g.len()];
    for j in 1..g.n_t - 1 {
        for i in 1..g.n_s - 1 {
            hess[g.index(i, j)] = u.hessian(i, j);
        }
    }
    check_region(&g, region)?;
    let mut sum = 0.0;
    let slack = 1e-12 * (1.0 + region.length.max(region.w));
    for j in 1..g.n_t - 2 {
        for i in 1..g.n_s - 2 {
            let [s, t] = [(i as f64 + 0.5) * g.ds(), (j as f64 + 0.5) * g.dt()];
            let [x, y] = g.domain.to_xy(s, t);
            if !region.contains(x, y, slack) {
                continue;
            }
            let ids = [g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1)];
            let mut h = [0.0; 3];
            for k in ids {
                for (a, b) in h.iter_mut().zip(hess[k]) {
                    *a += 0.25 * b;
                }
            }
            let (v00, v10, v01, v11) = (u.get(i, j), u.get(i + 1, j), u.get(i, j + 1), u.get(i + 1, j + 1));
            let u_s = 0.5 * ((v10 - v00) + (v11 - v01)) / g.ds();
            let u_t = 0.5 * ((v01 - v00) + (v11 - v10)) / g.dt();
            let (p, q) = (u_s, u_t - g.domain.shear() * u_s);
            let w2 = 1.0 + p * p + q * q;
            let kk = (h[0] * h[2] - h[1] * h[1]) / (w2 * w2);
            sum += kk.abs() * w2.sqrt() * g.cell_area();
        }
    }
    Ok(sum)
}

fn check_region(g: &Grid, region: &PlanarDomain) -> Result<(), DiagnosticsError> {
    let dom = g.domain;
    let slack = 1e-9 * (1.0 + dom.length.max(dom.w));
    if region.corners().iter().all(|c| dom.contains(c[0], c[1], slack)) {
        Ok(())
    } else {
        Err(GeometryError::OutsideGrid.into())
    }
}

/// Total absolute curvature `∬ |K| dA` of the cells of `region`, computed
/// as the area of their Gauss image: each cell's four node normals span two
/// spherical triangles. Stays accurate in steep boundary layers, where
/// [`total_curvature_midpoint`] does not.
pub fn total_curvature(u: &ScalarField, region: &PlanarDomain) -> Result<f64, DiagnosticsError> {
    let g = u.grid;
    let dom = g.domain;
    check_region(&g, region)?;
    let nu = gauss_map(u);
    let rslack = 1e-12 * (1.0 + region.length.max(region.w));
    let mut sum = 0.0;
    for j in 0..g.n_t - 1 {
        for i in 0..g.n_s - 1 {
            let [s, t] = [(i as f64 + 0.5) * g.ds(), (j as f64 + 0.5) * g.dt()];
            let [x, y] = dom.to_xy(s, t);
            if !region.contains(x, y, rslack) {
                continue;
            }
            let a = nu[g.index(i, j)];
            let b = nu[g.index(i + 1, j)];
            let c = nu[g.index(i + 1, j + 1)];
            let d = nu[g.index(i, j + 1)];
            sum += (spherical_triangle(a, b, c) + spherical_triangle(a, c, d)).abs();
        }
    }
    Ok(sum)
}

/// Signed solid angle of the spherical triangle `abc` (unit vectors).
fn spherical_triangle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [
        b[1] * c[2] - b[2] * c[1],
        b[2] * c[0] - b[0] * c[2],
        b[0] * c[1] - b[1] * c[0],
    ];
    let num = dot(a, cross);
    let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * num.atan2(den)
}

/// How far the Gauss image leaves the region of the upper hemisphere
/// bounded by the half-equator `{ν_z = 0, ν_x ≥ 0}` and the half great
/// circle `ν_x = s·ν_z`, `s = sqrt((w/π)² - 1)`: the largest value of
/// `max(s·ν_z - ν_x, -ν_z)` over all nodes. A scherkenoid of width `w` keeps
/// this `≤ 0`.
pub fn gauss_image_violation(u: &ScalarField, w: f64) -> f64 {
    let s = tilt_slope(w);
    gauss_map(u)
        .iter()
        .map(|n| (s * n[2] - n[0]).max(-n[2]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A saddle of the gradient field with multiplicity `-degree ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Chart coordinates `(s, t)`.
    pub location: [f64; 2],
    pub xy: [f64; 2],
    pub multiplicity: u32,
    /// Lower-left node of the flagged cell nearest the location.
    pub cell: (usize, usize),
}

/// An isolated critical point of positive degree (a local extremum).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub location: [f64; 2],
    pub xy: [f64; 2],
    pub degree: i32,
    pub cell: (usize, usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub saddles: Vec<CriticalPoint>,
    pub extrema: Vec<Extremum>,
    /// Flagged clusters whose winding degree is zero.
    pub degree_zero_clusters: usize,
}

impl CriticalSet {
    /// Saddles counted with multiplicity.
    pub fn saddle_count(&self) -> u32 {
        self.saddles.iter().map(|c| c.multiplicity).sum()
    }
}

/// Samples per grid segment of a winding loop.
const LOOP_SAMPLES: usize = 8;
/// Cells added around a flagged cluster before winding.
const LOOP_MARGIN: usize = 2;

/// Locates critical points of `f` by gradient sign changes and classifies
/// them by the winding degree of `∇f/|∇f|` around an enclosing loop.
pub fn critical_points(f: &ScalarField) -> Result<CriticalSet, DiagnosticsError> {
    let g = f.grid;
    let grad: Vec<[f64; 2]> = (0..g.len())
        .map(|k| {
            let (i, j) = g.ij(k);
            f.gradient(i, j)
        })
        .collect();
    let (cs, ct) = (g.n_s - 1, g.n_t - 1);
    let flagged: Vec<bool> = (0..cs * ct)
        .map(|c| {
            let (i, j) = (c % cs, c / cs);
            let ids = [g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1)];
            (0..2).all(|comp| {
                let lo = ids.iter().map(|&k| grad[k][comp]).fold(f64::INFINITY, f64::min);
                let hi = ids.iter().map(|&k| grad[k][comp]).fold(f64::NEG_INFINITY, f64::max);
                lo <= 0.0 && hi >= 0.0
            })
        })
        .collect();

    // 8-connected clusters of flagged cells
    let mut label = vec![usize::MAX; cs * ct];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for start in 0..cs * ct {
        if !flagged[start] || label[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![start];
        label[start] = id;
        let mut k = 0;
        while k < members.len() {
            let (i, j) = ((members[k] % cs) as isize, (members[k] / cs) as isize);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ni, nj) = (i + di, j + dj);
                    if ni < 0 || nj < 0 || ni >= cs as isize || nj >= ct as isize {
                        continue;
                    }
                    let c = nj as usize * cs + ni as usize;
                    if flagged[c] && label[c] == usize::MAX {
                        label[c] = id;
                        members.push(c);
                    }
                }
            }
            k += 1;
        }
        clusters.push(members);
    }

    // expanded boxes [i0, i1) x [j0, j1) in cells, merged while overlapping
    let mut boxes: Vec<([usize; 4], Vec<usize>)> = clusters
        .into_iter()
        .map(|m| {
            let i0 = m.iter().map(|c| c % cs).min().unwrap();
            let i1 = m.iter().map(|c| c % cs).max().unwrap() + 1;
            let j0 = m.iter().map(|c| c / cs).min().unwrap();
            let j1 = m.iter().map(|c| c / cs).max().unwrap() + 1;
            let b = [
                i0.saturating_sub(LOOP_MARGIN),
                (i1 + LOOP_MARGIN).min(cs),
                j0.saturating_sub(LOOP_MARGIN),
                (j1 + LOOP_MARGIN).min(ct),
            ];
            (b, m)
        })
        .collect();
    let overlap = |a: &[usize; 4], b: &[usize; 4]| a[0] < b[1] && b[0] < a[1] && a[2] < b[3] && b[2] < a[3];
    loop {
        let mut merged = false;
        'outer: for x in 0..boxes.len() {
            for y in x + 1..boxes.len() {
                if overlap(&boxes[x].0, &boxes[y].0) {
                    let (by, my) = boxes.remove(y);
                    let bx = &mut boxes[x];
                    bx.0 = [bx.0[0].min(by[0]), bx.0[1].max(by[1]), bx.0[2].min(by[2]), bx.0[3].max(by[3])];
                    bx.1.extend(my);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut out = CriticalSet::default();
    for (b, members) in boxes {
        let degree = winding_degree(&g, &grad, b)?;
        // location: flagged cell with the smallest mean gradient magnitude
        let mag = |c: usize| {
            let (i, j) = (c % cs, c / cs);
            [g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1)]
                .iter()
                .map(|&k| grad[k][0].hypot(grad[k][1]))
                .sum::<f64>()
        };
        let best = *members
            .iter()
            .min_by(|a, b| mag(**a).total_cmp(&mag(**b)).then(a.cmp(b)))
            .unwrap();
        let cell = (best % cs, best / cs);
        let location = zero_in_cell(&g, &grad, cell);
        let xy = g.domain.to_xy(location[0], location[1]);
        match degree {
            d if d < 0 => out.saddles.push(CriticalPoint {
                location,
                xy,
                multiplicity: (-d) as u32,
                cell,
            }),
            d if d > 0 => out.extrema.push(Extremum {
                location,
                xy,
                degree: d,
                cell,
            }),
            _ => out.degree_zero_clusters += 1,
        }
    }
    Ok(out)
}

/// Chart point in `cell` where the bilinear gradient is smallest, found on
/// a fixed sub-sampling (deterministic, no iteration).
fn zero_in_cell(g: &Grid, grad: &[[f64; 2]], (i, j): (usize, usize)) -> [f64; 2] {
    let c = [g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1)];
    let n = 16;
    let mut best = (f64::INFINITY, [0.5, 0.5]);
    for b in 0..=n {
        for a in 0..=n {
            let (fa, fb) = (a as f64 / n as f64, b as f64 / n as f64);
            let v = |comp: usize| {
                (1.0 - fb) * ((1.0 - fa) * grad[c[0]][comp] + fa * grad[c[1]][comp])
                    + fb * ((1.0 - fa) * grad[c[2]][comp] + fa * grad[c[3]][comp])
            };
            let m = v(0).hypot(v(1));
            if m < best.0 {
                best = (m, [fa, fb]);
            }
        }
    }
    [(i as f64 + best.1[0]) * g.ds(), (j as f64 + best.1[1]) * g.dt()]
}

/// Degree of the gradient direction along the counter-clockwise boundary
/// of the node box `[i0, i1] x [j0, j1]`.
fn winding_degree(g: &Grid, grad: &[[f64; 2]], [i0, i1, j0, j1]: [usize; 4]) -> Result<i32, DiagnosticsError> {
    let mut nodes = Vec::new();
    for i in i0..i1 {
        nodes.push((i, j0));
    }
    for j in j0..j1 {
        nodes.push((i1, j));
    }
    for i in (i0 + 1..=i1).rev() {
        nodes.push((i, j1));
    }
    for j in (j0 + 1..=j1).rev() {
        nodes.push((i0, j));
    }
    let per_segment = LOOP_SAMPLES.max(16usize.div_ceil(nodes.len()));
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut first: Option<f64> = None;
    for k in 0..nodes.len() {
        let a = grad[g.index(nodes[k].0, nodes[k].1)];
        let b = grad[g.index(nodes[(k + 1) % nodes.len()].0, nodes[(k + 1) % nodes.len()].1)];
        for m in 0..per_segment {
            let f = m as f64 / per_segment as f64;
            let v = [(1.0 - f) * a[0] + f * b[0], (1.0 - f) * a[1] + f * b[1]];
            if v[0].hypot(v[1]) < 1e-10 {
                return Err(DiagnosticsError::UnresolvedCritical { i: nodes[k].0, j: nodes[k].1 });
            }
            let ang = v[1].atan2(v[0]);
            if let Some(p) = prev {
                total += wrap(ang - p);
            } else {
                first = Some(ang);
            }
            prev = Some(ang);
        }
    }
    total += wrap(first.unwrap() - prev.unwrap());
    Ok((total / (2.0 * PI)).round() as i32)
}

fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// A compact surface patch: the union of selected cells of a grid,
/// triangulated by splitting each cell along its `(i,j)-(i+1,j+1)` diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePatch {
    pub field: ScalarField,
    cells: Vec<bool>,
}

impl SurfacePatch {
    pub fn full(field: ScalarField) -> Self {
        let g = field.grid;
        Self {
            cells: vec![true; (g.n_s - 1) * (g.n_t - 1)],
            field,
        }
    }

    /// Cells whose four corners lie in the closed disk.
    pub fn disk(field: ScalarField, center: [f64; 2], radius: f64) -> Result<Self, DiagnosticsError> {
        let g = field.grid;
        let inside = |i: usize, j: usize| {
            let [x, y] = g.node_xy(i, j);
            (x - center[0]).hypot(y - center[1]) <= radius
        };
        let cells = (0..(g.n_s - 1) * (g.n_t - 1))
            .map(|c| {
                let (i, j) = (c % (g.n_s - 1), c / (g.n_s - 1));
                inside(i, j) && inside(i + 1, j) && inside(i, j + 1) && inside(i + 1, j + 1)
            })
            .collect();
        Self::from_mask(field, cells)
    }

    /// `mask` has one entry per cell, `i` fastest.
    pub fn from_mask(field: ScalarField, mask: Vec<bool>) -> Result<Self, DiagnosticsError> {
        let g = field.grid;
        if mask.len() != (g.n_s - 1) * (g.n_t - 1) {
            return Err(GeometryError::ValueCount {
                expected: (g.n_s - 1) * (g.n_t - 1),
                got: mask.len(),
            }
            .into());
        }
        if !mask.iter().any(|&m| m) {
            return Err(DiagnosticsError::EmptyPatch);
        }
        Ok(Self { field, cells: mask })
    }

    pub fn contains_cell(&self, i: usize, j: usize) -> bool {
        let g = self.field.grid;
        i + 1 < g.n_s && j + 1 < g.n_t && self.cells[j * (g.n_s - 1) + i]
    }

    /// Triangles as node-index triples, counter-clockwise in the chart.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let g = self.field.grid;
        let mut out = Vec::new();
        for j in 0..g.n_t - 1 {
            for i in 0..g.n_s - 1 {
                if self.contains_cell(i, j) {
                    let (a, b, c, d) = (g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1));
                    out.push([a, b, c]);
                    out.push([a, c, d]);
                }
            }
        }
        out
    }
}

/// Simplicial complex data of a triangulated patch.
struct Complex {
    /// Sorted neighbour lists.
    link: BTreeMap<usize, Vec<usize>>,
    /// Edge -> number of incident triangles.
    edges: BTreeMap<(usize, usize), usize>,
    triangles: Vec<[usize; 3]>,
}

impl Complex {
    fn new(tris: Vec<[usize; 3]>) -> Self {
        let mut edges = BTreeMap::new();
        let mut link: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for &(a, b) in edges.keys() {
            link.entry(a).or_default().push(b);
            link.entry(b).or_default().push(a);
        }
        for v in link.values_mut() {
            v.sort_unstable();
        }
        Self {
            link,
            edges,
            triangles: tris,
        }
    }

    fn boundary_neighbours(&self, v: usize) -> Vec<usize> {
        self.link[&v]
            .iter()
            .copied()
            .filter(|&n| self.edges[&(v.min(n), v.max(n))] == 1)
            .collect()
    }
}

/// Order used for all comparisons: value, then node index (simulation of
/// simplicity for exact ties).
fn below(f: &[f64], a: usize, b: usize) -> bool {
    (f[a], a) < (f[b], b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseCount {
    /// Saddles inside `{F ≤ a}`, counted with multiplicity.
    pub n: i64,
    /// Interior extrema inside `{F ≤ a}`.
    pub extrema: i64,
    pub c0: i64,
    pub c1: i64,
    pub chi: i64,
    /// `N = c0 - c1 - χ + extrema`; with no interior extrema this is the
    /// classical `N = c0 - c1 - χ`.
    pub identity_holds: bool,
}

/// Checks the critical-point counting identity on the sublevel set
/// `{F ≤ a}` of a patch (`a = +∞` allowed).
pub fn morse_count_check(patch: &SurfacePatch, level: f64) -> Result<MorseCount, DiagnosticsError> {
    let f = patch.field.values();
    let g = patch.field.grid;
    if level.is_finite() {
        if let Some(&v) = f.iter().find(|v| (**v - level).abs() < 1e-8) {
            return Err(DiagnosticsError::NonRegularLevel { level, value: v });
        }
    }
    let complex = Complex::new(patch.triangles());
    for (&v, _) in complex.link.iter() {
        if complex.boundary_neighbours(v).len() % 2 == 1 || complex.boundary_neighbours(v).len() > 2 {
            let (i, j) = g.ij(v);
            return Err(DiagnosticsError::NonManifoldPatch { i, j });
        }
    }
    let inside = |v: usize| f[v] <= level;

    // Euler characteristic of the sublevel subcomplex
    let nv = complex.link.keys().filter(|&&v| inside(v)).count() as i64;
    let ne = complex.edges.keys().filter(|&&(a, b)| inside(a) && inside(b)).count() as i64;
    let nt = complex.triangles.iter().filter(|t| t.iter().all(|&v| inside(v))).count() as i64;
    let chi = nv - ne + nt;

    let (mut c0, mut c1) = (0, 0);
    for (&v, nbrs) in complex.link.iter() {
        if !inside(v) {
            continue;
        }
        let bn = complex.boundary_neighbours(v);
        if bn.len() != 2 {
            continue;
        }
        let boundary_min = bn.iter().all(|&n| below(f, v, n));
        let boundary_max = bn.iter().all(|&n| below(f, n, v));
        if boundary_min && nbrs.iter().all(|&n| below(f, v, n)) {
            c0 += 1;
        }
        if boundary_max && nbrs.iter().any(|&n| below(f, v, n)) {
            c1 += 1;
        }
    }

    let crit = critical_points(&patch.field)?;
    let in_patch = |loc: [f64; 2]| {
        let (i, j) = ((loc[0] / g.ds()).floor() as usize, (loc[1] / g.dt()).floor() as usize);
        patch.contains_cell(i.min(g.n_s - 2), j.min(g.n_t - 2))
            && patch.field.sample_chart(loc[0] / g.ds(), loc[1] / g.dt()) <= level
    };
    let n: i64 = crit
        .saddles
        .iter()
        .filter(|c| in_patch(c.location))
        .map(|c| c.multiplicity as i64)
        .sum();
    let extrema = crit.extrema.iter().filter(|e| in_patch(e.location)).count() as i64;
    Ok(MorseCount {
        n,
        extrema,
        c0,
        c1,
        chi,
        identity_holds: n == c0 - c1 - chi + extrema,
    })
}

/// Number of critical points of `g - u` over the part of the cell inside
/// the reaper's strip.
pub fn reaper_difference_count(u: &ScalarField, reaper: &TiltedReaperParams) -> Result<usize, DiagnosticsError> {
    reaper.validate()?;
    let g = u.grid;
    let (y_lo, y_hi) = reaper.strip();
    let rows: Vec<usize> = (0..g.n_t)
        .filter(|&j| {
            let y = g.node_xy(0, j)[1];
            y > y_lo && y < y_hi
        })
        .collect();
    if rows.len() < 3 {
        return Ok(0);
    }
    let (j0, j1) = (rows[0], *rows.last().unwrap());
    let d = g.domain;
    let [ox, oy] = g.domain.to_xy(0.0, j0 as f64 * g.dt());
    let sub_domain = PlanarDomain {
        w: (j1 - j0) as f64 * g.dt(),
        origin: [ox, oy],
        ..d
    };
    let sub = Grid::new(sub_domain, g.n_s, j1 - j0 + 1)?;
    let mut values = Vec::with_capacity(sub.len());
    for j in j0..=j1 {
        for i in 0..g.n_s {
            let [x, y] = g.node_xy(i, j);
            values.push(reaper.eval(x, y)?.0 - u.get(i, j));
        }
    }
    let diff = ScalarField::new(sub, values)?;
    let crit = critical_points(&diff)?;
    Ok(crit.saddles.len() + crit.extrema.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoteModel {
    /// `z = a x + b y + c`.
    Plane,
    /// `z = (w/π)² log sin(π(y - y0)/w) + m x + c`, with `y0` the domain's
    /// lower edge.
    TiltedReaper { w: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteFit {
    pub slope_x: f64,
    /// Plane model only (zero for the reaper model).
    pub slope_y: f64,
    pub offset: f64,
    pub sup_deviation: f64,
    /// Window `[x0, x1]` of fitted nodes.
    pub window: [f64; 2],
    pub nodes: usize,
}

impl AsymptoteFit {
    /// Upward unit normal of the fitted plane.
    pub fn normal(&self) -> [f64; 3] {
        normal(self.slope_x, self.slope_y)
    }
}

/// Least-squares fit of an asymptotic model over the window of width `w`
/// (the domain height) that starts one width inside the `side` end; the
/// outermost width is left out because it carries the truncation data.
pub fn asymptote_fit(u: &ScalarField, side: Side, model: AsymptoteModel) -> Result<AsymptoteFit, DiagnosticsError> {
    let g = u.grid;
    let d = g.domain;
    let c = d.corners();
    let x_start = c[0][0].max(c[3][0]);
    let x_end = c[1][0].min(c[2][0]);
    let w = d.w;
    if x_end - x_start < 3.0 * w {
        return Err(DiagnosticsError::WindowTooSmall {
            need: 3.0 * w,
            have: x_end - x_start,
        });
    }
    let window = match side {
        Side::Right => [x_end - 2.0 * w, x_end - w],
        Side::Left => [x_start + w, x_start + 2.0 * w],
    };
    let y0 = d.origin[1];
    let mut pts = Vec::new();
    for j in 1..g.n_t - 1 {
        for i in 0..g.n_s {
            let [x, y] = g.node_xy(i, j);
            if x < window[0] || x > window[1] {
                continue;
            }
            match model {
                AsymptoteModel::Plane => pts.push((x, y, u.get(i, j), 0.0)),
                AsymptoteModel::TiltedReaper { w: wr } => {
                    let yy = y - y0;
                    if yy < wr / 8.0 || yy > 7.0 * wr / 8.0 {
                        continue;
                    }
                    let k = PI / wr;
                    let base = (yy * k).sin().ln() / (k * k);
                    pts.push((x, y, u.get(i, j), base));
                }
            }
        }
    }
    let fit = match model {
        AsymptoteModel::Plane => {
            let rows: Vec<([f64; 3], f64)> = pts.iter().map(|&(x, y, z, _)| ([x, y, 1.0], z)).collect();
            let s = least_squares3(&rows)?;
            (s[0], s[1], s[2])
        }
        AsymptoteModel::TiltedReaper { .. } => {
            let rows: Vec<([f64; 3], f64)> = pts.iter().map(|&(x, _, z, b)| ([x, 1.0, 0.0], z - b)).collect();
            let s = least_squares2(&rows)?;
            (s[0], 0.0, s[1])
        }
    };
    let sup_deviation = pts
        .iter()
        .map(|&(x, y, z, b)| (z - (b + fit.0 * x + fit.1 * y + fit.2)).abs())
        .fold(0.0, f64::max);
    Ok(AsymptoteFit {
        slope_x: fit.0,
        slope_y: fit.1,
        offset: fit.2,
        sup_deviation,
        window,
        nodes: pts.len(),
    })
}

fn least_squares3(rows: &[([f64; 3], f64)]) -> Result<[f64; 3], DiagnosticsError> {
    let mut m = [[0.0; 4]; 3];
    for (a, z) in rows {
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += a[r] * a[c];
            }
            m[r][3] += a[r] * z;
        }
    }
    // Gaussian elimination with partial pivoting on the normal equations
    for k in 0..3 {
        let p = (k..3).max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs())).unwrap();
        m.swap(k, p);
        if m[k][k].abs() < 1e-300 {
            return Err(DiagnosticsError::DegenerateFit(format!("{} points", rows.len())));
        }
        for r in k + 1..3 {
            let f = m[r][k] / m[k][k];
            for c in k..4 {
                m[r][c] -= f * m[k][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let s: f64 = (k + 1..3).map(|c| m[k][c] * x[c]).sum();
        x[k] = (m[k][3] - s) / m[k][k];
    }
    Ok(x)
}

fn least_squares2(rows: &[([f64; 3], f64)]) -> Result<[f64; 2], DiagnosticsError> {
    let (mut sxx, mut sx, mut n, mut sxz, mut sz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, z) in rows {
        sxx += a[0] * a[0];
        sx += a[0];
        n += 1.0;
        sxz += a[0] * z;
        sz += z;
    }
    let det = sxx * n - sx * sx;
    if !(det.abs() > 1e-12 * (sxx * n).max(1e-300)) {
        return Err(DiagnosticsError::DegenerateFit(format!("{} points", rows.len())));
    }
    Ok([(sxz * n - sx * sz) / det, (sxx * sz - sx * sxz) / det])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{grim_reaper, Tilt};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn square(n: usize, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let d = PlanarDomain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap();
        ScalarField::from_fn(Grid::new(d, n, n).unwrap(), f).unwrap()
    }

    /// `Im (x + iy)^n = r^n sin nθ`.
    fn harmonic(n: i32) -> impl Fn(f64, f64) -> f64 {
        move |x, y| {
            let (r, th) = (x.hypot(y), y.atan2(x));
            r.powi(n) * (n as f64 * th).sin()
        }
    }

    #[test]
    fn gauss_map_of_affine_graph() {
        let u = square(9, |x, _| x);
        let e = [-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2];
        for nu in gauss_map(&u) {
            for k in 0..3 {
                assert!((nu[k] - e[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gauss_map_is_unit_and_upward() {
        let u = square(21, |x, y| (3.0 * x).sin() * y.exp() + 5.0 * x * y);
        for nu in gauss_map(&u) {
            assert!((nu[0].hypot(nu[1]).hypot(nu[2]) - 1.0).abs() < 1e-12);
            assert!(nu[2] > 0.0);
        }
    }

    #[test]
    fn reaper_normal_is_vertical_on_its_crest() {
        let d = PlanarDomain::rectangle(-1.0, 1.0, 0.5, PI - 0.5).unwrap();
        let u = ScalarField::from_fn(Grid::new(d, 5, 9).unwrap(), |x, y| grim_reaper(x, y).unwrap()).unwrap();
        let nu = gauss_map(&u)[u.grid.index(2, 4)];
        assert!(nu[0].abs() < 1e-12 && nu[1].abs() < 1e-12 && (nu[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_curvature_at_origin() {
        let u = square(21, |x, y| x * x - y * y);
        assert!((gauss_curvature(&u).get(10, 10) + 4.0).abs() < 1e-9);
    }

    #[test]
    fn grim_reaper_is_flat() {
        let d = PlanarDomain::rectangle(-2.0, 2.0, 0.3, PI - 0.3).unwrap();
        for n in [33, 65] {
            let u = ScalarField::from_fn(Grid::new(d, n, n).unwrap(), |x, y| grim_reaper(x, y).unwrap()).unwrap();
            let k = gauss_curvature(&u);
            assert!(k.values().iter().all(|v| v.abs() < 1e-12));
            let tc = total_curvature(&u, &d).unwrap();
            assert!(tc < 1e-12);
        }
    }

    /// Area of the Gauss image of the sphere `z = -sqrt(r² - x² - y²)` over
    /// `[-a, a]²`: `∬ (1 - X² - Y²)^{-1/2}` over `[-a/r, a/r]²`, Simpson rule.
    fn sphere_image_area(r: f64, a: f64) -> f64 {
        let m = 400;
        let c = a / r;
        let h = 2.0 * c / m as f64;
        let wgt = |k: usize| if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let mut sum = 0.0;
        for i in 0..=m {
            for j in 0..=m {
                let (x, y) = (-c + i as f64 * h, -c + j as f64 * h);
                sum += wgt(i) * wgt(j) / (1.0 - x * x - y * y).sqrt();
            }
        }
        sum * h * h / 9.0
    }

    #[test]
    fn total_curvature_of_sphere_patch_is_gauss_image_area() {
        let r = 2.0;
        let d = PlanarDomain::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap();
        let sphere = |n: usize| ScalarField::from_fn(Grid::new(d, n, n).unwrap(), |x, y| -(r * r - x * x - y * y).sqrt()).unwrap();
        let exact = sphere_image_area(r, 1.0);
        let errs: Vec<f64> = [17, 33, 65].iter().map(|&n| (total_curvature(&sphere(n), &d).unwrap() - exact).abs()).collect();
        assert!(errs[2] < 2e-3 * exact, "{errs:?}");
        assert!(errs[2] < errs[0] / 4.0, "{errs:?}");

        // the midpoint rule skips the outer cell ring, so compare inside it
        let inner = PlanarDomain::rectangle(-0.5, 0.5, -0.5, 0.5).unwrap();
        let exact = sphere_image_area(r, 0.5);
        for n in [33, 65] {
            let u = sphere(n);
            assert!((total_curvature(&u, &inner).unwrap() - exact).abs() < 2e-3 * exact);
            assert!((total_curvature_midpoint(&u, &inner).unwrap() - exact).abs() < 5e-3 * exact);
        }
    }

    #[test]
    fn saddle_multiplicity_is_n_minus_one() {
        for n in 2..=4 {
            // even node count: the origin is a cell center
            let cs = critical_points(&square(40, harmonic(n))).unwrap();
            assert_eq!(cs.saddles.len(), 1, "n = {n}: {cs:?}");
            assert_eq!(cs.saddles[0].multiplicity, n as u32 - 1);
            assert!(cs.extrema.is_empty());
            let [x, y] = cs.saddles[0].xy;
            assert!(x.hypot(y) < 0.1);
        }
    }

    #[test]
    fn paraboloid_has_one_extremum() {
        let cs = critical_points(&square(40, |x, y| x * x + y * y)).unwrap();
        assert!(cs.saddles.is_empty());
        assert_eq!(cs.extrema.len(), 1);
        assert_eq!(cs.extrema[0].degree, 1);
    }

    #[test]
    fn differences_of_translates_and_half_turns_are_constant() {
        let u = square(30, |x, y| (2.0 * x).sin() * y.cosh() + x * y * y);
        let v = u.shifted(1.5);
        assert!(u.values().iter().zip(v.values()).all(|(a, b)| (a - b + 1.5).abs() < 1e-12));
        let even = square(30, |x, y| x * x * y.sin() * y + (x * y).cos() + x * y);
        let turned = even.half_turn([0.0, 0.0]);
        assert!(even.max_abs_diff(&turned) < 1e-12);
    }

    /// Brute-force PL oracle: index `1 - χ(lower link)` of every vertex in
    /// the sublevel complex, split into patch-boundary and interior vertices.
    struct Oracle {
        chi: i64,
        boundary_plus: i64,
        boundary_minus: i64,
        interior_plus: i64,
        interior_minus: i64,
    }

    fn oracle(patch: &SurfacePatch, level: f64) -> Oracle {
        let f = patch.field.values();
        let tris = patch.triangles();
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut star: BTreeMap<usize, Vec<[usize; 3]>> = BTreeMap::new();
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                star.entry(t[k]).or_default().push(*t);
            }
        }
        let lower = |a: usize, b: usize| (f[a], a) < (f[b], b);
        let mut o = Oracle {
            chi: 0,
            boundary_plus: 0,
            boundary_minus: 0,
            interior_plus: 0,
            interior_minus: 0,
        };
        for (&v, st) in &star {
            if f[v] > level {
                continue;
            }
            let mut verts = std::collections::BTreeSet::new();
            let mut edges = std::collections::BTreeSet::new();
            let mut on_boundary = false;
            for t in st {
                let others: Vec<usize> = t.iter().copied().filter(|&x| x != v).collect();
                for &x in &others {
                    if lower(x, v) {
                        verts.insert(x);
                    }
                    if edge_count[&(v.min(x), v.max(x))] == 1 {
                        on_boundary = true;
                    }
                }
                if lower(others[0], v) && lower(others[1], v) {
                    edges.insert((others[0].min(others[1]), others[0].max(others[1])));
                }
            }
            let index = 1 - (verts.len() as i64 - edges.len() as i64);
            o.chi += index;
            match (on_boundary, index.signum()) {
                (true, 1) => o.boundary_plus += index,
                (true, -1) => o.boundary_minus -= index,
                (false, 1) => o.interior_plus += index,
                (false, -1) => o.interior_minus -= index,
                _ => {}
            }
        }
        o
    }

    fn check_against_oracle(name: &str, patch: SurfacePatch, level: f64) {
        let m = morse_count_check(&patch, level).unwrap();
        let o = oracle(&patch, level);
        assert!(m.identity_holds, "{name}: {m:?}");
        assert_eq!(m.chi, o.chi, "{name}: χ");
        assert_eq!(m.c0, o.boundary_plus, "{name}: c0");
        assert_eq!(m.c1, o.boundary_minus, "{name}: c1");
        assert_eq!(m.n, o.interior_minus, "{name}: N");
        assert_eq!(m.extrema, o.interior_plus, "{name}: extrema");
    }

    fn disk(n: usize, f: impl Fn(f64, f64) -> f64) -> SurfacePatch {
        let d = PlanarDomain::rectangle(-1.05, 1.05, -1.05, 1.05).unwrap();
        let u = ScalarField::from_fn(Grid::new(d, n, n).unwrap(), f).unwrap();
        SurfacePatch::disk(u, [0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn linear_function_on_disk() {
        let p = disk(42, |x, y| x + 0.013 * y);
        let m = morse_count_check(&p, f64::INFINITY).unwrap();
        // the staircase boundary adds boundary minimum/maximum pairs
        assert_eq!((m.n, m.c0 - m.c1, m.chi), (0, 1, 1));
        check_against_oracle("linear", p, f64::INFINITY);
    }

    #[test]
    fn quadratic_saddle_on_disk() {
        let p = disk(42, |x, y| x * x - y * y + 0.01 * x);
        let m = morse_count_check(&p, f64::INFINITY).unwrap();
        assert_eq!((m.n, m.c0 - m.c1, m.chi), (1, 2, 1));
        check_against_oracle("saddle", p, f64::INFINITY);
    }

    #[test]
    fn interior_minimum_enters_through_the_extremum_count() {
        let p = disk(42, |x, y| (x - 0.01).powi(2) + (y + 0.02).powi(2));
        let m = morse_count_check(&p, 0.25).unwrap();
        assert_eq!((m.n, m.c0, m.c1, m.chi, m.extrema), (0, 0, 0, 1, 1));
        check_against_oracle("paraboloid", p, 0.25);
    }

    #[test]
    fn monkey_saddle_on_disk() {
        check_against_oracle("monkey", disk(42, harmonic(3)), f64::INFINITY);
        check_against_oracle("monkey sublevel", disk(42, harmonic(3)), 0.2137);
    }

    #[test]
    fn oscillating_field_on_square() {
        let f = |x: f64, y: f64| (3.0 * x).sin() * (2.0 * y).cos() + 0.05 * y;
        check_against_oracle("oscillating", SurfacePatch::full(square(50, f)), f64::INFINITY);
        check_against_oracle("oscillating sublevel", SurfacePatch::full(square(50, f)), 0.3137);
    }

    #[test]
    fn annulus_sublevel() {
        let d = PlanarDomain::rectangle(-1.05, 1.05, -1.05, 1.05).unwrap();
        let u = ScalarField::from_fn(Grid::new(d, 44, 44).unwrap(), |x, y| x + 0.3 * y * y).unwrap();
        let g = u.grid;
        let mask = (0..(g.n_s - 1) * (g.n_t - 1))
            .map(|c| {
                let (i, j) = (c % (g.n_s - 1), c / (g.n_s - 1));
                let [x, y] = g.node_xy(i, j);
                let r = (x + 0.5 * g.ds()).hypot(y + 0.5 * g.dt());
                r > 0.4 && r < 1.0
            })
            .collect();
        let p = SurfacePatch::from_mask(u, mask).unwrap();
        check_against_oracle("annulus", p.clone(), f64::INFINITY);
        check_against_oracle("annulus sublevel", p, 0.1234);
    }

    #[test]
    fn rejects_non_regular_level() {
        let p = disk(20, |x, _| x);
        let v = p.field.values()[p.field.grid.index(10, 10)];
        assert!(matches!(morse_count_check(&p, v), Err(DiagnosticsError::NonRegularLevel { .. })));
    }

    #[test]
    fn fits_exact_tilted_reaper_and_plane() {
        let w = 1.5 * PI;
        let d = PlanarDomain::truncated_strip(0.0, 6.0 * w, w).unwrap();
        let reaper = TiltedReaperParams::new(w, Tilt::Down).unwrap().shifted(0.0, 0.0, 0.7);
        let grid = Grid::new(d, 121, 31).unwrap();
        let u = ScalarField::from_fn(grid, |x, y| {
            let y = y.clamp(1e-3, w - 1e-3);
            reaper.eval(x, y).unwrap().0
        })
        .unwrap();
        let fit = asymptote_fit(&u, Side::Right, AsymptoteModel::TiltedReaper { w }).unwrap();
        assert!((fit.slope_x + tilt_slope(w)).abs() < 1e-10);
        assert!((fit.offset - 0.7).abs() < 1e-9);
        assert!(fit.sup_deviation < 1e-9);

        let p = ScalarField::from_fn(grid, |x, y| 0.5 * x - 2.0 * y + 3.0).unwrap();
        let fit = asymptote_fit(&p, Side::Left, AsymptoteModel::Plane).unwrap();
        assert!((fit.slope_x - 0.5).abs() < 1e-10 && (fit.slope_y + 2.0).abs() < 1e-10);
        assert!(fit.sup_deviation < 1e-9);
        let short = ScalarField::zeros(Grid::new(PlanarDomain::truncated_strip(0.0, 2.0 * w, w).unwrap(), 9, 9).unwrap());
        assert!(matches!(
            asymptote_fit(&short, Side::Left, AsymptoteModel::Plane),
            Err(DiagnosticsError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn gauss_image_violation_of_tilted_reaper() {
        let w = 2.0 * PI;
        let d = PlanarDomain::truncated_strip(0.0, 4.0, w).unwrap();
        let u = ScalarField::from_fn(Grid::new(d, 17, 33).unwrap(), |x, y| {
            g_w_test(w, x, y.clamp(0.05, w - 0.05))
        })
        .unwrap();
        assert!(gauss_image_violation(&u, w) < 1e-9);
        let flat = ScalarField::zeros(u.grid);
        assert!(gauss_image_violation(&flat, w) > 0.0);
    }

    fn g_w_test(w: f64, x: f64, y: f64) -> f64 {
        crate::analytic::g_w(w, x, y).unwrap()
    }
}
