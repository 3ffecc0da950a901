use super::{Edge, Grid, NodeKind};
use crate::geometry::GeometryError;

/// Boundary value carried by (part of) an edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeValue {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl EdgeValue {
    fn resolve(self, surrogate: Option<f64>) -> Option<f64> {
        match self {
            EdgeValue::Finite(v) => Some(v),
            EdgeValue::PlusInfinity => surrogate,
            EdgeValue::MinusInfinity => surrogate.map(|h| -h),
        }
    }

    fn is_symbolic(self) -> bool {
        !matches!(self, EdgeValue::Finite(_))
    }
}

/// Data assigned to one edge. Positions along an edge are fractions in
/// `[0, 1]`: horizontal edges run left to right, slanted edges bottom to top.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeData {
    Uniform(EdgeValue),
    /// `before` on `[0, at)`, `after` on `(at, 1]`.
    Split {
        at: f64,
        before: EdgeValue,
        after: EdgeValue,
    },
    /// Samples at uniformly spaced fractions, linearly interpolated.
    Profile(Vec<f64>),
}

impl EdgeData {
    pub fn constant(v: f64) -> Self {
        EdgeData::Uniform(EdgeValue::Finite(v))
    }

    fn has_symbolic(&self) -> bool {
        match self {
            EdgeData::Uniform(v) => v.is_symbolic(),
            EdgeData::Split { before, after, .. } => before.is_symbolic() || after.is_symbolic(),
            EdgeData::Profile(_) => false,
        }
    }

    /// Value for the node whose dual segment along the edge is `[lo, hi]`
    /// (centered on the node's own fraction). A split point inside the dual
    /// segment blends both sides by length, so the data moves continuously
    /// with the split position.
    fn node_value(&self, frac: f64, lo: f64, hi: f64, surrogate: Option<f64>) -> Option<f64> {
        match self {
            EdgeData::Uniform(v) => v.resolve(surrogate),
            EdgeData::Split { at, before, after } => {
                let b = before.resolve(surrogate)?;
                let a = after.resolve(surrogate)?;
                if *at <= lo {
                    Some(a)
                } else if *at >= hi {
                    Some(b)
                } else {
                    let wb = (at - lo) / (hi - lo);
                    Some(wb * b + (1.0 - wb) * a)
                }
            }
            EdgeData::Profile(samples) => Some(interpolate(samples, frac)),
        }
    }
}

fn interpolate(samples: &[f64], frac: f64) -> f64 {
    match samples.len() {
        0 => 0.0,
        1 => samples[0],
        n => {
            let x = frac.clamp(0.0, 1.0) * (n - 1) as f64;
            let k = (x.floor() as usize).min(n - 2);
            let f = x - k as f64;
            (1.0 - f) * samples[k] + f * samples[k + 1]
        }
    }
}

/// Dirichlet data for the four edges of a domain.
///
/// Symbolic infinite values need a surrogate magnitude `H` before the data
/// can be imposed; see [`BoundarySpec::finite`].
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    edges: [EdgeData; 4],
    surrogate: Option<f64>,
}

impl BoundarySpec {
    /// Edges given as `[bottom, right, top, left]`.
    pub fn new(edges: [EdgeData; 4]) -> Self {
        Self {
            edges,
            surrogate: None,
        }
    }

    pub fn uniform(bottom: f64, right: f64, top: f64, left: f64) -> Self {
        Self::new([
            EdgeData::constant(bottom),
            EdgeData::constant(right),
            EdgeData::constant(top),
            EdgeData::constant(left),
        ])
    }

    pub fn with_surrogate(mut self, h: f64) -> Result<Self, GeometryError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(GeometryError::NonPositive {
                name: "surrogate H",
                value: h,
            });
        }
        self.surrogate = Some(h);
        Ok(self)
    }

    pub fn surrogate(&self) -> Option<f64> {
        self.surrogate
    }

    pub fn edge(&self, edge: Edge) -> &EdgeData {
        &self.edges[edge.index()]
    }

    pub fn set_edge(&mut self, edge: Edge, data: EdgeData) {
        self.edges[edge.index()] = data;
    }

    pub fn has_symbolic(&self) -> bool {
        self.edges.iter().any(EdgeData::has_symbolic)
    }

    /// True when every edge resolves to finite numbers.
    pub fn is_finite(&self) -> bool {
        !self.has_symbolic() || self.surrogate.is_some()
    }

    /// Replaces symbolic infinities by `±H`.
    pub fn finite(&self) -> Result<Self, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::MissingSurrogate);
        }
        let h = self.surrogate;
        let mut edges = self.edges.clone();
        for e in edges.iter_mut() {
            let fix = |v: EdgeValue| EdgeValue::Finite(v.resolve(h).unwrap_or(0.0));
            *e = match e.clone() {
                EdgeData::Uniform(v) => EdgeData::Uniform(fix(v)),
                EdgeData::Split { at, before, after } => EdgeData::Split {
                    at,
                    before: fix(before),
                    after: fix(after),
                },
                p @ EdgeData::Profile(_) => p,
            };
        }
        Ok(Self { edges, surrogate: h })
    }

    /// Same data shifted by a constant.
    pub fn shifted(&self, c: f64) -> Self {
        let shift = |v: EdgeValue| match v {
            EdgeValue::Finite(x) => EdgeValue::Finite(x + c),
            other => other,
        };
        let mut edges = self.edges.clone();
        for e in edges.iter_mut() {
            *e = match e.clone() {
                EdgeData::Uniform(v) => EdgeData::Uniform(shift(v)),
                EdgeData::Split { at, before, after } => EdgeData::Split {
                    at,
                    before: shift(before),
                    after: shift(after),
                },
                EdgeData::Profile(p) => EdgeData::Profile(p.into_iter().map(|x| x + c).collect()),
            };
        }
        Self {
            edges,
            surrogate: self.surrogate,
        }
    }

    /// Value imposed at a boundary node; `None` for interior nodes.
    ///
    /// Corner nodes take the average of their two edges.
    pub fn node_value(&self, grid: &Grid, i: usize, j: usize) -> Result<Option<f64>, GeometryError> {
        let edge_value = |edge: Edge| -> Result<f64, GeometryError> {
            let n = if edge.is_horizontal() { grid.n_s } else { grid.n_t };
            let step = 1.0 / (n - 1) as f64;
            let frac = grid.edge_fraction(edge, i, j);
            self.edge(edge)
                .node_value(frac, frac - 0.5 * step, frac + 0.5 * step, self.surrogate)
                .ok_or(GeometryError::MissingSurrogate)
        };
        match grid.node_kind(i, j) {
            NodeKind::Interior => Ok(None),
            NodeKind::Edge(e) => edge_value(e).map(Some),
            NodeKind::Corner(a, b) => Ok(Some(0.5 * (edge_value(a)? + edge_value(b)?))),
        }
    }

    /// Boundary values at every node (interior entries are `NaN`).
    pub fn node_values(&self, grid: &Grid) -> Result<Vec<f64>, GeometryError> {
        let mut out = vec![f64::NAN; grid.len()];
        for j in 0..grid.n_t {
            for i in 0..grid.n_s {
                if let Some(v) = self.node_value(grid, i, j)? {
                    out[grid.index(i, j)] = v;
                }
            }
        }
        Ok(out)
    }

    /// The larger of two edge assignments, pointwise, at every boundary
    /// node; used by comparison checks.
    pub fn dominates(&self, other: &BoundarySpec, grid: &Grid) -> Result<bool, GeometryError> {
        let a = self.node_values(grid)?;
        let b = other.node_values(grid)?;
        Ok(a.iter().zip(&b).all(|(x, y)| x.is_nan() || x >= y))
    }
}
