use super::{Edge, GeometryError, PlanarDomain};

/// Classification of a grid node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Edge(Edge),
    /// Corners belong to two edges and carry no single-edge label.
    Corner(Edge, Edge),
}

/// Uniform structured grid in chart coordinates over a [`PlanarDomain`].
///
/// Node `(i, j)` sits at chart point `(i·ds, j·dt)`; nodes are stored
/// row-major with `i` fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub domain: PlanarDomain,
    pub n_s: usize,
    pub n_t: usize,
}

impl Grid {
    pub fn new(domain: PlanarDomain, n_s: usize, n_t: usize) -> Result<Self, GeometryError> {
        if n_s < 3 || n_t < 3 {
            return Err(GeometryError::GridTooSmall { n_s, n_t });
        }
        Ok(Self { domain, n_s, n_t })
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ds(&self) -> f64 {
        self.domain.length / (self.n_s - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.domain.w / (self.n_t - 1) as f64
    }

    /// Largest chart spacing.
    pub fn spacing(&self) -> f64 {
        self.ds().max(self.dt())
    }

    /// Area of one chart cell mapped to the plane (the shear preserves area).
    pub fn cell_area(&self) -> f64 {
        self.ds() * self.dt()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_s + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n_s, k / self.n_s)
    }

    pub fn chart(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.ds(), j as f64 * self.dt()]
    }

    pub fn node_xy(&self, i: usize, j: usize) -> [f64; 2] {
        let [s, t] = self.chart(i, j);
        self.domain.to_xy(s, t)
    }

    pub fn node_kind(&self, i: usize, j: usize) -> NodeKind {
        let left = i == 0;
        let right = i + 1 == self.n_s;
        let bottom = j == 0;
        let top = j + 1 == self.n_t;
        match (left, right, bottom, top) {
            (true, _, true, _) => NodeKind::Corner(Edge::Left, Edge::Bottom),
            (_, true, true, _) => NodeKind::Corner(Edge::Bottom, Edge::Right),
            (_, true, _, true) => NodeKind::Corner(Edge::Right, Edge::Top),
            (true, _, _, true) => NodeKind::Corner(Edge::Top, Edge::Left),
            (true, ..) => NodeKind::Edge(Edge::Left),
            (_, true, ..) => NodeKind::Edge(Edge::Right),
            (_, _, true, _) => NodeKind::Edge(Edge::Bottom),
            (.., true) => NodeKind::Edge(Edge::Top),
            _ => NodeKind::Interior,
        }
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.n_s && j + 1 < self.n_t
    }

    /// Interior nodes at least `ring` cells away from every corner, where
    /// a node is near a corner when it is within `ring` cells of it in both
    /// chart directions.
    pub fn outside_corner_ring(&self, i: usize, j: usize, ring: usize) -> bool {
        let near_s = i <= ring || i + ring + 1 >= self.n_s;
        let near_t = j <= ring || j + ring + 1 >= self.n_t;
        !(near_s && near_t)
    }

    /// Edge-position parameter in `[0, 1]` of a boundary node along `edge`.
    ///
    /// Horizontal edges run left to right, slanted edges bottom to top.
    pub fn edge_fraction(&self, edge: Edge, i: usize, j: usize) -> f64 {
        if edge.is_horizontal() {
            i as f64 / (self.n_s - 1) as f64
        } else {
            j as f64 / (self.n_t - 1) as f64
        }
    }

    pub fn edge_nodes(&self, edge: Edge) -> Vec<(usize, usize)> {
        match edge {
            Edge::Bottom => (0..self.n_s).map(|i| (i, 0)).collect(),
            Edge::Top => (0..self.n_s).map(|i| (i, self.n_t - 1)).collect(),
            Edge::Left => (0..self.n_t).map(|j| (0, j)).collect(),
            Edge::Right => (0..self.n_t).map(|j| (self.n_s - 1, j)).collect(),
        }
    }

    /// Fractional node coordinates of a planar point, if inside the grid.
    pub fn locate(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let [s, t] = self.domain.to_chart(x, y);
        let a = s / self.ds();
        let b = t / self.dt();
        let eps = 1e-9;
        let max_a = (self.n_s - 1) as f64;
        let max_b = (self.n_t - 1) as f64;
        if a < -eps || b < -eps || a > max_a + eps || b > max_b + eps {
            return None;
        }
        Some([a.clamp(0.0, max_a), b.clamp(0.0, max_b)])
    }
}

/// Node values of a graph function `u` over a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != grid.len() {
            return Err(GeometryError::ValueCount {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.ij(k);
            return Err(GeometryError::NonFinite { i, j });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self, GeometryError> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_t {
            for i in 0..grid.n_s {
                let [x, y] = grid.node_xy(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<(), GeometryError> {
        if !v.is_finite() {
            return Err(GeometryError::NonFinite { i, j });
        }
        let k = self.grid.index(i, j);
        self.values[k] = v;
        Ok(())
    }

    /// `u + c` at every node.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Chart derivatives `(u_s, u_t)`: central differences inside, second-order
    /// one-sided stencils on the boundary.
    pub fn chart_gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let g = &self.grid;
        let ds = g.ds();
        let dt = g.dt();
        let u_s = if i == 0 {
            (-3.0 * self.get(0, j) + 4.0 * self.get(1, j) - self.get(2, j)) / (2.0 * ds)
        } else if i + 1 == g.n_s {
            (3.0 * self.get(i, j) - 4.0 * self.get(i - 1, j) + self.get(i - 2, j)) / (2.0 * ds)
        } else {
            (self.get(i + 1, j) - self.get(i - 1, j)) / (2.0 * ds)
        };
        let u_t = if j == 0 {
            (-3.0 * self.get(i, 0) + 4.0 * self.get(i, 1) - self.get(i, 2)) / (2.0 * dt)
        } else if j + 1 == g.n_t {
            (3.0 * self.get(i, j) - 4.0 * self.get(i, j - 1) + self.get(i, j - 2)) / (2.0 * dt)
        } else {
            (self.get(i, j + 1) - self.get(i, j - 1)) / (2.0 * dt)
        };
        [u_s, u_t]
    }

    /// Planar gradient `(u_x, u_y)` at a node.
    pub fn gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let [u_s, u_t] = self.chart_gradient(i, j);
        [u_s, u_t - self.grid.domain.shear() * u_s]
    }

    /// Planar Hessian `[u_xx, u_xy, u_yy]` at an interior node.
    pub fn hessian(&self, i: usize, j: usize) -> [f64; 3] {
        let g = &self.grid;
        debug_assert!(g.is_interior(i, j));
        let ds = g.ds();
        let dt = g.dt();
        let c = g.domain.shear();
        let u = self.get(i, j);
        let u_ss = (self.get(i + 1, j) - 2.0 * u + self.get(i - 1, j)) / (ds * ds);
        let u_tt = (self.get(i, j + 1) - 2.0 * u + self.get(i, j - 1)) / (dt * dt);
        let u_st = (self.get(i + 1, j + 1) - self.get(i + 1, j - 1) - self.get(i - 1, j + 1)
            + self.get(i - 1, j - 1))
            / (4.0 * ds * dt);
        [u_ss, u_st - c * u_ss, u_tt - 2.0 * c * u_st + c * c * u_ss]
    }

    /// Bilinear interpolation in chart coordinates.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let [a, b] = self.grid.locate(x, y)?;
        Some(self.sample_chart(a, b))
    }

    /// Bilinear interpolation at fractional node coordinates.
    pub fn sample_chart(&self, a: f64, b: f64) -> f64 {
        let g = &self.grid;
        let i = (a.floor() as usize).min(g.n_s - 2);
        let j = (b.floor() as usize).min(g.n_t - 2);
        let fa = a - i as f64;
        let fb = b - j as f64;
        let v00 = self.get(i, j);
        let v10 = self.get(i + 1, j);
        let v01 = self.get(i, j + 1);
        let v11 = self.get(i + 1, j + 1);
        (1.0 - fb) * ((1.0 - fa) * v00 + fa * v10) + fb * ((1.0 - fa) * v01 + fa * v11)
    }

    /// Values on the same grid shape over a translated domain.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            grid: Grid {
                domain: self.grid.domain.translated(dx, dy),
                ..self.grid
            },
            values: self.values.clone(),
        }
    }

    /// The graph rotated by π about the vertical line through `p`:
    /// `u'(x, y) = u(2p - (x, y))`. Node `(i, j)` of the result carries the
    /// value of node `(n_s-1-i, n_t-1-j)`.
    pub fn half_turn(&self, p: [f64; 2]) -> Self {
        let grid = Grid {
            domain: self.grid.domain.half_turn(p),
            ..self.grid
        };
        let mut values = self.values.clone();
        values.reverse();
        Self { grid, values }
    }

    /// Sup-norm over interior nodes outside the corner exclusion ring.
    pub fn interior_sup(&self, ring: usize) -> f64 {
        let g = &self.grid;
        let mut m = 0.0_f64;
        for j in 1..g.n_t - 1 {
            for i in 1..g.n_s - 1 {
                if g.outside_corner_ring(i, j, ring) {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }

    /// Restriction to every `stride`-th node, for nested-grid comparisons.
    pub fn subsample(&self, stride: usize) -> Result<Self, GeometryError> {
        let g = &self.grid;
        if stride == 0 || (g.n_s - 1) % stride != 0 || (g.n_t - 1) % stride != 0 {
            return Err(GeometryError::NotNested {
                n_s: g.n_s,
                n_t: g.n_t,
                stride,
            });
        }
        let coarse = Grid::new(g.domain, (g.n_s - 1) / stride + 1, (g.n_t - 1) / stride + 1)?;
        let mut values = Vec::with_capacity(coarse.len());
        for j in 0..coarse.n_t {
            for i in 0..coarse.n_s {
                values.push(self.get(i * stride, j * stride));
            }
        }
        Self::new(coarse, values)
    }
}
