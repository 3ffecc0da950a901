//! Nine-point conservative discretization of the translator operator
//!
//! ```text
//! R[u] = -Div(∇u / W) - 1/W,   W = sqrt(1 + |∇u|²)
//! ```
//!
//! in the sheared chart `x = s + k t`, `y = t` (`k = cot α`, unit Jacobian),
//! where `Div F = ∂_s F^s + ∂_t F^t` with `F^s = F_x - k F_y`, `F^t = F_y`.
//! Fluxes live on the four cell faces around a node; the normal derivative
//! is a two-point difference and the tangential one averages four nodes.
//! The zeroth-order term uses the central gradient at the node.

use crate::geometry::ScalarField;

/// Stencil neighbours `(di, dj)`; slot `3 (dj + 1) + (di + 1)`.
pub(crate) const OFFSETS: [(isize, isize); 9] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (0, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Clone, Copy, Debug)]
pub(crate) struct ChartSpacing {
    pub ds: f64,
    pub dt: f64,
    pub shear: f64,
}

impl ChartSpacing {
    pub fn of(field: &ScalarField) -> Self {
        Self {
            ds: field.grid.ds(),
            dt: field.grid.dt(),
            shear: field.grid.domain.shear(),
        }
    }
}

/// A chart gradient written as a linear combination of stencil slots.
struct Diff {
    s: [(usize, f64); 4],
    t: [(usize, f64); 4],
}

impl Diff {
    fn eval(&self, v: &[f64; 9]) -> (f64, f64) {
        let dot = |c: &[(usize, f64); 4]| c.iter().map(|&(k, w)| w * v[k]).sum::<f64>();
        (dot(&self.s), dot(&self.t))
    }
}

/// Face and node gradient stencils for one spacing.
fn diffs(sp: ChartSpacing) -> [Diff; 5] {
    let (a, b) = (1.0 / sp.ds, 1.0 / sp.dt);
    let (qa, qb) = (0.25 * a, 0.25 * b);
    let (ha, hb) = (0.5 * a, 0.5 * b);
    [
        // east, west, north, south faces, then the node itself
        Diff {
            s: [(5, a), (4, -a), (0, 0.0), (0, 0.0)],
            t: [(7, qb), (8, qb), (1, -qb), (2, -qb)],
        },
        Diff {
            s: [(4, a), (3, -a), (0, 0.0), (0, 0.0)],
            t: [(6, qb), (7, qb), (0, -qb), (1, -qb)],
        },
        Diff {
            s: [(5, qa), (8, qa), (3, -qa), (6, -qa)],
            t: [(7, b), (4, -b), (0, 0.0), (0, 0.0)],
        },
        Diff {
            s: [(2, qa), (5, qa), (0, -qa), (3, -qa)],
            t: [(4, b), (1, -b), (0, 0.0), (0, 0.0)],
        },
        Diff {
            s: [(5, ha), (3, -ha), (0, 0.0), (0, 0.0)],
            t: [(7, hb), (1, -hb), (0, 0.0), (0, 0.0)],
        },
    ]
}

/// Planar gradient `(p, q)` and `W` from chart derivatives.
#[inline]
fn planar(u_s: f64, u_t: f64, k: f64) -> (f64, f64, f64) {
    let p = u_s;
    let q = u_t - k * u_s;
    (p, q, (1.0 + p * p + q * q).sqrt())
}

/// Residual and derivatives at one interior node.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NodeStencil {
    v: [f64; 9],
    sp: ChartSpacing,
}

impl NodeStencil {
    /// `v` holds the nine values in [`OFFSETS`] order.
    #[inline]
    pub fn new(v: &[f64; 9], sp: ChartSpacing) -> Self {
        Self { v: *v, sp }
    }

    pub fn gather(field: &ScalarField, i: usize, j: usize) -> [f64; 9] {
        let mut v = [0.0; 9];
        for (slot, (di, dj)) in v.iter_mut().zip(OFFSETS) {
            *slot = field.get((i as isize + di) as usize, (j as isize + dj) as usize);
        }
        v
    }

    #[inline]
    pub fn residual(&self) -> f64 {
        self.jacobian_impl(false).0
    }

    /// Residual and its derivatives with respect to the nine stencil values.
    pub fn jacobian(&self) -> (f64, [f64; 9]) {
        self.jacobian_impl(true)
    }

    fn jacobian_impl(&self, want_jac: bool) -> (f64, [f64; 9]) {
        let ChartSpacing { ds, dt, shear: k } = self.sp;
        let d = diffs(self.sp);
        let mut r = 0.0;
        let mut jac = [0.0; 9];
        // (face, component, sign·1/spacing): R gets -Div
        let faces = [(0, 0, -1.0 / ds), (1, 0, 1.0 / ds), (2, 1, -1.0 / dt), (3, 1, 1.0 / dt)];
        for (f, comp, c) in faces {
            let (u_s, u_t) = d[f].eval(&self.v);
            let (p, q, w) = planar(u_s, u_t, k);
            let flux = if comp == 0 { (p - k * q) / w } else { q / w };
            r += c * flux;
            if want_jac {
                let w3 = w * w * w;
                let (gpp, gpq, gqq) = ((1.0 + q * q) / w3, -p * q / w3, (1.0 + p * p) / w3);
                // derivatives of the flux in p and q
                let (fp, fq) = if comp == 0 {
                    (gpp - k * gpq, gpq - k * gqq)
                } else {
                    (gpq, gqq)
                };
                let (f_s, f_t) = (fp - k * fq, fq);
                for &(slot, wgt) in &d[f].s {
                    jac[slot] += c * f_s * wgt;
                }
                for &(slot, wgt) in &d[f].t {
                    jac[slot] += c * f_t * wgt;
                }
            }
        }
        let (u_s, u_t) = d[4].eval(&self.v);
        let (p, q, w) = planar(u_s, u_t, k);
        r -= 1.0 / w;
        if want_jac {
            let w3 = w * w * w;
            let (fp, fq) = (p / w3, q / w3);
            let (f_s, f_t) = (fp - k * fq, fq);
            for &(slot, wgt) in &d[4].s {
                jac[slot] += f_s * wgt;
            }
            for &(slot, wgt) in &d[4].t {
                jac[slot] += f_t * wgt;
            }
        }
        (r, jac)
    }
}

/// Residual at every interior node; boundary entries are zero.
pub(crate) fn residual_values(field: &ScalarField) -> Vec<f64> {
    let g = field.grid;
    let sp = ChartSpacing::of(field);
    let mut out = vec![0.0; g.len()];
    for j in 1..g.n_t - 1 {
        for i in 1..g.n_s - 1 {
            let v = NodeStencil::gather(field, i, j);
            out[g.index(i, j)] = NodeStencil::new(&v, sp).residual();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_finite_differences() {
        let sp = ChartSpacing {
            ds: 0.07,
            dt: 0.05,
            shear: 0.6,
        };
        let base = [0.3, -0.1, 0.45, 0.2, 0.5, 0.9, -0.3, 0.8, 1.4];
        let (r0, jac) = NodeStencil::new(&base, sp).jacobian();
        assert_eq!(r0, NodeStencil::new(&base, sp).residual());
        for k in 0..9 {
            let h = 1e-6;
            let mut plus = base;
            let mut minus = base;
            plus[k] += h;
            minus[k] -= h;
            let fd = (NodeStencil::new(&plus, sp).residual() - NodeStencil::new(&minus, sp).residual())
                / (2.0 * h);
            assert!(
                (fd - jac[k]).abs() <= 1e-6 * (1.0 + jac[k].abs()),
                "slot {k}: fd {fd} vs analytic {}",
                jac[k]
            );
        }
    }
}
