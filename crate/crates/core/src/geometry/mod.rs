//! Polygonal domains, sheared structured grids and Dirichlet data.

mod boundary;
mod domain;
mod field;

use thiserror::Error;

pub use boundary::{BoundarySpec, EdgeData, EdgeValue};
pub use domain::{DomainKind, Edge, PlanarDomain};
pub use field::{Grid, NodeKind, ScalarField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("corner angle must lie in (0, π), got {0}")]
    Angle(f64),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("empty coordinate range [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("grid needs at least 3 nodes per direction, got {n_s}x{n_t}")]
    GridTooSmall { n_s: usize, n_t: usize },
    #[error("field has {got} values but the grid has {expected} nodes")]
    ValueCount { expected: usize, got: usize },
    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("infinite boundary values need a surrogate magnitude H")]
    MissingSurrogate,
    #[error("grid {n_s}x{n_t} has no nested subgrid with stride {stride}")]
    NotNested { n_s: usize, n_t: usize, stride: usize },
    #[error("region lies outside the grid domain")]
    OutsideGrid,
}

/// Zero-initialized field on a uniform grid over `domain`.
pub fn build_grid(domain: PlanarDomain, n_s: usize, n_t: usize) -> Result<ScalarField, GeometryError> {
    Ok(ScalarField::zeros(Grid::new(domain, n_s, n_t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
        (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol
    }

    #[test]
    fn right_angle_parallelogram_is_rectangle() {
        let p = PlanarDomain::make_parallelogram(FRAC_PI_2, 1.0, 2.0, false).unwrap();
        assert_eq!(p.shear(), 0.0);
        assert_eq!(p.corners(), [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]);
    }

    #[test]
    fn upper_left_corner_follows_the_angle() {
        let p = PlanarDomain::make_parallelogram(FRAC_PI_4, 1.0, 2.0, false).unwrap();
        assert!(close(p.corners()[3], [1.0, 1.0], 1e-15));
        assert!(close(p.corners()[2], [3.0, 1.0], 1e-15));
    }

    #[test]
    fn centered_parallelogram_has_center_at_origin() {
        let p = PlanarDomain::make_parallelogram(FRAC_PI_3, 1.0, 2.0, true).unwrap();
        assert!(close(p.center(), [0.0, 0.0], 1e-15));
        let q = PlanarDomain::parallelogram(FRAC_PI_3, 1.0, 2.0).unwrap();
        let shift = [-(1.0 + 0.5 / FRAC_PI_3.tan()), -0.5];
        assert!(close(p.origin, shift, 1e-15));
        assert_eq!(p.alpha, q.alpha);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            PlanarDomain::parallelogram(0.0, 1.0, 1.0),
            Err(GeometryError::Angle(_))
        ));
        assert!(PlanarDomain::parallelogram(std::f64::consts::PI, 1.0, 1.0).is_err());
        assert!(PlanarDomain::parallelogram(1.0, -1.0, 1.0).is_err());
        assert!(PlanarDomain::parallelogram(1.0, 1.0, 0.0).is_err());
        assert!(PlanarDomain::truncated_strip(1.0, 1.0, 1.0).is_err());
        let d = PlanarDomain::parallelogram(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(build_grid(d, 2, 5), Err(GeometryError::GridTooSmall { .. })));
    }

    #[test]
    fn node_counts_on_small_rectangle() {
        let d = PlanarDomain::truncated_strip(0.0, 2.0, 1.0).unwrap();
        let f = build_grid(d, 5, 3).unwrap();
        let g = f.grid;
        let (mut interior, mut edge, mut corner) = (0, 0, 0);
        for j in 0..g.n_t {
            for i in 0..g.n_s {
                match g.node_kind(i, j) {
                    NodeKind::Interior => interior += 1,
                    NodeKind::Edge(_) => edge += 1,
                    NodeKind::Corner(a, b) => {
                        assert_ne!(a, b);
                        corner += 1
                    }
                }
            }
        }
        assert_eq!((g.len(), edge, corner, interior), (15, 8, 4, 3));
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sheared_chart_x_coordinate() {
        let d = PlanarDomain::parallelogram(FRAC_PI_4, 1.0, 2.0).unwrap();
        let g = Grid::new(d, 9, 5).unwrap();
        for j in 0..g.n_t {
            for i in 0..g.n_s {
                let [s, t] = g.chart(i, j);
                let [x, y] = g.node_xy(i, j);
                assert!((x - (s + t)).abs() < 1e-14);
                assert_eq!(y, t);
            }
        }
    }

    #[test]
    fn corner_averaging_and_split_blending() {
        let d = PlanarDomain::truncated_strip(-1.0, 1.0, 1.0).unwrap();
        let g = Grid::new(d, 5, 3).unwrap();
        let bc = BoundarySpec::new([
            EdgeData::Split {
                at: 0.5,
                before: EdgeValue::PlusInfinity,
                after: EdgeValue::MinusInfinity,
            },
            EdgeData::constant(1.0),
            EdgeData::constant(0.0),
            EdgeData::constant(3.0),
        ])
        .with_surrogate(4.0)
        .unwrap();
        // split exactly on the middle node blends both sides equally
        assert_eq!(bc.node_value(&g, 2, 0).unwrap(), Some(0.0));
        assert_eq!(bc.node_value(&g, 1, 0).unwrap(), Some(4.0));
        assert_eq!(bc.node_value(&g, 3, 0).unwrap(), Some(-4.0));
        assert_eq!(bc.node_value(&g, 0, 0).unwrap(), Some(3.5));
        assert_eq!(bc.node_value(&g, 4, 2).unwrap(), Some(0.5));
        assert_eq!(bc.node_value(&g, 2, 1).unwrap(), None);
        let raw = BoundarySpec::new([
            EdgeData::Uniform(EdgeValue::MinusInfinity),
            EdgeData::constant(0.0),
            EdgeData::constant(0.0),
            EdgeData::constant(0.0),
        ]);
        assert!(!raw.is_finite());
        assert_eq!(raw.finite(), Err(GeometryError::MissingSurrogate));
    }

    #[test]
    fn gradient_and_hessian_exact_on_quadratics() {
        let d = PlanarDomain::parallelogram(1.1, 1.3, 2.0).unwrap();
        let g = Grid::new(d, 11, 9).unwrap();
        let f = ScalarField::from_fn(g, |x, y| 0.5 * x * x - 1.5 * x * y + 0.25 * y * y + x - 2.0 * y)
            .unwrap();
        for j in 0..g.n_t {
            for i in 0..g.n_s {
                let [x, y] = g.node_xy(i, j);
                let [gx, gy] = f.gradient(i, j);
                assert!((gx - (x - 1.5 * y + 1.0)).abs() < 1e-11);
                assert!((gy - (-1.5 * x + 0.5 * y - 2.0)).abs() < 1e-11);
                if g.is_interior(i, j) {
                    let [hxx, hxy, hyy] = f.hessian(i, j);
                    assert!((hxx - 1.0).abs() < 1e-10);
                    assert!((hxy + 1.5).abs() < 1e-10);
                    assert!((hyy - 0.5).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn half_turn_is_an_involution() {
        let d = PlanarDomain::make_parallelogram(0.9, 1.0, 2.0, true).unwrap();
        let g = Grid::new(d, 7, 5).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x + 3.0 * y * y).unwrap();
        let p = [0.3, -0.2];
        let r = f.half_turn(p);
        for j in 0..g.n_t {
            for i in 0..g.n_s {
                let [x, y] = r.grid.node_xy(i, j);
                let want = (2.0 * p[0] - x) + 3.0 * (2.0 * p[1] - y).powi(2);
                assert!((r.get(i, j) - want).abs() < 1e-12);
            }
        }
        let back = r.half_turn(p);
        assert_eq!(back.values(), f.values());
        assert!(close(back.grid.domain.origin, d.origin, 1e-14));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn chart_round_trip(alpha in 0.2f64..2.9, w in 0.1f64..5.0, l in 0.1f64..5.0,
                                n_s in 3usize..20, n_t in 3usize..20, center in any::<bool>()) {
                let d = PlanarDomain::make_parallelogram(alpha, w, l, center).unwrap();
                let g = Grid::new(d, n_s, n_t).unwrap();
                for j in 0..n_t {
                    for i in 0..n_s {
                        let [x, y] = g.node_xy(i, j);
                        let [s, t] = d.to_chart(x, y);
                        let [s0, t0] = g.chart(i, j);
                        prop_assert!((s - s0).abs() < 1e-12 && (t - t0).abs() < 1e-12);
                        prop_assert!(d.contains(x, y, 1e-12));
                    }
                }
            }

            #[test]
            fn edge_labels_survive_centering(alpha in 0.2f64..2.9, n_s in 3usize..12, n_t in 3usize..12) {
                let a = Grid::new(PlanarDomain::make_parallelogram(alpha, 1.0, 2.0, false).unwrap(), n_s, n_t).unwrap();
                let b = Grid::new(PlanarDomain::make_parallelogram(alpha, 1.0, 2.0, true).unwrap(), n_s, n_t).unwrap();
                for j in 0..n_t {
                    for i in 0..n_s {
                        prop_assert_eq!(a.node_kind(i, j), b.node_kind(i, j));
                    }
                }
            }
        }
    }
}
