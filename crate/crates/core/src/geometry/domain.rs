use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Shape family of a [`PlanarDomain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Parallelogram,
    TruncatedStrip,
}

/// Edge labels, listed counterclockwise starting from the bottom edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];

    pub fn index(self) -> usize {
        match self {
            Edge::Bottom => 0,
            Edge::Right => 1,
            Edge::Top => 2,
            Edge::Left => 3,
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Edge::Bottom | Edge::Top)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Edge::Bottom => "bottom",
            Edge::Right => "right",
            Edge::Top => "top",
            Edge::Left => "left",
        };
        f.write_str(name)
    }
}

/// A convex polygonal region with two horizontal edges.
///
/// The region is the image of the chart rectangle `[0, length] × [0, w]`
/// under
///
/// ```text
/// (s, t) ↦ origin + (s + t·cot α, t)
/// ```
///
/// so the lower-left corner sits at `origin`, the bottom and top edges are
/// horizontal with length `length`, and the interior angle at the lower-left
/// corner is `alpha`. Rectangles (`alpha = π/2`) have zero shear.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarDomain {
    pub kind: DomainKind,
    pub alpha: f64,
    pub w: f64,
    pub length: f64,
    pub origin: [f64; 2],
}

fn check_positive(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::NonPositive { name, value })
    }
}

impl PlanarDomain {
    /// `P(alpha, w, L)` with its lower-left corner at the origin.
    pub fn parallelogram(alpha: f64, w: f64, length: f64) -> Result<Self, GeometryError> {
        if !(alpha > 0.0 && alpha < std::f64::consts::PI) {
            return Err(GeometryError::Angle(alpha));
        }
        check_positive("w", w)?;
        check_positive("L", length)?;
        Ok(Self {
            kind: DomainKind::Parallelogram,
            alpha,
            w,
            length,
            origin: [0.0, 0.0],
        })
    }

    /// Parallelogram, optionally translated so that its center is the origin.
    pub fn make_parallelogram(
        alpha: f64,
        w: f64,
        length: f64,
        center_at_origin: bool,
    ) -> Result<Self, GeometryError> {
        let p = Self::parallelogram(alpha, w, length)?;
        if center_at_origin {
            let [cx, cy] = p.center();
            Ok(p.translated(-cx, -cy))
        } else {
            Ok(p)
        }
    }

    /// The strip `[x_lo, x_hi] × [0, w]`.
    pub fn truncated_strip(x_lo: f64, x_hi: f64, w: f64) -> Result<Self, GeometryError> {
        Self::rectangle(x_lo, x_hi, 0.0, w)
    }

    /// Axis-aligned rectangle `[x_lo, x_hi] × [y_lo, y_hi]`.
    pub fn rectangle(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self, GeometryError> {
        if !(x_lo.is_finite() && x_hi.is_finite() && x_hi > x_lo) {
            return Err(GeometryError::EmptyRange { lo: x_lo, hi: x_hi });
        }
        if !(y_lo.is_finite() && y_hi.is_finite() && y_hi > y_lo) {
            return Err(GeometryError::EmptyRange { lo: y_lo, hi: y_hi });
        }
        Ok(Self {
            kind: DomainKind::TruncatedStrip,
            alpha: FRAC_PI_2,
            w: y_hi - y_lo,
            length: x_hi - x_lo,
            origin: [x_lo, y_lo],
        })
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            origin: [self.origin[0] + dx, self.origin[1] + dy],
            ..*self
        }
    }

    /// `cot α`, exactly zero for rectangles.
    pub fn shear(&self) -> f64 {
        if self.alpha == FRAC_PI_2 {
            0.0
        } else {
            self.alpha.cos() / self.alpha.sin()
        }
    }

    /// Length of the non-horizontal edges, `w / sin α`.
    pub fn side_length(&self) -> f64 {
        self.w / self.alpha.sin()
    }

    pub fn area(&self) -> f64 {
        self.length * self.w
    }

    pub fn edge_length(&self, edge: Edge) -> f64 {
        if edge.is_horizontal() {
            self.length
        } else {
            self.side_length()
        }
    }

    pub fn to_xy(&self, s: f64, t: f64) -> [f64; 2] {
        [self.origin[0] + s + t * self.shear(), self.origin[1] + t]
    }

    pub fn to_chart(&self, x: f64, y: f64) -> [f64; 2] {
        let t = y - self.origin[1];
        [x - self.origin[0] - t * self.shear(), t]
    }

    /// Corners counterclockwise from the lower-left one.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            self.to_xy(0.0, 0.0),
            self.to_xy(self.length, 0.0),
            self.to_xy(self.length, self.w),
            self.to_xy(0.0, self.w),
        ]
    }

    pub fn center(&self) -> [f64; 2] {
        self.to_xy(0.5 * self.length, 0.5 * self.w)
    }

    /// Closed-set membership with slack `tol` in chart units.
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        let [s, t] = self.to_chart(x, y);
        s >= -tol && s <= self.length + tol && t >= -tol && t <= self.w + tol
    }

    /// Image under the half-turn `(x, y) ↦ 2p - (x, y)`.
    ///
    /// The rotated parallelogram has the same angle; its lower-left corner
    /// is the image of the old upper-right corner.
    pub fn half_turn(&self, p: [f64; 2]) -> Self {
        let [ux, uy] = self.corners()[2];
        Self {
            origin: [2.0 * p[0] - ux, 2.0 * p[1] - uy],
            ..*self
        }
    }
}
