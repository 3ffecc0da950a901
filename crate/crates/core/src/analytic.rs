//! Closed-form translators and functionals of the metric `e^{-z}·δ`.
//!
//! These serve as oracles for the numerical layers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PlanarDomain, ScalarField};
use crate::operator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("y = {y} lies outside the open strip (0, {width})")]
    OutsideStrip { y: f64, width: f64 },
    #[error("tilted grim reapers need width w >= π, got {0}")]
    WidthBelowPi(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The grim reaper `log(sin y)` over `ℝ × (0, π)`.
pub fn grim_reaper(_x: f64, y: f64) -> Result<f64, AnalyticError> {
    if !(y > 0.0 && y < PI) {
        return Err(AnalyticError::OutsideStrip { y, width: PI });
    }
    Ok(y.sin().ln())
}

/// Direction of the x-tilt of a tilted grim reaper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tilt {
    Up,
    Down,
}

impl Tilt {
    pub fn sign(self) -> f64 {
        match self {
            Tilt::Up => 1.0,
            Tilt::Down => -1.0,
        }
    }

    pub fn from_sign(s: i32) -> Option<Self> {
        match s {
            1 => Some(Tilt::Up),
            -1 => Some(Tilt::Down),
            _ => None,
        }
    }
}

/// A tilted grim reaper of width `w` over the strip `ℝ × (y0, y0 + w)`:
///
/// ```text
/// (w/π)² log sin((y - y0) π/w) ± (x - x0) sqrt((w/π)² - 1) + z0
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedReaperParams {
    pub w: f64,
    pub tilt: Tilt,
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
}

impl TiltedReaperParams {
    pub fn new(w: f64, tilt: Tilt) -> Result<Self, AnalyticError> {
        let p = Self {
            w,
            tilt,
            x0: 0.0,
            y0: 0.0,
            z0: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.w.is_finite() && self.w >= PI) {
            return Err(AnalyticError::WidthBelowPi(self.w));
        }
        Ok(())
    }

    pub fn shifted(self, x0: f64, y0: f64, z0: f64) -> Self {
        Self { x0, y0, z0, ..self }
    }

    /// Magnitude of the x-slope, `sqrt((w/π)² - 1)`.
    pub fn slope(&self) -> f64 {
        tilt_slope(self.w)
    }

    /// The open strip `(y0, y0 + w)` over which the reaper is a graph.
    pub fn strip(&self) -> (f64, f64) {
        (self.y0, self.y0 + self.w)
    }

    /// Value and gradient `(z, ∂z/∂x, ∂z/∂y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<(f64, f64, f64), AnalyticError> {
        self.validate()?;
        let yy = y - self.y0;
        if !(yy > 0.0 && yy < self.w) {
            return Err(AnalyticError::OutsideStrip { y: yy, width: self.w });
        }
        let k = PI / self.w;
        let m = self.tilt.sign() * self.slope();
        let z = (yy * k).sin().ln() / (k * k) + m * (x - self.x0) + self.z0;
        let z_y = (yy * k).cos() / (yy * k).sin() / k;
        Ok((z, m, z_y))
    }
}

/// `sqrt((w/π)² - 1)`; zero at `w = π`.
pub fn tilt_slope(w: f64) -> f64 {
    ((w / PI).powi(2) - 1.0).max(0.0).sqrt()
}

pub fn tilted_reaper(p: &TiltedReaperParams, x: f64, y: f64) -> Result<f64, AnalyticError> {
    p.eval(x, y).map(|(z, _, _)| z)
}

/// The downward-tilted reaper of width `w` with `g_w(0, w/2) = 0`.
pub fn g_w(w: f64, x: f64, y: f64) -> Result<f64, AnalyticError> {
    tilted_reaper(&TiltedReaperParams::new(w, Tilt::Down)?, x, y)
}

/// Upward-tilted companion, `g_w'(x, y) = g_w(-x, y)`.
pub fn g_w_prime(w: f64, x: f64, y: f64) -> Result<f64, AnalyticError> {
    tilted_reaper(&TiltedReaperParams::new(w, Tilt::Up)?, x, y)
}

/// Pointwise discrete translator residual `-Div(∇u/W) - 1/W` at interior
/// nodes (boundary entries are zero).
pub fn translator_residual(u: &ScalarField) -> ScalarField {
    let values = operator::residual_values(u);
    ScalarField::new(u.grid, values).expect("residual of a finite field is finite")
}

/// Integrand-weighted midpoint sum over the grid cells whose centers lie in
/// `region`. The integrand receives `(u, u_x, u_y)` at the cell center.
pub(crate) fn cell_integral(
    u: &ScalarField,
    region: &PlanarDomain,
    mut integrand: impl FnMut(f64, f64, f64) -> f64,
) -> Result<f64, AnalyticError> {
    let g = u.grid;
    let dom = g.domain;
    let slack = 1e-9 * (1.0 + dom.length.max(dom.w));
    if !region.corners().iter().all(|c| dom.contains(c[0], c[1], slack)) {
        return Err(GeometryError::OutsideGrid.into());
    }
    let ds = g.ds();
    let dt = g.dt();
    let shear = dom.shear();
    let area = g.cell_area();
    let rslack = 1e-12 * (1.0 + region.length.max(region.w));
    let mut total = 0.0;
    for j in 0..g.n_t - 1 {
        for i in 0..g.n_s - 1 {
            let [cs, ct] = [(i as f64 + 0.5) * ds, (j as f64 + 0.5) * dt];
            let [x, y] = dom.to_xy(cs, ct);
            if !region.contains(x, y, rslack) {
                continue;
            }
            let (v00, v10, v01, v11) = (u.get(i, j), u.get(i + 1, j), u.get(i, j + 1), u.get(i + 1, j + 1));
            let uc = 0.25 * (v00 + v10 + v01 + v11);
            let u_s = 0.5 * ((v10 - v00) + (v11 - v01)) / ds;
            let u_t = 0.5 * ((v01 - v00) + (v11 - v10)) / dt;
            total += integrand(uc, u_s, u_t - shear * u_s) * area;
        }
    }
    Ok(total)
}

/// Area of the graph of `u` over `region` in the metric `e^{-z}·δ`:
/// `∬ e^{-u} sqrt(1 + |∇u|²) dx dy`, midpoint rule per cell.
pub fn ilmanen_area(u: &ScalarField, region: &PlanarDomain) -> Result<f64, AnalyticError> {
    cell_integral(u, region, |z, p, q| (-z).exp() * (1.0 + p * p + q * q).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    #[test]
    fn grim_reaper_values() {
        assert_eq!(grim_reaper(0.0, FRAC_PI_2).unwrap(), 0.0);
        assert_eq!(grim_reaper(17.3, FRAC_PI_2).unwrap(), 0.0);
        assert!((grim_reaper(0.0, FRAC_PI_6).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!(grim_reaper(0.0, 0.0).is_err());
        assert!(grim_reaper(0.0, PI).is_err());
        assert!(grim_reaper(0.0, -1.0).is_err());
    }

    #[test]
    fn tilted_reaper_reduces_to_grim_reaper_at_pi() {
        for tilt in [Tilt::Up, Tilt::Down] {
            let p = TiltedReaperParams::new(PI, tilt).unwrap();
            for &x in &[-3.0, 0.0, 2.5] {
                assert_eq!(tilted_reaper(&p, x, FRAC_PI_2).unwrap(), 0.0);
                let y = 0.4;
                assert!((tilted_reaper(&p, x, y).unwrap() - grim_reaper(x, y).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn g_w_slope_and_normalization() {
        let w = 2.0 * PI;
        assert_eq!(g_w(w, 0.0, w / 2.0).unwrap(), 0.0);
        let p = TiltedReaperParams::new(w, Tilt::Down).unwrap();
        let (_, gx, _) = p.eval(0.3, 1.0).unwrap();
        assert!((gx + 3f64.sqrt()).abs() < 1e-15);
        for &y in &[0.1, 1.0, PI, 5.0, 6.2] {
            let d = g_w(w, 1.0, y).unwrap() - g_w(w, 0.0, y).unwrap();
            assert!((d + 3f64.sqrt()).abs() < 1e-12);
            for &x in &[-2.0, 0.7] {
                assert!((g_w_prime(w, x, y).unwrap() - g_w(w, -x, y).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tilted_reaper_errors() {
        assert_eq!(TiltedReaperParams::new(3.0, Tilt::Up), Err(AnalyticError::WidthBelowPi(3.0)));
        let p = TiltedReaperParams::new(4.0, Tilt::Up).unwrap();
        assert!(tilted_reaper(&p, 0.0, 4.0).is_err());
        assert!(tilted_reaper(&p, 0.0, 0.0).is_err());
        assert!(tilted_reaper(&p.shifted(0.0, 1.0, 0.0), 0.0, 0.5).is_err());
    }

    #[test]
    fn affine_plane_residual() {
        let d = PlanarDomain::parallelogram(1.2, 1.0, 2.0).unwrap();
        let g = Grid::new(d, 9, 7).unwrap();
        let (a, b) = (0.7, -1.3);
        let u = ScalarField::from_fn(g, |x, y| a * x + b * y).unwrap();
        let r = translator_residual(&u);
        let want = -1.0 / (1.0 + a * a + b * b).sqrt();
        for j in 1..g.n_t - 1 {
            for i in 1..g.n_s - 1 {
                assert!((r.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_fields_have_unit_and_scaled_area() {
        let sq = PlanarDomain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let g = Grid::new(sq, 11, 11).unwrap();
        let zero = ScalarField::zeros(g);
        assert!((ilmanen_area(&zero, &sq).unwrap() - 1.0).abs() < 1e-14);
        let c = 0.8;
        assert!((ilmanen_area(&zero.shifted(c), &sq).unwrap() - (-c).exp()).abs() < 1e-14);
        let outside = PlanarDomain::rectangle(0.5, 1.5, 0.0, 1.0).unwrap();
        assert!(ilmanen_area(&zero, &outside).is_err());
    }

    #[test]
    fn grim_reaper_area_matches_csc_squared_integral() {
        // ∫_{π/4}^{3π/4} csc² y dy = 2 over an x-interval of length one
        let d = PlanarDomain::rectangle(0.0, 1.0, FRAC_PI_4, 3.0 * FRAC_PI_4).unwrap();
        let mut errs = Vec::new();
        for n in [33, 65, 129] {
            let g = Grid::new(d, n, n).unwrap();
            let u = ScalarField::from_fn(g, |x, y| grim_reaper(x, y).unwrap()).unwrap();
            errs.push((ilmanen_area(&u, &d).unwrap() - 2.0).abs());
        }
        assert!(errs[2] < 1e-4, "{errs:?}");
        assert!(errs[1] / errs[0] < 0.3 && errs[2] / errs[1] < 0.3, "{errs:?}");
    }
}
