//! Scherk-type constructions on truncated domains: the `L(h)` shooting
//! problem for Scherk translators, scherkenoids, helicoid-like translators
//! with a self-consistent axis, and pitchforks.
//!
//! Infinite boundary values are replaced by finite surrogates. Where a
//! family has a tilted far field, the surrogates follow the tilt: `±∞` on
//! a horizontal edge becomes `ℓ(x) ± H` with `ℓ(x) = -x·sqrt((w/π)² - 1)`,
//! the mean level of the asymptotic tilted grim reaper.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{cell_integral, tilt_slope, AnalyticError, Tilt, TiltedReaperParams};
use crate::operator::{ChartSpacing, NodeStencil};
use crate::geometry::{BoundarySpec, Edge, EdgeData, EdgeValue, GeometryError, Grid, PlanarDomain, ScalarField};
use crate::solver::{solve_dirichlet, SolveError, SolveReport, SolverConfig};

/// Grid node counts `(n_s, n_t)`.
pub type GridDims = (usize, usize);

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no sign change of u(0,0) - h/2 on [{lo}, {hi}] (values {f_lo:.6}, {f_hi:.6}); enlarge the bracket or raise h")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("center value is not decreasing in L: u(0,0) = {u_lo} at L = {l_lo}, {u_hi} at L = {l_hi}")]
    NotMonotone { l_lo: f64, u_lo: f64, l_hi: f64, u_hi: f64 },
    #[error("axis fixed point failed after {} sweeps (increments {increments:?})", increments.len())]
    FixedPointDivergence { increments: Vec<f64> },
    #[error("discrete tilted reaper did not converge (residual {residual:.3e})")]
    ReaperProfile { residual: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

fn check_positive(name: &str, v: f64) -> Result<(), FamilyError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(FamilyError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_angle(alpha: f64) -> Result<(), FamilyError> {
    if alpha > 0.0 && alpha < PI {
        Ok(())
    } else {
        Err(FamilyError::InvalidParameter(format!("alpha must lie in (0, π), got {alpha}")))
    }
}

/// Value of `u` at the planar origin (bilinear).
pub fn center_value(u: &ScalarField) -> Result<f64, FamilyError> {
    u.sample(0.0, 0.0).ok_or(FamilyError::Geometry(GeometryError::OutsideGrid))
}

/// Dirichlet data of a Scherk cell: `0` on the horizontal edges, `h` on the
/// slanted ones.
pub fn scherk_boundary(h: f64) -> BoundarySpec {
    BoundarySpec::uniform(0.0, h, 0.0, h)
}

/// Solves the Scherk-cell problem `u_L^h` on the centered parallelogram.
pub fn solve_scherk_cell(
    alpha: f64,
    w: f64,
    l: f64,
    h: f64,
    grid: GridDims,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport), FamilyError> {
    solve_scherk_cell_from(alpha, w, l, h, grid, cfg, None)
}

/// [`solve_scherk_cell`] with an optional warm start of matching dimensions.
pub fn solve_scherk_cell_from(
    alpha: f64,
    w: f64,
    l: f64,
    h: f64,
    grid: GridDims,
    cfg: &SolverConfig,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, SolveReport), FamilyError> {
    check_angle(alpha)?;
    check_positive("w", w)?;
    check_positive("L", l)?;
    check_positive("h", h)?;
    let domain = PlanarDomain::make_parallelogram(alpha, w, l, true)?;
    Ok(solve_dirichlet(domain, &scherk_boundary(h), grid, cfg, guess)?)
}

/// Outcome of the shooting problem `u_L^h(0,0) = h/2`.
#[derive(Clone, Debug)]
pub struct ShootingResult {
    pub l: f64,
    pub center: f64,
    /// Every evaluated `(L, u_L^h(0,0))`, sorted by `L`.
    pub samples: Vec<(f64, f64)>,
    pub field: ScalarField,
    pub report: SolveReport,
}

/// Bisection controls for [`find_l`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// Defaults to `[w/sinα, w/sinα + 4w]`.
    pub bracket: Option<[f64; 2]>,
    /// Stop once `|u(0,0) - h/2|` is below this.
    pub center_tol: f64,
    /// Stop once the bracket is shorter than this fraction of `L`.
    pub length_rtol: f64,
    pub max_bisections: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            bracket: None,
            center_tol: 1e-7,
            length_rtol: 1e-7,
            max_bisections: 60,
        }
    }
}

pub fn default_bracket(alpha: f64, w: f64) -> [f64; 2] {
    let lo = w / alpha.sin();
    [lo, lo + 4.0 * w]
}

fn insert_sample(samples: &mut Vec<(f64, f64)>, l: f64, u: f64) -> Result<(), FamilyError> {
    let k = samples.partition_point(|s| s.0 < l);
    samples.insert(k, (l, u));
    let slack = 1e-9 * (1.0 + u.abs());
    let check = |a: (f64, f64), b: (f64, f64)| {
        if b.1 > a.1 - slack && b.0 > a.0 {
            Err(FamilyError::NotMonotone {
                l_lo: a.0,
                u_lo: a.1,
                l_hi: b.0,
                u_hi: b.1,
            })
        } else {
            Ok(())
        }
    };
    if k > 0 {
        check(samples[k - 1], samples[k])?;
    }
    if k + 1 < samples.len() {
        check(samples[k], samples[k + 1])?;
    }
    Ok(())
}

/// Finds `L(h)` with `u_L^h(0,0) = h/2` by bisection, using that the center
/// value decreases in `L` (checked on every evaluation).
pub fn find_l(
    alpha: f64,
    w: f64,
    h: f64,
    grid: GridDims,
    cfg: &SolverConfig,
    shoot: &ShootingConfig,
) -> Result<ShootingResult, FamilyError> {
    find_l_from(alpha, w, h, grid, cfg, shoot, None)
}

/// [`find_l`] with a warm start for the first solve.
pub fn find_l_from(
    alpha: f64,
    w: f64,
    h: f64,
    grid: GridDims,
    cfg: &SolverConfig,
    shoot: &ShootingConfig,
    guess: Option<&ScalarField>,
) -> Result<ShootingResult, FamilyError> {
    check_angle(alpha)?;
    check_positive("w", w)?;
    check_positive("h", h)?;
    if w >= PI {
        return Err(FamilyError::InvalidParameter(format!(
            "Scherk cells need w < π, got {w}"
        )));
    }
    let [mut lo, mut hi] = shoot.bracket.unwrap_or_else(|| default_bracket(alpha, w));
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(FamilyError::InvalidParameter(format!("bad bracket [{lo}, {hi}]")));
    }
    let mut samples = Vec::new();
    let mut warm: Option<ScalarField> = guess.cloned();
    let eval = |l: f64, samples: &mut Vec<(f64, f64)>, warm: &mut Option<ScalarField>| {
        let (u, report) = solve_scherk_cell_from(alpha, w, l, h, grid, cfg, warm.as_ref())?;
        let c = center_value(&u)?;
        insert_sample(samples, l, c)?;
        *warm = Some(u.clone());
        Ok::<_, FamilyError>((c, u, report))
    };
    let (c_lo, u_lo, r_lo) = eval(lo, &mut samples, &mut warm)?;
    let (c_hi, u_hi, r_hi) = eval(hi, &mut samples, &mut warm)?;
    let (f_lo, f_hi) = (c_lo - 0.5 * h, c_hi - 0.5 * h);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(FamilyError::Bracket { lo, hi, f_lo, f_hi });
    }
    let mut best = if f_lo.abs() < f_hi.abs() {
        (lo, c_lo, u_lo, r_lo)
    } else {
        (hi, c_hi, u_hi, r_hi)
    };
    for _ in 0..shoot.max_bisections {
        if (best.1 - 0.5 * h).abs() <= shoot.center_tol || hi - lo <= shoot.length_rtol * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (c, u, r) = eval(mid, &mut samples, &mut warm)?;
        let f = c - 0.5 * h;
        if f.abs() < (best.1 - 0.5 * h).abs() {
            best = (mid, c, u, r);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (l, center, field, report) = best;
    Ok(ShootingResult {
        l,
        center,
        samples,
        field,
        report,
    })
}

/// Both sides of the flux identity `2L - 2w/sinα = ∬ 1/W` on a Scherk cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub flux_lhs: f64,
    pub flux_rhs: f64,
    pub mismatch: f64,
}

impl IdentityReport {
    pub fn evaluate(u: &ScalarField) -> Result<Self, FamilyError> {
        let d = u.grid.domain;
        let flux_lhs = 2.0 * d.length - 2.0 * d.w / d.alpha.sin();
        let flux_rhs = inverse_w_integral(u, &d)?;
        Ok(Self {
            flux_lhs,
            flux_rhs,
            mismatch: (flux_lhs - flux_rhs).abs() / flux_rhs,
        })
    }
}

/// `∬ (1 + |∇u|²)^{-1/2}` over `region`.
pub fn inverse_w_integral(u: &ScalarField, region: &PlanarDomain) -> Result<f64, FamilyError> {
    Ok(cell_integral(u, region, |_, p, q| 1.0 / (1.0 + p * p + q * q).sqrt())?)
}

#[derive(Clone, Debug)]
pub struct ScherkResult {
    pub alpha: f64,
    pub w: f64,
    pub l_estimate: f64,
    pub h_schedule: Vec<f64>,
    pub l_per_h: Vec<f64>,
    /// `|L(h_k) - L(h_{k-1})|` for `k ≥ 1`.
    pub increments: Vec<f64>,
    pub identity_per_h: Vec<IdentityReport>,
    /// Identity on the final field.
    pub identity: IdentityReport,
    pub field: ScalarField,
}

/// Runs [`find_l`] along an increasing `h` schedule with warm starts and
/// reports the last `L(h)` as the estimate of `L(α, w)`.
pub fn estimate_scherk(
    alpha: f64,
    w: f64,
    h_schedule: &[f64],
    grid: GridDims,
    cfg: &SolverConfig,
    shoot: &ShootingConfig,
) -> Result<ScherkResult, FamilyError> {
    if h_schedule.len() < 3 {
        return Err(FamilyError::InvalidParameter(format!(
            "h schedule needs at least 3 entries, got {}",
            h_schedule.len()
        )));
    }
    if h_schedule.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(FamilyError::InvalidParameter("h schedule must be increasing".into()));
    }
    let mut warm: Option<ScalarField> = None;
    let mut l_per_h = Vec::new();
    let mut identity_per_h = Vec::new();
    for &h in h_schedule {
        let res = find_l_from(alpha, w, h, grid, cfg, shoot, warm.as_ref())?;
        identity_per_h.push(IdentityReport::evaluate(&res.field)?);
        l_per_h.push(res.l);
        warm = Some(res.field);
    }
    let increments = l_per_h.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let field = warm.expect("schedule is non-empty");
    Ok(ScherkResult {
        alpha,
        w,
        l_estimate: *l_per_h.last().unwrap(),
        h_schedule: h_schedule.to_vec(),
        l_per_h,
        increments,
        identity: *identity_per_h.last().unwrap(),
        identity_per_h,
        field,
    })
}

/// Per-node profile along an edge of `grid`, evaluated at planar points.
fn edge_profile(grid: &Grid, edge: Edge, mut f: impl FnMut(f64, f64) -> Result<f64, FamilyError>) -> Result<EdgeData, FamilyError> {
    let samples = grid
        .edge_nodes(edge)
        .into_iter()
        .map(|(i, j)| {
            let [x, y] = grid.node_xy(i, j);
            f(x, y)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EdgeData::Profile(samples))
}

/// Distance `δ` from a wall of the strip `(0, w)` at which `g_w` sits `h`
/// below its ridge, i.e. `g_w(x, δ) = -s·x - h`.
pub fn reaper_inset(w: f64, h: f64) -> f64 {
    let k = PI / w;
    (-h * k * k).exp().asin() / k
}

/// Far-field profile `f_j` with `u = -s·x + f_j` an exact solution of the
/// discrete operator on the rows of `grid`, pinned to `-h` on the first and
/// last rows. `y` is measured from the wall of the strip `(0, w)`, so the
/// rows should lie inside it.
fn discrete_reaper(grid: &Grid, w: f64, h: f64) -> Result<Vec<f64>, FamilyError> {
    let n = grid.n_t;
    let p = TiltedReaperParams::new(w, Tilt::Down)?;
    let mut f = (0..n)
        .map(|j| {
            let [x, y] = grid.node_xy(0, j);
            Ok(p.eval(x, y)?.0 + tilt_slope(w) * x)
        })
        .collect::<Result<Vec<_>, FamilyError>>()?;
    f[0] = -h;
    f[n - 1] = -h;
    let sp = ChartSpacing { ds: grid.ds(), dt: grid.dt(), shear: grid.domain.shear() };
    let m = -tilt_slope(w);
    let stencil = |f: &[f64], j: usize| {
        let mut v = [0.0; 9];
        for (slot, val) in v.iter_mut().enumerate() {
            let (di, dj) = (slot as isize % 3 - 1, slot as isize / 3 - 1);
            let row = (j as isize + dj) as usize;
            *val = m * (di as f64 * sp.ds + sp.shear * dj as f64 * sp.dt) + f[row];
        }
        NodeStencil::new(&v, sp)
    };
    let residual = |f: &[f64]| (1..n - 1).map(|j| stencil(f, j).residual().abs()).fold(0.0, f64::max);
    let mut res = residual(&f);
    for _ in 0..50 {
        if res < 1e-12 {
            return Ok(f);
        }
        // tridiagonal Newton step
        let k = n - 2;
        let (mut a, mut b, mut c, mut r) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for j in 1..n - 1 {
            let (rj, jac) = stencil(&f, j).jacobian();
            let row = |dj: usize| (0..3).map(|di| jac[3 * dj + di]).sum::<f64>();
            a[j - 1] = row(0);
            b[j - 1] = row(1);
            c[j - 1] = row(2);
            r[j - 1] = -rj;
        }
        for q in 1..k {
            let l = a[q] / b[q - 1];
            b[q] -= l * c[q - 1];
            r[q] -= l * r[q - 1];
        }
        let mut d = vec![0.0; k];
        d[k - 1] = r[k - 1] / b[k - 1];
        for q in (0..k - 1).rev() {
            d[q] = (r[q] - c[q] * d[q + 1]) / b[q];
        }
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = f
                .iter()
                .enumerate()
                .map(|(j, v)| if j == 0 || j == n - 1 { *v } else { v + lambda * d[j - 1] })
                .collect();
            let tr = residual(&trial);
            if tr < res || lambda < 1e-6 {
                f = trial;
                res = tr;
                break;
            }
            lambda *= 0.5;
        }
    }
    if res < 1e-10 {
        Ok(f)
    } else {
        Err(FamilyError::ReaperProfile { residual: res })
    }
}

/// Right-edge data: the discrete tilted reaper of [`discrete_reaper`], so
/// that the far field needs no boundary layer to adjust to it.
fn reaper_edge(grid: &Grid, w: f64, h: f64) -> Result<EdgeData, FamilyError> {
    let f = discrete_reaper(grid, w, h)?;
    let s = tilt_slope(w);
    Ok(EdgeData::Profile(
        grid.edge_nodes(Edge::Right)
            .into_iter()
            .map(|(i, j)| -s * grid.node_xy(i, j)[0] + f[j])
            .collect(),
    ))
}

/// Region used by [`solve_scherkenoid`]: `P(α, w, c)` with its horizontal
/// edges moved inward to the inset lines `y = δ(h)` and `y = w - δ(h)`.
pub fn scherkenoid_domain(alpha: f64, w: f64, c: f64, h: f64) -> Result<PlanarDomain, FamilyError> {
    let delta = reaper_inset(w, h);
    let inner = PlanarDomain::parallelogram(alpha, w - 2.0 * delta, c)?;
    Ok(inner.translated(delta / alpha.tan(), delta))
}

/// Exponent `β` of the graph `u ≈ -β log d + β log sin(π y / w)` next to a
/// `+∞` edge of length `e` (`d` the distance to the edge line): the sheet
/// `d ∝ e^{-z/β} sin(π y / w)` solves the translator equation linearized
/// about the vertical plane over the edge iff `(π/e)² = 1/β + 1/β²`.
pub fn cap_exponent(edge_length: f64) -> f64 {
    let kappa = (PI / edge_length).powi(2);
    (1.0 + (1.0 + 4.0 * kappa).sqrt()) / (2.0 * kappa)
}

/// Boundary data used by [`solve_scherkenoid`]: `h + β log sin(π y / w)` on
/// the left edge (see [`cap_exponent`]), clipped below at the adjacent wall
/// value, `ℓ(x) - h` on the inset horizontal
/// edges, where `g_w` takes that value, and the discrete tilted reaper on the
/// right edge.
pub fn scherkenoid_boundary(grid: &Grid, w: f64, h: f64) -> Result<BoundarySpec, FamilyError> {
    let s = tilt_slope(w);
    let level = |x: f64, _y: f64| Ok(-s * x - h);
    let k = grid.domain.shear();
    let beta = cap_exponent(w * (1.0 + k * k).sqrt());
    let cap = |x: f64, y: f64| Ok((h + beta * (PI * y / w).sin().ln()).max(-s * x - h));
    Ok(BoundarySpec::new([
        edge_profile(grid, Edge::Bottom, level)?,
        reaper_edge(grid, w, h)?,
        edge_profile(grid, Edge::Top, level)?,
        edge_profile(grid, Edge::Left, cap)?,
    ]))
}

/// Scherkenoid approximation on `P(α, w, c)` (lower-left corner at the
/// origin). The horizontal walls, where the graph tends to `-∞`, are replaced
/// by the lines on which the limiting tilted reaper `g_w` equals `ℓ(x) - h`;
/// this keeps `g_w` an exact solution of the truncated far field.
pub fn solve_scherkenoid(
    alpha: f64,
    w: f64,
    c: f64,
    h: f64,
    grid: GridDims,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport), FamilyError> {
    check_angle(alpha)?;
    check_positive("h", h)?;
    if !(w.is_finite() && w >= PI) {
        return Err(AnalyticError::WidthBelowPi(w).into());
    }
    if !(c.is_finite() && c >= w) {
        return Err(FamilyError::InvalidParameter(format!(
            "truncation c = {c} must be at least the width {w}"
        )));
    }
    let domain = scherkenoid_domain(alpha, w, c, h)?;
    let g = Grid::new(domain, grid.0, grid.1)?;
    let bc = scherkenoid_boundary(&g, w, h)?;
    let guess = scherkenoid_guess(&g, &bc, w, h)?;
    Ok(solve_dirichlet(domain, &bc, grid, cfg, Some(&guess))?)
}

/// Discrete tilted reaper plus the left-edge mismatch, decaying away from
/// that edge.
fn scherkenoid_guess(grid: &Grid, bc: &BoundarySpec, w: f64, h: f64) -> Result<ScalarField, FamilyError> {
    let f = discrete_reaper(grid, w, h)?;
    let slope = tilt_slope(w);
    let decay = w / PI;
    let mut values = vec![0.0; grid.len()];
    for j in 0..grid.n_t {
        let far = |i: usize| -slope * grid.node_xy(i, j)[0] + f[j];
        let jump = bc.node_value(grid, 0, j)?.unwrap_or(0.0) - far(0);
        for i in 0..grid.n_s {
            let s = i as f64 * grid.ds();
            values[grid.index(i, j)] = far(i) + jump * (-s / decay).exp();
        }
    }
    Ok(ScalarField::new(*grid, values)?)
}

/// Outcome of the helicoid-like axis iteration.
#[derive(Clone, Debug)]
pub struct HelicoidResult {
    pub field: ScalarField,
    pub x_hat: f64,
    /// `x̂_k` for `k = 0, 1, ...`; the last entry is `x_hat`.
    pub iterates: Vec<f64>,
    pub report: SolveReport,
}

/// Boundary data of the helicoid-like problem on `[-a, a] × [0, w]` for a
/// given axis offset.
pub fn helicoid_boundary(a: f64, big_h: f64, x_hat: f64) -> Result<BoundarySpec, FamilyError> {
    let at = |x: f64| ((x + a) / (2.0 * a)).clamp(0.0, 1.0);
    Ok(BoundarySpec::new([
        EdgeData::Split {
            at: at(0.0),
            before: EdgeValue::PlusInfinity,
            after: EdgeValue::MinusInfinity,
        },
        EdgeData::Profile(vec![-big_h, big_h]),
        EdgeData::Split {
            at: at(x_hat),
            before: EdgeValue::MinusInfinity,
            after: EdgeValue::PlusInfinity,
        },
        EdgeData::Profile(vec![big_h, -big_h]),
    ])
    .with_surrogate(big_h)?)
}

pub const MAX_AXIS_SWEEPS: usize = 20;

/// Helicoid-like translator on `[-a, a] × [0, w]`, `w < π`, with the axis
/// offset found by the fixed point `x̂ ← ½ ∬ 1/W` from `x̂ = 0`.
pub fn solve_helicoid_like(
    w: f64,
    a: f64,
    big_h: f64,
    grid: GridDims,
    cfg: &SolverConfig,
) -> Result<HelicoidResult, FamilyError> {
    check_positive("w", w)?;
    check_positive("a", a)?;
    check_positive("H", big_h)?;
    if w >= PI {
        return Err(FamilyError::InvalidParameter(format!(
            "helicoid-like translators need w < π, got {w}"
        )));
    }
    let domain = PlanarDomain::truncated_strip(-a, a, w)?;
    let spacing = Grid::new(domain, grid.0, grid.1)?.spacing();
    let mut iterates = vec![0.0];
    let mut increments: Vec<f64> = Vec::new();
    let mut warm: Option<ScalarField> = None;
    for _ in 0..MAX_AXIS_SWEEPS {
        let x_hat = *iterates.last().unwrap();
        let bc = helicoid_boundary(a, big_h, x_hat)?;
        let (u, report) = solve_dirichlet(domain, &bc, grid, cfg, warm.as_ref())?;
        let next = 0.5 * inverse_w_integral(&u, &domain)?;
        let inc = (next - x_hat).abs();
        iterates.push(next);
        increments.push(inc);
        let k = increments.len();
        if k > 2 && increments[k - 1] > increments[k - 2] {
            return Err(FamilyError::FixedPointDivergence { increments });
        }
        if inc < spacing {
            return Ok(HelicoidResult {
                field: u,
                x_hat: next,
                iterates,
                report,
            });
        }
        warm = Some(u);
    }
    Err(FamilyError::FixedPointDivergence { increments })
}

/// Corner angle of the pitchfork truncation of half-length `a`: the left
/// edge runs from the origin to `(-a, w)`.
pub fn pitchfork_alpha(w: f64, a: f64) -> f64 {
    PI - (w / a).atan()
}

/// Pitchfork approximation of half-length `a`, `w ≥ π`: the scherkenoid
/// piece over the parallelogram with corners `(0, 0)`, `(2a, 0)`, `(a, w)`
/// and `(-a, w)`, whose `+∞` edge tends to the negative x-axis as `a` grows.
/// Same walls, data and inset as [`solve_scherkenoid`] with `h = H`.
pub fn solve_pitchfork(
    w: f64,
    a: f64,
    big_h: f64,
    grid: GridDims,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport), FamilyError> {
    check_positive("a", a)?;
    if 2.0 * a < w {
        return Err(FamilyError::InvalidParameter(format!(
            "half-length a = {a} must be at least half the width {w}"
        )));
    }
    solve_scherkenoid(pitchfork_alpha(w, a), w, 2.0 * a, big_h, grid, cfg)
}

/// Shooting evidence at one `h` of a nonexistence probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub h: f64,
    /// `(L, u_L^h(0,0))` at each sampled length.
    pub samples: Vec<(f64, f64)>,
    /// Smallest sampled center value.
    pub min_center: f64,
    /// Whether `u(0,0) - h/2` changes sign over the samples.
    pub sign_change: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub w: f64,
    pub alpha: f64,
    pub levels: Vec<ProbeLevel>,
}

impl ProbeReport {
    /// Sign change at the largest `h` of the schedule.
    pub fn final_sign_change(&self) -> bool {
        self.levels.last().is_some_and(|l| l.sign_change)
    }

    /// `min_L u_L^h(0,0) - h/2` at each `h`: stays positive when shooting
    /// cannot succeed.
    pub fn margins(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.min_center - 0.5 * l.h).collect()
    }
}

/// Runs the Scherk-cell pipeline over sampled lengths and reports whether
/// the shooting condition `u(0,0) = h/2` can be bracketed at each `h`.
pub fn nonexistence_probe(
    alpha: f64,
    w: f64,
    lengths: &[f64],
    h_schedule: &[f64],
    grid: GridDims,
    cfg: &SolverConfig,
) -> Result<ProbeReport, FamilyError> {
    check_angle(alpha)?;
    if lengths.is_empty() || h_schedule.is_empty() {
        return Err(FamilyError::InvalidParameter("empty L or h sample".into()));
    }
    let mut levels = Vec::new();
    // first-length solution of the previous level, rescaled to the next h
    let mut seed: Option<(f64, ScalarField)> = None;
    for &h in h_schedule {
        let mut samples = Vec::new();
        let mut warm = match seed.take() {
            Some((h0, u0)) => {
                let vals = u0.values().iter().map(|v| v * h / h0).collect();
                Some(ScalarField::new(u0.grid, vals)?)
            }
            None => None,
        };
        for (k, &l) in lengths.iter().enumerate() {
            let (u, _) = solve_scherk_cell_from(alpha, w, l, h, grid, cfg, warm.as_ref())?;
            samples.push((l, center_value(&u)?));
            if k == 0 {
                seed = Some((h, u.clone()));
            }
            warm = Some(u);
        }
        let min_center = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let pos = samples.iter().any(|s| s.1 > 0.5 * h);
        let neg = samples.iter().any(|s| s.1 < 0.5 * h);
        levels.push(ProbeLevel {
            h,
            samples,
            min_center,
            sign_change: pos && neg,
        });
    }
    Ok(ProbeReport { w, alpha, levels })
}
