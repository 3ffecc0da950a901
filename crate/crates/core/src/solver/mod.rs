//! Damped Newton solver for the Dirichlet problem of the translator equation
//! on a sheared structured grid.

mod banded;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundarySpec, GeometryError, Grid, PlanarDomain, ScalarField};
use crate::operator::{ChartSpacing, NodeStencil, OFFSETS};
use banded::BandMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sup-norm residual tolerance at interior nodes.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Armijo factor for the backtracking line search.
    pub sufficient_decrease: f64,
    pub max_halvings: usize,
    /// Fall back to a homotopy in the boundary data when Newton fails from
    /// the initial guess.
    pub continuation: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            sufficient_decrease: 1e-4,
            max_halvings: 30,
            continuation: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SolveError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 || self.max_halvings == 0 {
            return Err(SolveError::InvalidConfig(
                "iteration counts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Newton iterations summed over all homotopy stages.
    pub iterations: usize,
    pub final_residual: f64,
    pub damping_events: usize,
    pub grid: (usize, usize),
    pub residual_history: Vec<f64>,
    /// Homotopy stages used after a failed direct attempt (0 when none).
    pub continuation_stages: usize,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Newton iteration did not converge (residual {:.3e} after {} iterations)", .0.final_residual, .0.iterations)]
    NonConvergence(Box<SolveReport>),
    #[error("ill-posed problem: {0}")]
    IllPosed(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Unknown numbering for interior nodes, fast along the shorter direction
/// to keep the Jacobian bandwidth small.
struct Numbering {
    n_s: usize,
    m_s: usize,
    m_t: usize,
    t_fast: bool,
}

impl Numbering {
    fn new(grid: &Grid) -> Self {
        let m_s = grid.n_s - 2;
        let m_t = grid.n_t - 2;
        Self {
            n_s: grid.n_s,
            m_s,
            m_t,
            t_fast: m_t <= m_s,
        }
    }

    fn len(&self) -> usize {
        self.m_s * self.m_t
    }

    fn bandwidth(&self) -> usize {
        if self.t_fast {
            self.m_t + 1
        } else {
            self.m_s + 1
        }
    }

    #[inline]
    fn unknown(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i > self.m_s || j > self.m_t {
            return None;
        }
        Some(if self.t_fast {
            (i - 1) * self.m_t + (j - 1)
        } else {
            (j - 1) * self.m_s + (i - 1)
        })
    }

    fn node(&self, k: usize) -> (usize, usize) {
        if self.t_fast {
            (k / self.m_t + 1, k % self.m_t + 1)
        } else {
            (k % self.m_s + 1, k / self.m_s + 1)
        }
    }

    fn node_index(&self, k: usize) -> usize {
        let (i, j) = self.node(k);
        j * self.n_s + i
    }
}

/// Coons-patch interpolation of boundary values into the interior.
pub fn transfinite_guess(grid: &Grid, boundary: &[f64]) -> Vec<f64> {
    let (n_s, n_t) = (grid.n_s, grid.n_t);
    let at = |i: usize, j: usize| boundary[grid.index(i, j)];
    let mut out = boundary.to_vec();
    let (c00, c10, c01, c11) = (at(0, 0), at(n_s - 1, 0), at(0, n_t - 1), at(n_s - 1, n_t - 1));
    for j in 1..n_t - 1 {
        let b = j as f64 / (n_t - 1) as f64;
        for i in 1..n_s - 1 {
            let a = i as f64 / (n_s - 1) as f64;
            let v = (1.0 - b) * at(i, 0) + b * at(i, n_t - 1) + (1.0 - a) * at(0, j) + a * at(n_s - 1, j)
                - ((1.0 - a) * (1.0 - b) * c00 + a * (1.0 - b) * c10 + (1.0 - a) * b * c01 + a * b * c11);
            out[grid.index(i, j)] = v;
        }
    }
    out
}

/// Fills `out` with the interior residual and returns its sup norm.
fn sup_residual(field: &ScalarField, num: &Numbering, sp: ChartSpacing, out: &mut [f64]) -> f64 {
    let mut m = 0.0_f64;
    for (k, slot) in out.iter_mut().enumerate() {
        let (i, j) = num.node(k);
        let v = NodeStencil::gather(field, i, j);
        let r = NodeStencil::new(&v, sp).residual();
        *slot = r;
        if r.is_nan() {
            return f64::INFINITY;
        }
        m = m.max(r.abs());
    }
    m
}

struct NewtonOutcome {
    converged: bool,
    iterations: usize,
    damping_events: usize,
    history: Vec<f64>,
}

/// Newton iteration on the interior values of `field`; boundary values stay
/// fixed.
fn newton(field: &mut ScalarField, cfg: &SolverConfig) -> NewtonOutcome {
    let grid = field.grid;
    let num = Numbering::new(&grid);
    let n = num.len();
    let sp = ChartSpacing::of(field);
    let bw = num.bandwidth();
    let mut residual = vec![0.0; n];
    let mut trial_res = vec![0.0; n];
    let mut history = Vec::new();
    let mut damping_events = 0;
    let l2 = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut norm = sup_residual(field, &num, sp, &mut residual);
    let mut energy = l2(&residual);
    history.push(norm);
    for it in 0..cfg.max_iterations {
        if norm <= cfg.tolerance {
            return NewtonOutcome {
                converged: true,
                iterations: it,
                damping_events,
                history,
            };
        }
        if !norm.is_finite() {
            break;
        }
        let mut jac = BandMatrix::zeros(n, bw, bw);
        for row in 0..n {
            let (i, j) = num.node(row);
            let v = NodeStencil::gather(field, i, j);
            let (_, d) = NodeStencil::new(&v, sp).jacobian();
            for (slot, (di, dj)) in OFFSETS.iter().enumerate() {
                let (ni, nj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                if let Some(col) = num.unknown(ni, nj) {
                    jac.add(row, col, d[slot]);
                }
            }
        }
        let Ok(lu) = jac.factor() else { break };
        let mut step: Vec<f64> = residual.iter().map(|r| -r).collect();
        lu.solve(&mut step);

        let base: Vec<f64> = (0..n).map(|k| field.values()[num.node_index(k)]).collect();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            {
                let vals = field.values_mut();
                for k in 0..n {
                    vals[num.node_index(k)] = base[k] + lambda * step[k];
                }
            }
            // accept a sufficient decrease of either the sup or the l2 norm:
            // a few stiff nodes near data jumps can pin the sup norm while
            // the rest of the field still converges
            let trial = sup_residual(field, &num, sp, &mut trial_res);
            let trial_l2 = l2(&trial_res);
            let factor = 1.0 - cfg.sufficient_decrease * lambda;
            if trial.is_finite() && (trial <= factor * norm || trial_l2 <= factor * energy) {
                norm = trial;
                energy = trial_l2;
                std::mem::swap(&mut residual, &mut trial_res);
                accepted = true;
                break;
            }
            lambda *= 0.5;
            damping_events += 1;
        }
        if !accepted {
            let vals = field.values_mut();
            for k in 0..n {
                vals[num.node_index(k)] = base[k];
            }
            return NewtonOutcome {
                converged: false,
                iterations: it + 1,
                damping_events,
                history,
            };
        }
        history.push(norm);
    }
    NewtonOutcome {
        converged: norm <= cfg.tolerance,
        iterations: cfg.max_iterations,
        damping_events,
        history,
    }
}

/// Solves `-Div(∇u/W) = 1/W` on `domain` with Dirichlet data `bc`.
///
/// Symbolic infinite edge values must carry a surrogate magnitude. The
/// initial guess, when given, must have the same grid dimensions; only its
/// interior values are used (it may live on a different domain, which is
/// how warm starts across parameter sweeps work). The default guess is the
/// transfinite interpolation of the boundary data.
pub fn solve_dirichlet(
    domain: PlanarDomain,
    bc: &BoundarySpec,
    (n_s, n_t): (usize, usize),
    cfg: &SolverConfig,
    initial_guess: Option<&ScalarField>,
) -> Result<(ScalarField, SolveReport), SolveError> {
    cfg.validate()?;
    let grid = Grid::new(domain, n_s, n_t)?;
    if !(domain.alpha > 0.0 && domain.alpha < std::f64::consts::PI)
        || !(domain.w > 0.0 && domain.length > 0.0)
        || !domain.origin.iter().all(|c| c.is_finite())
    {
        return Err(SolveError::IllPosed(format!("invalid domain {domain:?}")));
    }
    if !bc.is_finite() {
        return Err(SolveError::IllPosed(
            "infinite boundary values need a finite surrogate".into(),
        ));
    }
    let boundary = bc.node_values(&grid)?;
    if boundary.iter().any(|v| v.is_infinite()) {
        return Err(SolveError::IllPosed("non-finite boundary data".into()));
    }

    let start = match initial_guess {
        Some(g) if (g.grid.n_s, g.grid.n_t) != (n_s, n_t) => {
            return Err(SolveError::IllPosed(format!(
                "initial guess is {}x{}, grid is {n_s}x{n_t}",
                g.grid.n_s, g.grid.n_t
            )))
        }
        Some(g) => boundary
            .iter()
            .zip(g.values())
            .map(|(b, v)| if b.is_nan() { *v } else { *b })
            .collect(),
        None => transfinite_guess(&grid, &boundary),
    };
    let mut field = ScalarField::new(grid, start)?;
    let mut report = SolveReport {
        grid: (n_s, n_t),
        ..Default::default()
    };
    let first = newton(&mut field, cfg);
    report.iterations += first.iterations;
    report.damping_events += first.damping_events;
    report.residual_history.extend(&first.history);
    let mut converged = first.converged;

    if !converged && cfg.continuation {
        converged = homotopy(&mut field, &boundary, cfg, &mut report);
    }
    report.converged = converged;
    report.final_residual = report.residual_history.last().copied().unwrap_or(f64::INFINITY);
    if converged {
        Ok((field, report))
    } else {
        Err(SolveError::NonConvergence(Box::new(report)))
    }
}

/// Boundary-data homotopy `λ·b`, `λ: 0 → 1`, with step halving on failure.
fn homotopy(field: &mut ScalarField, boundary: &[f64], cfg: &SolverConfig, report: &mut SolveReport) -> bool {
    let grid = field.grid;
    let set_boundary = |f: &mut ScalarField, lambda: f64| {
        let vals = f.values_mut();
        for (v, b) in vals.iter_mut().zip(boundary) {
            if !b.is_nan() {
                *v = lambda * b;
            }
        }
    };
    let scaled: Vec<f64> = boundary.iter().map(|b| if b.is_nan() { *b } else { 0.0 }).collect();
    *field = ScalarField::new(grid, transfinite_guess(&grid, &scaled)).expect("finite guess");
    let mut lambda: f64 = 0.0;
    let mut step: f64 = 0.25;
    let mut last_good = field.clone();
    // solve the λ = 0 problem first
    let stage = |f: &mut ScalarField, report: &mut SolveReport| {
        let out = newton(f, cfg);
        report.iterations += out.iterations;
        report.damping_events += out.damping_events;
        report.residual_history.extend(&out.history);
        report.continuation_stages += 1;
        out.converged
    };
    if !stage(field, report) {
        return false;
    }
    last_good.clone_from(field);
    while lambda < 1.0 {
        let next = (lambda + step).min(1.0);
        field.clone_from(&last_good);
        set_boundary(field, next);
        if stage(field, report) {
            lambda = next;
            last_good.clone_from(field);
            step = (step * 1.5).min(0.5);
        } else {
            step *= 0.5;
            if step < 1.0 / 256.0 {
                return false;
            }
        }
    }
    true
}
