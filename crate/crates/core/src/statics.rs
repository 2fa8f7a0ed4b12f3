//! Comparative statics of money redistribution: values `f_i(k_i + δ_i t)`
//! and the derivatives of equilibrium efforts and utilities at `t = 0`.

use serde::Serialize;

use crate::equilibrium::{solve_ne, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg::{dist_inf, norm_inf, residual_inf, solve, Matrix};

/// Largest own-gradient accepted at an interior equilibrium.
pub const STATIONARITY_TOL: f64 = 1e-8;
/// Smallest distance to the box faces accepted at an interior equilibrium.
pub const MIN_BOUNDARY_MARGIN: f64 = 1e-6;
/// Tolerance on `c'(x*) = f'(k*)`.
pub const IDENTITY_TOL: f64 = 1e-6;
pub const KINK_WARNING_DIST: f64 = 1e-6;
/// Re-solved equilibria moving more than this multiple of `t` are flagged.
pub const JUMP_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticsResult {
    pub du_dt: Vec<f64>,
    pub dx_dt: Vec<f64>,
    /// Largest 1-norm condition estimate of the two linear systems.
    pub condition_number: f64,
    /// Largest `‖Ax − b‖∞` of the two linear solves.
    pub residual: f64,
    pub boundary_margin: f64,
    /// Some equilibrium gain sits within `1e-6` of a value kink.
    pub kink_warning: bool,
}

/// Replaces each value `f_i(k)` by `f_i(k + δ_i t)`.
pub fn perturb_money(game: &Game, delta: &[f64], t: f64) -> Result<Game> {
    if delta.len() != game.n() {
        return Err(Error::Dimension { expected: game.n(), got: delta.len() });
    }
    let values = game.values().iter().zip(delta).map(|(f, d)| f.clone().reparam(1.0, -d * t)).collect();
    game.with_values(values)
}

struct Local {
    fp: Vec<f64>,
    fpp: Vec<f64>,
    cp: Vec<f64>,
    cpp: Vec<f64>,
    margin: f64,
    kink_warning: bool,
}

fn local_derivatives(game: &Game, x: &[f64], delta: &[f64]) -> Result<Local> {
    let n = game.n();
    game.check_profile(x)?;
    if delta.len() != n {
        return Err(Error::Dimension { expected: n, got: delta.len() });
    }
    let margin = (0..n).map(|i| (x[i] - game.lower()[i]).min(game.upper()[i] - x[i])).fold(f64::INFINITY, f64::min);
    if margin <= MIN_BOUNDARY_MARGIN {
        return Err(Error::Precondition(format!("equilibrium is on the boundary (margin {margin:e})")));
    }
    let grad = game.pseudo_gradient(x)?;
    if let Some(i) = grad.iter().position(|g| g.abs() > STATIONARITY_TOL) {
        return Err(Error::Precondition(format!("x is not stationary: own gradient {:e} for player {i}", grad[i])));
    }
    let k = game.gains(x)?;
    let mut l =
        Local { fp: vec![0.0; n], fpp: vec![0.0; n], cp: vec![0.0; n], cpp: vec![0.0; n], margin, kink_warning: false };
    for i in 0..n {
        let f = game.value_at(i, k[i])?;
        let c = game.costs()[i].eval(x[i])?;
        l.fp[i] = f.d1;
        l.fpp[i] = f.d2;
        l.cp[i] = c.d1;
        l.cpp[i] = c.d2;
        l.kink_warning |= game.values()[i].kinks().iter().any(|kk| (k[i] - kk).abs() < KINK_WARNING_DIST);
    }
    Ok(l)
}

fn dx_system(game: &Game, l: &Local, delta: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let n = game.n();
    let w = game.w();
    let a = Matrix::from_fn(n, n, |i, j| if i == j { l.cpp[i] } else { 0.0 } - l.fpp[i] * w[(i, j)]);
    let rhs: Vec<f64> = (0..n).map(|i| l.fpp[i] * delta[i]).collect();
    let (x, cond) = solve(&a, &rhs)?;
    let res = residual_inf(&a, &x, &rhs);
    Ok((x, cond, res))
}

/// `dx*/dt(0) = [diag(c'') − diag(f'')W]⁻¹ diag(f'') δ` at an interior
/// equilibrium. Returns the derivative and the condition estimate.
pub fn equilibrium_derivative(game: &Game, x_star: &[f64], delta: &[f64]) -> Result<(Vec<f64>, f64)> {
    let l = local_derivatives(game, x_star, delta)?;
    let (dx, cond, _) = dx_system(game, &l, delta)?;
    Ok((dx, cond))
}

/// `u'(0) = diag(f') diag(c'' − f'') [diag(c'') − W diag(f'')]⁻¹ δ`,
/// together with `dx*/dt(0)`.
pub fn utility_derivative(game: &Game, x_star: &[f64], delta: &[f64]) -> Result<StaticsResult> {
    let l = local_derivatives(game, x_star, delta)?;
    let n = game.n();
    if let Some(i) = (0..n).find(|&i| (l.cp[i] - l.fp[i]).abs() > IDENTITY_TOL) {
        return Err(Error::Precondition(format!(
            "c'(x*) = {} differs from f'(k*) = {} for player {i}",
            l.cp[i], l.fp[i]
        )));
    }
    let (dx, cond_x, res_x) = dx_system(game, &l, delta)?;
    let w = game.w();
    let m = Matrix::from_fn(n, n, |i, j| if i == j { l.cpp[i] } else { 0.0 } - w[(i, j)] * l.fpp[j]);
    let (y, cond_u) = solve(&m, delta)?;
    let res_u = residual_inf(&m, &y, delta);
    let du = (0..n).map(|i| l.fp[i] * (l.cpp[i] - l.fpp[i]) * y[i]).collect();
    Ok(StaticsResult {
        du_dt: du,
        dx_dt: dx,
        condition_number: cond_x.max(cond_u),
        residual: res_x.max(res_u),
        boundary_margin: l.margin,
        kink_warning: l.kink_warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub t: f64,
    pub closed: StaticsResult,
    pub du_fd: Vec<f64>,
    pub dx_fd: Vec<f64>,
    /// `‖fd − closed‖∞ / ‖closed‖∞` (absolute when the closed form vanishes).
    pub rel_err_u: f64,
    pub rel_err_x: f64,
    /// A re-solved equilibrium moved more than `100·t` from the warm start.
    pub jumped: bool,
}

fn rel_err(fd: &[f64], closed: &[f64]) -> f64 {
    let scale = norm_inf(closed);
    let diff = dist_inf(fd, closed);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Central differences of re-solved equilibria at `±t` against the closed
/// forms.
pub fn fd_check(game: &Game, x_star: &[f64], delta: &[f64], t: f64) -> Result<FdReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be > 0, got {t}")));
    }
    let closed = utility_derivative(game, x_star, delta)?;
    let opts = SolveOptions { tol: 1e-13, max_iter: 1_000_000, ..Default::default() };
    let side = |s: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let g = perturb_money(game, delta, s)?;
        let r = solve_ne(&g, x_star, &opts)?;
        if r.status != SolveStatus::Converged {
            return Err(Error::Solver(format!("perturbed solve at t = {s} ended with {:?}", r.status)));
        }
        let (u, _) = g.utilities(&r.x_star)?;
        Ok((r.x_star, u))
    };
    let (plus, minus) = rayon::join(|| side(t), || side(-t));
    let ((xp, up), (xm, um)) = (plus?, minus?);
    let jumped = dist_inf(&xp, x_star).max(dist_inf(&xm, x_star)) > JUMP_FACTOR * t;
    let du_fd: Vec<f64> = up.iter().zip(&um).map(|(a, b)| (a - b) / (2.0 * t)).collect();
    let dx_fd: Vec<f64> = xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * t)).collect();
    Ok(FdReport {
        t,
        rel_err_u: rel_err(&du_fd, &closed.du_dt),
        rel_err_x: rel_err(&dx_fd, &closed.dx_dt),
        closed,
        du_fd,
        dx_fd,
        jumped,
    })
}
