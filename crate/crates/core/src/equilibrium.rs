//! Nash equilibrium computation and verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg::{dist_inf, sigma_max, Matrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200_000;
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-4;
pub const STEP_MIN: f64 = 1e-4;
pub const STEP_MAX: f64 = 1e-1;
/// Largest grid the oracle will enumerate.
pub const GRID_LIMIT: f64 = 1e7;
pub const GRID_MAX_PLAYERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub x_star: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_gap: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Per-player scaling; all ones when `None`.
    pub gamma: Option<Vec<f64>>,
    /// Step ε; [`default_step`] when `None`.
    pub step_eps: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { gamma: None, step_eps: None, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeCheck {
    pub is_ne: bool,
    pub gap: f64,
    pub worst: usize,
}

/// `0.5 / (1 + σ_max(J̄))` clipped to `[1e-4, 1e-1]`, where
/// `J̄_ij = γ_i (L¹(f_i)|w_ij| + [i = j] L¹(c_i))` bounds the Jacobian of the
/// scaled pseudo-gradient over the box.
pub fn default_step(game: &Game, gamma: &[f64]) -> Result<f64> {
    let n = game.n();
    let b = game.gain_bounds();
    let mut lf = Vec::with_capacity(n);
    let mut lc = Vec::with_capacity(n);
    for i in 0..n {
        lf.push(game.values()[i].smoothness(b.k_lo[i], b.k_hi[i])?.lipschitz_d1);
        lc.push(game.costs()[i].smoothness(game.lower()[i], game.upper()[i])?.lipschitz_d1);
    }
    let j =
        Matrix::from_fn(n, n, |i, k| gamma[i] * (lf[i] * game.w()[(i, k)].abs() + if i == k { lc[i] } else { 0.0 }));
    let sigma = sigma_max(&j, 1e-10)?;
    Ok((0.5 / (1.0 + sigma)).clamp(STEP_MIN, STEP_MAX))
}

fn resolve_gamma(game: &Game, gamma: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    match gamma {
        None => Ok(vec![1.0; game.n()]),
        Some(g) if g.len() != game.n() => Err(Error::Dimension { expected: game.n(), got: g.len() }),
        Some(g) if g.iter().any(|v| !(*v > 0.0 && v.is_finite())) => {
            Err(Error::InvalidParameter("gamma must be strictly positive".into()))
        }
        Some(g) => Ok(g.clone()),
    }
}

/// Projected fixed-point iteration `x ← Π_X(x + ε γ ⊙ ∇̃u(x))`.
pub fn solve_ne(game: &Game, x0: &[f64], opts: &SolveOptions) -> Result<SolveResult> {
    solve_ne_observed(game, x0, opts, |_, _| {})
}

/// As [`solve_ne`], calling `observe(k, x_k)` on every iterate including
/// the start.
pub fn solve_ne_observed(
    game: &Game,
    x0: &[f64],
    opts: &SolveOptions,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<SolveResult> {
    game.check_profile(x0)?;
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", opts.tol)));
    }
    let gamma = resolve_gamma(game, &opts.gamma)?;
    let eps = match opts.step_eps {
        Some(e) if !(e > 0.0 && e.is_finite()) => {
            return Err(Error::InvalidParameter(format!("step_eps must be > 0, got {e}")))
        }
        Some(e) => e,
        None => default_step(game, &gamma)?,
    };
    let mut x = x0.to_vec();
    game.project(&mut x);
    observe(0, &x);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let g = game.pseudo_gradient(&x)?;
        let mut next: Vec<f64> = x.iter().zip(&g).zip(&gamma).map(|((x, g), c)| x + eps * c * g).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Ok(SolveResult {
                x_star: x,
                status: SolveStatus::Diverged,
                iterations: it,
                final_gap: f64::INFINITY,
                residual: f64::INFINITY,
            });
        }
        game.project(&mut next);
        residual = dist_inf(&next, &x);
        x = next;
        observe(it, &x);
        if residual < opts.tol * eps {
            let final_gap = game.br_gap(&x)?.0;
            return Ok(SolveResult { x_star: x, status: SolveStatus::Converged, iterations: it, final_gap, residual });
        }
    }
    let final_gap = game.br_gap(&x)?.0;
    Ok(SolveResult { x_star: x, status: SolveStatus::MaxIter, iterations: opts.max_iter, final_gap, residual })
}

/// ε-NE test: accepts iff `br_gap(x) ≤ eps`.
pub fn verify_ne(game: &Game, x: &[f64], eps: f64) -> Result<NeCheck> {
    let (gap, worst) = game.br_gap(x)?;
    Ok(NeCheck { is_ne: gap <= eps, gap, worst })
}

/// Solves the games with costs `c_i(x) + β x²` along a decreasing schedule,
/// warm-starting each stage from the previous one. The reported gap is
/// measured in the original game.
pub fn solve_regularized(game: &Game, betas: &[f64], x0: &[f64], opts: &SolveOptions) -> Result<SolveResult> {
    if betas.is_empty() {
        return Err(Error::InvalidParameter("beta schedule is empty".into()));
    }
    if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidParameter("beta schedule must be positive".into()));
    }
    if betas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("beta schedule must be strictly decreasing".into()));
    }
    game.check_profile(x0)?;
    let mut x = x0.to_vec();
    let mut iterations = 0;
    let mut last = None;
    for &beta in betas {
        let costs = game.costs().iter().map(|c| c.clone().regularized(beta)).collect();
        let stage = game.with_costs(costs)?;
        let res = solve_ne(&stage, &x, opts)?;
        iterations += res.iterations;
        if res.status == SolveStatus::Diverged {
            return Err(Error::Solver(format!("regularized stage beta = {beta} diverged")));
        }
        x = res.x_star.clone();
        last = Some(res);
    }
    let last = last.expect("non-empty schedule");
    let final_gap = game.br_gap(&x)?.0;
    Ok(SolveResult { x_star: x, status: last.status, iterations, final_gap, residual: last.residual })
}

fn grid_axis(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|j| lo + (hi - lo) * (j as f64 / (m - 1) as f64)).collect()
}

/// Which deviations the grid oracle tests against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridDeviations {
    /// Moves to other grid points only. Finds grid-restricted equilibria,
    /// which include discretization artifacts near off-grid best responses.
    GridPoints,
    /// Grid points and the exact best response: the returned profiles are
    /// ε-equilibria of the game itself.
    #[default]
    Exact,
}

/// Every profile of the uniform `mⁿ` grid that is an ε-equilibrium of the
/// game.
pub fn grid_oracle(game: &Game, m: usize, eps: f64) -> Result<Vec<Vec<f64>>> {
    grid_oracle_with(game, m, eps, GridDeviations::Exact)
}

pub fn grid_oracle_with(game: &Game, m: usize, eps: f64, deviations: GridDeviations) -> Result<Vec<Vec<f64>>> {
    let n = game.n();
    if n > GRID_MAX_PLAYERS {
        return Err(Error::TooLarge(format!("grid oracle supports n <= {GRID_MAX_PLAYERS}, got {n}")));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("grid needs m >= 2, got {m}")));
    }
    if (m as f64).powi(n as i32) > GRID_LIMIT {
        return Err(Error::TooLarge(format!("{m}^{n} grid points exceed {GRID_LIMIT:e}")));
    }
    let axes: Vec<Vec<f64>> = (0..n).map(|i| grid_axis(game.lower()[i], game.upper()[i], m)).collect();
    let total = m.pow(n as u32);
    let profile = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = axes[i][idx % m];
            idx /= m;
        }
        x
    };
    let accept = |x: &[f64]| -> Result<bool> {
        for i in 0..n {
            let d = game.externality(i, x);
            let here = game.deviation_utility(i, x[i], d)?;
            for &y in &axes[i] {
                if game.deviation_utility(i, y, d)? - here > eps {
                    return Ok(false);
                }
            }
        }
        Ok(deviations == GridDeviations::GridPoints || game.br_gap(x)?.0 <= eps)
    };
    (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let x = profile(idx);
            match accept(&x) {
                Ok(true) => Some(Ok(x)),
                Ok(false) => None,
                Err(e) => Some(Err(e)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub representative: SolveResult,
    /// Index of the start that produced the representative.
    pub first_start: usize,
    pub members: usize,
}

/// Uniform start `idx` in the box, from stream `idx` of a seeded ChaCha8.
pub fn random_start(game: &Game, seed: u64, idx: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64);
    (0..game.n()).map(|i| rng.gen_range(game.lower()[i]..=game.upper()[i])).collect()
}

/// Runs [`solve_ne`] from `n_starts` seeded random starts and greedily
/// clusters the converged points in `‖·‖∞` at `cluster_tol`, in start order.
pub fn multi_start_probe(
    game: &Game,
    n_starts: usize,
    seed: u64,
    cluster_tol: f64,
    opts: &SolveOptions,
) -> Result<Vec<Cluster>> {
    if n_starts == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    let results: Vec<SolveResult> = (0..n_starts)
        .into_par_iter()
        .map(|idx| solve_ne(game, &random_start(game, seed, idx), opts))
        .collect::<Result<_>>()?;
    let mut clusters: Vec<Cluster> = Vec::new();
    for (idx, r) in results.into_iter().enumerate() {
        if r.status != SolveStatus::Converged {
            continue;
        }
        match clusters.iter_mut().find(|c| dist_inf(&c.representative.x_star, &r.x_star) <= cluster_tol) {
            Some(c) => c.members += 1,
            None => clusters.push(Cluster { representative: r, first_start: idx, members: 1 }),
        }
    }
    Ok(clusters)
}

/// Solves players `n, …, 1` in turn by exact best responses to the already
/// fixed higher-index efforts. Requires `w_ij = 0` for `i > j`.
pub fn backward_induction(game: &Game) -> Result<Vec<f64>> {
    if let Some((row, col, value)) = game.first_below_diagonal() {
        return Err(Error::NotUpperTriangular { row, col, value });
    }
    let n = game.n();
    let mut x = game.lower().to_vec();
    for i in (0..n).rev() {
        let d: f64 = (i + 1..n).map(|j| game.w()[(i, j)] * x[j]).sum();
        x[i] = game.best_response_to(i, d)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::ScalarFunction;
    use crate::presets;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        dist_inf(a, b) <= tol
    }

    #[test]
    fn single_player_solve() {
        let g = presets::single_player();
        for x0 in [0.0, 0.7, 2.0] {
            let r = solve_ne(&g, &[x0], &SolveOptions::default()).unwrap();
            assert_eq!(r.status, SolveStatus::Converged);
            assert!((r.x_star[0] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_sided_fixed_points() {
        let g = presets::two_sided();
        let r = solve_ne(&g, &[1.0, 1.0, 0.0, 0.0], &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.x_star, vec![1.0, 1.0, 0.0, 0.0]);
        let r = solve_ne(&g, &[0.43; 4], &SolveOptions::default()).unwrap();
        assert!(close(&r.x_star, &[3.0 / 7.0; 4], 1e-6), "{:?}", r.x_star);
    }

    #[test]
    fn verify_examples() {
        let g = presets::two_sided();
        assert!(verify_ne(&g, &[1.0, 1.0, 0.0, 0.0], 1e-8).unwrap().is_ne);
        assert!(verify_ne(&g, &[0.0, 0.0, 1.0, 1.0], 1e-8).unwrap().is_ne);
        let c = verify_ne(&g, &[1.0; 4], 1e-8).unwrap();
        assert!(!c.is_ne);
        assert!((c.gap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn default_step_is_clipped() {
        let g = presets::two_sided();
        let e = default_step(&g, &[1.0; 4]).unwrap();
        assert!((STEP_MIN..=STEP_MAX).contains(&e));
        // J̄ = 2|W| + I has σ_max = 2·3 + 1 = 7.
        assert!((e - 0.5 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn solver_rejects_bad_options() {
        let g = presets::single_player();
        let bad = SolveOptions { step_eps: Some(-1.0), ..Default::default() };
        assert!(solve_ne(&g, &[0.0], &bad).is_err());
        let bad = SolveOptions { gamma: Some(vec![1.0, 2.0]), ..Default::default() };
        assert!(solve_ne(&g, &[0.0], &bad).is_err());
        assert!(solve_ne(&g, &[3.0], &SolveOptions::default()).is_err());
    }

    #[test]
    fn max_iter_status() {
        let g = presets::single_player();
        let opts = SolveOptions { step_eps: Some(1e-4), max_iter: 3, ..Default::default() };
        let r = solve_ne(&g, &[0.0], &opts).unwrap();
        assert_eq!(r.status, SolveStatus::MaxIter);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn regularized_path_single_player() {
        let g = presets::single_player();
        let mut prev = 0.0;
        for beta in [1e-1, 1e-2, 1e-3] {
            let r = solve_regularized(&g, &[beta], &[0.0], &SolveOptions::default()).unwrap();
            let exact = 3.0 / (3.0 + 2.0 * beta);
            assert!((r.x_star[0] - exact).abs() < 1e-8);
            assert!(r.x_star[0] > prev);
            prev = r.x_star[0];
        }
        let direct = solve_ne(&g, &[0.0], &SolveOptions::default()).unwrap();
        let reg = solve_regularized(&g, &[1e-4, 1e-8, 1e-12], &[0.0], &SolveOptions::default()).unwrap();
        assert!(close(&direct.x_star, &reg.x_star, 1e-8));
    }

    #[test]
    fn regularized_schedule_checked() {
        let g = presets::single_player();
        let o = SolveOptions::default();
        assert!(solve_regularized(&g, &[], &[0.0], &o).is_err());
        assert!(solve_regularized(&g, &[1e-2, 1e-1], &[0.0], &o).is_err());
        assert!(solve_regularized(&g, &[0.0], &[0.0], &o).is_err());
    }

    #[test]
    fn grid_oracle_small_cases() {
        let g = presets::single_player();
        let pts = grid_oracle(&g, 101, 1e-8).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0][0] - 1.0).abs() < 1e-12);

        let sep = Game::homogeneous(Matrix::identity(2), 0.0, 2.0, presets::value(), presets::cost()).unwrap();
        assert_eq!(grid_oracle(&sep, 5, 1e-8).unwrap(), vec![vec![1.0, 1.0]]);

        assert!(matches!(grid_oracle(&g, 1, 1e-8), Err(Error::InvalidParameter(_))));
        // Off-grid optimum: no grid point is an exact equilibrium, but the
        // nearest grid point is a grid-restricted one.
        assert!(grid_oracle(&g, 4, 1e-8).unwrap().is_empty());
        let near = grid_oracle_with(&g, 4, 1e-8, GridDeviations::GridPoints).unwrap();
        assert_eq!(near, vec![vec![2.0 / 3.0], vec![4.0 / 3.0]]);
        let big = Game::homogeneous(Matrix::identity(7), 0.0, 2.0, presets::value(), presets::cost()).unwrap();
        assert!(matches!(grid_oracle(&big, 2, 1e-8), Err(Error::TooLarge(_))));
        let wide = Game::homogeneous(Matrix::identity(6), 0.0, 2.0, presets::value(), presets::cost()).unwrap();
        assert!(matches!(grid_oracle(&wide, 20, 1e-8), Err(Error::TooLarge(_))));
    }

    #[test]
    fn grid_restricted_artifacts() {
        let g = presets::two_sided();
        let exact = grid_oracle(&g, 15, 1e-8).unwrap();
        let loose = grid_oracle_with(&g, 15, 1e-8, GridDeviations::GridPoints).unwrap();
        assert_eq!(exact.len(), 3);
        // Two extra profiles with efforts 5/14 and 1/2: the continuous best
        // responses 1/3 and 11/21 are off the grid.
        assert_eq!(loose.len(), 5);
        assert!(loose.contains(&vec![5.0 / 14.0, 5.0 / 14.0, 0.5, 0.5]));
        let gap = g.br_gap(&[5.0 / 14.0, 5.0 / 14.0, 0.5, 0.5]).unwrap().0;
        assert!(gap > 1e-4);
    }

    #[test]
    fn probe_single_player() {
        let g = presets::single_player();
        let c = multi_start_probe(&g, 8, 7, DEFAULT_CLUSTER_TOL, &SolveOptions::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, 8);
        assert!((c[0].representative.x_star[0] - 1.0).abs() < 1e-9);
        assert!(multi_start_probe(&g, 0, 7, 1e-4, &SolveOptions::default()).is_err());
    }

    #[test]
    fn probe_is_deterministic() {
        let g = presets::two_sided();
        let o = SolveOptions::default();
        let a = multi_start_probe(&g, 12, 3, 1e-4, &o).unwrap();
        let b = multi_start_probe(&g, 12, 3, 1e-4, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(random_start(&g, 3, 5), random_start(&g, 3, 5));
        assert_ne!(random_start(&g, 3, 5), random_start(&g, 3, 6));
    }

    #[test]
    fn backward_induction_pair() {
        let g = presets::upper_triangular_pair();
        let x = backward_induction(&g).unwrap();
        assert!(close(&x, &[1.0 / 3.0, 1.0], 1e-10));
        assert!(verify_ne(&g, &x, 1e-8).unwrap().is_ne);
        let r = solve_ne(&g, &[0.0, 0.0], &SolveOptions::default()).unwrap();
        assert!(close(&r.x_star, &x, 1e-6));

        let sep = Game::homogeneous(Matrix::identity(3), 0.0, 2.0, presets::value(), presets::cost()).unwrap();
        assert!(close(&backward_induction(&sep).unwrap(), &[1.0; 3], 1e-10));

        let err = backward_induction(&presets::two_sided()).unwrap_err();
        assert!(matches!(err, Error::NotUpperTriangular { row: 2, col: 0, .. }));
    }

    #[test]
    fn linear_cost_regularized_path() {
        let w = Matrix::from_rows(&[vec![1.0, 0.5, 0.2], vec![0.3, 1.0, 0.4], vec![0.1, 0.2, 1.0]]).unwrap();
        let g = Game::homogeneous(w, 0.0, 2.0, presets::value(), ScalarFunction::linear_cost(1.0)).unwrap();
        let betas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
        let r = solve_regularized(&g, &betas, &[0.0; 3], &SolveOptions::default()).unwrap();
        assert!(verify_ne(&g, &r.x_star, 1e-4).unwrap().is_ne, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn converged_points_verify(w in 0.0f64..0.45, x0 in 0.0f64..2.0, x1 in 0.0f64..2.0) {
            let g = presets::symmetric_pair(w);
            let r = solve_ne(&g, &[x0, x1], &SolveOptions::default()).unwrap();
            prop_assert_eq!(r.status, SolveStatus::Converged);
            prop_assert!(verify_ne(&g, &r.x_star, 10.0 * DEFAULT_TOL).unwrap().is_ne);
        }

        #[test]
        fn backward_induction_ignores_solver_options(w12 in 0.0f64..1.0, eps in 1e-4f64..1e-1) {
            let m = Matrix::from_rows(&[vec![1.0, w12], vec![0.0, 1.0]]).unwrap();
            let g = Game::homogeneous(m, 0.0, 1.5, presets::value(), presets::cost()).unwrap();
            let a = backward_induction(&g).unwrap();
            let r = solve_ne(&g, &a, &SolveOptions { step_eps: Some(eps), ..Default::default() }).unwrap();
            prop_assert!(dist_inf(&a, &r.x_star) < 1e-6);
        }
    }
}
