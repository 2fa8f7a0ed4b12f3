//! Fixtures shared by the benchmarks.

use pgg_core::casestudy::random_er_game;
use pgg_core::{Game, Matrix, ScalarFunction};

/// Clipped-quadratic game on an Erdős–Rényi network with expected degree 1.
pub fn er_game(n: usize, seed: u64) -> Game {
    random_er_game(n, 1.0, 3.0, 1.0, 1.0, seed).expect("valid parameters")
}

/// Log values on a banded network with weak, alternating-sign spillovers.
pub fn banded_log_game(n: usize) -> Game {
    let w = Matrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.2,
        2 => -0.1,
        _ => 0.0,
    });
    let value = ScalarFunction::log_value(2.0, 2.0);
    Game::homogeneous(w, 0.0, 2.0, value, ScalarFunction::quadratic_cost(1.5)).expect("valid game")
}

/// Dense symmetric matrix with entries in `[0, 1]` and a well separated top
/// singular value.
pub fn dense_symmetric(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| 0.5 + 0.5 * (((i + 1) * (j + 1)) as f64 * 0.37).sin())
}
