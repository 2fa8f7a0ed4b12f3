//! Reference games used throughout the tests, benches and CLI.
//!
//! All of them use the clipped quadratic value `3k − k²` (peak at 1.5) and
//! the quadratic cost `x²/2`.

use crate::functions::ScalarFunction;
use crate::game::Game;
use crate::linalg::Matrix;

pub fn value() -> ScalarFunction {
    ScalarFunction::quadratic_clipped(3.0, 1.0)
}

pub fn cost() -> ScalarFunction {
    ScalarFunction::quadratic_cost(1.0)
}

/// One player on `[0, 2]`; the unique equilibrium is `x = 1`.
pub fn single_player() -> Game {
    Game::homogeneous(Matrix::identity(1), 0.0, 2.0, value(), cost()).expect("valid preset")
}

/// Four players on two sides; every cross-side pair has unit marginal
/// gain. Efforts live in `[0, 1]`. Equilibria include `(1,1,0,0)`,
/// `(0,0,1,1)` and the symmetric interior point `(3/7)·1`.
pub fn two_sided() -> Game {
    let w = Matrix::from_rows(&[
        vec![1.0, 0.0, 1.0, 1.0],
        vec![0.0, 1.0, 1.0, 1.0],
        vec![1.0, 1.0, 1.0, 0.0],
        vec![1.0, 1.0, 0.0, 1.0],
    ])
    .expect("square");
    Game::homogeneous(w, 0.0, 1.0, value(), cost()).expect("valid preset")
}

/// `W = [[1, 1], [0, 1]]` on `[0, 1.5]`; equilibrium `(1/3, 1)`.
pub fn upper_triangular_pair() -> Game {
    let w = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).expect("square");
    Game::homogeneous(w, 0.0, 1.5, value(), cost()).expect("valid preset")
}

/// Two players with symmetric cross weight `w` on `[0, 2]`.
pub fn symmetric_pair(w: f64) -> Game {
    let m = Matrix::from_rows(&[vec![1.0, w], vec![w, 1.0]]).expect("square");
    Game::homogeneous(m, 0.0, 2.0, value(), cost()).expect("valid preset")
}
