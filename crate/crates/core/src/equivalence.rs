//! Affine game equivalence: efforts `x² = d ⊙ x¹ + b` with
//! `W² = D W¹ D⁻¹` preserve every utility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg::Matrix;

/// Induced bounds beyond this magnitude are rejected.
pub const MAX_INDUCED_BOUND: f64 = 1e12;
/// Fraction of the admissible normalizer scale used in auto mode.
pub const AUTO_EPS_FRACTION: f64 = 0.9;

/// The user-facing part of a map; shifts `m` are always derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub d: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceMap {
    d: Vec<f64>,
    b: Vec<f64>,
    m: Vec<f64>,
}

impl EquivalenceMap {
    /// Builds the map for `source`, deriving `m_i = d_i Σ_j w_ij b_j / d_j`.
    pub fn new(source: &Game, d: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = source.n();
        for v in [&d, &b] {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
        }
        if let Some(i) = d.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("d[{i}] = {} must be positive and finite", d[i])));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("b[{i}] is not finite")));
        }
        for i in 0..n {
            for x in [source.lower()[i], source.upper()[i]] {
                let y = d[i] * x + b[i];
                if !(y.abs() <= MAX_INDUCED_BOUND) {
                    return Err(Error::TooLarge(format!("induced bound {y:e} for player {i}")));
                }
            }
        }
        let w = source.w();
        let m = (0..n).map(|i| d[i] * (0..n).map(|j| w[(i, j)] * b[j] / d[j]).sum::<f64>()).collect();
        Ok(Self { d, b, m })
    }

    pub fn from_spec(source: &Game, spec: &MapSpec) -> Result<Self> {
        Self::new(source, spec.d.clone(), spec.b.clone())
    }

    pub fn identity(source: &Game) -> Self {
        let n = source.n();
        Self { d: vec![1.0; n], b: vec![0.0; n], m: vec![0.0; n] }
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn spec(&self) -> MapSpec {
        MapSpec { d: self.d.clone(), b: self.b.clone() }
    }

    /// The map `d' = 1/d`, `b' = −b/d` from `target` back to the source.
    pub fn inverse(&self, target: &Game) -> Result<Self> {
        let d = self.d.iter().map(|d| 1.0 / d).collect();
        let b = self.b.iter().zip(&self.d).map(|(b, d)| -b / d).collect();
        Self::new(target, d, b)
    }

    pub fn transform_game(&self, g1: &Game) -> Result<Game> {
        let n = g1.n();
        if self.d.len() != n {
            return Err(Error::Dimension { expected: self.d.len(), got: n });
        }
        let w1 = g1.w();
        let w2 = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { self.d[i] * w1[(i, j)] / self.d[j] });
        let lower = (0..n).map(|i| self.d[i] * g1.lower()[i] + self.b[i]).collect();
        let upper = (0..n).map(|i| self.d[i] * g1.upper()[i] + self.b[i]).collect();
        let values = (0..n).map(|i| g1.values()[i].clone().reparam(self.d[i], self.m[i])).collect();
        let costs = (0..n).map(|i| g1.costs()[i].clone().reparam(self.d[i], self.b[i])).collect();
        Game::new(w2, lower, upper, values, costs)
    }

    /// Maps a profile and checks it is feasible in `target`.
    pub fn map_profile(&self, target: &Game, x: &[f64], direction: Direction) -> Result<Vec<f64>> {
        let y = self.apply(x, direction)?;
        target.check_profile(&y)?;
        Ok(y)
    }

    /// Componentwise affine map without a feasibility check.
    pub fn apply(&self, x: &[f64], direction: Direction) -> Result<Vec<f64>> {
        if x.len() != self.d.len() {
            return Err(Error::Dimension { expected: self.d.len(), got: x.len() });
        }
        Ok(x.iter()
            .zip(self.d.iter().zip(&self.b))
            .map(|(x, (d, b))| match direction {
                Direction::Forward => d * x + b,
                Direction::Inverse => (x - b) / d,
            })
            .collect())
    }
}

/// Scale used by the normalizer in auto mode: `0.9·b/(n(b + c))` where
/// `b = min_i C_i/2` (curved-side value modulus over the reachable gains)
/// and `c = max_i L¹(c_i')` over the action box. For `a k − b k²` values and
/// `c0 x²/2` costs this is `0.9·b/(n(b + c0))`.
pub fn auto_normalizer_eps(game: &Game) -> Result<f64> {
    let n = game.n();
    let bounds = game.gain_bounds();
    let mut b = f64::INFINITY;
    let mut c: f64 = 0.0;
    for i in 0..n {
        b = b.min(0.5 * game.values()[i].curved_side_modulus(bounds.k_lo[i], bounds.k_hi[i])?);
        c = c.max(game.costs()[i].smoothness(game.lower()[i], game.upper()[i])?.lipschitz_d1);
    }
    if !(b > 0.0) {
        return Err(Error::InvalidParameter("value curvature vanishes; no admissible normalizer scale".into()));
    }
    Ok(AUTO_EPS_FRACTION * b / (n as f64 * (b + c)))
}

/// `d_i = ε^{−i}` (players numbered from 1), `b = 0`. Off-diagonal weights
/// become `ε^{j−i} w_ij`.
pub fn upper_triangular_normalizer(game: &Game, eps: Option<f64>) -> Result<EquivalenceMap> {
    if let Some((row, col, value)) = game.first_below_diagonal() {
        return Err(Error::NotUpperTriangular { row, col, value });
    }
    let n = game.n();
    for i in 0..n {
        for j in i + 1..n {
            if game.w()[(i, j)].abs() > 1.0 {
                return Err(Error::Precondition(format!("|w[{i}][{j}]| = {} exceeds 1", game.w()[(i, j)].abs())));
            }
        }
    }
    let eps = match eps {
        Some(e) if !(e > 0.0 && e <= 1.0) => {
            return Err(Error::InvalidParameter(format!("normalizer eps must lie in (0, 1], got {e}")))
        }
        Some(e) => e,
        None => auto_normalizer_eps(game)?,
    };
    let d = (1..=n).map(|i| eps.powi(-(i as i32))).collect();
    EquivalenceMap::new(game, d, vec![0.0; n])
}
