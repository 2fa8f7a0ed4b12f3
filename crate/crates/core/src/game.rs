//! The networked public goods game: efforts, gains `k = W x`, utilities
//! `u_i = f_i(k_i) − c_i(x_i)`, welfare, gradients and best responses.

use crate::error::{Error, Result};
use crate::functions::{Eval, ScalarFunction, Shape};
use crate::linalg::Matrix;

/// Gains that leave a value domain by at most this much (relative to
/// `max(1, |k|)`) are clamped back onto it.
pub const DOMAIN_CLAMP_TOL: f64 = 1e-9;
/// Feasibility slack for effort profiles.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Bracket width at which best-response bisection stops.
pub const BEST_RESPONSE_TOL: f64 = 1e-12;

/// Extreme gains and externalities reachable from the action box.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GainBounds {
    pub k_lo: Vec<f64>,
    pub k_hi: Vec<f64>,
    pub d_lo: Vec<f64>,
    pub d_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    w: Matrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
    values: Vec<ScalarFunction>,
    costs: Vec<ScalarFunction>,
    bounds: GainBounds,
}

impl Game {
    /// Builds and validates a game.
    ///
    /// Requires a unit diagonal in `w`, `lower < upper`, concave value
    /// families defined on every reachable gain interval and convex cost
    /// families defined on every action interval, all non-decreasing there.
    pub fn new(
        w: Matrix,
        lower: Vec<f64>,
        upper: Vec<f64>,
        values: Vec<ScalarFunction>,
        costs: Vec<ScalarFunction>,
    ) -> Result<Self> {
        let n = w.rows();
        if n == 0 {
            return Err(Error::InvalidGame("game needs at least one player".into()));
        }
        if !w.is_square() {
            return Err(Error::InvalidGame(format!("W must be square, got {}x{}", w.rows(), w.cols())));
        }
        for (name, len) in
            [("lower", lower.len()), ("upper", upper.len()), ("values", values.len()), ("costs", costs.len())]
        {
            if len != n {
                return Err(Error::InvalidGame(format!("{name}: expected {n} entries, got {len}")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !w[(i, j)].is_finite() {
                    return Err(Error::InvalidGame(format!("W[{i}][{j}]: must be finite")));
                }
            }
            if w[(i, i)] != 1.0 {
                return Err(Error::InvalidGame(format!("W[{i}][{i}]: diagonal must be 1, got {}", w[(i, i)])));
            }
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::InvalidGame(format!(
                    "player {i}: lower bound must be below upper bound, got [{}, {}]",
                    lower[i], upper[i]
                )));
            }
        }
        let bounds = gain_bounds(&w, &lower, &upper);
        for i in 0..n {
            let (f, c) = (&values[i], &costs[i]);
            f.validate().map_err(|e| Error::InvalidGame(format!("players[{i}].value: {e}")))?;
            c.validate().map_err(|e| Error::InvalidGame(format!("players[{i}].cost: {e}")))?;
            if f.shape() != Shape::Concave {
                return Err(Error::InvalidGame(format!("players[{i}].value: {} is not a value family", f.family())));
            }
            if c.shape() != Shape::Convex {
                return Err(Error::InvalidGame(format!("players[{i}].cost: {} is not a cost family", c.family())));
            }
            let (klo, khi) = (bounds.k_lo[i], bounds.k_hi[i]);
            if !f.domain().contains_interval(klo, khi) {
                return Err(Error::InvalidGame(format!(
                    "players[{i}].value: gain interval [{klo}, {khi}] is outside the domain of {}",
                    f.family()
                )));
            }
            if !c.domain().contains_interval(lower[i], upper[i]) {
                return Err(Error::InvalidGame(format!(
                    "players[{i}].cost: action interval [{}, {}] is outside the domain of {}",
                    lower[i],
                    upper[i],
                    c.family()
                )));
            }
            // Concave values have their smallest slope at the top of the
            // interval, convex costs at the bottom.
            let fk_lo = f.d1(klo)?;
            let fk_hi = f.d1(khi)?;
            if fk_lo <= 0.0 || fk_hi < 0.0 {
                return Err(Error::InvalidGame(format!(
                    "players[{i}].value: must be increasing on [{klo}, {khi}] (f'(lo) = {fk_lo}, f'(hi) = {fk_hi})"
                )));
            }
            let cx = c.d1(lower[i])?;
            if cx < 0.0 {
                return Err(Error::InvalidGame(format!(
                    "players[{i}].cost: must be non-decreasing on [{}, {}] (c'(lo) = {cx})",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { w, lower, upper, values, costs, bounds })
    }

    /// Same player specs on every node.
    pub fn homogeneous(w: Matrix, lower: f64, upper: f64, value: ScalarFunction, cost: ScalarFunction) -> Result<Self> {
        let n = w.rows();
        Self::new(w, vec![lower; n], vec![upper; n], vec![value; n], vec![cost; n])
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn values(&self) -> &[ScalarFunction] {
        &self.values
    }

    pub fn costs(&self) -> &[ScalarFunction] {
        &self.costs
    }

    pub fn gain_bounds(&self) -> &GainBounds {
        &self.bounds
    }

    /// Replaces cost functions, revalidating the game.
    pub fn with_costs(&self, costs: Vec<ScalarFunction>) -> Result<Self> {
        Self::new(self.w.clone(), self.lower.clone(), self.upper.clone(), self.values.clone(), costs)
    }

    /// Replaces value functions, revalidating the game.
    pub fn with_values(&self, values: Vec<ScalarFunction>) -> Result<Self> {
        Self::new(self.w.clone(), self.lower.clone(), self.upper.clone(), values, self.costs.clone())
    }

    /// Whether `w_ij = 0` for all `i > j`.
    pub fn is_upper_triangular(&self) -> bool {
        self.first_below_diagonal().is_none()
    }

    pub(crate) fn first_below_diagonal(&self) -> Option<(usize, usize, f64)> {
        let n = self.n();
        (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).find_map(|(i, j)| {
            let v = self.w[(i, j)];
            (v != 0.0).then_some((i, j, v))
        })
    }

    pub fn check_profile(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension { expected: self.n(), got: x.len() });
        }
        for (i, &xi) in x.iter().enumerate() {
            let slack = FEASIBILITY_TOL * (1.0 + self.upper[i].abs().max(self.lower[i].abs()));
            if !xi.is_finite() || xi < self.lower[i] - slack || xi > self.upper[i] + slack {
                return Err(Error::Precondition(format!(
                    "x[{i}] = {xi} outside [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    /// Componentwise projection onto the action box.
    pub fn project(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    /// `k = W x`.
    pub fn gains(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::Dimension { expected: self.n(), got: x.len() });
        }
        Ok(self.w.mul_vec(x))
    }

    /// Value of player `i` at gain `k`, clamping roundoff-level domain exits.
    pub fn value_at(&self, i: usize, k: f64) -> Result<Eval> {
        let f = &self.values[i];
        let k = f
            .domain()
            .clamp_within(k, DOMAIN_CLAMP_TOL * k.abs().max(1.0))
            .ok_or(Error::Domain { family: f.family(), point: k })?;
        f.eval(k)
    }

    fn cost_at(&self, i: usize, x: f64) -> Result<Eval> {
        let c = &self.costs[i];
        let x = c
            .domain()
            .clamp_within(x, DOMAIN_CLAMP_TOL * x.abs().max(1.0))
            .ok_or(Error::Domain { family: c.family(), point: x })?;
        c.eval(x)
    }

    /// Per-player utilities and their sum.
    pub fn utilities(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let k = self.gains(x)?;
        let u = (0..self.n())
            .map(|i| Ok(self.value_at(i, k[i])?.value - self.cost_at(i, x[i])?.value))
            .collect::<Result<Vec<f64>>>()?;
        let sw = u.iter().sum();
        Ok((u, sw))
    }

    pub fn social_welfare(&self, x: &[f64]) -> Result<f64> {
        self.utilities(x).map(|(_, sw)| sw)
    }

    /// Own-action derivatives `∂u_i/∂x_i = f_i'(k_i) − c_i'(x_i)`.
    pub fn pseudo_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.gains(x)?;
        (0..self.n()).map(|i| Ok(self.value_at(i, k[i])?.d1 - self.cost_at(i, x[i])?.d1)).collect()
    }

    /// `∂SW/∂x_j = Σ_i f_i'(k_i) w_ij − c_j'(x_j)`.
    pub fn sw_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.gains(x)?;
        let fprime = (0..self.n()).map(|i| Ok(self.value_at(i, k[i])?.d1)).collect::<Result<Vec<f64>>>()?;
        let mut g = self.w.tr_mul_vec(&fprime);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj -= self.cost_at(j, x[j])?.d1;
        }
        Ok(g)
    }

    /// Externality `d_i = Σ_{j≠i} w_ij x_j`.
    pub fn externality(&self, i: usize, x: &[f64]) -> f64 {
        self.w.row(i).iter().zip(x).enumerate().filter(|(j, _)| *j != i).map(|(_, (w, x))| w * x).sum()
    }

    /// Utility of player `i` playing `y` against externality `d`.
    pub fn deviation_utility(&self, i: usize, y: f64, d: f64) -> Result<f64> {
        Ok(self.value_at(i, y + d)?.value - self.cost_at(i, y)?.value)
    }

    /// Smallest maximizer of `f_i(y + d_i) − c_i(y)` over `[x̲_i, x̄_i]`.
    ///
    /// The derivative `f_i'(y + d_i) − c_i'(y)` is non-increasing, so the
    /// smallest maximizer is the first point where it drops to zero or
    /// below; bisection brackets that point to [`BEST_RESPONSE_TOL`].
    pub fn best_response(&self, i: usize, x: &[f64]) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::Dimension { expected: self.n(), got: x.len() });
        }
        let d = self.externality(i, x);
        self.best_response_to(i, d)
    }

    pub fn best_response_to(&self, i: usize, d: f64) -> Result<f64> {
        let slope = |y: f64| -> Result<f64> { Ok(self.value_at(i, y + d)?.d1 - self.cost_at(i, y)?.d1) };
        let (mut lo, mut hi) = (self.lower[i], self.upper[i]);
        if slope(lo)? <= 0.0 {
            return Ok(lo);
        }
        if slope(hi)? > 0.0 {
            return Ok(hi);
        }
        // Invariant: slope(lo) > 0 >= slope(hi).
        for _ in 0..200 {
            if hi - lo <= BEST_RESPONSE_TOL * hi.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Largest unilateral improvement `max_i [u_i(BR_i, x_{−i}) − u_i(x)]`
    /// and the player attaining it.
    pub fn br_gap(&self, x: &[f64]) -> Result<(f64, usize)> {
        self.check_profile(x)?;
        let mut worst = (0.0, 0);
        for i in 0..self.n() {
            let d = self.externality(i, x);
            let br = self.best_response_to(i, d)?;
            let gain = self.deviation_utility(i, br, d)? - self.deviation_utility(i, x[i], d)?;
            if gain > worst.0 {
                worst = (gain, i);
            }
        }
        Ok(worst)
    }
}

/// Sign-split extreme gains over the box.
pub fn gain_bounds(w: &Matrix, lower: &[f64], upper: &[f64]) -> GainBounds {
    let n = w.rows();
    let mut b = GainBounds { k_lo: vec![0.0; n], k_hi: vec![0.0; n], d_lo: vec![0.0; n], d_hi: vec![0.0; n] };
    for i in 0..n {
        for j in 0..n {
            let wij = w[(i, j)];
            let (lo, hi) = if wij > 0.0 {
                (wij * lower[j], wij * upper[j])
            } else if wij < 0.0 {
                (wij * upper[j], wij * lower[j])
            } else {
                (0.0, 0.0)
            };
            b.k_lo[i] += lo;
            b.k_hi[i] += hi;
            if j != i {
                b.d_lo[i] += lo;
                b.d_hi[i] += hi;
            }
        }
    }
    b
}
