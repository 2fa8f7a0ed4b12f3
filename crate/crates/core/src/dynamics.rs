//! Continuous-time dynamics integrated with classical RK4.
//!
//! Two vector fields are supported: the scaled pseudo-gradient
//! `dx_i/dt = α_i ∂u_i/∂x_i` and the welfare gradient flow
//! `dx_i/dt = ∂SW/∂x_i`. States are projected onto the action box after
//! every step (and stage inputs are projected before evaluation), which is a
//! no-op on interior trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg::{dot, norm_inf};

pub const DEFAULT_STEP: f64 = 1e-2;
pub const DEFAULT_HORIZON: f64 = 50.0;
/// A trajectory is declared converged once the projected field is this small.
pub const CONVERGENCE_FIELD_TOL: f64 = 1e-8;
/// Fraction of leading samples dropped before fitting a rate.
pub const FIT_DISCARD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub enum Field {
    PseudoGradient { alpha: Vec<f64> },
    Welfare,
}

/// Reference point for the energy `E(x) = u(x*) − u(x) + ⟨x − x*, ∇u(x*)⟩`
/// of the weighted potential `u = Σ γ_i u_i`.
#[derive(Debug, Clone)]
pub struct EnergyReference {
    pub x_star: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DynamicsOptions {
    pub step: f64,
    pub horizon: f64,
    pub record_br_gap: bool,
    pub energy: Option<EnergyReference>,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { step: DEFAULT_STEP, horizon: DEFAULT_HORIZON, record_br_gap: true, energy: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub sw: Vec<f64>,
    pub br_gap: Option<Vec<f64>>,
    pub energy: Option<Vec<f64>>,
    /// Set when the box projection moved at least one step.
    pub projection_active: bool,
    /// First time the projected field dropped below [`CONVERGENCE_FIELD_TOL`].
    pub converged_at: Option<f64>,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn header(&self) -> Vec<String> {
        let n = self.states.first().map_or(0, Vec::len);
        let mut h = vec!["t".to_string()];
        h.extend((1..=n).map(|i| format!("x_{i}")));
        h.extend(["sw".to_string(), "br_gap".to_string(), "energy".to_string()]);
        h
    }

    /// One CSV row; unrecorded diagnostics are reported as NaN.
    pub fn record(&self, idx: usize) -> Vec<f64> {
        let mut r = vec![self.times[idx]];
        r.extend_from_slice(&self.states[idx]);
        r.push(self.sw[idx]);
        r.push(self.br_gap.as_ref().map_or(f64::NAN, |g| g[idx]));
        r.push(self.energy.as_ref().map_or(f64::NAN, |e| e[idx]));
        r
    }

    /// `(t, SW* − SW(t))` pairs while the gap stays above `floor`.
    pub fn welfare_gap_series(&self, sw_star: f64, floor: f64) -> (Vec<f64>, Vec<f64>) {
        self.times.iter().zip(&self.sw).map(|(t, sw)| (*t, sw_star - sw)).take_while(|(_, g)| *g > floor).unzip()
    }
}

struct EnergyEval {
    u_star: f64,
    grad_star: Vec<f64>,
    reference: EnergyReference,
}

impl EnergyEval {
    fn new(game: &Game, reference: EnergyReference) -> Result<Self> {
        game.check_profile(&reference.x_star)?;
        if reference.gamma.len() != game.n() {
            return Err(Error::Dimension { expected: game.n(), got: reference.gamma.len() });
        }
        let u_star = weighted_potential(game, &reference.gamma, &reference.x_star)?;
        let grad_star = weighted_potential_gradient(game, &reference.gamma, &reference.x_star)?;
        Ok(Self { u_star, grad_star, reference })
    }

    fn at(&self, game: &Game, x: &[f64]) -> Result<f64> {
        let u = weighted_potential(game, &self.reference.gamma, x)?;
        let diff: Vec<f64> = x.iter().zip(&self.reference.x_star).map(|(a, b)| a - b).collect();
        Ok(self.u_star - u + dot(&diff, &self.grad_star))
    }
}

/// `Σ γ_i u_i(x)`.
pub fn weighted_potential(game: &Game, gamma: &[f64], x: &[f64]) -> Result<f64> {
    let (u, _) = game.utilities(x)?;
    Ok(u.iter().zip(gamma).map(|(u, g)| u * g).sum())
}

/// Gradient of `Σ γ_i u_i`: `Σ_i γ_i f_i'(k_i) w_ij − γ_j c_j'(x_j)`.
pub fn weighted_potential_gradient(game: &Game, gamma: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let k = game.gains(x)?;
    let weighted: Vec<f64> = (0..game.n()).map(|i| Ok(gamma[i] * game.value_at(i, k[i])?.d1)).collect::<Result<_>>()?;
    let mut g = game.w().tr_mul_vec(&weighted);
    for (j, gj) in g.iter_mut().enumerate() {
        *gj -= gamma[j] * game.costs()[j].d1(x[j].clamp(game.lower()[j], game.upper()[j]))?;
    }
    Ok(g)
}

fn field(game: &Game, f: &Field, x: &[f64]) -> Result<Vec<f64>> {
    match f {
        Field::PseudoGradient { alpha } => {
            let mut g = game.pseudo_gradient(x)?;
            g.iter_mut().zip(alpha).for_each(|(g, a)| *g *= a);
            Ok(g)
        }
        Field::Welfare => game.sw_gradient(x),
    }
}

/// Field components that would push a state through a face it sits on are
/// zeroed.
fn projected_field_norm(game: &Game, x: &[f64], v: &[f64]) -> f64 {
    let eff: Vec<f64> = v
        .iter()
        .enumerate()
        .map(
            |(i, &vi)| {
                if (x[i] <= game.lower()[i] && vi < 0.0) || (x[i] >= game.upper()[i] && vi > 0.0) {
                    0.0
                } else {
                    vi
                }
            },
        )
        .collect();
    norm_inf(&eff)
}

fn axpy_projected(game: &Game, x: &[f64], h: f64, v: &[f64]) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    game.project(&mut y);
    y
}

pub fn integrate(game: &Game, f: &Field, x0: &[f64], opts: &DynamicsOptions) -> Result<Trajectory> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {}", opts.step)));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {}", opts.horizon)));
    }
    if let Field::PseudoGradient { alpha } = f {
        if alpha.len() != game.n() {
            return Err(Error::Dimension { expected: game.n(), got: alpha.len() });
        }
        if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("alpha must be strictly positive".into()));
        }
    }
    game.check_profile(x0)?;
    let energy = opts.energy.clone().map(|r| EnergyEval::new(game, r)).transpose()?;

    let steps = ((opts.horizon / opts.step) - 1e-9).ceil().max(1.0) as usize;
    let h = opts.horizon / steps as f64;

    let mut x = x0.to_vec();
    game.project(&mut x);
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        sw: Vec::with_capacity(steps + 1),
        br_gap: opts.record_br_gap.then(Vec::new),
        energy: energy.as_ref().map(|_| Vec::new()),
        projection_active: false,
        converged_at: None,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| -> Result<()> {
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.sw.push(game.social_welfare(x)?);
        if let Some(g) = traj.br_gap.as_mut() {
            g.push(game.br_gap(x)?.0);
        }
        if let (Some(e), Some(eval)) = (traj.energy.as_mut(), energy.as_ref()) {
            e.push(eval.at(game, x)?);
        }
        Ok(())
    };
    record(&mut traj, 0.0, &x)?;

    for step in 1..=steps {
        let k1 = field(game, f, &x)?;
        if traj.converged_at.is_none() && projected_field_norm(game, &x, &k1) < CONVERGENCE_FIELD_TOL {
            traj.converged_at = Some(traj.times[step - 1]);
        }
        let k2 = field(game, f, &axpy_projected(game, &x, 0.5 * h, &k1))?;
        let k3 = field(game, f, &axpy_projected(game, &x, 0.5 * h, &k2))?;
        let k4 = field(game, f, &axpy_projected(game, &x, h, &k3))?;
        let mut next: Vec<f64> =
            (0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        let t = step as f64 * h;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { time: t, last_good: x });
        }
        let raw = next.clone();
        game.project(&mut next);
        if raw != next {
            traj.projection_active = true;
        }
        x = next;
        record(&mut traj, t, &x)?;
    }
    Ok(traj)
}

/// RK4 on `dx/dt = α ⊙ pseudo_gradient(x)`.
pub fn integrate_pseudo_gradient(game: &Game, alpha: &[f64], x0: &[f64], opts: &DynamicsOptions) -> Result<Trajectory> {
    integrate(game, &Field::PseudoGradient { alpha: alpha.to_vec() }, x0, opts)
}

/// RK4 on `dx/dt = ∇SW(x)`.
pub fn integrate_sw_flow(game: &Game, x0: &[f64], opts: &DynamicsOptions) -> Result<Trajectory> {
    integrate(game, &Field::Welfare, x0, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `gap ≈ A·exp(rate·t)`
    Exponential,
    /// `gap ≈ A + rate/t`
    InverseLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    pub rate: f64,
    pub r_squared: f64,
    pub exponential: LinearFit,
    pub inverse_linear: Option<LinearFit>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0);
    Some(LinearFit { slope, intercept: my - slope * mx, r_squared: r2 })
}

/// Fits `log(gap)` against `t` and `gap` against `1/t` after dropping the
/// first 10% of samples, and reports the model with the better `r²`.
pub fn fit_rate(times: &[f64], gaps: &[f64]) -> Result<RateFit> {
    if times.len() != gaps.len() {
        return Err(Error::Dimension { expected: times.len(), got: gaps.len() });
    }
    if times.len() < 10 {
        return Err(Error::InvalidParameter(format!("need at least 10 samples, got {}", times.len())));
    }
    if gaps.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidParameter("gaps must be positive and finite".into()));
    }
    let skip = (times.len() as f64 * FIT_DISCARD_FRACTION).floor() as usize;
    let (t, g) = (&times[skip..], &gaps[skip..]);
    let logs: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    let exponential = least_squares(t, &logs).ok_or_else(|| Error::InvalidParameter("degenerate series".into()))?;
    let (inv_t, inv_g): (Vec<f64>, Vec<f64>) =
        t.iter().zip(g).filter(|(t, _)| **t > 0.0).map(|(t, g)| (1.0 / t, *g)).unzip();
    let inverse_linear = least_squares(&inv_t, &inv_g);
    let fit = match inverse_linear {
        Some(inv) if inv.r_squared > exponential.r_squared => RateFit {
            model: RateModel::InverseLinear,
            rate: inv.slope,
            r_squared: inv.r_squared,
            exponential,
            inverse_linear,
        },
        _ => RateFit {
            model: RateModel::Exponential,
            rate: exponential.slope,
            r_squared: exponential.r_squared,
            exponential,
            inverse_linear,
        },
    };
    Ok(fit)
}
