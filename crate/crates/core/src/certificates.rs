//! Sufficient conditions for a unique equilibrium, evaluated with the
//! smoothness constants of the game's functions.

use serde::Serialize;

use crate::equivalence::{upper_triangular_normalizer, EquivalenceMap, MapSpec};
use crate::error::{Error, Result};
use crate::functions::{closeness_sigma, ScalarFunction};
use crate::game::Game;
use crate::linalg::{sigma_max, symmetric_eigenvalues, Matrix};

pub const POWER_TOL: f64 = 1e-10;
pub const JACOBI_TOL: f64 = 1e-12;
/// Relative tolerance for accepting a reference matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    NearIndividual,
    NearPotential,
    NearSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub theorem: Theorem,
    pub gamma: Vec<f64>,
    /// Σ or B.
    pub matrix: Matrix,
    pub sigma_max: f64,
    /// `c` for the first two conditions, `σ_0` for the symmetric one.
    pub threshold: f64,
    /// Factor in front of `σ_max` (`L0` for near-individual, 1 otherwise).
    pub scale: f64,
    /// `threshold − scale·σ_max`; `−∞` when the condition is not applicable.
    pub margin: f64,
    pub verdict: Verdict,
    pub reason: Option<String>,
    /// A kink of some value function lies inside its reachable gain range,
    /// so second-order smoothness only holds piecewise.
    pub kink_caveat: bool,
    /// Which equivalence transform produced the certified game, if any.
    pub transform: Option<String>,
    pub notes: Vec<String>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        theorem: Theorem,
        gamma: Vec<f64>,
        matrix: Matrix,
        sigma_max: f64,
        threshold: f64,
        scale: f64,
        reason: Option<String>,
        kink_caveat: bool,
    ) -> Self {
        let margin = if reason.as_deref().is_some_and(is_not_applicable) {
            f64::NEG_INFINITY
        } else {
            threshold - scale * sigma_max
        };
        let verdict = if reason.is_none() && margin > 0.0 { Verdict::Pass } else { Verdict::Fail };
        Self {
            theorem,
            gamma,
            matrix,
            sigma_max,
            threshold,
            scale,
            margin,
            verdict,
            reason,
            kink_caveat,
            transform: None,
            notes: Vec::new(),
        }
    }
}

const ZERO_MODULUS: &str = "zero modulus";
const NOT_APPLICABLE: &str = "not applicable";

fn is_not_applicable(r: &str) -> bool {
    r.starts_with(NOT_APPLICABLE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralBounds {
    pub sigma_max: f64,
    /// Smallest and largest eigenvalue when the matrix is symmetric.
    pub sym_eigs: Option<(f64, f64)>,
}

pub fn spectral_bounds(m: &Matrix, tol: f64) -> Result<SpectralBounds> {
    let sigma_max = sigma_max(m, tol)?;
    let sym_eigs = if m.is_square() && m.is_symmetric(SYMMETRY_TOL * m.max_abs()) && m.rows() > 0 {
        let e = symmetric_eigenvalues(m, JACOBI_TOL)?;
        Some((e[0], e[e.len() - 1]))
    } else {
        None
    };
    Ok(SpectralBounds { sigma_max, sym_eigs })
}

fn check_gamma(game: &Game, gamma: &[f64]) -> Result<()> {
    if gamma.len() != game.n() {
        return Err(Error::Dimension { expected: game.n(), got: gamma.len() });
    }
    if gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidParameter("gamma must be strictly positive".into()));
    }
    Ok(())
}

fn kink_inside(f: &ScalarFunction, lo: f64, hi: f64) -> bool {
    f.kinks().iter().any(|k| *k > lo && *k < hi)
}

fn any_kink_inside(game: &Game) -> bool {
    let b = game.gain_bounds();
    (0..game.n()).any(|i| kink_inside(&game.values()[i], b.k_lo[i], b.k_hi[i]))
}

/// `c > L0·σ_max(Σ)` with `σ_ij = Σ_{k≠i} γ_k |w_ki w_kj|`.
///
/// The per-player modulus over shifted gain intervals is taken over the whole
/// reachable interval `K_i`. For every supported value family the curvature is
/// monotone in the gain, so the worst shift attains the same modulus.
pub fn cert_near_individual(game: &Game, gamma: &[f64]) -> Result<CertificateReport> {
    check_gamma(game, gamma)?;
    let n = game.n();
    let b = game.gain_bounds();
    let w = game.w();
    let mut c = f64::INFINITY;
    let mut l0: f64 = 0.0;
    for i in 0..n {
        let fv = game.values()[i].smoothness(b.k_lo[i], b.k_hi[i])?;
        let fc = game.costs()[i].smoothness(game.lower()[i], game.upper()[i])?;
        c = c.min(gamma[i] * (fv.modulus + fc.modulus));
        l0 = l0.max(fv.lipschitz_d1);
    }
    let sigma = Matrix::from_fn(n, n, |i, j| {
        (0..n).filter(|&k| k != i).map(|k| gamma[k] * (w[(k, i)] * w[(k, j)]).abs()).sum()
    });
    let sigma_max = sigma_max(&sigma, POWER_TOL)?;
    let reason = (c <= 0.0).then(|| ZERO_MODULUS.to_string());
    Ok(CertificateReport::build(
        Theorem::NearIndividual,
        gamma.to_vec(),
        sigma,
        sigma_max,
        c,
        l0,
        reason,
        any_kink_inside(game),
    ))
}

/// `c > σ_max(B)` with
/// `β_ij = σ_i|w_ij| + c¹|w_ij − 1| + c² Σ_l |w_il − 1| max(−x̲_l, x̄_l)`.
pub fn cert_near_potential(game: &Game, f_common: &ScalarFunction, gamma: &[f64]) -> Result<CertificateReport> {
    check_gamma(game, gamma)?;
    f_common.validate()?;
    let n = game.n();
    let b = game.gain_bounds();
    let w = game.w();
    let (sum_lo, sum_hi) = (game.lower().iter().sum::<f64>(), game.upper().iter().sum::<f64>());
    let hull_lo = b.k_lo.iter().copied().fold(sum_lo, f64::min);
    let hull_hi = b.k_hi.iter().copied().fold(sum_hi, f64::max);
    if !f_common.domain().contains_interval(hull_lo, hull_hi) {
        return Err(Error::Precondition(format!(
            "common value {} is not defined on [{hull_lo}, {hull_hi}]",
            f_common.family()
        )));
    }
    let hull = f_common.smoothness(hull_lo, hull_hi)?;
    let (c1, c2) = (hull.lipschitz_d1, hull.lipschitz_d2);

    let mut c = f64::INFINITY;
    let mut sig = vec![0.0; n];
    for i in 0..n {
        let fm = f_common.smoothness(b.k_lo[i], b.k_hi[i])?.modulus;
        let cm = game.costs()[i].smoothness(game.lower()[i], game.upper()[i])?.modulus;
        c = c.min(fm + gamma[i] * cm);
        sig[i] = closeness_sigma(&game.values()[i], f_common, gamma[i], b.k_lo[i], b.k_hi[i])?;
    }
    let rho: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|l| (w[(i, l)] - 1.0).abs() * (-game.lower()[l]).max(game.upper()[l])).sum())
        .collect();
    let c2_needed = rho.iter().any(|r| *r > 0.0);
    let c2_value = c2.unwrap_or(0.0);
    let beta = Matrix::from_fn(n, n, |i, j| {
        sig[i] * w[(i, j)].abs() + c1 * (w[(i, j)] - 1.0).abs() + if rho[i] > 0.0 { c2_value * rho[i] } else { 0.0 }
    });
    let sigma_max = sigma_max(&beta, POWER_TOL)?;
    let reason = if c2.is_none() && c2_needed {
        Some(format!("{NOT_APPLICABLE}: second derivative of the common value jumps on [{hull_lo}, {hull_hi}]"))
    } else if c <= 0.0 {
        Some(ZERO_MODULUS.to_string())
    } else {
        None
    };
    let kink = any_kink_inside(game) || kink_inside(f_common, hull_lo, hull_hi);
    Ok(CertificateReport::build(Theorem::NearPotential, gamma.to_vec(), beta, sigma_max, c, 1.0, reason, kink))
}

/// `σ_0 > σ_max(Σ)` with `σ_ij = 2L_i|w_ij|/C_i + |w⁰_ij − w_ij|` off the
/// diagonal, `σ_0 = λ_min(W⁰)`, `L_i` the Lipschitz constant of `c_i'` on the
/// action box and `C_i` the value modulus on the reachable gains.
///
/// Clipped values are read from their quadratic side for `C_i`: the condition
/// only involves gains at best responses, which never enter the flat region
/// when costs are non-decreasing.
pub fn cert_near_symmetric(game: &Game, w0: &Matrix) -> Result<CertificateReport> {
    let n = game.n();
    if w0.rows() != n || w0.cols() != n {
        return Err(Error::Dimension { expected: n, got: w0.rows() });
    }
    if !w0.all_finite() || !w0.is_symmetric(SYMMETRY_TOL * w0.max_abs().max(1.0)) {
        return Err(Error::InvalidParameter("reference matrix must be symmetric".into()));
    }
    if (0..n).any(|i| w0[(i, i)] != 1.0) {
        return Err(Error::InvalidParameter("reference matrix must have unit diagonal".into()));
    }
    let sigma0 = symmetric_eigenvalues(w0, JACOBI_TOL)?[0];
    let b = game.gain_bounds();
    let w = game.w();
    let mut ratio = vec![0.0; n];
    let mut zero = None;
    for i in 0..n {
        let l = game.costs()[i].smoothness(game.lower()[i], game.upper()[i])?.lipschitz_d1;
        let cm = game.values()[i].curved_side_modulus(b.k_lo[i], b.k_hi[i])?;
        if cm <= 0.0 {
            zero.get_or_insert(i);
        } else {
            ratio[i] = 2.0 * l / cm;
        }
    }
    let sigma =
        Matrix::from_fn(
            n,
            n,
            |i, j| {
                if i == j {
                    0.0
                } else {
                    ratio[i] * w[(i, j)].abs() + (w0[(i, j)] - w[(i, j)]).abs()
                }
            },
        );
    let sigma_max = sigma_max(&sigma, POWER_TOL)?;
    let reason = zero.map(|i| format!("{ZERO_MODULUS} (player {i})"));
    let mut report = CertificateReport::build(
        Theorem::NearSymmetric,
        vec![1.0; n],
        sigma,
        sigma_max,
        sigma0,
        1.0,
        reason,
        any_kink_inside(game),
    );
    if zero.is_some() {
        report.margin = f64::NEG_INFINITY;
    }
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct CertifyOptions {
    pub gamma: Option<Vec<f64>>,
    pub f_common: Option<ScalarFunction>,
    /// Reference matrices for the symmetric condition. When empty, the
    /// identity and the symmetric part of `W` are tried.
    pub w0: Vec<Matrix>,
    pub maps: Vec<MapSpec>,
    /// Also try the triangular normalizer (auto scale) on upper-triangular games.
    pub triangular: bool,
}

fn default_w0(game: &Game) -> Vec<Matrix> {
    let n = game.n();
    let w = game.w();
    let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (w[(i, j)] + w[(j, i)]));
    if sym == Matrix::identity(n) {
        vec![sym]
    } else {
        vec![Matrix::identity(n), sym]
    }
}

fn evaluate_all(
    game: &Game,
    opts: &CertifyOptions,
    gamma: &[f64],
    with_potential: bool,
) -> Vec<Result<CertificateReport>> {
    let mut out = vec![cert_near_individual(game, gamma)];
    if with_potential {
        if let Some(f) = &opts.f_common {
            out.push(cert_near_potential(game, f, gamma));
        }
    }
    let w0s = if opts.w0.is_empty() { default_w0(game) } else { opts.w0.clone() };
    out.extend(w0s.iter().map(|w0| cert_near_symmetric(game, w0)));
    out
}

fn better(a: &CertificateReport, b: &CertificateReport) -> bool {
    match (a.passed(), b.passed()) {
        (true, false) => true,
        (false, true) => false,
        _ => a.margin > b.margin,
    }
}

/// Evaluates every applicable condition on the game and on each requested
/// equivalent game; returns the best report (a pass with the largest margin,
/// otherwise the least negative margin).
pub fn certify_any(game: &Game, opts: &CertifyOptions) -> Result<CertificateReport> {
    let gamma = opts.gamma.clone().unwrap_or_else(|| vec![1.0; game.n()]);
    check_gamma(game, &gamma)?;
    let mut candidates: Vec<(Option<String>, Result<CertificateReport>)> =
        evaluate_all(game, opts, &gamma, true).into_iter().map(|r| (None, r)).collect();

    let mut transformed: Vec<(String, Result<Game>)> = Vec::new();
    for (idx, spec) in opts.maps.iter().enumerate() {
        let g2 = EquivalenceMap::from_spec(game, spec).and_then(|m| m.transform_game(game));
        transformed.push((format!("map[{idx}]"), g2));
    }
    if opts.triangular && game.is_upper_triangular() {
        let g2 = upper_triangular_normalizer(game, None).and_then(|m| {
            let label = format!("triangular normalizer (d_1 = {:e})", m.d()[0]);
            m.transform_game(game).map(|g| (label, g))
        });
        match g2 {
            Ok((label, g)) => transformed.push((label, Ok(g))),
            Err(e) => transformed.push(("triangular normalizer".into(), Err(e))),
        }
    }
    let mut notes = Vec::new();
    for (label, g2) in transformed {
        match g2 {
            Ok(g2) => {
                // γ does not carry over through a rescaling, so transformed
                // games use unit weights.
                let ones = vec![1.0; g2.n()];
                let sub = CertifyOptions { w0: Vec::new(), ..opts.clone() };
                for r in evaluate_all(&g2, &sub, &ones, false) {
                    candidates.push((Some(label.clone()), r));
                }
            }
            Err(e) => notes.push(format!("{label}: {e}")),
        }
    }

    let mut best: Option<CertificateReport> = None;
    for (label, r) in candidates {
        match r {
            Ok(mut rep) => {
                rep.transform = label;
                if best.as_ref().map_or(true, |b| better(&rep, b)) {
                    best = Some(rep);
                }
            }
            Err(e) => notes.push(format!("{}: {e}", label.unwrap_or_else(|| "original".into()))),
        }
    }
    let mut best =
        best.ok_or_else(|| Error::Solver(format!("no certificate could be evaluated: {}", notes.join("; "))))?;
    best.notes.extend(notes);
    Ok(best)
}
