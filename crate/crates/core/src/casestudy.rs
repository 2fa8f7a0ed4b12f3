//! The two clipped-quadratic case studies: sparse random directed networks,
//! and upper-triangular networks normalized by a geometric rescaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::certificates::{cert_near_symmetric, CertificateReport, POWER_TOL};
use crate::equilibrium::{backward_induction, solve_ne, verify_ne, SolveOptions, SolveStatus};
use crate::equivalence::{upper_triangular_normalizer, Direction};
use crate::error::{Error, Result};
use crate::functions::ScalarFunction;
use crate::game::Game;
use crate::linalg::{dist_inf, sigma_max, Matrix};

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Directed 0/1 matrix with unit diagonal; off-diagonal entries are drawn
/// row by row from stream `sample` of the seed.
pub fn er_matrix(n: usize, p: f64, seed: u64, sample: u64) -> Result<Matrix> {
    check_probability(p)?;
    let mut rng = stream(seed, sample);
    let mut w = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let u: f64 = rng.gen();
                if u < p {
                    w[(i, j)] = 1.0;
                }
            }
        }
    }
    Ok(w)
}

fn homogeneous(w: Matrix, upper: f64, a: f64, b: f64, c0: f64) -> Result<Game> {
    Game::homogeneous(w, 0.0, upper, ScalarFunction::quadratic_clipped(a, b), ScalarFunction::quadratic_cost(c0))
}

/// Directed random network with edge probability `p0/n`, clipped quadratic
/// values, quadratic costs and efforts in `[0, a/(2b) + 1]`.
pub fn random_er_game(n: usize, p0: f64, a: f64, b: f64, c0: f64, seed: u64) -> Result<Game> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let w = er_matrix(n, p0 / n as f64, seed, 0)?;
    homogeneous(w, a / (2.0 * b) + 1.0, a, b, c0)
}

fn check_binary(w: &Matrix) -> Result<()> {
    let n = w.rows();
    if !w.is_square() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    for i in 0..n {
        for j in 0..n {
            let v = w[(i, j)];
            let ok = if i == j { v == 1.0 } else { v == 0.0 || v == 1.0 };
            if !ok {
                return Err(Error::InvalidParameter(format!("w[{i}][{j}] = {v} is not allowed in a 0/1 network")));
            }
        }
    }
    Ok(())
}

/// `δ_i = 2 Σ_{j≠i} w_ji + Σ_{j≠i} Σ_{k≠i,j} w_ki w_kj` and `max_i δ_i`,
/// which is the row-sum norm of `Σ` with `σ_ij = Σ_{k≠i} w_ki w_kj`.
pub fn delta_row_stats(w: &Matrix) -> Result<(Vec<f64>, f64)> {
    check_binary(w)?;
    let n = w.rows();
    let out: Vec<f64> = (0..n).map(|k| (0..n).filter(|&j| j != k).map(|j| w[(k, j)]).sum()).collect();
    let delta: Vec<f64> =
        (0..n).map(|i| (0..n).filter(|&k| k != i && w[(k, i)] == 1.0).map(|k| 2.0 + out[k] - 1.0).sum()).collect();
    let norm = delta.iter().copied().fold(0.0, f64::max);
    Ok((delta, norm))
}

/// `σ_ij = Σ_{k≠i} w_ki w_kj` for a 0/1 network.
pub fn sigma_matrix(w: &Matrix) -> Matrix {
    let n = w.rows();
    Matrix::from_fn(n, n, |i, j| (0..n).filter(|&k| k != i).map(|k| w[(k, i)] * w[(k, j)]).sum())
}

/// Exact moments of `δ_i` for edge probability `p`. `δ_i` is a sum of
/// `n − 1` independent copies of `w (2 + R)` with `w ~ Bernoulli(p)` and
/// `R ~ Binomial(n − 2, p)`.
pub fn delta_moments(n: usize, p: f64) -> (f64, f64) {
    let (n1, n2) = (n as f64 - 1.0, n as f64 - 2.0);
    let mean = 2.0 * n1 * p + n1 * n2 * p * p;
    let ey = p * (2.0 + n2 * p);
    let ey2 = p * (4.0 + 4.0 * n2 * p + n2 * p * (1.0 - p) + n2 * n2 * p * p);
    (mean, n1 * (ey2 - ey * ey))
}

/// The looser variance bound `4p0 + 5p0² + 2p0³`.
pub fn variance_bound(p0: f64) -> f64 {
    4.0 * p0 + 5.0 * p0 * p0 + 2.0 * p0.powi(3)
}

/// `2p0 + p0² + √(n(8p0 + 10p0² + 4p0³))`.
pub fn norm_bound(n: usize, p0: f64) -> f64 {
    2.0 * p0 + p0 * p0 + (n as f64 * (8.0 * p0 + 10.0 * p0 * p0 + 4.0 * p0.powi(3))).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case1Sample {
    pub sample: usize,
    pub inf_norm: f64,
    pub sigma_max: f64,
    pub within_bound: bool,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case1Report {
    pub n: usize,
    pub p0: f64,
    pub samples: usize,
    pub seed: u64,
    pub empirical_mean: f64,
    pub empirical_var: f64,
    pub closed_mean: f64,
    pub closed_var: f64,
    pub var_bound: f64,
    /// Four standard errors of the empirical mean and variance.
    pub mean_tolerance: f64,
    pub var_tolerance: f64,
    pub bound: f64,
    pub frac_within_bound: f64,
    /// Fraction with `σ_max(Σ) < c0/(2b)`.
    pub frac_certified: f64,
    #[serde(skip)]
    pub per_sample: Vec<Case1Sample>,
}

impl Case1Report {
    pub fn mean_ok(&self) -> bool {
        (self.empirical_mean - self.closed_mean).abs() <= self.mean_tolerance
    }

    pub fn var_ok(&self) -> bool {
        (self.empirical_var - self.closed_var).abs() <= self.var_tolerance
    }
}

pub fn monte_carlo_case1(n: usize, p0: f64, a: f64, b: f64, c0: f64, samples: usize, seed: u64) -> Result<Case1Report> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 samples, got {samples}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two players".into()));
    }
    if !(a > 0.0 && b > 0.0 && c0 > 0.0) {
        return Err(Error::InvalidParameter("a, b and c0 must be positive".into()));
    }
    let p = p0 / n as f64;
    check_probability(p)?;
    let bound = norm_bound(n, p0);
    let threshold = c0 / (2.0 * b);
    let rows: Vec<(Vec<f64>, Case1Sample)> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let w = er_matrix(n, p, seed, s as u64)?;
            let (delta, inf_norm) = delta_row_stats(&w)?;
            let sigma_max = sigma_max(&sigma_matrix(&w), POWER_TOL)?;
            let rec = Case1Sample {
                sample: s,
                inf_norm,
                sigma_max,
                within_bound: inf_norm <= bound,
                certified: sigma_max < threshold,
            };
            Ok((delta, rec))
        })
        .collect::<Result<_>>()?;

    let all: Vec<f64> = rows.iter().flat_map(|(d, _)| d.iter().copied()).collect();
    let count = all.len() as f64;
    let mean = all.iter().sum::<f64>() / count;
    let var = all.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let m4 = all.iter().map(|d| (d - mean).powi(4)).sum::<f64>() / count;
    let (closed_mean, closed_var) = delta_moments(n, p);
    let per_sample: Vec<Case1Sample> = rows.into_iter().map(|(_, r)| r).collect();
    let frac = |f: fn(&Case1Sample) -> bool| per_sample.iter().filter(|r| f(r)).count() as f64 / samples as f64;
    Ok(Case1Report {
        n,
        p0,
        samples,
        seed,
        empirical_mean: mean,
        empirical_var: var,
        closed_mean,
        closed_var,
        var_bound: variance_bound(p0),
        mean_tolerance: 4.0 * (closed_var / count).sqrt(),
        var_tolerance: 4.0 * ((m4 - var * var).max(0.0) / count).sqrt(),
        bound,
        frac_within_bound: frac(|r| r.within_bound),
        frac_certified: frac(|r| r.certified),
        per_sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case2Report {
    pub n: usize,
    pub w: Matrix,
    /// Normalizer scale `ε`; `d_i = ε^{−i}`.
    pub eps: f64,
    pub d: Vec<f64>,
    pub certificate: CertificateReport,
    pub x_solver: Vec<f64>,
    pub x_backward: Vec<f64>,
    /// Equilibrium of the transformed game mapped back to the original.
    pub x_transformed: Vec<f64>,
    pub max_pairwise_dist: f64,
    /// Gap of the mapped backward-induction equilibrium in the transformed game.
    pub transformed_gap: f64,
}

/// Random upper-triangular 0/1 network (entries above the diagonal drawn with
/// probability `density`), normalized and certified, then solved three ways.
pub fn case2_pipeline(n: usize, a: f64, b: f64, c0: f64, density: f64, seed: u64) -> Result<Case2Report> {
    check_probability(density)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mut rng = stream(seed, 0);
    let mut w = Matrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.gen();
            if u < density {
                w[(i, j)] = 1.0;
            }
        }
    }
    let game = homogeneous(w.clone(), a / (2.0 * b), a, b, c0)?;
    let map = upper_triangular_normalizer(&game, None)?;
    let eps = 1.0 / map.d()[0];
    let g2 = map.transform_game(&game)?;
    let certificate = cert_near_symmetric(&g2, &Matrix::identity(n))?;

    let opts = SolveOptions { tol: 1e-12, ..Default::default() };
    let start = vec![0.0; n];
    let direct = solve_ne(&game, &start, &opts)?;
    let gamma: Vec<f64> = map.d().iter().map(|d| d * d).collect();
    let transformed =
        solve_ne(&g2, &map.apply(&start, Direction::Forward)?, &SolveOptions { gamma: Some(gamma), ..opts })?;
    for (label, r) in [("original", &direct), ("transformed", &transformed)] {
        if r.status != SolveStatus::Converged {
            return Err(Error::Solver(format!("{label} solve ended with {:?}", r.status)));
        }
    }
    let x_transformed = map.apply(&transformed.x_star, Direction::Inverse)?;
    let x_backward = backward_induction(&game)?;
    let mapped_bi = map.map_profile(&g2, &x_backward, Direction::Forward)?;
    let transformed_gap = verify_ne(&g2, &mapped_bi, f64::INFINITY)?.gap;
    let max_pairwise_dist = dist_inf(&direct.x_star, &x_backward)
        .max(dist_inf(&direct.x_star, &x_transformed))
        .max(dist_inf(&x_backward, &x_transformed));
    Ok(Case2Report {
        n,
        w,
        eps,
        d: map.d().to_vec(),
        certificate,
        x_solver: direct.x_star,
        x_backward,
        x_transformed,
        max_pairwise_dist,
        transformed_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn er_edge_cases() {
        let g = random_er_game(10, 0.0, 3.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(g.w(), &Matrix::identity(10));
        assert_eq!(g.upper(), &[2.5; 10]);
        assert!(random_er_game(5, 6.0, 3.0, 1.0, 1.0, 1).is_err());
        let a = random_er_game(30, 2.0, 3.0, 1.0, 1.0, 9).unwrap();
        let b = random_er_game(30, 2.0, 3.0, 1.0, 1.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn er_density() {
        let w = random_er_game(50, 1.0, 3.0, 1.0, 1.0, 7).unwrap().w().clone();
        let ones = w.as_slice().iter().sum::<f64>() - 50.0;
        let m = 50.0 * 49.0;
        let p: f64 = 0.02;
        assert!((ones / m - p).abs() <= 4.0 * (p * (1.0 - p) / m).sqrt(), "{ones}");
    }

    #[test]
    fn delta_examples() {
        let (d, norm) = delta_row_stats(&Matrix::identity(4)).unwrap();
        assert_eq!(d, vec![0.0; 4]);
        assert_eq!(norm, 0.0);

        let mut w = Matrix::identity(3);
        w[(1, 0)] = 1.0;
        w[(2, 0)] = 1.0;
        let (d, _) = delta_row_stats(&w).unwrap();
        assert_eq!(d[0], 4.0);

        let mut bad = Matrix::identity(2);
        bad[(0, 1)] = 0.5;
        assert!(delta_row_stats(&bad).is_err());
    }

    #[test]
    fn moments_reference_values() {
        let (m, v) = delta_moments(50, 0.02);
        assert!((m - 2.9008).abs() < 1e-12);
        assert!((v - 9.336_624_64).abs() < 1e-8, "{v}");
        assert!((norm_bound(50, 1.0) - (3.0 + 1100f64.sqrt())).abs() < 1e-12);
        assert_eq!(variance_bound(1.0), 11.0);
    }

    /// Exact expectation over all 2^(n(n−1)) networks for tiny n.
    fn enumerate_moments(n: usize, p: f64) -> (f64, f64) {
        let offs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let (mut e1, mut e2) = (0.0, 0.0);
        for bits in 0u32..(1 << offs.len()) {
            let mut w = Matrix::identity(n);
            let mut prob = 1.0;
            for (t, &(i, j)) in offs.iter().enumerate() {
                if bits >> t & 1 == 1 {
                    w[(i, j)] = 1.0;
                    prob *= p;
                } else {
                    prob *= 1.0 - p;
                }
            }
            let d0 = delta_row_stats(&w).unwrap().0[0];
            e1 += prob * d0;
            e2 += prob * d0 * d0;
        }
        (e1, e2 - e1 * e1)
    }

    #[test]
    fn moments_match_enumeration() {
        for n in [3, 4] {
            for p in [1.0 / 3.0, 0.2, 0.7] {
                let (m, v) = delta_moments(n, p);
                let (em, ev) = enumerate_moments(n, p);
                assert!((m - em).abs() < 1e-12 && (v - ev).abs() < 1e-12, "n={n} p={p}: {v} vs {ev}");
            }
        }
    }

    #[test]
    fn case2_two_players() {
        let r = case2_pipeline(2, 3.0, 1.0, 1.0, 1.0, 0).unwrap();
        assert!((r.eps - 0.225).abs() < 1e-12);
        assert!(r.certificate.passed());
        for x in [&r.x_solver, &r.x_backward, &r.x_transformed] {
            assert!(dist_inf(x, &[1.0 / 3.0, 1.0]) < 1e-6, "{x:?}");
        }
        assert!(r.transformed_gap < 1e-8);
    }

    #[test]
    fn case2_density_zero() {
        let r = case2_pipeline(3, 3.0, 1.0, 1.0, 0.0, 5).unwrap();
        assert_eq!(r.w, Matrix::identity(3));
        assert!(r.certificate.passed());
        assert!(dist_inf(&r.x_backward, &[1.0; 3]) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn delta_equals_sigma_row_norm(seed in 0u64..1000, n in 2usize..12, p in 0.0f64..0.6) {
            let w = er_matrix(n, p, seed, 0).unwrap();
            let (delta, norm) = delta_row_stats(&w).unwrap();
            let sigma = sigma_matrix(&w);
            for i in 0..n {
                prop_assert_eq!(delta[i], sigma.row(i).iter().sum::<f64>());
            }
            prop_assert_eq!(norm, sigma.norm_inf());
        }
    }
}
