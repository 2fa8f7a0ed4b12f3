use std::fmt;
use std::fs;
use std::path::Path;

use pgg_core::casestudy::{case2_pipeline, monte_carlo_case1, Case1Report};
use pgg_core::certificates::{certify_any, CertifyOptions};
use pgg_core::dynamics::{fit_rate, integrate, DynamicsOptions, Field, RateFit};
use pgg_core::equilibrium::{
    backward_induction, grid_oracle_with, multi_start_probe, solve_ne, solve_regularized, verify_ne, Cluster,
    GridDeviations, NeCheck, SolveOptions, SolveStatus,
};
use pgg_core::equivalence::{upper_triangular_normalizer, Direction, EquivalenceMap, MapSpec};
use pgg_core::io::{game_to_json, load_game, GameFile};
use pgg_core::statics::{fd_check, utility_derivative, FdReport};
use pgg_core::{Error, Game, Matrix, ScalarFunction, SolveResult, StaticsResult};
use serde::Serialize;

use crate::args::*;

/// Exit status classes: bad input is 2, a computation that ran but failed is 1.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Compute(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Compute(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Compute(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Singular { .. } | Error::NonConvergence { .. } | Error::Integration { .. } | Error::Solver(_) => {
                Failure::Compute(msg)
            }
            _ => Failure::Input(msg),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| input(format!("--{flag}: cannot parse {t:?}: {e}"))))
        .collect()
}

/// `ones` or an explicit list; `None` means all ones.
fn parse_weights(flag: &str, text: Option<&str>, n: usize) -> Result<Option<Vec<f64>>, Failure> {
    match text {
        None | Some("ones") => Ok(None),
        Some(t) => {
            let v = parse_list(flag, t)?;
            if v.len() != n {
                return Err(input(format!("--{flag}: expected {n} entries, got {}", v.len())));
            }
            Ok(Some(v))
        }
    }
}

fn parse_profile(flag: &str, text: &str, game: &Game) -> Result<Vec<f64>, Failure> {
    let x = parse_list(flag, text)?;
    game.check_profile(&x).map_err(|e| input(format!("--{flag}: {e}")))?;
    Ok(x)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| input(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(report: &T, output: &Output) -> Result<(), Failure> {
    let text = to_json(report);
    match &output.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::Compute(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Compute(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn solve_options(flags: &SolverFlags, n: usize) -> Result<SolveOptions, Failure> {
    Ok(SolveOptions {
        gamma: parse_weights("gamma", flags.gamma.as_deref(), n)?,
        step_eps: flags.step_eps,
        tol: flags.tol,
        max_iter: flags.max_iter,
    })
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Dynamics(a) => dynamics(a),
        Command::Certify(a) => certify(a),
        Command::Transform(a) => transform(a),
        Command::Statics(a) => statics(a),
        Command::Casestudy(CaseStudy::Case1(a)) => case1(a),
        Command::Casestudy(CaseStudy::Case2(a)) => case2(a),
        Command::Oracle(a) => oracle(a),
    }
}

#[derive(Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
enum SolveReport {
    FixedPoint { result: SolveResult },
    Regularized { betas: Vec<f64>, result: SolveResult },
    MultiStart { starts: usize, seed: u64, cluster_tol: f64, clusters: Vec<Cluster> },
    BackwardInduction { x_star: Vec<f64>, check: NeCheck },
}

fn solve(a: SolveArgs) -> Outcome {
    let game = load_game(&a.game)?;
    let opts = solve_options(&a.solver, game.n())?;
    let x0 = match &a.x0 {
        Some(t) => parse_profile("x0", t, &game)?,
        None => game.lower().to_vec(),
    };
    let (report, ok) = if a.backward {
        let x_star = backward_induction(&game)?;
        let check = verify_ne(&game, &x_star, 10.0 * a.solver.tol)?;
        (SolveReport::BackwardInduction { x_star, check }, true)
    } else if let Some(n_starts) = a.starts {
        let clusters = multi_start_probe(&game, n_starts, a.seed, a.cluster_tol, &opts)?;
        let ok = clusters.iter().all(|c| c.representative.status == SolveStatus::Converged);
        (SolveReport::MultiStart { starts: n_starts, seed: a.seed, cluster_tol: a.cluster_tol, clusters }, ok)
    } else if let Some(text) = &a.betas {
        let betas = parse_list("betas", text)?;
        let result = solve_regularized(&game, &betas, &x0, &opts)?;
        let ok = result.status == SolveStatus::Converged;
        (SolveReport::Regularized { betas, result }, ok)
    } else {
        let result = solve_ne(&game, &x0, &opts)?;
        let ok = result.status == SolveStatus::Converged;
        (SolveReport::FixedPoint { result }, ok)
    };
    emit(&report, &a.output)?;
    Ok(if ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct VerifyReport {
    x: Vec<f64>,
    eps: f64,
    #[serde(flatten)]
    check: NeCheck,
}

fn verify(a: VerifyArgs) -> Outcome {
    let game = load_game(&a.game)?;
    let x = parse_profile("x", &a.x, &game)?;
    let check = verify_ne(&game, &x, a.eps)?;
    emit(&VerifyReport { x, eps: a.eps, check }, &a.output)?;
    Ok(0)
}

#[derive(Serialize)]
struct DynamicsReport {
    field: &'static str,
    step: f64,
    horizon: f64,
    samples: usize,
    final_time: f64,
    final_state: Vec<f64>,
    final_sw: f64,
    final_br_gap: Option<f64>,
    converged_at: Option<f64>,
    projection_active: bool,
    rate_fit: Option<RateFit>,
}

fn dynamics(a: DynamicsArgs) -> Outcome {
    let game = load_game(&a.game)?;
    let x0 = parse_profile("x0", &a.x0, &game)?;
    let (field, name) = match a.field {
        FieldKind::PseudoGradient => {
            let alpha = parse_weights("alpha", a.alpha.as_deref(), game.n())?.unwrap_or_else(|| vec![1.0; game.n()]);
            (Field::PseudoGradient { alpha }, "pseudo_gradient")
        }
        FieldKind::Welfare => {
            if a.alpha.is_some() {
                return Err(input("--alpha only applies to the pseudo-gradient field"));
            }
            (Field::Welfare, "welfare")
        }
    };
    let opts = DynamicsOptions { step: a.step, horizon: a.horizon, record_br_gap: !a.no_br_gap, energy: None };
    let traj = integrate(&game, &field, &x0, &opts)?;
    let rate_fit = match a.sw_star {
        Some(sw_star) => {
            let (t, gap) = traj.welfare_gap_series(sw_star, a.fit_floor);
            Some(fit_rate(&t, &gap).map_err(|e| Failure::Compute(format!("rate fit: {e}")))?)
        }
        None => None,
    };
    let csv = match &a.csv {
        Some(_) => Some(csv_text(
            &traj.header(),
            (0..traj.times.len()).map(|k| traj.record(k).iter().map(|v| v.to_string()).collect()),
        )?),
        None => None,
    };
    let report = DynamicsReport {
        field: name,
        step: a.step,
        horizon: a.horizon,
        samples: traj.times.len(),
        final_time: *traj.times.last().expect("trajectory has a start"),
        final_state: traj.last_state().to_vec(),
        final_sw: *traj.sw.last().expect("trajectory has a start"),
        final_br_gap: traj.br_gap.as_ref().and_then(|g| g.last().copied()),
        converged_at: traj.converged_at,
        projection_active: traj.projection_active,
        rate_fit,
    };
    if let (Some(path), Some(text)) = (&a.csv, &csv) {
        write_file(path, text)?;
    }
    emit(&report, &a.output)?;
    Ok(0)
}

fn certify(a: CertifyArgs) -> Outcome {
    let game = load_game(&a.game)?;
    let f_common = match &a.f_common {
        Some(text) => {
            let f: ScalarFunction = serde_json::from_str(text).map_err(|e| input(format!("--f-common: {e}")))?;
            f.validate()?;
            Some(f)
        }
        None => None,
    };
    let w0 = match &a.w0 {
        Some(path) => {
            let rows: Vec<Vec<Vec<f64>>> = read_json(path)?;
            rows.iter().map(|r| Matrix::from_rows(r)).collect::<pgg_core::Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    let maps: Vec<MapSpec> = match &a.maps {
        Some(path) => read_json(path)?,
        None => Vec::new(),
    };
    let opts = CertifyOptions {
        gamma: parse_weights("gamma", a.gamma.as_deref(), game.n())?,
        f_common,
        w0,
        maps,
        triangular: a.triangular,
    };
    let report = certify_any(&game, &opts)?;
    emit(&report, &a.output)?;
    Ok(0)
}

#[derive(Serialize)]
struct TransformReport {
    d: Vec<f64>,
    b: Vec<f64>,
    m: Vec<f64>,
    eps: Option<f64>,
    profile: Option<MappedProfile>,
    game: GameFile,
}

#[derive(Serialize)]
struct MappedProfile {
    direction: &'static str,
    from: Vec<f64>,
    to: Vec<f64>,
}

fn transform(a: TransformArgs) -> Outcome {
    let game = load_game(&a.game)?;
    let (map, eps) = if a.triangular {
        let map = upper_triangular_normalizer(&game, a.eps)?;
        let eps = map.d().get(1).map(|d| 1.0 / d);
        (map, eps)
    } else {
        let d = parse_list("d", a.d.as_deref().expect("clap requires --d"))?;
        let b = parse_list("b", a.b.as_deref().expect("clap requires --b"))?;
        (EquivalenceMap::new(&game, d, b)?, None)
    };
    let target = map.transform_game(&game)?;
    let profile = match &a.x {
        Some(text) => {
            let (source, dest, dir, name) = if a.inverse {
                (&target, &game, Direction::Inverse, "inverse")
            } else {
                (&game, &target, Direction::Forward, "forward")
            };
            let from = parse_profile("x", text, source)?;
            let to = map.map_profile(dest, &from, dir)?;
            Some(MappedProfile { direction: name, from, to })
        }
        None => None,
    };
    if let Some(path) = &a.out_game {
        write_file(path, &game_to_json(&target))?;
    }
    let report = TransformReport {
        d: map.d().to_vec(),
        b: map.b().to_vec(),
        m: map.m().to_vec(),
        eps,
        profile,
        game: GameFile::from_game(&target),
    };
    emit(&report, &a.output)?;
    Ok(0)
}

#[derive(Serialize)]
struct StaticsReport {
    x_star: Vec<f64>,
    delta: Vec<f64>,
    #[serde(flatten)]
    result: StaticsResult,
    fd: Option<FdReport>,
}

fn statics(a: StaticsArgs) -> Outcome {
    let game = load_game(&a.game)?;
    let delta = parse_list("delta", &a.delta)?;
    let x_star = match &a.x_star {
        Some(t) => parse_profile("x-star", t, &game)?,
        None => {
            let x0 = match &a.x0 {
                Some(t) => parse_profile("x0", t, &game)?,
                None => game.lower().to_vec(),
            };
            let opts = SolveOptions { tol: 1e-13, max_iter: 1_000_000, ..Default::default() };
            let r = solve_ne(&game, &x0, &opts)?;
            if r.status != SolveStatus::Converged {
                return Err(Failure::Compute(format!("equilibrium solve ended with {:?}", r.status)));
            }
            r.x_star
        }
    };
    let result = utility_derivative(&game, &x_star, &delta)?;
    let fd = match a.fd_t {
        Some(t) => Some(fd_check(&game, &x_star, &delta, t)?),
        None => None,
    };
    emit(&StaticsReport { x_star, delta, result, fd }, &a.output)?;
    Ok(0)
}

#[derive(Serialize)]
struct Case1Output {
    #[serde(flatten)]
    report: Case1Report,
    mean_ok: bool,
    var_ok: bool,
}

fn case1(a: Case1Args) -> Outcome {
    let v = &a.value;
    let report = monte_carlo_case1(a.n, a.p0, v.a, v.b, v.c0, a.samples, a.seed)?;
    if let Some(path) = &a.csv {
        let header: Vec<String> =
            ["sample", "inf_norm", "sigma_max", "within_bound", "certified"].map(String::from).to_vec();
        let rows = report.per_sample.iter().map(|s| {
            vec![
                s.sample.to_string(),
                s.inf_norm.to_string(),
                s.sigma_max.to_string(),
                s.within_bound.to_string(),
                s.certified.to_string(),
            ]
        });
        write_file(path, &csv_text(&header, rows)?)?;
    }
    let out = Case1Output { mean_ok: report.mean_ok(), var_ok: report.var_ok(), report };
    emit(&out, &a.output)?;
    Ok(0)
}

fn case2(a: Case2Args) -> Outcome {
    let v = &a.value;
    let report = case2_pipeline(a.n, v.a, v.b, v.c0, a.density, a.seed)?;
    emit(&report, &a.output)?;
    Ok(0)
}

#[derive(Serialize)]
struct OracleReport {
    m: usize,
    eps: f64,
    deviations: &'static str,
    count: usize,
    equilibria: Vec<Vec<f64>>,
}

fn oracle(a: OracleArgs) -> Outcome {
    let game = load_game(&a.game)?;
    let (mode, name) =
        if a.grid_only { (GridDeviations::GridPoints, "grid_points") } else { (GridDeviations::Exact, "exact") };
    let equilibria = grid_oracle_with(&game, a.m, a.eps, mode)?;
    emit(&OracleReport { m: a.m, eps: a.eps, deviations: name, count: equilibria.len(), equilibria }, &a.output)?;
    Ok(0)
}
