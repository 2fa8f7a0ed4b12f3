use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PLAYER: &str = r#"{"value": {"family": "quadratic_clipped_value", "params": {"a": 3.0, "b": 1.0}},
    "cost": {"family": "quadratic_cost", "params": {"c0": 1.0}}}"#;

fn pgg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgg")).args(args).env_remove("PGG_SEED").output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn two_sided(dir: &Path) -> String {
    let players = [PLAYER; 4].join(",");
    let text = format!(
        r#"{{"n": 4, "W": [1,0,1,1, 0,1,1,1, 1,1,1,0, 1,1,0,1], "lower": [0,0,0,0], "upper": [1,1,1,1],
            "players": [{players}]}}"#
    );
    write(dir, "two_sided.json", &text).to_str().unwrap().to_string()
}

fn triangular(dir: &Path) -> String {
    let players = [PLAYER; 3].join(",");
    let text = format!(
        r#"{{"n": 3, "W": [1,1,0, 0,1,1, 0,0,1], "lower": [0,0,0], "upper": [1.5,1.5,1.5],
            "players": [{players}]}}"#
    );
    write(dir, "tri.json", &text).to_str().unwrap().to_string()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn oracle_lists_three_equilibria() {
    let dir = TempDir::new().unwrap();
    let g = two_sided(dir.path());
    let r = stdout_json(&pgg(&["oracle", "--game", &g, "--m", "15", "--eps", "1e-8"]));
    assert_eq!(r["count"], 3);
    let loose = stdout_json(&pgg(&["oracle", "--game", &g, "--m", "15", "--grid-only"]));
    assert_eq!(loose["count"], 5);
}

#[test]
fn solve_methods_agree_on_triangular_game() {
    let dir = TempDir::new().unwrap();
    let g = triangular(dir.path());
    let fixed = stdout_json(&pgg(&["solve", "--game", &g]));
    assert_eq!(fixed["method"], "fixed_point");
    assert_eq!(fixed["result"]["status"], "converged");
    let back = stdout_json(&pgg(&["solve", "--game", &g, "--backward"]));
    assert_eq!(back["check"]["is_ne"], true);
    let reg = stdout_json(&pgg(&["solve", "--game", &g, "--betas", "1,0.1,0.01"]));
    let (a, b) = (floats(&fixed["result"]["x_star"]), floats(&back["x_star"]));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6);
    }
    assert!(reg["result"]["final_gap"].as_f64().unwrap() < 1e-2);
    let probe = stdout_json(&pgg(&["solve", "--game", &g, "--starts", "10", "--seed", "4"]));
    assert_eq!(probe["clusters"].as_array().unwrap().len(), 1);
}

#[test]
fn unfinished_solve_exits_one_with_report() {
    let dir = TempDir::new().unwrap();
    let g = triangular(dir.path());
    let out = pgg(&["solve", "--game", &g, "--max-iter", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["status"], "max_iter");
}

#[test]
fn verify_reports_gap() {
    let dir = TempDir::new().unwrap();
    let g = two_sided(dir.path());
    let r = stdout_json(&pgg(&["verify", "--game", &g, "--x", "1,1,1,1"]));
    assert_eq!(r["is_ne"], false);
    assert!((r["gap"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    let r = stdout_json(&pgg(&["verify", "--game", &g, "--x", "1,1,0,0"]));
    assert_eq!(r["is_ne"], true);
}

#[test]
fn certify_with_options() {
    let dir = TempDir::new().unwrap();
    let g = two_sided(dir.path());
    let r = stdout_json(&pgg(&["certify", "--game", &g, "--gamma", "ones"]));
    assert_eq!(r["verdict"], "fail");
    let t = triangular(dir.path());
    let r = stdout_json(&pgg(&["certify", "--game", &t, "--triangular"]));
    assert_eq!(r["verdict"], "pass");
    let maps = write(dir.path(), "maps.json", r#"[{"d": [1, 2, 4], "b": [0, 0, 0]}]"#);
    let r = stdout_json(&pgg(&["certify", "--game", &t, "--maps", maps.to_str().unwrap()]));
    assert!(r["verdict"].is_string());
    let out = pgg(&["certify", "--game", &t, "--f-common", "{\"family\": \"nope\"}"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn transform_writes_loadable_game() {
    let dir = TempDir::new().unwrap();
    let g = triangular(dir.path());
    let out_game = dir.path().join("g2.json");
    let r = stdout_json(&pgg(&[
        "transform",
        "--game",
        &g,
        "--triangular",
        "--x",
        "0.5,0.5,0.5",
        "--out-game",
        out_game.to_str().unwrap(),
    ]));
    assert!(r["eps"].as_f64().unwrap() > 0.0);
    let d = floats(&r["d"]);
    let to = floats(&r["profile"]["to"]);
    assert!((to[2] - 0.5 * d[2] - floats(&r["b"])[2]).abs() < 1e-12);
    // Scaled coordinates need γ = d² for the solver to keep pace.
    let gamma = d.iter().map(|v| (v * v).to_string()).collect::<Vec<_>>().join(",");
    let solved = stdout_json(&pgg(&["solve", "--game", out_game.to_str().unwrap(), "--gamma", &gamma]));
    assert_eq!(solved["result"]["status"], "converged");
    let back = stdout_json(&pgg(&[
        "transform",
        "--game",
        &g,
        "--d",
        "1,2,3",
        "--b",
        "0,0.5,-1",
        "--x",
        "0.5,1.5,0.5",
        "--inverse",
    ]));
    assert_eq!(floats(&back["profile"]["to"]), vec![0.5, 0.5, 0.5]);
}

#[test]
fn dynamics_csv_and_fit() {
    let dir = TempDir::new().unwrap();
    let g = triangular(dir.path());
    let csv = dir.path().join("traj.csv");
    let r = stdout_json(&pgg(&[
        "dynamics",
        "--game",
        &g,
        "--x0",
        "0.2,0.2,0.2",
        "--field",
        "welfare",
        "--horizon",
        "5",
        "--csv",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(r["samples"], 501);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,x_1,x_2,x_3,sw"));
    assert_eq!(text.lines().count(), 502);
    let sw_star = r["final_sw"].as_f64().unwrap();
    let fit = stdout_json(&pgg(&[
        "dynamics",
        "--game",
        &g,
        "--x0",
        "0.2,0.2,0.2",
        "--field",
        "welfare",
        "--horizon",
        "3",
        "--sw-star",
        &sw_star.to_string(),
    ]));
    assert!(fit["rate_fit"]["r_squared"].as_f64().unwrap() > 0.9);
}

#[test]
fn statics_with_fd() {
    let dir = TempDir::new().unwrap();
    let g = triangular(dir.path());
    let r = stdout_json(&pgg(&["statics", "--game", &g, "--delta", "0.1,0,-0.1", "--fd-t", "1e-3"]));
    assert!(r["fd"]["rel_err_u"].as_f64().unwrap() < 1e-4);
    assert_eq!(floats(&r["du_dt"]).len(), 3);
}

#[test]
fn case_studies_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let csv = dir.path().join("samples.csv");
    for out in [&a, &b] {
        let o = pgg(&[
            "casestudy",
            "case1",
            "--n",
            "20",
            "--p0",
            "1",
            "--samples",
            "100",
            "--seed",
            "7",
            "--csv",
            csv.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 101);

    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_pgg"));
        c.args(["casestudy", "case2", "--n", "4"]);
        match seed {
            Some(s) => c.env("PGG_SEED", s),
            None => c.env_remove("PGG_SEED"),
        };
        c.output().unwrap().stdout
    };
    assert_eq!(run(Some("3")), run(Some("3")));
    let r: Value = serde_json::from_slice(&run(Some("3"))).unwrap();
    assert!(r["max_pairwise_dist"].as_f64().unwrap() < 1e-6);
    let direct = pgg(&["casestudy", "case2", "--n", "4", "--seed", "3"]).stdout;
    assert_eq!(direct, run(Some("3")));
}

#[test]
fn missing_required_flags_exit_two_without_artifacts() {
    let dir = TempDir::new().unwrap();
    let g = two_sided(dir.path());
    let out = dir.path().join("report.json");
    let o = out.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--out", o],
        vec!["verify", "--game", &g, "--out", o],
        vec!["dynamics", "--game", &g, "--out", o],
        vec!["certify", "--out", o],
        vec!["transform", "--game", &g, "--out", o],
        vec!["statics", "--game", &g, "--out", o],
        vec!["casestudy", "case1", "--n", "10", "--out", o],
        vec!["casestudy", "case2", "--out", o],
        vec!["oracle", "--game", &g, "--out", o],
    ];
    for args in cases {
        let r = pgg(&args);
        assert_eq!(r.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&r.stderr).contains("Usage"), "{args:?}");
        assert!(!out.exists(), "{args:?} left a report behind");
    }
}

#[test]
fn bad_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"n": 1, "W": [2.0], "lower": [0], "upper": [1], "players": []}"#);
    let r = pgg(&["solve", "--game", bad.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let g = two_sided(dir.path());
    assert_eq!(pgg(&["verify", "--game", &g, "--x", "1,x,0,0"]).status.code(), Some(2));
    assert_eq!(pgg(&["oracle", "--game", &g, "--m", "1"]).status.code(), Some(2));
    assert_eq!(pgg(&["solve", "--game", &g, "--backward"]).status.code(), Some(2));
}
