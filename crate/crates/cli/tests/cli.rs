#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cone_core::conesolve::{solve_heat, SolverConfig};
use serde_json::Value;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn conetool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conetool")).args(args).env_remove("CONETOOL_THREADS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn golden_q_set_matches_the_pole_order_oracle() {
    let g = read(&golden("q_set_circle.json"));
    let q = &g["result"]["q_set"];
    let strip = &q["strip"];
    let lambdas: Vec<f64> = (0..=6).map(|l| -((l * l) as f64)).collect();
    let want = oracle::q_set_oracle(1, &lambdas, 2, strip["re_min"].as_f64().unwrap(), strip["re_max"].as_f64().unwrap());
    let got: Vec<(f64, usize)> =
        q["roots"].as_array().unwrap().iter().map(|r| (r["rho"][0].as_f64().unwrap(), r["eta"].as_u64().unwrap() as usize)).collect();
    assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
    for (a, b) in got.iter().zip(&want) {
        assert!((a.0 - b.0).abs() < 1e-12 && a.1 == b.1, "{got:?} vs {want:?}");
    }
}

#[test]
fn roots_only_config_reproduces_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = conetool(&["report", "--config", s(&golden("roots_config.json")), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("q_set.json");
    let c = conetool(&["compare", s(&out), s(&golden("q_set_circle.json"))]);
    assert_eq!(code(&c), 0, "{}", String::from_utf8_lossy(&c.stdout));

    // The roots subcommand writes the same result.
    let direct = dir.path().join("direct.json");
    let o = conetool(&["roots", "--model", s(&golden("circle_model.json")), "--gamma", "0.3", "--k", "2", "--out", s(&direct)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&direct)["result"], read(&golden("q_set_circle.json"))["result"]);
}

#[test]
fn heat_eigenvector_run_decays_at_the_bessel_rate() {
    let dir = tempfile::tempdir().unwrap();
    let model = std::fs::read_to_string(golden("circle_model.json")).unwrap();
    let cfg = write(
        dir.path(),
        "heat.json",
        &format!(
            r#"{{"model": {model}, "problem": "heat", "solver": {{"dt": 1e-3, "t_end": 0.05}},
               "initial": {{"components": [{{"harmonic": {{"kind": "cos", "l": 1}}, "profile": {{"kind": "eigenvector", "index": 0}}}}]}}}}"#
        ),
    );
    let o = conetool(&["report", "--config", s(&cfg), "--out", s(&dir.path().join("rep"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read(&dir.path().join("rep/traj/manifest.json"));
    let rate = m["result"]["decay_rates"]["cos1"].as_f64().unwrap();
    let mu = m["result"]["eigenvalues"]["cos1"].as_f64().unwrap();
    let j = oracle::bessel_zeros(1.0, 1)[0];
    assert!((rate / (j * j) - 1.0).abs() < 1e-2, "rate {rate} vs {}", j * j);
    assert!((rate / mu - 1.0).abs() < 1e-4, "rate {rate} vs discrete {mu}");
}

#[test]
fn malformed_gamma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"model": "m.json", "tasks": {"roots": {"gamma": "0.3", "k": 2}}}"#);
    let o = conetool(&["report", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("config error") && stderr(&o).contains("invalid type"), "{}", stderr(&o));

    let o = conetool(&["roots", "--model", s(&golden("circle_model.json")), "--gamma", "abc", "--k", "2"]);
    assert_eq!(code(&o), 2);
    let o = conetool(&["spectrum", "--model", s(&golden("circle_model.json")), "--threads", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_flags_off_fields_and_schema_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let g = golden("q_set_circle.json");
    let mut v = read(&g);
    v["result"]["q_set"]["roots"][0]["x_exponent"][0] = Value::from(2.5);
    let off = write(dir.path(), "off.json", &v.to_string());
    let o = conetool(&["compare", s(&off), s(&g), "--field-tol", "x_exponent=0.02"]);
    assert_eq!(code(&o), 1);
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["failures"][0]["field"], "result.q_set.roots[0].x_exponent[0]");

    v["result"]["q_set"].as_object_mut().unwrap().remove("complete");
    let missing = write(dir.path(), "missing.json", &v.to_string());
    let o = conetool(&["compare", s(&missing), s(&g)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schema mismatch"));
}

#[test]
fn numerical_failures_exit_with_one() {
    let o = conetool(&["probe", "--diagonal", "0,1,2", "--shift", "0"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = conetool(&["probe", "--diagonal", "1,10,100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["result"]["probe"]["k_est"].as_f64().unwrap() >= 1.0);
}

fn pme_config(dir: &Path) -> PathBuf {
    write(
        dir,
        "pme.json",
        r#"{
          "model": {"cross_section": {"kind": "circle", "a": 1.0}, "l_max": 1,
                    "mesh": {"grading": "geometric", "intervals": 80, "x0": 1e-3}, "outer_bc": {"kind": "neumann"}},
          "problem": "pme",
          "solver": {"m": 2.0, "dt": 0.0025, "times": [0.05, 0.075, 0.1, 0.15, 0.2], "time_stepper": "trbdf2"},
          "initial": {"components": [{"harmonic": {"kind": "cos", "l": 0},
                                      "profile": {"kind": "cosine", "offset": 1.5, "amplitude": 0.3, "freq": 3.0}}]},
          "tasks": {"decompose": {"tau": 0.05, "nu": 0.15, "nus": [0.15, 0.1, 0.075],
                                  "options": {"p": 6, "q": 4, "gamma": -0.25, "k_max": 2, "fit_window": [0.01, 0.1]}},
                    "probe": {"time": 0.1, "shift": 1.0, "gamma": -0.25, "samples": 21, "scan": true}}
        }"#,
    )
}

#[test]
fn pme_pipeline_and_trajectory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pme_config(dir.path());
    let traj = dir.path().join("traj");
    let o = conetool(&["solve", "pme", "--config", s(&cfg), "--times", "0,0.05,0.075,0.1,0.15,0.2", "--out", s(&traj)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let loaded = conetool::traj::read(&traj).unwrap();
    assert_eq!(loaded.traj.times(), vec![0.0, 0.05, 0.075, 0.1, 0.15, 0.2]);

    let rep = dir.path().join("dec.json");
    let o = conetool(&["decompose", "--config", s(&cfg), "--traj", s(&traj), "--out", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let d = read(&rep);
    assert_eq!(d["result"]["decomposition"]["endpoint_residual"].as_f64().unwrap(), 0.0);
    let scan = &d["result"]["bound_scan"];
    assert!(scan["max"].as_f64().unwrap() / scan["min"].as_f64().unwrap() < 5.0);

    let o = conetool(&["probe", "--config", s(&cfg), "--matrix-from", &format!("{}@0.1", s(&traj)), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = read(&dir.path().join("probe.json"));
    assert!(p["result"]["probe"]["k_est"].as_f64().unwrap().is_finite());
    assert_eq!(p["result"]["scan"].as_array().unwrap().len(), 6);
}

#[test]
fn heat_trajectory_csv_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let model = golden("circle_model.json");
    let init = write(
        dir.path(),
        "init.json",
        r#"{"components": [{"harmonic": {"kind": "sin", "l": 2}, "profile": {"kind": "polynomial", "coeffs": [0, 0, 1, -1]}},
                           {"harmonic": {"kind": "cos", "l": 0}, "profile": {"kind": "random", "amplitude": 0.1}}]}"#,
    );
    let traj = dir.path().join("t");
    let o = conetool(&["solve", "heat", "--model", s(&model), "--initial", s(&init), "--dt", "0.01", "--times", "0.02,0.05", "--seed", "3", "--out", s(&traj)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let loaded = conetool::traj::read(&traj).unwrap();
    let cfg = SolverConfig { dt: 0.01, times: vec![0.02, 0.05], ..Default::default() };
    let again = solve_heat(&loaded.model, &loaded.traj.slices[0], &cfg).unwrap();
    for (a, b) in again.slices.iter().zip(&loaded.traj.slices) {
        assert_eq!(a.sub(b).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pme_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = conetool(&["report", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let mut n = 0;
    for e in walk(&a) {
        let rel = e.strip_prefix(&a).unwrap();
        assert_eq!(std::fs::read(&e).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{}", rel.display());
        n += 1;
    }
    assert!(n >= 8);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn shipped_configs_run_end_to_end() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["pme_report.json", "sh_report.json"] {
        let dir = tempfile::tempdir().unwrap();
        let o = conetool(&["report", "--config", s(&configs.join(name)), "--out", s(dir.path())]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        let fit = read(&dir.path().join("fit.json"));
        let row = &fit["result"]["fits"][0];
        assert_eq!(row["harmonic"], "cos0");
        // Near-tip profile of smooth radial data: constant, then x^2 (or the
        // pure constant for the unsubtracted SH fit).
        assert!(row["deviation"].as_f64().unwrap().abs() < 0.05, "{name}: {row}");
    }
}
