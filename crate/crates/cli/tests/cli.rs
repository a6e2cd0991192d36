use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CASE_ONE: &str = "\
# uniform star, six sites
model.n = 6
model.alpha = 1
model.p = 0.6
coupling.family = sites_constant
coupling.g = 1,1,1,1,1,1
grid.t_end = 7.695
grid.samples = 200
";

fn spinstar(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spinstar"));
    cmd.args(args).env_remove("SPINSTAR_DIM_CAP");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn trace_starts_from_the_bell_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c1.cfg", CASE_ONE);
    let out = dir.path().join("c1.csv");
    let o = spinstar(&["trace", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,entanglement,lambda_min\n"));
    assert!(!text.contains('\r'));
    let r = rows(&out);
    assert_eq!(r.len(), 200);
    let first = &r[0];
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 0.5).abs() < 1e-12 && (first[2] + 0.5).abs() < 1e-12, "{first:?}");

    let rep = report(&dir.path().join("c1.report.json"));
    assert_eq!(rep["command"], "trace");
    assert!(rep["witness"]["verdict"].is_string());
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c1.cfg", CASE_ONE);
    let a = spinstar(&["trace", "--config", s(&cfg)], &[]);
    let b = spinstar(&["trace", "--config", s(&cfg)], &[]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn printed_floats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c1.cfg", CASE_ONE);
    let o = spinstar(&["trace", "--config", s(&cfg)], &[]);
    for field in String::from_utf8(o.stdout).unwrap().lines().skip(1).flat_map(|l| l.split(',').map(str::to_owned).collect::<Vec<_>>()) {
        let x: f64 = field.parse().unwrap();
        assert_eq!(format!("{x:?}"), field);
    }
}

#[test]
fn all_engines_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c1.cfg", &CASE_ONE.replace("model.n = 6", "model.n = 4").replace("1,1,1,1,1,1", "1,0.5,0.8,1.2"));
    let out = dir.path().join("all.csv");
    let o = spinstar(&["trace", "--config", s(&cfg), "--engine", "all", "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let traces: Vec<_> = ["fast", "oracle", "closed_form"].iter().map(|e| rows(&dir.path().join(format!("all.{e}.csv")))).collect();
    let mut worst = 0.0f64;
    for other in &traces[1..] {
        assert_eq!(other.len(), traces[0].len());
        for (a, b) in traces[0].iter().zip(other) {
            assert_eq!(a[0], b[0]);
            worst = worst.max((a[1] - b[1]).abs()).max((a[2] - b[2]).abs());
        }
    }
    assert!(worst <= 1e-8, "{worst}");
    let reported = report(&dir.path().join("all.report.json"))["diagnostics"]["max_engine_deviation"].as_f64().unwrap();
    assert!(reported <= 1e-8);
}

#[test]
fn site_time_power_is_non_markovian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pw.cfg",
        "model.n = 4\nmodel.alpha = 1\nmodel.p = 1\ncoupling.family = site_time_power\ncoupling.gamma = 0.3\n",
    );
    let out = dir.path().join("pw.csv");
    let o = spinstar(&["trace", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"), "missing t0 should warn");
    let rep = report(&dir.path().join("pw.report.json"));
    assert_eq!(rep["witness"]["verdict"], "non_markovian", "{}", rep["witness"]);
    assert!(!rep["witness"]["revivals"].as_array().unwrap().is_empty());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let both = write_config(dir.path(), "both.cfg", &format!("{CASE_ONE}model.beta = 1\n"));
    let o = spinstar(&["trace", "--config", s(&both)], &[]);
    assert_eq!(o.status.code(), Some(2));

    let unknown = write_config(dir.path(), "unknown.cfg", &format!("{CASE_ONE}grid.sample = 5\n"));
    let o = spinstar(&["trace", "--config", s(&unknown)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 9"), "{}", String::from_utf8_lossy(&o.stderr));

    let o = spinstar(&["trace", "--config", s(&dir.path().join("missing.cfg"))], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inapplicable_engine_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pw.cfg",
        "model.n = 3\nmodel.alpha = 1\nmodel.p = 1\ncoupling.family = site_time_power\ncoupling.gamma = 0.3\ncoupling.t0 = 0.001\n",
    );
    let o = spinstar(&["trace", "--config", s(&cfg), "--engine", "closed_form"], &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn dim_cap_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c1.cfg", CASE_ONE);
    let o = spinstar(&["trace", "--config", s(&cfg), "--engine", "oracle"], &[("SPINSTAR_DIM_CAP", "64")]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = spinstar(&["trace", "--config", s(&cfg), "--engine", "oracle"], &[("SPINSTAR_DIM_CAP", "lots")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn transition_grows_with_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ste.cfg",
        "model.n = 2\nmodel.alpha = 1\nmodel.p = 1\ncoupling.family = site_time_exponential\ncoupling.gamma1 = 0.5\nscan.n = 2..8\n",
    );
    let out = dir.path().join("ste.csv");
    let o = spinstar(&["transition", "--config", s(&cfg), "--lo", "0.05", "--hi", "5", "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("N,p,gamma_star,evaluations\n"));
    let r = rows(&out);
    assert_eq!(r.iter().map(|row| row[0] as usize).collect::<Vec<_>>(), (2..=8).collect::<Vec<_>>());
    for w in r.windows(2) {
        assert!(w[1][2] >= w[0][2], "{:?} then {:?}", w[0], w[1]);
    }
}

#[test]
fn inverted_bracket_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "te.cfg",
        "model.n = 6\nmodel.alpha = 1\nmodel.p = 0.6\ncoupling.family = time_exponential\ncoupling.gamma = 0.5\n",
    );
    let out = dir.path().join("te.csv");
    let o = spinstar(&["transition", "--config", s(&cfg), "--lo", "2", "--hi", "0.3", "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let gamma_star = rows(&out)[0][2];
    // The revival minimum is quartically flat, so the detectable transition
    // sits about 2% below √N/π at the default revival tolerance.
    let analytic = 6f64.sqrt() / std::f64::consts::PI;
    assert!(gamma_star < analytic && (analytic - gamma_star) / analytic < 0.025, "{gamma_star}");

    let rep = report(&dir.path().join("te.report.json"));
    let cell = &rep["transition"][0]["result"];
    assert_eq!(cell["orientation"], "fires_below");
    assert_eq!(cell["initial_bracket"][0].as_f64(), Some(2.0));
}

#[test]
fn transition_without_a_bracket_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "te.cfg",
        "model.n = 6\nmodel.alpha = 1\nmodel.p = 0.6\ncoupling.family = time_exponential\ncoupling.gamma = 0.5\n",
    );
    let o = spinstar(&["transition", "--config", s(&cfg), "--lo", "3", "--hi", "5"], &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_stacks_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sw.cfg",
        "model.n = 2\nmodel.alpha = 1\nmodel.p = 1\ncoupling.family = site_time_exponential\ncoupling.gamma1 = 0.5\n\
         grid.samples = 11\ngrid.t_end = 4\nscan.n = 2,3\nscan.p = 1,0.6\nscan.param = gamma1\nscan.values = 0.2,1.5\n",
    );
    let out = dir.path().join("sw.csv");
    let o = spinstar(&["sweep", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("N,p,param_value,t,entanglement,lambda_min\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2 * 11);
    assert_eq!(report(&dir.path().join("sw.report.json"))["sweep"].as_array().unwrap().len(), 8);
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = spinstar(&["verify", "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&out).unwrap().lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(report(&dir.path().join("v.report.json"))["diagnostics"]["max_engine_deviation"].as_f64().unwrap() <= 1e-8);
}
