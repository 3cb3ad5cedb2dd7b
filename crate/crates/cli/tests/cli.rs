use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lavrentiev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lavrentiev")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("study.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const BENCHMARK: &str = "[problem]\nkind = \"volterra\"\nsource = \"benchmark_aw\"\nn = 2000\n";

#[test]
fn selftest_passes() {
    let out = lavrentiev(&["selftest"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}\n{}", stderr(&out));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 13);
    assert!(stderr(&out).contains("13/13 criteria passed"));
}

#[test]
fn rates_writes_identical_csv_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BENCHMARK);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = lavrentiev(&["rates", "--config", &cfg, "--out", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("delta,seed,alpha,error,discrepancy,newton_iters\n"));
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn wrong_rule_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{BENCHMARK}[rule]\nkind = \"apriori\"\nform = \"power_law\"\ntheta = 0.05\nexpected_exponent = 0.5\n"),
    );
    let out = lavrentiev(&["rates", "--config", &cfg, "--out", dir.path().join("o.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn missing_config_exits_two() {
    let out = lavrentiev(&["rates", "--config", "/nonexistent/study.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cannot read"));
}

#[test]
fn invalid_tau_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[rule]\nkind = \"discrepancy\"\ntau = 0.9\n");
    let out = lavrentiev(&["rates", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("tau must exceed 1"));
}

#[test]
fn unknown_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\nkind = \"volterra\"\ncolour = 3\n");
    let out = lavrentiev(&["rates", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour"));
}

#[test]
fn solver_failure_exits_three_with_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BENCHMARK}[rule]\nkind = \"discrepancy\"\nalpha0 = 1e-12\n"));
    let csv = dir.path().join("o.csv");
    let out = lavrentiev(&["rates", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(fs::read_to_string(&csv).unwrap().contains("# error: alpha0 below discrepancy threshold"));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BENCHMARK);
    let csv = dir.path().join("o.csv");
    let out = lavrentiev(&["rates", "--config", &cfg, "--n", "500", "--seed", "3", "--delta0", "1e-3", "--out", csv.to_str().unwrap()]);
    assert!(stderr(&out).contains("n = 500"), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1.0000000000000000e-3");
    assert_eq!(first[1], "3");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn rules_compare_three_rules() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BENCHMARK);
    let csv = dir.path().join("rules.csv");
    let out = lavrentiev(&["rules", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("rule,delta,seed,"));
    for rule in ["apriori,", "discrepancy,", "lepskii,"] {
        assert_eq!(text.lines().filter(|l| l.starts_with(rule)).count(), 40);
    }
}

#[test]
fn distance_writes_table_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\nsource = \"constant_one\"\nn = 16384\n[distance]\nr_count = 12\n");
    let csv = dir.path().join("dist.csv");
    let out = lavrentiev(&["distance", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("delta,alpha_pred,err_pred,err_obs\n"));
    let profile = fs::read_to_string(dir.path().join("dist.profile.csv")).unwrap();
    assert!(profile.starts_with("R,d,lambda\n"));
    assert_eq!(profile.lines().count(), 13);
}

#[test]
fn vsc_and_fracpow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\nn = 400\np = 0.25\n[vsc]\nsamples = 500\n");
    let out = lavrentiev(&["vsc", "--config", &cfg, "--out", dir.path().join("v.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("0 violations over 500 samples"));
    let out = lavrentiev(&["fracpow", "--config", &cfg, "--n", "200", "--out", dir.path().join("f.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(dir.path().join("f.csv")).unwrap().lines().count(), 201);
}

#[test]
fn elliptic_rates_from_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\nkind = \"elliptic\"\n");
    let out = lavrentiev(&["rates", "--config", &cfg, "--out", dir.path().join("e.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}
