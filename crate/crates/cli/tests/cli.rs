use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualtraj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value printed after `label` on its own line.
fn field(out: &str, label: &str) -> f64 {
    out.lines()
        .find_map(|l| {
            let mut it = l.split_whitespace();
            (it.next() == Some(label)).then(|| it.next()).flatten()
        })
        .unwrap_or_else(|| panic!("no `{label}` in\n{out}"))
        .parse()
        .unwrap()
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/logistic.sys")
        .display()
        .to_string()
}

#[test]
fn integrate_logistic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["integrate", "--system", "logistic", "--method", "rk45", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1002);
    assert!(csv.starts_with("t,y1\n"));
    let p = field(&stdout(&o), "P");
    assert!(p > 1e-13 && p < 1e-8, "{p}");
    let svg = fs::read_to_string(dir.path().join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        let o = run(&["integrate", "--system", "lorenz", "--n", "500", "--T", "2", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["trajectory.csv", "trajectory.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn tiny_grid_and_other_methods() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    for m in ["rk45", "rk23", "modified-euler"] {
        let o = run(&["integrate", "--system", "memristor", "--n", "10", "--T", "1", "--method", m, "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{m}: {}", stderr(&o));
        let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(csv.lines().count(), 12);
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["integrate", "--system", "nope", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown system"));

    for args in [
        vec!["integrate", "--system", "logistic", "--bogus"],
        vec!["solve", "--system", "logistic", "--method", "newton"],
        vec!["solve", "--system", "logistic", "--start", "somewhere"],
        vec!["solve", "--system", "logistic", "--rho-shrink", "2", "--out", out],
        vec!["integrate", "--system", "logistic", "--param", "q=1", "--out", out],
        vec!["integrate", "--system", "logistic", "--y0", "1,2", "--out", out],
        vec![],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn blow_up_exits_three() {
    let dir = TempDir::new().unwrap();
    // y' = 5y(1 − y) from y0 < 0 escapes to −∞ in finite time
    let o = run(&["integrate", "--system", "logistic", "--y0", "-10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn solve_levmarq_certifies_logistic() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "solve", "--system", "logistic", "--method", "levmarq", "--start", "zero", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("certificate global-minimum"));
    let report = fs::read_to_string(dir.path().join("report.toml")).unwrap();
    let doc: toml::Table = report.parse().unwrap();
    let solve = doc["solve"].as_table().unwrap();
    assert_eq!(solve["status"].as_str(), Some("converged"));
    assert_eq!(solve["method"].as_str(), Some("levmarq"));
    assert_eq!(solve["certificate"]["verdict"].as_str(), Some("global-minimum"));
    assert!(solve["objective"].as_float().unwrap() < 1e-16);
    for f in ["trajectory.csv", "history.csv", "trajectory.svg", "history.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn seeded_memristor_solve_beats_rk45() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let rk = run(&["integrate", "--system", "memristor", "--n", "1000", "--out", out]);
    let p_rk = field(&stdout(&rk), "P");
    // seed from the CSV just written
    let start = format!("file:{}", dir.path().join("trajectory.csv").display());
    let o = run(&[
        "solve", "--system", "memristor", "--n", "1000", "--rho0", "1", "--start", &start, "--max-iter", "20",
        "--out", out, "--no-plot",
    ]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(field(&s, "P(start)"), p_rk);
    assert!(field(&s, "P") < p_rk);
    assert!(!dir.path().join("history.svg").exists());
}

#[test]
fn max_iterations_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "solve", "--system", "lorenz", "--n", "200", "--T", "2", "--method", "levmarq", "--max-iter", "2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("max-iterations"));
}

#[test]
fn classify_prognoses() {
    let cases = [
        ("logistic", "stable; iteration methods shouldn't produce chaos"),
        ("memristor", "deterministically stable; iterative methods may produce pseudo-chaos"),
        ("lorenz", "NP-hard per Conjecture 1; chaotic per Conjecture 2"),
    ];
    for (sys, text) in cases {
        let o = run(&["classify", "--system", sys, "--budget", "2000"]);
        assert_eq!(o.status.code(), Some(0));
        let s = stdout(&o);
        assert!(s.lines().next().unwrap().contains(text), "{s}");
        assert!(s.contains("mu_star") && s.contains("witness"));
    }
}

#[test]
fn classify_writes_samples() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("eig.csv");
    let o = run(&["classify", "--system", "lorenz", "--samples", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s1,s2,s3,lambda1,lambda2,lambda3"));
    assert!(lines.all(|l| l.split(',').count() == 6));
}

#[test]
fn system_file_matches_builtin() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let a = stdout(&run(&["integrate", "--system", &fixture(), "--out", out]));
    let b = stdout(&run(&["integrate", "--system", "logistic", "--out", out]));
    assert_eq!(field(&a, "P"), field(&b, "P"));
    let o = run(&["integrate", "--system", &fixture(), "--param", "r=3", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_logistic() {
    let dir = TempDir::new().unwrap();
    let o = run(&["compare", "--system", "logistic", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(field(&s, "P(rk45)") < 1e-8);
    assert!(field(&s, "P(cd)") < 1e-8);
    let doc: toml::Table = fs::read_to_string(dir.path().join("compare.toml")).unwrap().parse().unwrap();
    let c = doc["compare"].as_table().unwrap();
    assert_eq!(c["winner"].as_str(), Some("cd"));
    assert_eq!(c["verdict"]["kind"].as_str(), Some("pd-attainable"));
    let curve = fs::read_to_string(dir.path().join("divergence.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1002);
    for f in ["rk45.csv", "rk23.csv", "cd.csv", "trajectories.svg", "divergence.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn compare_memristor_cd_wins() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "compare", "--system", "memristor", "--n", "2000", "--T", "20", "--no-rk23", "--no-plot", "--threads", "2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("winner     cd"), "{s}");
    assert!(!dir.path().join("rk23.csv").exists());
}
