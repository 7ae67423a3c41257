use std::path::PathBuf;
use std::process::{Command, Output};

fn jetmech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetmech")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn passing_run_exits_zero_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");
    let o = jetmech(&["run", &scenario("damped.toml"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("result: PASS"));
    for file in ["trajectory.csv", "balance.csv", "dstar.csv", "report.csv"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
}

#[test]
fn failing_diagnostic_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.toml");
    let text = std::fs::read_to_string(scenario("damped.toml")).unwrap() + "\n[tolerances]\nbalance = 1e-9\n";
    std::fs::write(&path, text).unwrap();
    let o = jetmech(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn invalid_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "kind = \"point_mass\"\ndiagnostics = [\"balance\"]\n[[force]]\nlaw = \"frobnicate\"\n").unwrap();
    let o = jetmech(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("validation errors"), "{err}");
    assert!(err.contains("4:7: force[0].law: unknown force law `frobnicate`"), "{err}");
    assert!(err.contains("missing required key `system`"), "{err}");

    let o = jetmech(&["run", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn refine_prints_ratios_and_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetmech(&["--out", dir.path().to_str().unwrap(), "refine", &scenario("damped.toml"), "--levels", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("4.00"), "{}", stdout(&o));
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(table.starts_with("diagnostic,level,resolution,maxnorm,l2,ratio\n"));
    assert_eq!(table.lines().count(), 1 + 5 * 3);

    let o = jetmech(&["refine", &scenario("damped.toml"), "--levels", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn catalog_lists_every_law() {
    let o = jetmech(&["catalog"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for law in jetmech_cli::catalog::CATALOG {
        assert!(text.contains(law.name), "{} missing", law.name);
    }
}
