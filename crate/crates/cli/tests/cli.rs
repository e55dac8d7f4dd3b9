use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cournot(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cournot"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL_2D: &str = "\
# seeded random types, since 300 is not a square
name = cloud
dimension = 2
solver = best_reply
mu = uniform
cost = quadratic
kernel = abs_power a=1 b=1 c=1 d=0,0 q=4
eps = 0.1
v0 = quadratic a=1,1 center=0.6,0.7
n_atoms = 300
seed = 7
bins = 16
";

#[test]
fn presets_are_listed_and_printable() {
    let dir = tempfile::tempdir().unwrap();
    let o = cournot(&["presets"], dir.path());
    assert_eq!(code(&o), 0);
    let list = String::from_utf8(o.stdout).unwrap();
    for p in ["fig1", "fig2", "fig3", "fig3_nonsym", "trivial_log", "trivial_power"] {
        assert!(list.lines().any(|l| l == p), "{p} missing");
    }
    let o = cournot(&["presets", "fig3"], dir.path());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("kernel = abs_power a=3 b=3 c=2 d=0.5,0 q=2"));
}

#[test]
fn solve_writes_all_artifacts_and_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let o = cournot(&["solve", "trivial_power", "--out-dir", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["result.json", "density.csv", "map.csv", "trace.csv"] {
        assert!(dir.path().join("out").join(format!("trivial_power.{f}")).exists());
    }
    let density = fs::read_to_string(dir.path().join("out/trivial_power.density.csv")).unwrap();
    let rows: Vec<&str> = density.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "y,nu");
    assert_eq!(rows.len(), 513);
    assert!(density.contains("# seed = 0\n# name = trivial_power\n"));
    let json = fs::read_to_string(dir.path().join("out/trivial_power.result.json")).unwrap();
    assert!(json.contains("\"seed\": 0"));
    assert!(json.contains("\"version\""));
    assert!(json.contains("solver = algo2"));
}

#[test]
fn flags_override_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = cournot(&["solve", "fig2", "--grid", "64", "--seed", "5", "--out-dir", "."], dir.path());
    assert_ne!(code(&o), 1);
    let json = fs::read_to_string(dir.path().join("fig2.result.json")).unwrap();
    assert!(json.contains("n_cells = 64"));
    assert!(json.contains("\"seed\": 5"));
    let map = fs::read_to_string(dir.path().join("fig2.map.csv")).unwrap();
    assert_eq!(map.lines().filter(|l| !l.starts_with('#')).count(), 66);
}

#[test]
fn non_convergence_has_its_own_exit_code_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cournot(&["solve", "fig3", "--max-iter", "2", "--out-dir", "."], dir.path());
    assert_eq!(code(&o), 3);
    assert!(dir.path().join("fig3.trace.csv").exists());
    let trace = fs::read_to_string(dir.path().join("fig3.trace.csv")).unwrap();
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn config_errors_exit_with_one_and_cite_lines() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.cfg"),
        "name = bad\nsolver = algo1\nmu = uniform\ncost = quadratic\ncongestion = power alpha=2\n",
    )
    .unwrap();
    let o = cournot(&["solve", "bad.cfg"], dir.path());
    assert_eq!(code(&o), 1);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 5"), "{err}");
    assert!(err.contains("algo1"), "{err}");
    let o = cournot(&["solve", "no_such_thing"], dir.path());
    assert_eq!(code(&o), 1);
    let o = cournot(&["solve"], dir.path());
    assert_ne!(code(&o), 0);
}

#[test]
fn verify_and_compare_stored_results() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cloud.cfg"), SMALL_2D).unwrap();
    assert_eq!(code(&cournot(&["solve", "fig3", "--grid", "512", "--out-dir", "a"], dir.path())), 0);
    assert_eq!(code(&cournot(&["solve", "cloud.cfg", "--out-dir", "b"], dir.path())), 0);
    let o = cournot(&["verify", "a/fig3.result.json"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("\"recomputed\""));
    let o = cournot(&["compare", "a/fig3.result.json", "a/fig3.result.json"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("max W1 0.000e0"));
    let o = cournot(&["compare", "a/fig3.result.json", "b/cloud.result.json"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("cannot compare"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cloud.cfg"), SMALL_2D).unwrap();
    for _ in 0..2 {
        for d in ["one", "two"] {
            assert_eq!(code(&cournot(&["solve", "cloud.cfg", "--out-dir", d], dir.path())), 0);
        }
    }
    for f in ["result.json", "density.csv", "map.csv", "trace.csv"] {
        let a = fs::read(dir.path().join("one").join(format!("cloud.{f}"))).unwrap();
        let b = fs::read(dir.path().join("two").join(format!("cloud.{f}"))).unwrap();
        assert_eq!(a, b, "{f}");
    }
    // a different seed draws different types
    assert_eq!(code(&cournot(&["solve", "cloud.cfg", "--seed", "8", "--out-dir", "three"], dir.path())), 0);
    let a = fs::read(dir.path().join("one/cloud.map.csv")).unwrap();
    let c = fs::read(dir.path().join("three/cloud.map.csv")).unwrap();
    assert_ne!(a, c);
}
