use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aw"))
        .args(args)
        .output()
        .expect("spawn aw")
}

fn ok(args: &[&str]) -> String {
    let out = aw(args);
    assert!(
        out.status.success(),
        "aw {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gap_demo_prints_both_distances() {
    let out = ok(&["gap-demo", "--epsilon", "0.5"]);
    assert!(out.contains("0.5") && out.contains("1.5"), "{out}");
}

#[test]
fn sample_project_tree_aw_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("s.csv");
    let proj = dir.path().join("p.csv");
    ok(&["sample", "--model", "gaussian-walk", "--t", "2", "--n", "12", "--seed", "3", "--out", s(&sample)]);
    ok(&["project", s(&sample), "--grid", "uniform", "--out", s(&proj)]);
    let cells = fs::read_to_string(dir.path().join("p.csv.cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 13);
    assert!(cells.starts_with("ring_t1,ring_t2,z0,z1\n"));

    let ta = dir.path().join("a.tree");
    let tb = dir.path().join("b.tree");
    ok(&["tree", s(&sample), "--grid", "uniform", "--out", s(&ta)]);
    ok(&["tree", s(&proj), "--grid", "none", "--out", s(&tb)]);
    // projecting twice changes nothing, so the two trees coincide
    let d: f64 = ok(&["aw", s(&ta), s(&tb)]).trim().parse().unwrap();
    assert_eq!(d, 0.0);

    let out = ok(&["aw", s(&ta), s(&tb), "--oracle"]);
    let gap: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("discrepancy "))
        .expect("discrepancy line")
        .parse()
        .unwrap();
    assert!(gap <= 1e-9, "{out}");
}

#[test]
fn w1_with_plan() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.csv");
    let nu = dir.path().join("nu.csv");
    let plan = dir.path().join("plan.csv");
    fs::write(&mu, "x0,weight\n0,0.5\n1,0.5\n").unwrap();
    fs::write(&nu, "x0,weight\n0.25,1\n").unwrap();
    let d: f64 = ok(&["w1", s(&mu), s(&nu), "--plan", s(&plan)]).trim().parse().unwrap();
    assert!((d - 0.5).abs() < 1e-15);
    let plan = fs::read_to_string(plan).unwrap();
    assert_eq!(plan.lines().count(), 3);
}

#[test]
fn rate_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        ok(&[
            "rate", "--model", "tree", "--tree", "coin2-biased", "--grid", "none", "--reference", "truth",
            "--n-list", "8,32,128", "--trials", "4", "--seed", "11", "--out", s(&out),
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["rate.csv", "errors.csv", "plot.svg"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn deviate_writes_tail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dev");
    ok(&[
        "deviate", "--model", "tree", "--tree", "coin2", "--grid", "none", "--reference", "truth", "--n", "16",
        "--trials", "200", "--x-grid", "auto:5", "--out", s(&out),
    ]);
    let tail = fs::read_to_string(out.join("tail.csv")).unwrap();
    assert!(tail.starts_with("x,tail,log_tail,n_x2\n"));
    assert_eq!(tail.lines().count(), 6);
}

#[test]
fn budget_abort_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = aw(&[
        "rate", "--model", "uniform-cube", "--grid", "none", "--reference", "proxy:800", "--n-list", "100",
        "--trials", "1", "--budget", "1000", "--out", s(&dir.path().join("r")),
    ]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn bad_arguments_fail() {
    assert!(!aw(&["rate", "--reference", "truth", "--out", "x"]).status.success());
    assert!(!aw(&["sample", "--model", "nope", "--n", "3"]).status.success());
}
