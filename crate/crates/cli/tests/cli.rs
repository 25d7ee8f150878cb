use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, scenario: &str, args: &[&str]) -> Output {
    let cfg = dir.join("scenario.cfg");
    fs::write(&cfg, scenario).unwrap();
    Command::new(env!("CARGO_BIN_EXE_subriem"))
        .args(args)
        .arg("--scenario")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn area_of_flat_graph() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "u = 0\nnx = 9\n", &["area"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "area: 1.0");
    assert_eq!(summary(d.path())["status"], "ok");
}

#[test]
fn trace_follows_parabola() {
    let d = TempDir::new().unwrap();
    let (a, b) = (0.2, -0.3);
    let cfg = format!("u = \"x\"\nx0 = -1\nt0 = -1\nstart_x = {a}\nstart_t = {b}\nhalfwidth = 0.5\n");
    let o = run(d.path(), &cfg, &["trace"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("out/curve.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("s,t,"));
    let mut rows = 0;
    for line in lines {
        let rec: Vec<&str> = line.split(',').collect();
        let s: f64 = rec[0].parse().unwrap();
        let t: f64 = rec[1].parse().unwrap();
        assert!((t - (b + s * s - a * a)).abs() < 1e-8, "s = {s}, t = {t}");
        rows += 1;
    }
    assert!(rows > 100);
}

#[test]
fn malformed_expression_exits_one() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "f = \"x +\"\n", &["area"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset"));
    let s = summary(d.path());
    assert_eq!(s["status"], "error");
    assert_eq!(s["exit_code"], 1);
}

#[test]
fn bad_config_exits_one() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), "colour = 3\n", &["area"]).status.code(), Some(1));
    assert_eq!(run(d.path(), "nx = many\n", &["area"]).status.code(), Some(1));
    assert_eq!(run(d.path(), "nx = 9\n", &["solve-constrained"]).status.code(), Some(1));
}

#[test]
fn degenerate_metric_exits_two() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "g11 = \"0 - 1\"\nnx = 9\n", &["area"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(d.path())["exit_code"], 2);
}

#[test]
fn grid_override() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "u = \"x*t\"\nnx = 33\n", &["solve", "--grid", "9x7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let u = fs::read_to_string(d.path().join("out/u.csv")).unwrap();
    assert_eq!(u.lines().count(), 1 + 9 * 7);
}

#[test]
fn every_command_writes_summary() {
    let cfg = "nx = 9\nf = \"0.5\"\ntarget_volume = 0.1\nlevels = \"9, 17, 33\"\ncases = 2\npoints = 5\nfields = 1\nn1 = 9\nn2 = 9\n";
    for cmd in [
        "area",
        "volume",
        "variation-check",
        "trace",
        "solve",
        "solve-constrained",
        "regularity",
        "geometry-check",
        "surface-variation",
    ] {
        let d = TempDir::new().unwrap();
        let o = run(d.path(), cfg, &[cmd, "--seed", "3"]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let s = summary(d.path());
        assert_eq!(s["command"], cmd);
        assert!(s["status"].is_string(), "{cmd}");
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn seeded_runs_are_reproducible() {
    let cfg = "nx = 9\ncases = 3\npoints = 10\nfields = 2\nn1 = 9\nn2 = 9\n";
    for cmd in ["variation-check", "geometry-check", "surface-variation"] {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        run(a.path(), cfg, &[cmd, "--seed", "11"]);
        run(b.path(), cfg, &[cmd, "--seed", "11"]);
        let (fa, fb) = (read_all(&a.path().join("out")), read_all(&b.path().join("out")));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{cmd}");
    }
}
