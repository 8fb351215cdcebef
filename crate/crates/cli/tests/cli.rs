use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn tenvote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tenvote")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = tenvote(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    assert_eq!(tenvote(&["--help"]).status.code(), Some(0));
    for sub in ["gen-data", "vote", "solve", "study-convergence", "study-voting", "coverage", "reference", "gen-problem"] {
        assert_eq!(tenvote(&[sub, "--help"]).status.code(), Some(0), "{sub}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(tenvote(&["--no-such-flag"]).status.code(), Some(2));
    assert_eq!(tenvote(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(tenvote(&["solve", "--problem", "a", "--data", "b", "--scheme", "fastest"]).status.code(), Some(2));
    assert_eq!(tenvote(&[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let out = tenvote(&["vote", "--input", p(&missing), "--output", p(&missing), "--sigma", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn pipeline_on_a_tiny_truss() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("tower.model");
    let data = dir.path().join("data.txt");
    let voted = dir.path().join("voted.txt");
    let result = dir.path().join("result.txt");
    let reference = dir.path().join("reference.csv");
    let coverage = dir.path().join("coverage.csv");

    ok(&["gen-problem", "--benchmark", "truss", "--levels", "2", "--bays", "1", "--output", p(&model)]);
    ok(&["gen-data", "--law", "truss", "--count", "400", "--seed", "3", "--problem", p(&model), "--output", p(&data)]);
    ok(&["vote", "--input", p(&data), "--output", p(&voted), "--sigma", "0.0625", "--manifold-dim", "1"]);
    let line = ok(&[
        "solve", "--problem", p(&model), "--data", p(&voted), "--ten-vote", "--law", "truss", "--out", p(&result),
    ]);
    assert!(line.contains("min-dist/ten-vote") && line.contains("distance to reference"), "{line}");
    let text = std::fs::read_to_string(&result).unwrap();
    assert!(text.starts_with("tenvote-result 1"));

    ok(&["reference", "--problem", p(&model), "--law", "truss", "--output", p(&reference)]);
    let csv = std::fs::read_to_string(&reference).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "point,x,y,z,eps1,sig1");
    assert_eq!(csv.lines().count(), 1 + 2 * 13);

    ok(&["coverage", "--problem", p(&model), "--data", p(&data), "--output", p(&coverage)]);
    assert!(std::fs::read_to_string(&coverage).unwrap().starts_with("point,x,y,z,distance\n"));

    assert!(start.elapsed() < Duration::from_secs(10), "{:?}", start.elapsed());
}

#[test]
fn same_seed_same_data() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let c = dir.path().join("c.txt");
    ok(&["gen-data", "--law", "plate", "--count", "50", "--noise", "0.01", "--seed", "1", "--output", p(&a)]);
    ok(&["gen-data", "--law", "plate", "--count", "50", "--noise", "0.01", "--seed", "1", "--output", p(&b)]);
    ok(&["gen-data", "--law", "plate", "--count", "50", "--noise", "0.01", "--seed", "2", "--output", p(&c)]);
    let read = |f: &Path| std::fs::read_to_string(f).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    let rows = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    std::fs::write(
        &conf,
        format!(
            "seed = 4\n[study-convergence]\nlevels = 2\nbays = 1\nmax_h = 2\nsamples = 2\nvariants = min-dist/classic,min-dist/ten-vote\noutput = {}\n",
            rows.display()
        ),
    )
    .unwrap();
    let table = ok(&["study-convergence", "--config", p(&conf), "--summary", p(&summary)]);
    assert!(table.contains("min-dist/ten-vote"), "{table}");
    let body = std::fs::read_to_string(&rows).unwrap();
    assert!(body.starts_with("scheme,n,sample,distance,iterations,wall_time"));
    // 2 variants × 2 sizes × 2 samples
    assert_eq!(body.lines().count(), 1 + 8);
    assert!(std::fs::read_to_string(&summary).unwrap().lines().count() > 1);

    let voting = dir.path().join("voting.csv");
    ok(&["study-voting", "--levels", "2", "--bays", "1", "--sizes", "100,400", "--sigmas", "0.01", "--samples", "2", "--output", p(&voting)]);
    assert_eq!(std::fs::read_to_string(&voting).unwrap().lines().count(), 1 + 4);
}
