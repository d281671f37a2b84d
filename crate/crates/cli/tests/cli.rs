use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "students = 40
epochs = 2
hidden = 6
dim = 6
embed_epochs = 1
walks_per_node = 2
walk_length = 10
line_samples_per_epoch = 500
num_seeds = 1
alpha_grid = 0.1
";

fn dkts(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dkts"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = dkts(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), SMALL).unwrap();
    ok(dir.path(), &["simulate", "--config", "c.txt", "--out", "sim"]);
    dir
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn simulate_writes_population_and_is_repeatable() {
    let dir = setup();
    let d = dir.path();
    let log = read(d, "sim/log.tsv");
    let students: std::collections::BTreeSet<&str> = log.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(students.len(), 40);
    assert_eq!(read(d, "sim/skills.tsv").lines().count(), 50);
    assert!(read(d, "sim/manifest.txt").contains("config_hash\t"));

    ok(d, &["simulate", "--config", "c.txt", "--out", "again"]);
    for f in ["log.tsv", "skills.tsv", "mastery.tsv"] {
        assert_eq!(read(d, &format!("sim/{f}")), read(d, &format!("again/{f}")), "{f}");
    }
}

#[test]
fn invalid_simulator_settings_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dkts(
        dir.path(),
        &["simulate", "--guess", "0.6", "--slip", "0.5", "--out", "x"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("guess + slip"), "{err}");
    assert!(!dir.path().join("x/log.tsv").exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "alpah = 0.1\n").unwrap();
    let out = dkts(dir.path(), &["simulate", "--config", "bad.txt", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
}

#[test]
fn embeddings_have_the_documented_header() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &["embed", "--config", "c.txt", "--method", "gaussian", "--out", "g.tsv"],
    );
    assert_eq!(read(d, "g.tsv").lines().next().unwrap(), "50 6 gaussian 42");

    ok(
        d,
        &["build-graph", "--skill-map", "sim/skills.tsv", "--out", "graph.tsv"],
    );
    ok(
        d,
        &[
            "embed",
            "--config",
            "c.txt",
            "--method",
            "node2vec",
            "--graph",
            "graph.tsv",
            "--out",
            "n.tsv",
        ],
    );
    let n2v = read(d, "n.tsv");
    let mut lines = n2v.lines();
    assert_eq!(lines.next().unwrap(), "50 6 node2vec 42");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(' ').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn graph_embedding_on_an_edgeless_graph_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("skills.tsv"), "0\ta\n1\tb\n2\tc\n").unwrap();
    ok(d, &["build-graph", "--skill-map", "skills.tsv", "--out", "graph.tsv"]);
    let out = dkts(
        d,
        &["embed", "--method", "line1", "--graph", "graph.tsv", "--out", "e.tsv"],
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("e.tsv").exists());
}

#[test]
fn regularizer_without_graph_is_refused() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &["embed", "--config", "c.txt", "--method", "gaussian", "--out", "g.tsv"],
    );
    let out = dkts(
        d,
        &[
            "train",
            "--config",
            "c.txt",
            "--alpha",
            "0.1",
            "--data",
            "sim/log.tsv",
            "--embedding",
            "g.tsv",
            "--out",
            "m.ck",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("graph"));
    assert!(!d.join("m.ck").exists());
}

#[test]
fn training_is_deterministic_and_logs_each_epoch() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &["embed", "--config", "c.txt", "--method", "gaussian", "--out", "g.tsv"],
    );
    for out in ["a.ck", "b.ck"] {
        ok(
            d,
            &[
                "train",
                "--config",
                "c.txt",
                "--alpha",
                "0.1",
                "--data",
                "sim/log.tsv",
                "--embedding",
                "g.tsv",
                "--skill-map",
                "sim/skills.tsv",
                "--out",
                out,
            ],
        );
    }
    assert_eq!(fs::read(d.join("a.ck")).unwrap(), fs::read(d.join("b.ck")).unwrap());
    let log = read(d, "a.ck.log");
    assert_eq!(log.lines().count(), 2);
    for line in log.lines() {
        assert_eq!(line.split('\t').count(), 6, "{line}");
    }
    assert!(read(d, "a.ck.manifest").contains("input.embedding\tg.tsv"));
}

#[test]
fn eval_reports_metrics_and_dumps_steps() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &["embed", "--config", "c.txt", "--method", "gaussian", "--out", "g.tsv"],
    );
    ok(
        d,
        &[
            "train",
            "--config",
            "c.txt",
            "--alpha",
            "0",
            "--data",
            "sim/log.tsv",
            "--embedding",
            "g.tsv",
            "--out",
            "m.ck",
        ],
    );
    let out = ok(
        d,
        &[
            "eval",
            "--checkpoint",
            "m.ck",
            "--data",
            "sim/log.tsv",
            "--steps",
            "s.tsv",
            "--out",
            "m.txt",
        ],
    );
    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(printed.starts_with("auc="), "{printed}");
    assert_eq!(printed, read(d, "m.txt"));
    let again = ok(d, &["eval", "--scores", "s.tsv"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), printed);
}

#[test]
fn eval_of_a_score_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Scores equal to the labels rank every positive first.
    fs::write(
        d.join("oracle.tsv"),
        "s\t1\t0\t1.0\t1\ns\t2\t1\t0.0\t0\nt\t1\t0\t1.0\t1\nt\t2\t2\t0.0\t0\n",
    )
    .unwrap();
    let out = ok(d, &["eval", "--scores", "oracle.tsv"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("auc=1.000000 "));

    fs::write(
        d.join("flat.tsv"),
        "s\t1\t0\t0.5\t1\ns\t2\t1\t0.5\t0\nt\t1\t0\t0.5\t0\n",
    )
    .unwrap();
    let out = ok(d, &["eval", "--scores", "flat.tsv"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("auc=0.500000 "));

    fs::write(d.join("one.tsv"), "s\t1\t0\t0.5\t1\n").unwrap();
    assert_eq!(dkts(d, &["eval", "--scores", "one.tsv"]).status.code(), Some(1));
}

#[test]
fn matrix_writes_the_table() {
    let dir = setup();
    let d = dir.path();
    let out = ok(
        d,
        &[
            "matrix",
            "--config",
            "c.txt",
            "--data",
            "sim/log.tsv",
            "--skill-map",
            "sim/skills.tsv",
            "--out",
            "t.tsv",
            "--quiet",
        ],
    );
    let table = read(d, "t.tsv");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), table);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method\tGaussian\tLINE\tNode2Vec");
    assert_eq!(lines.len(), 5);
    let cells: Vec<&str> = lines[1..].iter().flat_map(|l| l.split('\t').skip(1)).collect();
    assert_eq!(cells.len(), 12);
    assert_eq!(cells.iter().filter(|c| **c == "NA").count(), 1);
    assert!(lines[4].starts_with("DKTS\tNA\t"));
    assert!(read(d, "t.tsv.manifest").contains("subcommand\tmatrix"));
}

#[test]
fn help_and_version_exit_with_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dkts(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(dkts(dir.path(), &["train", "--help"]).status.code(), Some(0));
    assert_eq!(dkts(dir.path(), &["train"]).status.code(), Some(1));
}
