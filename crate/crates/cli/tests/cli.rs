use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn gramlog(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gramlog"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = gramlog(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn synth(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let mut all = vec!["synth", "--out", name];
    all.extend_from_slice(args);
    ok(dir, &all);
    dir.join(name)
}

fn text(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn parse_with_and_without_dictionary_is_identical() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "app.log", &["--messages", "4000", "--seed", "11"]);
    let out = ok(dir.path(), &["build-dict", "--dataset", "Synthetic", "--input", "app.log", "--out", "app.dict"]);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.starts_with("messages 4000, 2-grams "), "{summary}");

    ok(dir.path(), &["parse", "--dataset", "Synthetic", "--input", "app.log", "--out", "a.csv"]);
    ok(dir.path(), &[
        "parse", "--dataset", "Synthetic", "--input", "app.log", "--dict", "app.dict", "--workers", "3", "--out", "b.csv",
    ]);
    let a = text(dir.path().join("a.csv"));
    assert_eq!(a, text(dir.path().join("b.csv")));
    assert!(a.starts_with("LineId,Content,EventTemplate,ParameterList\n"));
    assert_eq!(a.lines().count(), 4001);
}

#[test]
fn fixed_thresholds_and_placeholder_style() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "app.log", &["--messages", "500"]);
    let out = ok(dir.path(), &[
        "parse", "--dataset", "Synthetic", "--input", "app.log", "--threshold", "1000000,1000000", "--placeholder", "logpai",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    // Every gram is below a huge threshold, so every token with grams on
    // both sides is dynamic; the very first token has no left context.
    let row = csv.lines().nth(2).unwrap();
    let template = row.split(',').nth(2).unwrap();
    assert!(template.split(' ').all(|t| t == "<*>"), "{row}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("t3=1000000, t2=1000000"), "{stderr}");
}

#[test]
fn bench_rows_and_seed_reproducibility() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "big.log", &["--size", "5M"]);
    let run = |seed: &str| {
        let out = ok(dir.path(), &[
            "bench", "--dataset", "Synthetic", "--input", "big.log", "--sizes", "300K,1M", "--runs", "1", "--seed", seed,
        ]);
        String::from_utf8(out.stdout).unwrap()
    };
    let table = run("5");
    let rows: Vec<Vec<String>> =
        table.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "307200");
    assert_eq!(rows[1][0], "1048576");
    for r in &rows {
        assert!(r[4].parse::<f64>().unwrap() > 0.0);
        let (start, end): (u64, u64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(end - start >= r[0].parse::<u64>().unwrap());
    }
    let ranges = |t: &str| -> Vec<String> { t.lines().map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect() };
    assert_eq!(ranges(&table), ranges(&run("5")));
    assert_ne!(ranges(&table), ranges(&run("6")));
}

#[test]
fn default_seed_is_printed() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "s.log", &["--size", "400K"]);
    let out = ok(dir.path(), &["bench", "--dataset", "Synthetic", "--input", "s.log", "--sizes", "100K", "--runs", "1"]);
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("seed "));
}

#[test]
fn online_reads_stdin() {
    use std::io::Write;
    let dir = TempDir::new().unwrap();
    let log = synth(dir.path(), "app.log", &["--messages", "1500"]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_gramlog"))
        .args(["online", "--dataset", "Synthetic", "--refresh", "200"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let input = text(&log);
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()).unwrap());
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1501);
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("1,"));

    ok(dir.path(), &["online", "--dataset", "Synthetic", "--refresh", "200", "--input", "app.log", "--out", "o.csv"]);
    assert_eq!(text(dir.path().join("o.csv")), csv);
}

#[test]
fn eval_commands() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "app.log", &["--messages", "2000", "--truth", "truth.csv", "--order", "cycle", "--templates", "10"]);
    let out = ok(dir.path(), &[
        "eval", "accuracy", "--dataset", "Synthetic", "--input", "app.log", "--truth", "truth.csv", "--audit", "audit.csv",
    ]);
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("Synthetic accuracy "), "{line}");
    assert!(text(dir.path().join("audit.csv")).starts_with("LineId,Parsed,Expected\n"));

    let out = ok(dir.path(), &["eval", "stabilise", "--dataset", "Synthetic", "--input", "app.log", "--all"]);
    let curve = String::from_utf8(out.stdout).unwrap();
    assert_eq!(curve.lines().next(), Some("Fraction,Agreement"));
    assert_eq!(curve.lines().count(), 21);
    assert_eq!(curve.lines().last(), Some("1.00,1.0000"));

    let out = ok(dir.path(), &["eval", "compare-online", "--dataset", "Synthetic", "--input", "app.log", "--runs", "1"]);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("messages 2000\nagreement "), "{summary}");
    assert!(summary.contains("efficiency_difference_ratio "));
}

#[test]
fn errors_are_one_line_and_leave_no_output() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "app.log", &["--messages", "50"]);
    let cases: [&[&str]; 5] = [
        &["parse", "--dataset", "Synthetic", "--input", "missing.log", "--out", "x.csv"],
        &["parse", "--dataset", "NoSuchDataset", "--input", "app.log", "--out", "x.csv"],
        &["parse", "--dataset", "Synthetic", "--input", "app.log", "--dict", "app.log", "--out", "x.csv"],
        &["parse", "--dataset", "Synthetic", "--input", "app.log", "--span", "0", "--out", "x.csv"],
        &["bench", "--dataset", "Synthetic", "--input", "app.log", "--sizes", "1G", "--out", "x.csv"],
    ];
    for args in cases {
        let out = gramlog(dir.path(), args);
        assert!(!out.status.success(), "{args:?}");
        let stderr = String::from_utf8(out.stderr).unwrap();
        let diagnostics: Vec<&str> = stderr.lines().filter(|l| l.starts_with("gramlog: error: ")).collect();
        assert_eq!(diagnostics.len(), 1, "{args:?}: {stderr}");
        assert_eq!(stderr.lines().last(), Some(diagnostics[0]));
        assert!(!dir.path().join("x.csv").exists());
    }
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".partial"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn bad_flags_are_rejected() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["parse", "--dataset", "Synthetic", "--input", "a.log", "--threshold", "5"][..],
        &["bench", "--dataset", "Synthetic", "--input", "a.log", "--sizes", "1.5M"],
        &["parse", "--dataset", "Synthetic", "--input", "a.log", "--placeholder", "braces"],
    ] {
        assert!(!gramlog(dir.path(), args).status.success(), "{args:?}");
    }
}

#[test]
fn custom_config_file() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("my.ini"),
        "[Mini]\nheader = <Level>: <Content>\nmask.1.pattern = \\d+\nmask.1.tag = <NUM>\n",
    )
    .unwrap();
    let log: String = (0..60).map(|i| format!("INFO: worker {i} started on host{} ok\n", i % 2)).collect();
    std::fs::write(dir.path().join("mini.log"), log).unwrap();
    let out = ok(dir.path(), &["parse", "--config", "my.ini", "--dataset", "Mini", "--input", "mini.log"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().nth(5).unwrap().contains(",worker <NUM> started on"), "{csv}");
}
