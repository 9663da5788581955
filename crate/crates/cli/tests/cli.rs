use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dtlearn");

const MOTIVATING_TABLE: &str = "000 0\n001 0\n010 1\n011 0\n100 0\n101 1\n110 1\n111 1\n";

fn dtlearn(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_table(dir: &Path) -> String {
    let path = dir.join("motivating.tt");
    std::fs::write(&path, MOTIVATING_TABLE).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn learns_the_motivating_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(dir.path());
    let log = dir.path().join("run.jsonl");
    let out = dtlearn(&[
        "learn",
        "--features",
        "3",
        "--depth",
        "2",
        "--oracle",
        &format!("table:{table}"),
        "--seed",
        "7",
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("status: UniqueTree"), "{text}");
    assert!(text.contains("truth table: 00100111"), "{text}");

    let records = read_lines(&log);
    assert_eq!(records[0]["event"], "start");
    assert_eq!(records[0]["hypothesis_space"], "432");
    let rounds: Vec<&serde_json::Value> = records.iter().filter(|r| r["event"] == "round").collect();
    let queries: Vec<&str> = rounds.iter().map(|r| r["query"].as_str().unwrap()).collect();
    assert_eq!(queries, ["000", "111", "001", "011", "100", "101", "010"]);
    let counts: Vec<u64> = rounds.iter().map(|r| r["exact_count"].as_u64().unwrap()).collect();
    assert_eq!(counts, [216, 108, 72, 35, 17, 9, 1]);
    assert!(rounds.iter().all(|r| r.get("select_ms").is_none()));
    let end = records.last().unwrap();
    assert_eq!(end["event"], "end");
    assert_eq!(end["truth_table"], "00100111");
}

#[test]
fn logs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let log = dir.path().join(name);
        let out = dtlearn(&[
            "learn",
            "--features",
            "3",
            "--depth",
            "2",
            "--oracle",
            "random:42",
            "--log",
            log.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        logs.push(std::fs::read(&log).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
    assert!(!logs[0].is_empty());
}

#[test]
fn exec_and_table_oracles_give_the_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(dir.path());
    let script = dir.path().join("blackbox.sh");
    // x3 ? x1 : x2, one answer per line
    std::fs::write(
        &script,
        "while read q; do\n  a=${q%??}; b=${q#?}; b=${b%?}; c=${q#??}\n  if [ \"$c\" = 1 ]; then echo \"$a\"; else echo \"$b\"; fi\ndone\n",
    )
    .unwrap();
    let mut logs = Vec::new();
    for (name, oracle) in [
        ("table.jsonl", format!("table:{table}")),
        ("exec.jsonl", format!("exec:sh {}", script.display())),
    ] {
        let log = dir.path().join(name);
        let out = dtlearn(&[
            "learn",
            "--features",
            "3",
            "--depth",
            "2",
            "--oracle",
            &oracle,
            "--log",
            log.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut records = read_lines(&log);
        records[0].as_object_mut().unwrap().remove("oracle");
        logs.push(records);
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn exec_protocol_violation_is_reported() {
    let out = dtlearn(&[
        "learn",
        "--features",
        "3",
        "--depth",
        "2",
        "--oracle",
        "exec:while read q; do echo yes; done",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`yes`"), "{err}");
}

#[test]
fn bad_flags_print_usage() {
    let out = dtlearn(&["learn", "--features", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = dtlearn(&["learn", "--features", "3", "--depth", "2", "--oracle", "coin:1"]);
    assert!(!out.status.success());
}

#[test]
fn max_rounds_cut_short_gives_exit_code_two() {
    let out = dtlearn(&[
        "learn",
        "--features",
        "3",
        "--depth",
        "2",
        "--oracle",
        "random:3",
        "--max-rounds",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    assert!(stdout(&out).contains("NoUniqueTree"));
}

#[test]
fn emitted_base_encoding_counts_432() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("cnf");
    let out = dtlearn(&[
        "learn",
        "--features",
        "3",
        "--depth",
        "2",
        "--oracle",
        "random:5",
        "--emit-dimacs",
        cnf.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let base = cnf.join("round_0.cnf");
    let out = dtlearn(&["count", "--exact", base.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "exact: 432");
    assert!(cnf.join("round_1.cnf").exists());
}

#[test]
fn count_unsat_and_free_cube() {
    let dir = tempfile::tempdir().unwrap();
    let unsat = dir.path().join("unsat.cnf");
    std::fs::write(&unsat, "c ind 1 2 0\np cnf 2 2\n1 0\n-1 0\n").unwrap();
    let out = dtlearn(&["count", unsat.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("estimate: 0 "), "{}", stdout(&out));

    let cube = dir.path().join("cube.cnf");
    std::fs::write(&cube, "c ind 1 2 3 4 5 6 7 8 9 10 0\np cnf 10 0\n").unwrap();
    let out = dtlearn(&["count", "--seed", "3", cube.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let value = text.split_whitespace().nth(1).unwrap();
    let v: f64 = match value.split_once("*2^") {
        Some((c, e)) => c.parse::<f64>().unwrap() * 2f64.powi(e.parse().unwrap()),
        None => value.parse().unwrap(),
    };
    assert!((1024.0 / 1.8..=1024.0 * 1.8).contains(&v), "{text}");
    assert!(text.contains("epsilon=0.8 delta=0.2 seed=3"));
}

#[test]
fn count_requires_projection() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("plain.cnf");
    std::fs::write(&f, "p cnf 2 1\n1 2 0\n").unwrap();
    let out = dtlearn(&["count", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c ind"));
}

#[test]
fn experiment_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dtlearn(&[
        "experiment",
        "--grid",
        "3x2,4x2",
        "--seeds",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let spaces: Vec<&str> = rows.iter().map(|r| &r[col("hypothesis_space")]).collect();
    assert_eq!(spaces, ["432", "432", "1024", "1024"]);
    assert!(rows.iter().all(|r| &r[col("correct")] == "true"));
}
