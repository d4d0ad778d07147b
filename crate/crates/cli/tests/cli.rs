use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn dmtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmtl")).args(args).output().unwrap()
}

fn example(sub: &str, extra: &[&str]) -> Output {
    let p = data("example.dmtl");
    let d = data("example.facts");
    let mut args = vec![sub, "--program", p.to_str().unwrap(), "--dataset", d.to_str().unwrap()];
    args.extend_from_slice(extra);
    dmtl(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn decide_example_query_is_entailed() {
    let o = example("decide", &["--fact", "R1(c1,c2)@[4,4]"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).trim(), "entailed");
}

#[test]
fn decide_unreachable_query_is_not_entailed() {
    for threads in ["2", "1"] {
        let o = example("decide", &["--fact", "R6(c9)@[0,0]", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).trim(), "notEntailed");
        assert!(stderr(&o).contains("automata-thread"));
    }
}

#[test]
fn forced_modes_agree() {
    for mode in ["naive", "seminaive", "optimised", "automata", "auto"] {
        let o = example("decide", &["--fact", "R6(c2)@[2,2]", "--mode", mode]);
        assert_eq!(o.status.code(), Some(1), "{mode}");
    }
}

#[test]
fn materialise_two_steps_dumps_second_store() {
    let o = example("materialise", &["--max-steps", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let want = "\
R1(c1,c2)@[0,3]
R2(c1,c2)@[1,2]
R3(c2,c3)@[2,3]
R4(c2)@[0,3]
R5(c2)@[0,1]
R5(c2)@[2,2]
R6(c2)@[2,2]
";
    assert_eq!(stdout(&o), want);
}

#[test]
fn dumps_are_identical_across_modes() {
    for k in 1..=5 {
        let k = k.to_string();
        let dumps: Vec<String> = ["naive", "seminaive", "optimised"]
            .iter()
            .map(|m| stdout(&example("materialise", &["--max-steps", &k, "--mode", m])))
            .collect();
        assert!(dumps.windows(2).all(|w| w[0] == w[1]), "step {k}: {dumps:?}");
    }
}

#[test]
fn malformed_rule_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dmtl");
    std::fs::write(&bad, "R1(X) <- R2(X)\nR1(X <- R2(X)\n").unwrap();
    let o = dmtl(&["analyze", "--program", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(dmtl(&["decide"]).status.code(), Some(2));
    assert_eq!(example("decide", &["--fact", "R1(c1"]).status.code(), Some(2));
    assert_eq!(example("materialise", &["--mode", "automata"]).status.code(), Some(2));
    assert_eq!(dmtl(&["analyze", "--program", "/nonexistent/file"]).status.code(), Some(2));
}

#[test]
fn step_budget_exits_three() {
    let o = example("decide", &["--fact", "R6(c9)@[0,0]", "--mode", "seminaive", "--max-steps", "5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("budget"));
}

#[test]
fn consistency_verdicts() {
    assert_eq!(stdout(&example("consistency", &[])).trim(), "consistent");
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.dmtl");
    let d = dir.path().join("d.facts");
    std::fs::write(&p, "BOTTOM <- P(X)\n").unwrap();
    std::fs::write(&d, "P(a)@[0,0]\n").unwrap();
    for mode in ["auto", "automata", "naive"] {
        let o = dmtl(&["consistency", "--program", p.to_str().unwrap(), "--dataset", d.to_str().unwrap(), "--mode", mode]);
        assert_eq!(o.status.code(), Some(1));
        assert_eq!(stdout(&o).trim(), "inconsistent");
    }
}

#[test]
fn analyze_prints_table_and_graph() {
    let p = data("example.dmtl");
    let o = dmtl(&["analyze", "--program", p.to_str().unwrap()]);
    let out = stdout(&o);
    assert!(out.contains("R1\trecursive"));
    assert!(out.contains("digraph"));
    assert!(out.contains("\"R5\" -> \"R4\""));
}

#[test]
fn bench_writes_one_record_per_step_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let o = example("bench", &["--trace", trace.to_str().unwrap(), "--max-steps", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 12);
    assert!(lines[0].starts_with("{\"mode\":\"naive\",\"step\":1,"));
    assert!(lines.iter().all(|l| l.contains("\"instances\":") && l.contains("\"inserted\":") && l.contains("\"elapsed_us\":")));
}
