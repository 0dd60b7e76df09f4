use std::path::Path;
use std::process::Command;

const SMALL: [&str; 4] = ["--budget", "2000", "--pretrain", "500"];

fn metaacl(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_metaacl"))
        .args(args)
        .env("METAACL_THREADS", "1")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "metaacl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().expect("utf-8 path").to_string()
}

#[test]
fn classroom_run_report_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let history = path(dir.path(), "h.jsonl");
    let mut args = vec![
        "gen-classroom",
        "--n",
        "3",
        "--seed",
        "5",
        "--out",
        &history,
    ];
    args.extend(SMALL);
    metaacl(&args);
    let lines = std::fs::read_to_string(&history).unwrap();
    assert_eq!(lines.lines().count(), 3);

    let again = path(dir.path(), "again.csv");
    let random = path(dir.path(), "random.csv");
    for (condition, out) in [("again_r", &again), ("random", &random)] {
        let mut args = vec![
            "run",
            "--condition",
            condition,
            "--history",
            &history,
            "--seeds",
            "3",
            "--out",
            out,
        ];
        args.extend(SMALL);
        metaacl(&args);
    }
    let table = metaacl(&["report", "--in", &again, &random, "--mode", "table"]);
    assert!(table.contains("again_r") && table.contains("random"));
    let svg = metaacl(&["report", "--in", &again, "--mode", "svg"]);
    assert!(svg.starts_with("<svg"));
    let stats = metaacl(&["stats", "--a", &again, "--b", &random]);
    assert!(stats.contains("p = "), "{stats}");
}

#[test]
fn meta_conditions_need_a_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_metaacl"))
        .args([
            "run",
            "--condition",
            "again_r",
            "--out",
            &path(dir.path(), "x.csv"),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs --history"));
}

#[test]
fn two_run_writes_both_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "two.csv");
    let mut args = vec!["two-run", "--seeds", "2", "--out", &out];
    args.extend(SMALL);
    metaacl(&args);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("alpgmm") && text.contains("again_r"));
}
