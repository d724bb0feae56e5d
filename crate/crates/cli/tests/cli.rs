use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn turnqual(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnqual"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn label_emits_one_label_per_non_final_turn() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("labels.jsonl");
    let o = turnqual(&["--config", s(&fixture("config.toml")), "label", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("\"preamble\"") && lines[0].contains("config_sha256"));
    // 4 + 3 + 4 + 4 + 3 turns, minus one final turn per dialog
    assert_eq!(lines.len() - 1, 13);
    assert!(stderr(&o).contains("labels emitted: 13, turns skipped: 5"));
}

#[test]
fn annotation_mode_on_unlabeled_corpus_warns() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("plain.jsonl");
    std::fs::write(
        &corpus,
        "{\"dialog_id\": \"x\", \"source\": \"written\", \"turns\": [{\"index\": 1, \"user\": \"hi\", \"system\": \"hello\"}]}\n",
    )
    .unwrap();
    let out = dir.path().join("labels.jsonl");
    let o = turnqual(&["label", "--dialogs", s(&corpus), "--mode", "annotation", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    // usage: unknown flag, missing input, unknown mode
    assert_eq!(turnqual(&["label", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        turnqual(&["label", "--dialogs", "/nonexistent.jsonl", "-o", s(&out)])
            .status
            .code(),
        Some(1)
    );
    let o = turnqual(&[
        "label",
        "--dialogs",
        s(&fixture("dialogs.jsonl")),
        "--mode",
        "vibes",
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    // data: malformed corpus
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{not json}\n").unwrap();
    let o = turnqual(&["label", "--dialogs", s(&bad), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));
    // runtime: provider process fails
    let o = turnqual(&[
        "label",
        "--dialogs",
        s(&fixture("dialogs.jsonl")),
        "--provider",
        "external",
        "--provider-cmd",
        "false",
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(turnqual(&["--help"]).status.success());
}

#[test]
fn full_pipeline_and_two_row_report() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cfg = fixture("config.toml");
    let run = |args: &[&str]| {
        let o = turnqual(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    run(&["--config", s(&cfg), "label", "-o", s(&p("labels.jsonl"))]);
    run(&[
        "--config",
        s(&cfg),
        "label",
        "--format",
        "tsv",
        "-o",
        s(&p("sentiment.tsv")),
    ]);
    run(&[
        "--config",
        s(&cfg),
        "train",
        "--labels",
        s(&p("labels.jsonl")),
        "-o",
        s(&p("m.tqck")),
    ]);
    let log = std::fs::read_to_string(p("m.tqck.log.tsv")).unwrap();
    assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);
    run(&[
        "--config",
        s(&cfg),
        "score",
        "--model",
        s(&p("m.tqck")),
        "-o",
        s(&p("scores.tsv")),
    ]);
    run(&["aggregate", "--scores", s(&p("scores.tsv")), "-o", s(&p("dialogs.tsv"))]);
    let agg = std::fs::read_to_string(p("dialogs.tsv")).unwrap();
    assert!(agg.starts_with("# turnqual "));
    assert_eq!(agg.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);

    let scores_arg = format!("model={}", s(&p("scores.tsv")));
    let baseline_arg = format!("sentiment={}", s(&p("sentiment.tsv")));
    let o = run(&[
        "--config",
        s(&cfg),
        "evaluate",
        "--scores",
        &scores_arg,
        "--scores",
        &baseline_arg,
    ]);
    let report = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3, "{report}");
    assert!(rows[1].starts_with("model\tfixture\t") && rows[2].starts_with("sentiment\tfixture\t"));
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("config.toml");
    let labels = dir.path().join("l.jsonl");
    assert!(turnqual(&["--config", s(&cfg), "label", "-o", s(&labels)])
        .status
        .success());
    let model = dir.path().join("m.tqck");
    let o = turnqual(&[
        "--config",
        s(&cfg),
        "--seed",
        "99",
        "train",
        "--labels",
        s(&labels),
        "--epochs",
        "2",
        "-o",
        s(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("m.tqck.log.tsv")).unwrap();
    assert!(log.lines().next().unwrap().ends_with("seed=99"));
    assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2);
}

#[test]
fn agreement_resolves_tie_with_adjudicator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("resolved.tsv");
    let resolved = dir.path().join("resolved.jsonl");
    let o = turnqual(&[
        "agreement",
        "--dialogs",
        s(&fixture("agreement.jsonl")),
        "--resolved-dialogs",
        s(&resolved),
        "-o",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("alpha (nominal)") && stdout.contains("alpha (ordinal)"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("a2\t1\t1\tadjudicator"));
    assert!(text.contains("a1\t1\t2\tmajority"));
    assert!(std::fs::read_to_string(&resolved).unwrap().contains("\"quality_3p\":1"));

    // Same tie without an adjudicator names the item.
    let tied = dir.path().join("tied.jsonl");
    std::fs::write(
        &tied,
        "{\"dialog_id\": \"t\", \"source\": \"written\", \"turns\": [{\"index\": 1, \"user\": \"a\", \"system\": \"b\", \"raters\": [0, 1, 2]}, {\"index\": 2, \"user\": \"c\", \"system\": \"d\", \"raters\": [1, 1, 2]}]}\n",
    )
    .unwrap();
    let o = turnqual(&["agreement", "--dialogs", s(&tied)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t turn 1"), "{}", stderr(&o));
}
