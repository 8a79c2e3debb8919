use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dsel(args);
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
fn stage_by_stage_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["synth", "--docs", "300", "--seed", "5", "--out", p(&d("c"))]);
    for f in ["reference", "domain", "task", "domain_test", "general_test"] {
        assert!(d("c").join(format!("{f}.jsonl")).exists());
        assert!(d("c").join(format!("{f}.jsonl.prov.json")).exists());
    }
    ok(&[
        "ingest",
        "--input",
        p(&d("c/domain.jsonl")),
        "--out",
        p(&d("ingested.jsonl")),
        "--rejects",
        p(&d("rejects.jsonl")),
        "--keywords",
        "finance,markets",
        "--min-section-tokens",
        "20",
    ]);
    assert!(fs::read_to_string(d("rejects.jsonl")).unwrap().contains("off_domain"));
    ok(&[
        "dedup",
        "--input",
        p(&d("ingested.jsonl")),
        "--out",
        p(&d("deduped.jsonl")),
        "--duplicates",
        p(&d("dups.jsonl")),
        "--threshold",
        "0.9",
    ]);
    ok(&[
        "--workers",
        "1",
        "score",
        "--input",
        p(&d("deduped.jsonl")),
        "--reference",
        p(&d("c/reference.jsonl")),
        "--task",
        p(&d("c/task.jsonl")),
        "--out",
        p(&d("metrics.jsonl")),
        "--model-out",
        p(&d("model.json")),
        "--order",
        "2",
    ]);
    ok(&[
        "weights",
        "--metrics",
        p(&d("metrics.jsonl")),
        "--out",
        p(&d("weights.jsonl")),
        "--quantiles",
        p(&d("quantiles.json")),
    ]);
    ok(&[
        "select",
        "--weights",
        p(&d("weights.jsonl")),
        "--out",
        p(&d("manifest.json")),
        "--strategy",
        "soft",
        "--key",
        "sim",
        "--budget-fraction",
        "0.2",
        "--seed",
        "9",
        "--corpus",
        p(&d("deduped.jsonl")),
        "--selected",
        p(&d("selected.jsonl")),
    ]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(d("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["strategy"], "soft");
    assert_eq!(manifest["seed"], 9);
    let n = manifest["selected"].as_array().unwrap().len();
    assert_eq!(fs::read_to_string(d("selected.jsonl")).unwrap().lines().count(), n);
    let prov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d("manifest.json.prov.json")).unwrap()).unwrap();
    assert_eq!(prov["stage"], "select");

    let corr: serde_json::Value =
        serde_json::from_str(&ok(&["analyze", "correlations", "--metrics", p(&d("metrics.jsonl"))])).unwrap();
    assert_eq!(corr["metrics"].as_array().unwrap().len(), 3);
    ok(&[
        "analyze",
        "histogram",
        "--metrics",
        p(&d("metrics.jsonl")),
        "--metric",
        "ent",
        "--bins",
        "5",
        "--out",
        p(&d("ent.tsv")),
    ]);
    assert_eq!(fs::read_to_string(d("ent.tsv")).unwrap().lines().count(), 6);
    let bal: serde_json::Value = serde_json::from_str(&ok(&[
        "analyze",
        "balance",
        "--weights",
        p(&d("weights.jsonl")),
        "--manifest",
        p(&d("manifest.json")),
    ]))
    .unwrap();
    assert_eq!(bal["documents"], n);
}

#[test]
fn pipeline_with_config_file_and_dotted_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["synth", "--docs", "300", "--seed", "2", "--out", p(&d("c"))]);
    let cfg = serde_json::json!({
        "paths": {
            "domain": d("c/domain.jsonl"),
            "task": d("c/task.jsonl"),
            "reference": d("c/reference.jsonl"),
            "out_dir": d("out"),
        },
        "selection": {"key": "ppl"}
    });
    fs::write(d("cfg.json"), cfg.to_string()).unwrap();
    let cfg_path = d("cfg.json");
    let run = |extra: &[&str]| {
        let mut args = vec!["pipeline", "--config", p(&cfg_path)];
        args.extend_from_slice(extra);
        let s: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
        s
    };
    let first = run(&["--selection.key", "com", "--scorer.order=2"]);
    let manifest = fs::read(d("out/manifest.json")).unwrap();
    let snapshot: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d("out/run_config.json")).unwrap()).unwrap();
    assert_eq!(snapshot["config"]["selection"]["key"], "com");
    assert_eq!(snapshot["config"]["scorer"]["order"], 2);
    assert_eq!(snapshot["config_hash"], first["config_hash"]);

    let second = run(&["--selection.key", "com", "--scorer.order=2", "--workers", "1"]);
    assert_eq!(second["config_hash"], first["config_hash"]);
    assert!(second["stages"].as_array().unwrap().iter().all(|s| s["skipped"] == true));
    assert_eq!(fs::read(d("out/manifest.json")).unwrap(), manifest);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    fs::write(d("empty.jsonl"), "").unwrap();
    fs::write(d("ref.jsonl"), "{\"id\":\"r\",\"text\":\"a b c\"}\n").unwrap();

    let empty = dsel(&[
        "pipeline",
        "--paths.domain",
        p(&d("empty.jsonl")),
        "--paths.reference",
        p(&d("ref.jsonl")),
        "--paths.out_dir",
        p(&d("out")),
    ]);
    assert_eq!(empty.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("ingest: empty corpus"));

    let unknown = dsel(&["pipeline", "--paths.domain", "x", "--selection.nope", "1"]);
    assert_eq!(unknown.status.code(), Some(2));

    let misplaced = dsel(&["weights", "--metrics", "m", "--out", "w", "--selection.key", "ppl"]);
    assert_eq!(misplaced.status.code(), Some(2));

    let missing = dsel(&["weights", "--metrics", p(&d("none.jsonl")), "--out", p(&d("w.jsonl"))]);
    assert_eq!(missing.status.code(), Some(2));

    fs::write(d("bad.jsonl"), "{\"id\":\"a\",\"n_tokens\":3}\n").unwrap();
    let malformed = dsel(&["weights", "--metrics", p(&d("bad.jsonl")), "--out", p(&d("w.jsonl"))]);
    assert_eq!(malformed.status.code(), Some(3));

    let usage = dsel(&["select", "--strategy", "sideways"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn harness_run_writes_json_and_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let cfg = serde_json::json!({
        "synth": {"docs": 150, "reference_docs": 300, "task_docs": 20,
                  "domain_test_docs": 50, "general_test_docs": 50},
        "plans": ["random", "dacp-100%", "ets-dacp/hard"],
        "seeds": [0, 1]
    });
    fs::write(d("h.json"), cfg.to_string()).unwrap();
    ok(&[
        "harness",
        "run",
        "--config",
        p(&d("h.json")),
        "--out",
        p(&d("report")),
        "--params.mix_weight",
        "0.4",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d("report/report.json")).unwrap()).unwrap();
    let comparisons = report["comparisons"].as_array().unwrap();
    assert_eq!(comparisons.len(), 2);
    assert_eq!(comparisons[0]["runs"][0]["mix_weight"], 0.4);
    let tsv = fs::read_to_string(d("report/report.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 2 * 4);
    assert!(d("report/report.tsv.prov.json").exists());
}
