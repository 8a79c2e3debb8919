use std::fs;
use std::path::{Path, PathBuf};

use dsel_core::harness::{generate, SynthConfig};
use dsel_core::pipeline::{run_pipeline, PipelineConfig, Provenance, Stage};
use dsel_core::{read_corpus, write_corpus, ErrorClass};

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new(docs: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let s = generate(&SynthConfig::with_docs(docs, 0.3, seed)).unwrap();
        write_corpus(&root.join("domain.jsonl"), &s.domain).unwrap();
        write_corpus(&root.join("task.jsonl"), &s.task).unwrap();
        write_corpus(&root.join("reference.jsonl"), &s.reference).unwrap();
        Fixture { _dir: dir, root }
    }

    fn config(&self, extra: &[(&str, &str)]) -> PipelineConfig {
        let p = |n: &str| self.root.join(n).display().to_string();
        let mut o: Vec<(String, String)> = vec![
            ("paths.domain".into(), p("domain.jsonl")),
            ("paths.task".into(), p("task.jsonl")),
            ("paths.reference".into(), p("reference.jsonl")),
            ("paths.out_dir".into(), p("out")),
        ];
        o.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        PipelineConfig::load(None, &o).unwrap()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root.join("out").join(name)
    }
}

fn skipped(summary: &dsel_core::pipeline::PipelineSummary) -> Vec<Stage> {
    summary.stages.iter().filter(|s| s.skipped).map(|s| s.stage).collect()
}

#[test]
fn default_run_lands_within_one_document_of_budget() {
    let f = Fixture::new(1000, 0);
    let summary = run_pipeline(&f.config(&[])).unwrap();
    let deduped = read_corpus(&f.out("deduped.jsonl")).unwrap();
    let total = deduped.total_tokens();
    let budget = (0.10 * total as f64).floor() as u64;
    let largest = deduped.iter().map(|d| d.n_tokens()).max().unwrap();
    assert_eq!(summary.budget_tokens, budget);
    assert!(summary.achieved_tokens <= budget);
    assert!(budget - summary.achieved_tokens < largest);
}

#[test]
fn every_output_has_a_matching_sidecar() {
    let f = Fixture::new(300, 1);
    let cfg = f.config(&[("analysis.tsv", "true")]);
    let summary = run_pipeline(&cfg).unwrap();
    let mut outputs = 0;
    for entry in fs::read_dir(f.root.join("out")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        assert!(!name.ends_with(".partial"), "{name}");
        if name.ends_with(".prov.json") {
            continue;
        }
        outputs += 1;
        let prov: Provenance =
            serde_json::from_str(&fs::read_to_string(path.with_file_name(format!("{name}.prov.json"))).unwrap())
                .unwrap();
        assert_eq!(prov.artifact, name);
        assert_eq!(prov.config_hash, summary.config_hash);
        assert_eq!(prov.seeds.len(), 3);
    }
    assert_eq!(outputs, 17);
}

#[test]
fn completed_stages_are_skipped() {
    let f = Fixture::new(300, 2);
    let cfg = f.config(&[]);
    assert!(skipped(&run_pipeline(&cfg).unwrap()).is_empty());
    let manifest = fs::read(f.out("manifest.json")).unwrap();

    let again = run_pipeline(&cfg).unwrap();
    assert_eq!(again.stages.len(), 6);
    assert_eq!(skipped(&again).len(), 6);

    fs::remove_file(f.out("weights.jsonl")).unwrap();
    let partial = run_pipeline(&cfg).unwrap();
    assert_eq!(
        skipped(&partial),
        [Stage::Ingest, Stage::Dedup, Stage::Score, Stage::Select, Stage::Analyze]
    );
    assert_eq!(fs::read(f.out("manifest.json")).unwrap(), manifest);

    // any config change invalidates every stage
    let changed = run_pipeline(&f.config(&[("selection.key", "ppl")])).unwrap();
    assert!(skipped(&changed).is_empty());
    assert_ne!(changed.config_hash, again.config_hash);
}

#[test]
fn failures_name_their_stage() {
    let f = Fixture::new(200, 3);
    fs::write(f.root.join("empty.jsonl"), "").unwrap();
    let empty = f.config(&[("paths.domain", &f.root.join("empty.jsonl").display().to_string())]);
    let err = run_pipeline(&empty).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
    assert_eq!(err.to_string(), "ingest stage failed: ingest: empty corpus");
    assert_eq!(err.source.class(), ErrorClass::Data);

    fs::write(f.root.join("bad.jsonl"), "{\"id\": \"x\", \"text\": \"a b\"}\nnot json\n").unwrap();
    let bad_ref = f.config(&[("paths.reference", &f.root.join("bad.jsonl").display().to_string())]);
    let err = run_pipeline(&bad_ref).unwrap_err();
    assert_eq!(err.stage, Stage::Score);
    assert!(err.to_string().contains("line 2"), "{err}");
    assert!(Path::new(&f.out("deduped.jsonl")).exists());
    assert!(!Path::new(&f.out("metrics.jsonl")).exists());

    let missing = f.config(&[("paths.domain", "/nonexistent/domain.jsonl")]);
    let err = run_pipeline(&missing).unwrap_err();
    assert_eq!(err.source.class(), ErrorClass::Config);
}

#[test]
fn runs_without_a_task_corpus() {
    let f = Fixture::new(200, 4);
    let mut cfg = f.config(&[("selection.key", "ent")]);
    cfg.paths.task = None;
    run_pipeline(&cfg).unwrap();
    assert!(!f.out("embedder.json").exists());
    let metrics = fs::read_to_string(f.out("metrics.jsonl")).unwrap();
    assert!(!metrics.contains("\"sim\""));
}
