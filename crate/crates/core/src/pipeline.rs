//! End-to-end pipeline: ingest → dedup → score → weights → select → analyze.
//!
//! Stages talk only through files in the output directory. Each artifact is
//! first written with a `.partial` suffix and renamed once its stage
//! succeeds, next to a `<artifact>.prov.json` sidecar naming the config hash,
//! input hash, tool version and seeds. A stage whose artifacts and sidecars
//! already match the current config and inputs is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::analysis::{balance_report, correlations, metric_histogram, BalanceReport, Histogram};
use crate::corpus::{read_corpus, Corpus, TokenBudget};
use crate::error::{Error, Result};
use crate::ingestion::{dedup_with_report, ingest, DedupConfig, FilterConfig, Reject};
use crate::jsonl;
use crate::scorers::{score_corpus, Embedder, MetricRecord, NGramModel, PosTagger, TaskSimilarity};
use crate::selection::{available_metrics, compute_weights, select, select_hard, Key, Metric, SelectionManifest, Strategy, WeightedRecord};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub domain: PathBuf,
    pub task: Option<PathBuf>,
    pub reference: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupSettings {
    pub enabled: bool,
    pub shingle_size: usize,
    pub num_hashes: usize,
    pub jaccard_threshold: f64,
    pub bands: usize,
    pub rows_per_band: usize,
    pub seed: u64,
}

impl Default for DedupSettings {
    fn default() -> Self {
        let d = DedupConfig::default();
        DedupSettings {
            enabled: true,
            shingle_size: d.shingle_size,
            num_hashes: d.num_hashes,
            jaccard_threshold: d.jaccard_threshold,
            bands: d.bands,
            rows_per_band: d.rows_per_band,
            seed: 0,
        }
    }
}

impl DedupSettings {
    pub fn params(&self) -> DedupConfig {
        DedupConfig {
            shingle_size: self.shingle_size,
            num_hashes: self.num_hashes,
            jaccard_threshold: self.jaccard_threshold,
            bands: self.bands,
            rows_per_band: self.rows_per_band,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSettings {
    pub order: usize,
    pub k: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for ScorerSettings {
    fn default() -> Self {
        ScorerSettings {
            order: 3,
            k: 0.1,
            dim: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    pub strategy: Strategy,
    pub key: Key,
    pub budget_fraction: Option<f64>,
    pub budget_tokens: Option<u64>,
    pub seed: u64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        SelectionSettings {
            strategy: Strategy::Hard,
            key: Key::Com,
            budget_fraction: Some(0.10),
            budget_tokens: None,
            seed: 0,
        }
    }
}

impl SelectionSettings {
    pub fn budget(&self) -> Result<TokenBudget> {
        match (self.budget_fraction, self.budget_tokens) {
            (Some(f), None) => TokenBudget::fraction(f),
            (None, Some(n)) => TokenBudget::tokens(n),
            _ => Err(Error::Config(
                "set exactly one of selection.budget_fraction and selection.budget_tokens".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    pub histogram_bins: usize,
    pub tsv: bool,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            histogram_bins: 20,
            tsv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub filter: FilterConfig,
    pub dedup: DedupSettings,
    pub scorer: ScorerSettings,
    pub selection: SelectionSettings,
    pub analysis: AnalysisSettings,
    /// Upper bound on worker threads; does not affect outputs.
    pub workers: Option<usize>,
}

/// Sets `a.b.c = value` inside a JSON object, creating intermediate objects.
pub fn set_dotted(root: &mut Value, dotted: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {dotted:?}")));
    }
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(map) => map,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just set")
            }
            _ => return Err(Error::Config(format!("override {dotted:?}: {part:?} is not inside an object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last part")
}

/// Parses an override value: JSON when it parses, a plain string otherwise.
pub fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl PipelineConfig {
    /// Reads an optional JSON config file and applies dotted overrides on top.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = match file {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for (k, v) in overrides {
            set_dotted(&mut value, k, parse_override_value(v))?;
        }
        let cfg: PipelineConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.domain.as_os_str().is_empty() {
            return Err(Error::Config("paths.domain is required".into()));
        }
        if self.paths.reference.as_os_str().is_empty() {
            return Err(Error::Config("paths.reference is required".into()));
        }
        if self.paths.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("paths.out_dir is required".into()));
        }
        if self.selection.key == Key::Sim && self.paths.task.is_none() {
            return Err(Error::Config("selection.key = sim needs paths.task".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.analysis.histogram_bins == 0 {
            return Err(Error::Config("analysis.histogram_bins must be positive".into()));
        }
        self.dedup.params().validate()?;
        self.selection.budget()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding `workers`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("workers");
        }
        hash_json(&v)
    }

    pub fn seeds(&self) -> BTreeMap<&'static str, u64> {
        BTreeMap::from([
            ("dedup", self.dedup.seed),
            ("scorer", self.scorer.seed),
            ("selection", self.selection.seed),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Dedup,
    Score,
    Weights,
    Select,
    Analyze,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Dedup => "dedup",
            Stage::Score => "score",
            Stage::Weights => "weights",
            Stage::Select => "select",
            Stage::Analyze => "analyze",
        })
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Sidecar written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: String,
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub inputs_hash: String,
    pub seeds: BTreeMap<String, u64>,
}

fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".prov.json");
    artifact.with_file_name(name)
}

fn partial_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    artifact.with_file_name(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path` via a `.partial` file, then its provenance sidecar.
pub fn write_with_provenance(path: &Path, bytes: &[u8], prov: &Provenance) -> Result<()> {
    let partial = partial_path(path);
    write_file(&partial, bytes)?;
    write_file(&sidecar_path(path), &pretty(prov)?)?;
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

pub fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn jsonl_bytes<'a, T: Serialize + 'a>(records: impl IntoIterator<Item = &'a T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    jsonl::write_to(&mut out, records).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(out)
}

/// Hex SHA-256 of a value's compact JSON form.
pub fn hash_json<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("value serializes")))
}

/// SHA-256 over the named input files' bytes.
pub fn hash_inputs(paths: &[(&str, &Path)]) -> Result<String> {
    let mut h = Sha256::new();
    for (name, p) in paths {
        let bytes = fs::read(p).map_err(|e| Error::io(*p, e))?;
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Collects a stage's artifacts as `.partial` files and publishes them together.
struct StageWriter<'a> {
    ctx: &'a RunContext,
    stage: Stage,
    written: Vec<PathBuf>,
}

impl<'a> StageWriter<'a> {
    fn new(ctx: &'a RunContext, stage: Stage) -> Self {
        StageWriter {
            ctx,
            stage,
            written: Vec::new(),
        }
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.ctx.out_dir.join(name);
        write_file(&partial_path(&path), bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn commit(self) -> Result<()> {
        for path in &self.written {
            let prov = self.ctx.provenance(self.stage, path);
            write_file(&sidecar_path(path), &pretty(&prov)?)?;
            fs::rename(partial_path(path), path).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

struct RunContext {
    out_dir: PathBuf,
    config_hash: String,
    inputs_hash: String,
    seeds: BTreeMap<String, u64>,
}

impl RunContext {
    fn provenance(&self, stage: Stage, path: &Path) -> Provenance {
        Provenance {
            artifact: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            stage: stage.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: self.config_hash.clone(),
            inputs_hash: self.inputs_hash.clone(),
            seeds: self.seeds.clone(),
        }
    }

    /// True when every named artifact exists with a sidecar matching this run.
    fn is_complete(&self, stage: Stage, names: &[&str]) -> bool {
        names.iter().all(|name| {
            let path = self.out_dir.join(name);
            let Ok(text) = fs::read_to_string(sidecar_path(&path)) else {
                return false;
            };
            let Ok(prov) = serde_json::from_str::<Provenance>(&text) else {
                return false;
            };
            path.is_file() && prov == self.provenance(stage, &path)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub config_hash: String,
    pub stages: Vec<StageOutcome>,
    pub corpus_tokens: u64,
    pub budget_tokens: u64,
    pub achieved_tokens: u64,
    pub selected_docs: usize,
}

#[derive(Serialize)]
struct RunSnapshot<'a> {
    tool_version: &'a str,
    config_hash: &'a str,
    inputs_hash: &'a str,
    seeds: &'a BTreeMap<String, u64>,
    config: &'a PipelineConfig,
}

/// One line of `duplicates.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duplicate {
    pub id: String,
    pub duplicate_of: String,
}

#[derive(Serialize)]
struct Histograms {
    bins: usize,
    histograms: Vec<Histogram>,
}

fn at(stage: Stage) -> impl Fn(Error) -> PipelineError {
    move |source| PipelineError { stage, source }
}

/// Runs every stage in order, honoring `config.workers`.
pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineSummary, PipelineError> {
    config.validate().map_err(at(Stage::Config))?;
    match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| at(Stage::Config)(Error::Config(e.to_string())))?;
            pool.install(|| run_stages(config))
        }
        None => run_stages(config),
    }
}

fn run_stages(cfg: &PipelineConfig) -> std::result::Result<PipelineSummary, PipelineError> {
    let mut inputs: Vec<(&str, &Path)> = vec![("domain", &cfg.paths.domain), ("reference", &cfg.paths.reference)];
    if let Some(task) = &cfg.paths.task {
        inputs.push(("task", task));
    }
    let out_dir = cfg.paths.out_dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| at(Stage::Config)(Error::io(&out_dir, e)))?;
    let ctx = RunContext {
        out_dir,
        config_hash: cfg.hash(),
        inputs_hash: hash_inputs(&inputs).map_err(at(Stage::Config))?,
        seeds: cfg.seeds().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    let snapshot = RunSnapshot {
        tool_version: TOOL_VERSION,
        config_hash: &ctx.config_hash,
        inputs_hash: &ctx.inputs_hash,
        seeds: &ctx.seeds,
        config: cfg,
    };
    let snap_bytes = pretty(&snapshot).map_err(at(Stage::Config))?;
    let snap_prov = ctx.provenance(Stage::Config, Path::new("run_config.json"));
    write_with_provenance(&ctx.out_dir.join("run_config.json"), &snap_bytes, &snap_prov).map_err(at(Stage::Config))?;

    let mut stages = Vec::new();
    let out = |name: &str| ctx.out_dir.join(name);

    // ingest
    let stage = Stage::Ingest;
    let names = ["ingested.jsonl", "rejects.jsonl"];
    let skipped = ctx.is_complete(stage, &names);
    let ingested = if skipped {
        read_corpus(&out(names[0])).map_err(at(stage))?
    } else {
        let raw = read_corpus(&cfg.paths.domain).map_err(at(stage))?;
        let report = ingest(&raw, &cfg.filter.clone().normalized()).map_err(at(stage))?;
        if report.kept.is_empty() {
            return Err(at(stage)(Error::EmptyCorpus("ingest (all documents rejected)")));
        }
        let mut w = StageWriter::new(&ctx, stage);
        w.put(names[0], &jsonl_bytes(report.kept.documents()).map_err(at(stage))?).map_err(at(stage))?;
        w.put(names[1], &jsonl_bytes::<Reject>(&report.rejects).map_err(at(stage))?).map_err(at(stage))?;
        w.commit().map_err(at(stage))?;
        report.kept
    };
    stages.push(StageOutcome { stage, skipped });

    // dedup
    let stage = Stage::Dedup;
    let names = ["deduped.jsonl", "duplicates.jsonl"];
    let skipped = ctx.is_complete(stage, &names);
    let domain = if skipped {
        read_corpus(&out(names[0])).map_err(at(stage))?
    } else {
        let (kept, dups) = if cfg.dedup.enabled {
            let rep = dedup_with_report(&ingested, &cfg.dedup.params(), cfg.dedup.seed).map_err(at(stage))?;
            let dups: Vec<Duplicate> = rep
                .removed
                .into_iter()
                .map(|(id, duplicate_of)| Duplicate { id, duplicate_of })
                .collect();
            (rep.kept, dups)
        } else {
            (ingested, Vec::new())
        };
        let mut w = StageWriter::new(&ctx, stage);
        w.put(names[0], &jsonl_bytes(kept.documents()).map_err(at(stage))?).map_err(at(stage))?;
        w.put(names[1], &jsonl_bytes(&dups).map_err(at(stage))?).map_err(at(stage))?;
        w.commit().map_err(at(stage))?;
        kept
    };
    stages.push(StageOutcome { stage, skipped });

    // score
    let stage = Stage::Score;
    let mut names = vec!["metrics.jsonl", "surrogate.json"];
    if cfg.paths.task.is_some() {
        names.push("embedder.json");
    }
    let skipped = ctx.is_complete(stage, &names);
    let metrics: Vec<MetricRecord> = if skipped {
        jsonl::read(&out("metrics.jsonl")).map_err(at(stage))?
    } else {
        let reference = read_corpus(&cfg.paths.reference).map_err(at(stage))?;
        let model = NGramModel::train(&reference, cfg.scorer.order, cfg.scorer.k).map_err(at(stage))?;
        let mut w = StageWriter::new(&ctx, stage);
        let tagger = PosTagger::default();
        let metrics = match &cfg.paths.task {
            Some(task_path) => {
                let task = read_corpus(task_path).map_err(at(stage))?;
                let idf_docs: Vec<_> = domain.iter().chain(task.iter()).cloned().collect();
                let idf_corpus = Corpus::new(idf_docs).map_err(at(stage))?;
                let embedder = Embedder::fit(&idf_corpus, cfg.scorer.dim, cfg.scorer.seed).map_err(at(stage))?;
                let centroid = embedder.task_centroid(&task).map_err(at(stage))?;
                w.put("embedder.json", &embedder.to_json().map_err(at(stage))?).map_err(at(stage))?;
                let sim = TaskSimilarity {
                    embedder: &embedder,
                    centroid: &centroid,
                };
                score_corpus(&domain, &model, Some(sim), &tagger).map_err(at(stage))?
            }
            None => score_corpus(&domain, &model, None, &tagger).map_err(at(stage))?,
        };
        w.put("surrogate.json", &model.to_json().map_err(at(stage))?).map_err(at(stage))?;
        w.put("metrics.jsonl", &jsonl_bytes(&metrics).map_err(at(stage))?).map_err(at(stage))?;
        w.commit().map_err(at(stage))?;
        metrics
    };
    stages.push(StageOutcome { stage, skipped });

    // weights
    let stage = Stage::Weights;
    let names = ["weights.jsonl", "quantiles.json"];
    let skipped = ctx.is_complete(stage, &names);
    let weighted: Vec<WeightedRecord> = if skipped {
        jsonl::read(&out(names[0])).map_err(at(stage))?
    } else {
        let (tables, weighted) = compute_weights(&metrics).map_err(at(stage))?;
        let mut w = StageWriter::new(&ctx, stage);
        w.put(names[0], &jsonl_bytes(&weighted).map_err(at(stage))?).map_err(at(stage))?;
        w.put(names[1], &pretty(&tables).map_err(at(stage))?).map_err(at(stage))?;
        w.commit().map_err(at(stage))?;
        weighted
    };
    stages.push(StageOutcome { stage, skipped });

    // select
    let stage = Stage::Select;
    let names = ["manifest.json", "selected.jsonl"];
    let skipped = ctx.is_complete(stage, &names);
    let budget = cfg.selection.budget().map_err(at(stage))?;
    let manifest: SelectionManifest = if skipped {
        let text = fs::read_to_string(out(names[0])).map_err(|e| at(stage)(Error::io(out(names[0]), e)))?;
        serde_json::from_str(&text).map_err(|e| at(stage)(e.into()))?
    } else {
        let s = &cfg.selection;
        let manifest = select(&weighted, budget, s.key, s.strategy, s.seed).map_err(at(stage))?;
        let subset = domain.subset(manifest.ids()).map_err(at(stage))?;
        let mut w = StageWriter::new(&ctx, stage);
        w.put(names[0], &pretty(&manifest).map_err(at(stage))?).map_err(at(stage))?;
        w.put(names[1], &jsonl_bytes(subset.documents()).map_err(at(stage))?).map_err(at(stage))?;
        w.commit().map_err(at(stage))?;
        manifest
    };
    stages.push(StageOutcome { stage, skipped });

    // analyze
    let stage = Stage::Analyze;
    let mut names = vec!["correlations.json", "histograms.json", "balance.json"];
    if cfg.analysis.tsv {
        names.extend(["correlations.tsv", "histograms.tsv"]);
    }
    let skipped = ctx.is_complete(stage, &names);
    if !skipped {
        let corr = correlations(&metrics).map_err(at(stage))?;
        let metrics_present = available_metrics(&metrics).map_err(at(stage))?;
        let hists = metrics_present
            .iter()
            .map(|&m| metric_histogram(&metrics, m, cfg.analysis.histogram_bins))
            .collect::<Result<Vec<_>>>()
            .map_err(at(stage))?;
        let balance = balance_reports(&manifest, &weighted, budget, &metrics_present).map_err(at(stage))?;
        let mut w = StageWriter::new(&ctx, stage);
        w.put("correlations.json", &pretty(&corr).map_err(at(stage))?).map_err(at(stage))?;
        let histograms = Histograms {
            bins: cfg.analysis.histogram_bins,
            histograms: hists,
        };
        w.put("histograms.json", &pretty(&histograms).map_err(at(stage))?).map_err(at(stage))?;
        w.put("balance.json", &pretty(&balance).map_err(at(stage))?).map_err(at(stage))?;
        if cfg.analysis.tsv {
            w.put("correlations.tsv", corr.to_tsv().as_bytes()).map_err(at(stage))?;
            let tsv: String = histograms
                .histograms
                .iter()
                .map(|h| {
                    let name = h.metric.map(Metric::name).unwrap_or("value");
                    format!("# {name}\n{}", h.to_tsv())
                })
                .collect();
            w.put("histograms.tsv", tsv.as_bytes()).map_err(at(stage))?;
        }
        w.commit().map_err(at(stage))?;
    }
    stages.push(StageOutcome { stage, skipped });

    Ok(PipelineSummary {
        config_hash: ctx.config_hash.clone(),
        stages,
        corpus_tokens: domain.total_tokens(),
        budget_tokens: manifest.budget_tokens,
        achieved_tokens: manifest.achieved_tokens,
        selected_docs: manifest.selected.len(),
    })
}

/// Balance of the configured selection, of hard selections on each key at the
/// same budget, and of the whole corpus.
fn balance_reports(
    manifest: &SelectionManifest,
    weighted: &[WeightedRecord],
    budget: TokenBudget,
    metrics: &[Metric],
) -> Result<Vec<BalanceReport>> {
    let mut out = Vec::new();
    if !manifest.selected.is_empty() {
        out.push(balance_report(
            format!("selected {}/{}", manifest.strategy, manifest.key),
            manifest,
            weighted,
        )?);
    }
    let keys = metrics
        .iter()
        .map(|m| match m {
            Metric::Ppl => Key::Ppl,
            Metric::Sim => Key::Sim,
            Metric::Ent => Key::Ent,
        })
        .chain(std::iter::once(Key::Com));
    for key in keys {
        let m = select_hard(weighted, budget, key)?;
        if !m.selected.is_empty() {
            out.push(balance_report(format!("hard/{key}"), &m, weighted)?);
        }
    }
    let all = SelectionManifest {
        selected: weighted
            .iter()
            .map(|w| crate::selection::Selected {
                id: w.id.clone(),
                n_tokens: w.n_tokens,
            })
            .collect(),
        ..manifest.clone()
    };
    out.push(balance_report("all", &all, weighted)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_overrides() {
        let mut v = serde_json::json!({"selection": {"key": "ppl"}});
        set_dotted(&mut v, "selection.key", parse_override_value("sim")).unwrap();
        set_dotted(&mut v, "dedup.seed", parse_override_value("7")).unwrap();
        set_dotted(&mut v, "paths.out_dir", parse_override_value("out")).unwrap();
        assert_eq!(v["selection"]["key"], "sim");
        assert_eq!(v["dedup"]["seed"], 7);
        assert_eq!(v["paths"]["out_dir"], "out");
        assert!(set_dotted(&mut v, "selection..x", Value::Null).is_err());
        assert!(set_dotted(&mut v, "selection.key.deeper", Value::Null).is_err());
    }

    #[test]
    fn config_validation_and_hash() {
        let overrides = |extra: &[(&str, &str)]| {
            let mut v: Vec<(String, String)> = vec![
                ("paths.domain".into(), "d.jsonl".into()),
                ("paths.reference".into(), "r.jsonl".into()),
                ("paths.out_dir".into(), "out".into()),
            ];
            v.extend(extra.iter().map(|(a, b)| (a.to_string(), b.to_string())));
            v
        };
        let cfg = PipelineConfig::load(None, &overrides(&[])).unwrap();
        assert_eq!(cfg.selection.budget().unwrap(), TokenBudget::Fraction(0.1));
        let with_workers = PipelineConfig::load(None, &overrides(&[("workers", "3")])).unwrap();
        assert_eq!(cfg.hash(), with_workers.hash());
        let other_seed = PipelineConfig::load(None, &overrides(&[("selection.seed", "1")])).unwrap();
        assert_ne!(cfg.hash(), other_seed.hash());

        assert!(PipelineConfig::load(None, &overrides(&[("selection.budget_tokens", "5")])).is_err());
        assert!(PipelineConfig::load(None, &overrides(&[("selection.key", "sim")])).is_err());
        assert!(PipelineConfig::load(None, &overrides(&[("selection.nope", "1")])).is_err());
        assert!(PipelineConfig::load(None, &overrides(&[("dedup.bands", "3")])).is_err());
        let err = PipelineConfig::load(None, &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("o/m.json")), Path::new("o/m.json.prov.json"));
        assert_eq!(partial_path(Path::new("o/m.json")), Path::new("o/m.json.partial"));
    }
}
