//! `dsel`: domain corpus selection from the command line.
//!
//! Every stage has its own subcommand reading and writing documented files,
//! and `pipeline` runs them all from one JSON config. Config fields can be
//! overridden with flags of the same dotted name, e.g. `--selection.key ppl`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dsel_core::analysis::{balance_report, correlations, metric_histogram};
use dsel_core::harness::{generate, run_harness, HarnessConfig, SynthConfig};
use dsel_core::ingestion::{dedup_with_report, ingest, DedupConfig, FilterConfig};
use dsel_core::jsonl;
use dsel_core::pipeline::{
    hash_inputs, hash_json, jsonl_bytes, parse_override_value, pretty, run_pipeline, set_dotted, write_with_provenance,
    Duplicate, PipelineConfig, PipelineError, Provenance, TOOL_VERSION,
};
use dsel_core::scorers::{score_corpus, Embedder, MetricRecord, NGramModel, PosTagger, TaskSimilarity};
use dsel_core::selection::{compute_weights, select, Key, Metric, SelectionManifest, Strategy, WeightedRecord};
use dsel_core::{read_corpus, Corpus, Error, ErrorClass, TokenBudget};

#[derive(Parser, Debug)]
#[command(name = "dsel", version, about = "Task-similarity and task-agnostic corpus selection")]
struct Cli {
    /// Upper bound on worker threads for every stage.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter a raw corpus by URL/domain and minimum section length.
    Ingest(IngestArgs),
    /// Remove near-duplicates with MinHash-LSH.
    Dedup(DedupArgs),
    /// Compute perplexity, task similarity and POS entropy per document.
    Score(ScoreArgs),
    /// Convert metrics into quantile interval weights.
    Weights(WeightsArgs),
    /// Select a subset under a token budget.
    Select(SelectArgs),
    /// Correlation, histogram and balance reports.
    Analyze {
        #[command(subcommand)]
        report: AnalyzeCommand,
    },
    /// Adaptation harness on synthetic or supplied corpora.
    Harness {
        #[command(subcommand)]
        command: HarnessCommand,
    },
    /// Run every stage from one config file.
    Pipeline(PipelineArgs),
    /// Write the synthetic two-domain corpora.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSONL of {id, reason}.
    #[arg(long)]
    rejects: PathBuf,
    /// JSON FilterConfig; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One domain per line.
    #[arg(long)]
    allowlist: Option<PathBuf>,
    /// Comma-separated URL keywords.
    #[arg(long)]
    keywords: Option<String>,
    #[arg(long)]
    min_section_tokens: Option<u64>,
}

#[derive(Args, Debug)]
struct DedupArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSONL of {id, duplicate_of}.
    #[arg(long)]
    duplicates: Option<PathBuf>,
    #[arg(long, default_value_t = 0.87)]
    threshold: f64,
    #[arg(long, default_value_t = 128)]
    hashes: usize,
    #[arg(long, default_value_t = 5)]
    shingle: usize,
    #[arg(long, default_value_t = 16)]
    bands: usize,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Corpus to score.
    #[arg(long)]
    input: PathBuf,
    /// General corpus for the surrogate model (or use --model).
    #[arg(long, required_unless_present = "model")]
    reference: Option<PathBuf>,
    /// Previously saved surrogate model.
    #[arg(long, conflicts_with = "reference")]
    model: Option<PathBuf>,
    /// Task examples; enables the similarity metric.
    #[arg(long)]
    task: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    embedder_out: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 0.1)]
    k: f64,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct WeightsArgs {
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    quantiles: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Manifest JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "hard")]
    strategy: Strategy,
    #[arg(long, default_value = "com")]
    key: Key,
    #[arg(long, conflicts_with = "budget_tokens")]
    budget_fraction: Option<f64>,
    #[arg(long)]
    budget_tokens: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corpus to cut the selected documents from.
    #[arg(long, requires = "selected")]
    corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    selected: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Spearman matrix of the metrics.
    Correlations {
        #[arg(long)]
        metrics: PathBuf,
        /// Write TSV here instead of JSON to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equal-width histogram of one metric.
    Histogram {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        metric: Metric,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean interval score per metric over a selection.
    Balance {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "selected")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum HarnessCommand {
    /// Run the comparison table from a JSON HarnessConfig.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for report.json and report.tsv; stdout JSON otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic corpora.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    docs: usize,
    #[arg(long, default_value_t = 0.3)]
    overlap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    duplicate_rate: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Stage(PipelineError),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let class = match self {
            CliError::Core(e) => e.class(),
            CliError::Stage(e) => e.source.class(),
        };
        match class {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Internal => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Stage(e) => e.fmt(f),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Pulls `--a.b value` and `--a.b=value` out of argv.
fn split_dotted(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let dotted = arg
            .strip_prefix("--")
            .filter(|name| name.split('=').next().is_some_and(|n| n.contains('.')));
        match dotted {
            Some(flag) => match flag.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().unwrap_or_default();
                    overrides.push((flag.to_string(), v));
                }
            },
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}

/// Writes stage outputs with sidecars carrying the hash of the effective args.
struct Outputs {
    prov: Provenance,
}

impl Outputs {
    fn new<A: Serialize>(stage: &str, args: &A, inputs: &[(&str, &Path)], seeds: &[(&str, u64)]) -> CliResult<Self> {
        Ok(Outputs {
            prov: Provenance {
                artifact: String::new(),
                stage: stage.to_string(),
                tool_version: TOOL_VERSION.to_string(),
                config_hash: hash_json(args),
                inputs_hash: hash_inputs(inputs)?,
                seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            },
        })
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let prov = Provenance {
            artifact: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            ..self.prov.clone()
        };
        Ok(write_with_provenance(path, bytes, &prov)?)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let bytes = pretty(value)?;
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> CliResult<()> {
    let mut cfg: FilterConfig = match &a.config {
        Some(p) => read_json(p).map_err(|e| match e {
            CliError::Core(Error::Json(j)) => Error::Config(format!("{}: {j}", p.display())).into(),
            other => other,
        })?,
        None => FilterConfig::default(),
    };
    if let Some(p) = &a.allowlist {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        cfg.domain_allowlist = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
    }
    if let Some(k) = &a.keywords {
        cfg.url_keywords = k.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if let Some(n) = a.min_section_tokens {
        cfg.min_section_tokens = n;
    }
    let cfg = cfg.normalized();
    let out = Outputs::new("ingest", &cfg, &[("input", &a.input)], &[])?;
    let report = ingest(&read_corpus(&a.input)?, &cfg)?;
    out.write(&a.out, &jsonl_bytes(report.kept.documents())?)?;
    out.write(&a.rejects, &jsonl_bytes(&report.rejects)?)?;
    log::info!("kept {} documents, rejected {}", report.kept.len(), report.rejects.len());
    Ok(())
}

fn cmd_dedup(a: &DedupArgs) -> CliResult<()> {
    let cfg = DedupConfig {
        shingle_size: a.shingle,
        num_hashes: a.hashes,
        jaccard_threshold: a.threshold,
        bands: a.bands,
        rows_per_band: a.rows,
    };
    cfg.validate()?;
    let out = Outputs::new("dedup", &(&cfg, a.seed), &[("input", &a.input)], &[("dedup", a.seed)])?;
    let report = dedup_with_report(&read_corpus(&a.input)?, &cfg, a.seed)?;
    out.write(&a.out, &jsonl_bytes(report.kept.documents())?)?;
    if let Some(p) = &a.duplicates {
        let dups: Vec<Duplicate> = report
            .removed
            .iter()
            .map(|(id, rep)| Duplicate {
                id: id.clone(),
                duplicate_of: rep.clone(),
            })
            .collect();
        out.write(p, &jsonl_bytes(&dups)?)?;
    }
    log::info!("kept {} documents, removed {}", report.kept.len(), report.removed.len());
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct Effective<'a> {
        order: usize,
        k: f64,
        dim: usize,
        seed: u64,
        task: bool,
        model: Option<&'a Path>,
    }
    let eff = Effective {
        order: a.order,
        k: a.k,
        dim: a.dim,
        seed: a.seed,
        task: a.task.is_some(),
        model: a.model.as_deref(),
    };
    let mut inputs: Vec<(&str, &Path)> = vec![("input", &a.input)];
    if let Some(r) = &a.reference {
        inputs.push(("reference", r));
    }
    if let Some(m) = &a.model {
        inputs.push(("model", m));
    }
    if let Some(t) = &a.task {
        inputs.push(("task", t));
    }
    let out = Outputs::new("score", &eff, &inputs, &[("scorer", a.seed)])?;
    let corpus = read_corpus(&a.input)?;
    let model = match (&a.model, &a.reference) {
        (Some(m), _) => NGramModel::load(m)?,
        (None, Some(r)) => NGramModel::train(&read_corpus(r)?, a.order, a.k)?,
        (None, None) => return Err(Error::Config("score needs --reference or --model".into()).into()),
    };
    let tagger = PosTagger::default();
    let metrics = match &a.task {
        Some(t) => {
            let task = read_corpus(t)?;
            let idf = Corpus::new(corpus.iter().chain(task.iter()).cloned().collect())?;
            let embedder = Embedder::fit(&idf, a.dim, a.seed)?;
            let centroid = embedder.task_centroid(&task)?;
            if let Some(p) = &a.embedder_out {
                out.write(p, &embedder.to_json()?)?;
            }
            let sim = TaskSimilarity {
                embedder: &embedder,
                centroid: &centroid,
            };
            score_corpus(&corpus, &model, Some(sim), &tagger)?
        }
        None => score_corpus(&corpus, &model, None, &tagger)?,
    };
    if let Some(p) = &a.model_out {
        out.write(p, &model.to_json()?)?;
    }
    out.write(&a.out, &jsonl_bytes(&metrics)?)?;
    Ok(())
}

fn cmd_weights(a: &WeightsArgs) -> CliResult<()> {
    let out = Outputs::new("weights", &(), &[("metrics", &a.metrics)], &[])?;
    let metrics: Vec<MetricRecord> = jsonl::read(&a.metrics)?;
    let (tables, weighted) = compute_weights(&metrics)?;
    out.write(&a.out, &jsonl_bytes(&weighted)?)?;
    if let Some(p) = &a.quantiles {
        out.write(p, &pretty(&tables)?)?;
    }
    Ok(())
}

fn cmd_select(a: &SelectArgs) -> CliResult<()> {
    let budget = match (a.budget_fraction, a.budget_tokens) {
        (_, Some(n)) => TokenBudget::tokens(n)?,
        (Some(f), None) => TokenBudget::fraction(f)?,
        (None, None) => TokenBudget::default(),
    };
    let mut inputs: Vec<(&str, &Path)> = vec![("weights", &a.weights)];
    if let Some(c) = &a.corpus {
        inputs.push(("corpus", c));
    }
    let eff = (a.strategy, a.key, budget, a.seed);
    let out = Outputs::new("select", &eff, &inputs, &[("selection", a.seed)])?;
    let weighted: Vec<WeightedRecord> = jsonl::read(&a.weights)?;
    let manifest = select(&weighted, budget, a.key, a.strategy, a.seed)?;
    out.write(&a.out, &pretty(&manifest)?)?;
    if let (Some(c), Some(s)) = (&a.corpus, &a.selected) {
        let subset = read_corpus(c)?.subset(manifest.ids())?;
        out.write(s, &jsonl_bytes(subset.documents())?)?;
    }
    log::info!(
        "selected {} documents, {} of {} budget tokens",
        manifest.selected.len(),
        manifest.achieved_tokens,
        manifest.budget_tokens
    );
    Ok(())
}

fn cmd_analyze(report: &AnalyzeCommand) -> CliResult<()> {
    match report {
        AnalyzeCommand::Correlations { metrics, out } => {
            let records: Vec<MetricRecord> = jsonl::read(metrics)?;
            let corr = correlations(&records)?;
            match out {
                Some(p) => Outputs::new("analyze", &"correlations", &[("metrics", metrics)], &[])?
                    .write(p, corr.to_tsv().as_bytes()),
                None => print_json(&corr),
            }
        }
        AnalyzeCommand::Histogram {
            metrics,
            metric,
            bins,
            out,
        } => {
            let records: Vec<MetricRecord> = jsonl::read(metrics)?;
            let h = metric_histogram(&records, *metric, *bins)?;
            match out {
                Some(p) => Outputs::new("analyze", &("histogram", metric, bins), &[("metrics", metrics)], &[])?
                    .write(p, h.to_tsv().as_bytes()),
                None => print_json(&h),
            }
        }
        AnalyzeCommand::Balance {
            weights,
            manifest,
            name,
            out,
        } => {
            let weighted: Vec<WeightedRecord> = jsonl::read(weights)?;
            let m: SelectionManifest = read_json(manifest)?;
            let report = balance_report(name.clone(), &m, &weighted)?;
            match out {
                Some(p) => Outputs::new(
                    "analyze",
                    &("balance", name),
                    &[("weights", weights), ("manifest", manifest)],
                    &[],
                )?
                .write(p, report.to_tsv().as_bytes()),
                None => print_json(&report),
            }
        }
    }
}

fn load_config_value(path: Option<&Path>, overrides: &[(String, String)]) -> CliResult<serde_json::Value> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => serde_json::Value::Object(Default::default()),
    };
    for (k, v) in overrides {
        set_dotted(&mut value, k, parse_override_value(v))?;
    }
    Ok(value)
}

fn cmd_harness_run(config: Option<&Path>, out: Option<&Path>, overrides: &[(String, String)]) -> CliResult<()> {
    let value = load_config_value(config, overrides)?;
    let cfg: HarnessConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    let report = run_harness(&cfg)?;
    match out {
        Some(dir) => {
            let mut inputs: Vec<(&str, &Path)> = Vec::new();
            if let Some(c) = &cfg.corpora {
                inputs.extend([
                    ("reference", c.reference.as_path()),
                    ("domain", c.domain.as_path()),
                    ("task", c.task.as_path()),
                    ("domain_test", c.domain_test.as_path()),
                    ("general_test", c.general_test.as_path()),
                ]);
            }
            let seeds: Vec<(&str, u64)> = cfg.seeds.iter().map(|&s| ("harness", s)).take(1).collect();
            let o = Outputs::new("harness", &cfg, &inputs, &seeds)?;
            o.write(&dir.join("report.json"), &pretty(&report)?)?;
            o.write(&dir.join("report.tsv"), report.to_tsv().as_bytes())?;
            Ok(())
        }
        None => print_json(&report),
    }
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        duplicate_rate: a.duplicate_rate,
        ..SynthConfig::with_docs(a.docs, a.overlap, a.seed)
    };
    let out = Outputs::new("synth", &cfg, &[], &[("synth", a.seed)])?;
    let corpora = generate(&cfg)?;
    let files: [(&str, &Corpus); 5] = [
        ("reference.jsonl", &corpora.reference),
        ("domain.jsonl", &corpora.domain),
        ("task.jsonl", &corpora.task),
        ("domain_test.jsonl", &corpora.domain_test),
        ("general_test.jsonl", &corpora.general_test),
    ];
    for (name, corpus) in files {
        out.write(&a.out.join(name), &jsonl_bytes(corpus.documents())?)?;
    }
    Ok(())
}

fn cmd_pipeline(a: &PipelineArgs, workers: Option<usize>, overrides: &[(String, String)]) -> CliResult<()> {
    let mut overrides = overrides.to_vec();
    if let Some(n) = workers {
        overrides.push(("workers".into(), n.to_string()));
    }
    let cfg = PipelineConfig::load(a.config.as_deref(), &overrides)?;
    let summary = run_pipeline(&cfg).map_err(CliError::Stage)?;
    print_json(&summary)
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> CliResult<()> {
    let takes_overrides = matches!(
        cli.command,
        Command::Pipeline(_)
            | Command::Harness {
                command: HarnessCommand::Run { .. }
            }
    );
    if !overrides.is_empty() && !takes_overrides {
        let names: Vec<&str> = overrides.iter().map(|(k, _)| k.as_str()).collect();
        return Err(Error::Config(format!("dotted overrides {names:?} apply only to pipeline and harness run")).into());
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Dedup(a) => cmd_dedup(a),
        Command::Score(a) => cmd_score(a),
        Command::Weights(a) => cmd_weights(a),
        Command::Select(a) => cmd_select(a),
        Command::Analyze { report } => cmd_analyze(report),
        Command::Harness { command } => match command {
            HarnessCommand::Run { config, out } => cmd_harness_run(config.as_deref(), out.as_deref(), &overrides),
            HarnessCommand::Synth(a) => cmd_synth(a),
        },
        Command::Pipeline(a) => cmd_pipeline(a, cli.workers, &overrides),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = split_dotted(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dotted_flags_are_split_out() {
        let (rest, ov) = split_dotted(strings(&[
            "dsel",
            "pipeline",
            "--config",
            "c.json",
            "--selection.key",
            "ppl",
            "--dedup.seed=4",
        ]));
        assert_eq!(rest, strings(&["dsel", "pipeline", "--config", "c.json"]));
        assert_eq!(
            ov,
            vec![
                ("selection.key".to_string(), "ppl".to_string()),
                ("dedup.seed".to_string(), "4".to_string())
            ]
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
