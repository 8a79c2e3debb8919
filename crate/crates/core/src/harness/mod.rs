//! Desk-scale adaptation harness.
//!
//! The "language model" is the n-gram model itself: a base model fitted on a
//! general corpus is adapted by count interpolation on a selected subset of
//! the domain corpus and evaluated on held-out domain and general text. This
//! is an analogue of continual pretraining, not a reproduction of it.

mod config;
mod synth;

pub use config::{run_harness, CorpusPaths, HarnessConfig, HarnessReport};
pub use synth::{generate, SynthConfig, SynthCorpora};

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenBudget};
use crate::error::{Error, Result};
use crate::scorers::{score_corpus, Embedder, MetricRecord, NGramModel, PosTagger, TaskSimilarity};
use crate::selection::{compute_weights, select, weighted_order, Key, SelectionManifest, Strategy, WeightedRecord};

/// Count-interpolation adaptation: `(1 - w)·base + w·subset`.
pub fn adapt(base: &NGramModel, subset: &Corpus, mix_weight: f64) -> Result<NGramModel> {
    base.adapt(subset, mix_weight)
}

/// One row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Plan {
    /// Uniformly random subset under the budget.
    Random,
    /// The whole domain corpus.
    Full,
    EtsDacp,
    EtaDacpPpl,
    EtaDacpEnt,
    EtsDacpCom,
}

impl Plan {
    pub const ALL: [Plan; 6] = [
        Plan::Random,
        Plan::Full,
        Plan::EtsDacp,
        Plan::EtaDacpPpl,
        Plan::EtaDacpEnt,
        Plan::EtsDacpCom,
    ];

    pub fn key(self) -> Option<Key> {
        match self {
            Plan::Random | Plan::Full => None,
            Plan::EtsDacp => Some(Key::Sim),
            Plan::EtaDacpPpl => Some(Key::Ppl),
            Plan::EtaDacpEnt => Some(Key::Ent),
            Plan::EtsDacpCom => Some(Key::Com),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plan::Random => "random",
            Plan::Full => "dacp-100%",
            Plan::EtsDacp => "ets-dacp",
            Plan::EtaDacpPpl => "eta-dacp-ppl",
            Plan::EtaDacpEnt => "eta-dacp-ent",
            Plan::EtsDacpCom => "ets-dacp-com",
        }
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A plan paired with the sampling mode (None for random/full).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanSpec {
    pub plan: Plan,
    pub sampling: Option<Strategy>,
}

impl PlanSpec {
    pub fn hard(plan: Plan) -> Self {
        PlanSpec {
            plan,
            sampling: Some(Strategy::Hard),
        }
    }

    pub fn soft(plan: Plan) -> Self {
        PlanSpec {
            plan,
            sampling: Some(Strategy::Soft),
        }
    }

    pub fn plain(plan: Plan) -> Self {
        PlanSpec { plan, sampling: None }
    }

    /// Random, full, and every metric plan in both sampling modes.
    pub fn standard_set() -> Vec<PlanSpec> {
        let mut v = vec![PlanSpec::plain(Plan::Random), PlanSpec::plain(Plan::Full)];
        for plan in &Plan::ALL[2..] {
            v.push(PlanSpec::hard(*plan));
            v.push(PlanSpec::soft(*plan));
        }
        v
    }

    pub fn label(&self) -> String {
        match self.sampling {
            Some(s) => format!("{}/{s}", self.plan),
            None => self.plan.to_string(),
        }
    }
}

impl FromStr for PlanSpec {
    type Err = Error;

    /// Parses a label such as `random`, `dacp-100%` or `ets-dacp/soft`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, sampling) = match s.split_once('/') {
            Some((n, m)) => (n, Some(m.parse::<Strategy>()?)),
            None => (s, None),
        };
        let plan = Plan::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown plan {name:?}")))?;
        match (plan.key(), sampling) {
            (Some(_), None) => Err(Error::Config(format!("plan {name} needs /hard or /soft"))),
            (None, Some(_)) => Err(Error::Config(format!("plan {name} takes no sampling mode"))),
            _ => Ok(PlanSpec { plan, sampling }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessParams {
    pub order: usize,
    pub k: f64,
    pub surrogate_order: usize,
    pub dim: usize,
    pub embed_seed: u64,
    pub mix_weight: f64,
    pub budget_fraction: f64,
    pub seed: u64,
}

impl Default for HarnessParams {
    fn default() -> Self {
        HarnessParams {
            order: 3,
            k: 0.1,
            surrogate_order: 2,
            dim: 256,
            embed_seed: 0,
            mix_weight: 0.5,
            budget_fraction: 0.10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRun {
    pub strategy: String,
    pub plan: Plan,
    pub sampling: Option<Strategy>,
    pub budget_fraction: f64,
    pub seed: u64,
    pub mix_weight: f64,
    pub selected_docs: usize,
    pub selected_tokens: u64,
    pub domain_test_ppl: f64,
    pub general_test_ppl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub note: String,
    pub base_domain_test_ppl: f64,
    pub base_general_test_ppl: f64,
    pub runs: Vec<AdaptationRun>,
}

impl Comparison {
    pub fn run(&self, spec: PlanSpec) -> Option<&AdaptationRun> {
        self.runs
            .iter()
            .find(|r| r.plan == spec.plan && r.sampling == spec.sampling)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "strategy\tbudget_fraction\tseed\tmix_weight\tselected_docs\tselected_tokens\tdomain_test_ppl\tgeneral_test_ppl\n",
        );
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.strategy,
                r.budget_fraction,
                r.seed,
                r.mix_weight,
                r.selected_docs,
                r.selected_tokens,
                r.domain_test_ppl,
                r.general_test_ppl
            );
        }
        out
    }
}

/// Inputs of a comparison: the domain corpus to select from, the task corpus
/// for the similarity key, the base model's reference corpus and two held-out
/// evaluation sets.
#[derive(Debug, Clone, Copy)]
pub struct HarnessData<'a> {
    pub reference: &'a Corpus,
    pub domain: &'a Corpus,
    pub task: &'a Corpus,
    pub domain_test: &'a Corpus,
    pub general_test: &'a Corpus,
}

impl<'a> From<&'a SynthCorpora> for HarnessData<'a> {
    fn from(s: &'a SynthCorpora) -> Self {
        HarnessData {
            reference: &s.reference,
            domain: &s.domain,
            task: &s.task,
            domain_test: &s.domain_test,
            general_test: &s.general_test,
        }
    }
}

/// Scored and weighted domain corpus, reusable across plans and budgets.
pub struct Prepared {
    pub base: NGramModel,
    pub metrics: Vec<MetricRecord>,
    pub weighted: Vec<WeightedRecord>,
}

/// Fits the base model and surrogate, embeds against the task centroid and
/// converts the domain corpus' metrics into interval weights.
pub fn prepare(data: HarnessData<'_>, params: &HarnessParams) -> Result<Prepared> {
    let base = NGramModel::train(data.reference, params.order, params.k)?;
    let surrogate = if params.surrogate_order == params.order {
        base.clone()
    } else {
        NGramModel::train(data.reference, params.surrogate_order, params.k)?
    };
    let idf_docs: Vec<_> = data.domain.iter().chain(data.task.iter()).cloned().collect();
    let embedder = Embedder::fit(&Corpus::new(idf_docs)?, params.dim, params.embed_seed)?;
    let centroid = embedder.task_centroid(data.task)?;
    let metrics = score_corpus(
        data.domain,
        &surrogate,
        Some(TaskSimilarity {
            embedder: &embedder,
            centroid: &centroid,
        }),
        &PosTagger::default(),
    )?;
    let (_, weighted) = compute_weights(&metrics)?;
    Ok(Prepared {
        base,
        metrics,
        weighted,
    })
}

/// Chooses the subset for one plan.
pub fn plan_subset(
    prepared: &Prepared,
    domain: &Corpus,
    spec: PlanSpec,
    budget: TokenBudget,
    seed: u64,
) -> Result<Corpus> {
    let manifest: SelectionManifest = match (spec.plan.key(), spec.sampling) {
        (None, _) if spec.plan == Plan::Full => return Ok(domain.clone()),
        (None, _) => {
            let equal: Vec<WeightedRecord> = prepared
                .weighted
                .iter()
                .map(|w| WeightedRecord {
                    q_comb: 1.0,
                    ..w.clone()
                })
                .collect();
            let total: u64 = equal.iter().map(|w| w.n_tokens).sum();
            let budget_tokens = budget.resolve(total);
            let mut achieved = 0;
            let mut ids = Vec::new();
            for i in weighted_order(&vec![1.0; equal.len()], seed)? {
                if achieved + equal[i].n_tokens > budget_tokens {
                    break;
                }
                achieved += equal[i].n_tokens;
                ids.push(equal[i].id.as_str());
            }
            return domain.subset(ids);
        }
        (Some(key), Some(strategy)) => select(&prepared.weighted, budget, key, strategy, seed)?,
        (Some(_), None) => {
            return Err(Error::Config(format!(
                "plan {} needs a sampling mode (hard or soft)",
                spec.plan
            )))
        }
    };
    domain.subset(manifest.ids())
}

/// Runs every plan against the same base model, budget and seed.
pub fn run_comparison(data: HarnessData<'_>, specs: &[PlanSpec], params: &HarnessParams) -> Result<Comparison> {
    let budget = TokenBudget::fraction(params.budget_fraction)?;
    let prepared = prepare(data, params)?;
    run_prepared(data, &prepared, specs, budget, params)
}

pub fn run_prepared(
    data: HarnessData<'_>,
    prepared: &Prepared,
    specs: &[PlanSpec],
    budget: TokenBudget,
    params: &HarnessParams,
) -> Result<Comparison> {
    let budget_fraction = match budget {
        TokenBudget::Fraction(f) => f,
        TokenBudget::Tokens(n) => n as f64 / data.domain.total_tokens().max(1) as f64,
    };
    let runs = specs
        .par_iter()
        .map(|&spec| {
            let subset = plan_subset(prepared, data.domain, spec, budget, params.seed)?;
            let model = if subset.total_tokens() == 0 {
                prepared.base.clone()
            } else {
                prepared.base.adapt(&subset, params.mix_weight)?
            };
            Ok(AdaptationRun {
                strategy: spec.label(),
                plan: spec.plan,
                sampling: spec.sampling,
                budget_fraction,
                seed: params.seed,
                mix_weight: params.mix_weight,
                selected_docs: subset.len(),
                selected_tokens: subset.total_tokens(),
                domain_test_ppl: model.corpus_perplexity(data.domain_test)?,
                general_test_ppl: model.corpus_perplexity(data.general_test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        note: "n-gram count-interpolation analogue of continual pretraining; not an LLM result".into(),
        base_domain_test_ppl: prepared.base.corpus_perplexity(data.domain_test)?,
        base_general_test_ppl: prepared.base.corpus_perplexity(data.general_test)?,
        runs,
    })
}
