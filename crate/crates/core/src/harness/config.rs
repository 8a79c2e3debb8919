//! File-driven harness runs: corpora, plans, budgets and seeds in one JSON.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{generate, prepare, run_prepared, Comparison, HarnessData, HarnessParams, PlanSpec, SynthConfig};
use crate::corpus::{read_corpus, Corpus, TokenBudget};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub reference: PathBuf,
    pub domain: PathBuf,
    pub task: PathBuf,
    pub domain_test: PathBuf,
    pub general_test: PathBuf,
}

/// Either `corpora` (files) or `synth` (generated per seed) must be given;
/// with neither, the default synthetic corpus is used. With `synth`, each
/// seed in `seeds` also reseeds the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub corpora: Option<CorpusPaths>,
    pub synth: Option<SynthConfig>,
    /// Plan labels such as `random`, `dacp-100%`, `ets-dacp/hard`.
    pub plans: Vec<String>,
    pub budgets: Vec<f64>,
    pub seeds: Vec<u64>,
    pub params: HarnessParams,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            corpora: None,
            synth: None,
            plans: PlanSpec::standard_set().iter().map(PlanSpec::label).collect(),
            budgets: vec![0.10],
            seeds: vec![0],
            params: HarnessParams::default(),
        }
    }
}

impl HarnessConfig {
    pub fn specs(&self) -> Result<Vec<PlanSpec>> {
        if self.plans.is_empty() {
            return Err(Error::Config("plans is empty".into()));
        }
        self.plans.iter().map(|p| p.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpora.is_some() && self.synth.is_some() {
            return Err(Error::Config("give either corpora or synth, not both".into()));
        }
        if self.budgets.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("budgets and seeds must be non-empty".into()));
        }
        for &b in &self.budgets {
            TokenBudget::fraction(b)?;
        }
        if !(0.0..=1.0).contains(&self.params.mix_weight) {
            return Err(Error::Config("params.mix_weight must lie in [0, 1]".into()));
        }
        self.specs()?;
        Ok(())
    }
}

/// One comparison per (seed, budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub comparisons: Vec<Comparison>,
}

impl HarnessReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "strategy\tbudget_fraction\tseed\tmix_weight\tselected_docs\tselected_tokens\tdomain_test_ppl\tgeneral_test_ppl\n",
        );
        for c in &self.comparisons {
            if let Some(first) = c.runs.first() {
                let _ = writeln!(
                    out,
                    "base\t0\t{}\t0\t0\t0\t{}\t{}",
                    first.seed, c.base_domain_test_ppl, c.base_general_test_ppl
                );
            }
            out.extend(c.to_tsv().lines().skip(1).map(|l| format!("{l}\n")));
        }
        out
    }
}

struct Loaded {
    reference: Corpus,
    domain: Corpus,
    task: Corpus,
    domain_test: Corpus,
    general_test: Corpus,
}

impl Loaded {
    fn data(&self) -> HarnessData<'_> {
        HarnessData {
            reference: &self.reference,
            domain: &self.domain,
            task: &self.task,
            domain_test: &self.domain_test,
            general_test: &self.general_test,
        }
    }
}

pub fn run_harness(cfg: &HarnessConfig) -> Result<HarnessReport> {
    cfg.validate()?;
    let specs = cfg.specs()?;
    let files = match &cfg.corpora {
        Some(p) => Some(Loaded {
            reference: read_corpus(&p.reference)?,
            domain: read_corpus(&p.domain)?,
            task: read_corpus(&p.task)?,
            domain_test: read_corpus(&p.domain_test)?,
            general_test: read_corpus(&p.general_test)?,
        }),
        None => None,
    };
    let mut comparisons = Vec::new();
    for &seed in &cfg.seeds {
        let generated;
        let loaded = match &files {
            Some(l) => l,
            None => {
                let synth = SynthConfig {
                    seed,
                    ..cfg.synth.clone().unwrap_or_default()
                };
                let s = generate(&synth)?;
                generated = Loaded {
                    reference: s.reference,
                    domain: s.domain,
                    task: s.task,
                    domain_test: s.domain_test,
                    general_test: s.general_test,
                };
                &generated
            }
        };
        let params = HarnessParams {
            seed,
            ..cfg.params.clone()
        };
        let prepared = prepare(loaded.data(), &params)?;
        for &b in &cfg.budgets {
            let params = HarnessParams {
                budget_fraction: b,
                ..params.clone()
            };
            let budget = TokenBudget::fraction(b)?;
            comparisons.push(run_prepared(loaded.data(), &prepared, &specs, budget, &params)?);
        }
    }
    Ok(HarnessReport { comparisons })
}
