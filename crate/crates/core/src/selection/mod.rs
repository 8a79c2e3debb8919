//! Quantile normalization of metrics, metric combination and token-budgeted
//! subset selection.

mod quantile;
mod sample;

pub use quantile::{midpoint, QuantileTable, NUM_INTERVALS};
pub use sample::weighted_order;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenBudget;
use crate::error::{Error, Result};
use crate::scorers::MetricRecord;

/// Name of the interval-to-weight rule, recorded in every manifest.
pub const INTERVAL_RULE: &str = "midpoint (i+0.5)/100";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ppl,
    Sim,
    Ent,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Ppl, Metric::Sim, Metric::Ent];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ppl => "ppl",
            Metric::Sim => "sim",
            Metric::Ent => "ent",
        }
    }

    pub fn raw(self, r: &MetricRecord) -> Option<f64> {
        match self {
            Metric::Ppl => Some(r.ppl),
            Metric::Sim => r.sim,
            Metric::Ent => Some(r.ent),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?} (expected ppl|sim|ent)")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ranking key: one metric's quantile score or the combined score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Key {
    Ppl,
    Sim,
    Ent,
    Com,
}

impl Key {
    pub fn name(self) -> &'static str {
        match self {
            Key::Ppl => "ppl",
            Key::Sim => "sim",
            Key::Ent => "ent",
            Key::Com => "com",
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Key {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppl" => Ok(Key::Ppl),
            "sim" => Ok(Key::Sim),
            "ent" => Ok(Key::Ent),
            "com" => Ok(Key::Com),
            _ => Err(Error::Config(format!("unknown key {s:?} (expected ppl|sim|ent|com)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Hard,
    Soft,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Hard => "hard",
            Strategy::Soft => "soft",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Strategy::Hard),
            "soft" => Ok(Strategy::Soft),
            _ => Err(Error::Config(format!("unknown strategy {s:?} (expected hard|soft)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRecord {
    pub id: String,
    pub n_tokens: u64,
    pub q_ppl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_sim: Option<f64>,
    pub q_ent: f64,
    pub q_comb: f64,
}

impl WeightedRecord {
    pub fn q(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Ppl => Some(self.q_ppl),
            Metric::Sim => self.q_sim,
            Metric::Ent => Some(self.q_ent),
        }
    }

    pub fn key_score(&self, key: Key) -> Result<f64> {
        let metric = match key {
            Key::Com => return Ok(self.q_comb),
            Key::Ppl => Metric::Ppl,
            Key::Sim => Metric::Sim,
            Key::Ent => Metric::Ent,
        };
        self.q(metric)
            .ok_or_else(|| Error::InvalidInput(format!("record {} has no {metric} score", self.id)))
    }
}

pub fn fit_quantiles(records: &[MetricRecord], metric: Metric) -> Result<QuantileTable> {
    let values = records
        .iter()
        .map(|r| {
            metric
                .raw(r)
                .ok_or_else(|| Error::InvalidInput(format!("record {} has no {metric} score", r.id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    QuantileTable::fit(metric, &values)
}

/// Arithmetic mean of the requested per-metric interval scores.
pub fn combine(record: &WeightedRecord, metrics: &[Metric]) -> Result<f64> {
    if metrics.is_empty() {
        return Err(Error::InvalidInput("combine needs at least one metric".into()));
    }
    let mut sum = 0.0;
    for &m in metrics {
        sum += record
            .q(m)
            .ok_or_else(|| Error::InvalidInput(format!("record {} has no {m} score", record.id)))?;
    }
    Ok(sum / metrics.len() as f64)
}

/// Which metrics the records carry: sim must be present on all records or on none.
pub fn available_metrics(records: &[MetricRecord]) -> Result<Vec<Metric>> {
    let with_sim = records.iter().filter(|r| r.sim.is_some()).count();
    if with_sim != 0 && with_sim != records.len() {
        return Err(Error::InvalidInput(
            "sim is present on some metric records but not others".into(),
        ));
    }
    Ok(Metric::ALL
        .into_iter()
        .filter(|&m| m != Metric::Sim || with_sim > 0)
        .collect())
}

/// Fits one quantile table per available metric and converts every record
/// into interval scores plus their mean.
pub fn compute_weights(records: &[MetricRecord]) -> Result<(Vec<QuantileTable>, Vec<WeightedRecord>)> {
    let metrics = available_metrics(records)?;
    let tables = metrics
        .iter()
        .map(|&m| fit_quantiles(records, m))
        .collect::<Result<Vec<_>>>()?;
    let score = |m: Metric, r: &MetricRecord| -> Result<Option<f64>> {
        match tables.iter().find(|t| t.metric == m) {
            Some(t) => t.interval_score(m.raw(r).expect("checked")).map(Some),
            None => Ok(None),
        }
    };
    let weighted = records
        .iter()
        .map(|r| {
            let mut w = WeightedRecord {
                id: r.id.clone(),
                n_tokens: r.n_tokens,
                q_ppl: score(Metric::Ppl, r)?.expect("ppl always present"),
                q_sim: score(Metric::Sim, r)?,
                q_ent: score(Metric::Ent, r)?.expect("ent always present"),
                q_comb: 0.0,
            };
            w.q_comb = combine(&w, &metrics)?;
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((tables, weighted))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selected {
    pub id: String,
    pub n_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub strategy: Strategy,
    pub key: Key,
    pub seed: Option<u64>,
    pub interval_rule: String,
    pub budget_tokens: u64,
    pub achieved_tokens: u64,
    pub selected: Vec<Selected>,
}

impl SelectionManifest {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.selected.iter().map(|s| s.id.as_str())
    }
}

fn resolve_budget(weighted: &[WeightedRecord], budget: TokenBudget) -> Result<u64> {
    if weighted.is_empty() {
        return Err(Error::EmptyCorpus("select"));
    }
    let total: u64 = weighted.iter().map(|w| w.n_tokens).sum();
    let budget_tokens = budget.resolve(total);
    if budget_tokens > total {
        return Err(Error::BudgetExceedsCorpus {
            budget: budget_tokens,
            total,
        });
    }
    Ok(budget_tokens)
}

/// Takes documents in `order` until the next one would overflow the budget.
fn take_until_overflow(
    weighted: &[WeightedRecord],
    order: impl IntoIterator<Item = usize>,
    budget_tokens: u64,
) -> (Vec<Selected>, u64) {
    let mut achieved = 0u64;
    let mut selected = Vec::new();
    for i in order {
        let w = &weighted[i];
        if achieved + w.n_tokens > budget_tokens {
            break;
        }
        achieved += w.n_tokens;
        selected.push(Selected {
            id: w.id.clone(),
            n_tokens: w.n_tokens,
        });
    }
    if selected.is_empty() {
        log::warn!("selection is empty: budget of {budget_tokens} tokens is below the first candidate's size");
    }
    (selected, achieved)
}

/// Top-k by key score (descending, ties by ascending id) under the token budget.
pub fn select_hard(weighted: &[WeightedRecord], budget: TokenBudget, key: Key) -> Result<SelectionManifest> {
    let budget_tokens = resolve_budget(weighted, budget)?;
    let scores = weighted
        .iter()
        .map(|w| w.key_score(key))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..weighted.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| weighted[a].id.cmp(&weighted[b].id))
    });
    let (selected, achieved_tokens) = take_until_overflow(weighted, order, budget_tokens);
    Ok(SelectionManifest {
        strategy: Strategy::Hard,
        key,
        seed: None,
        interval_rule: INTERVAL_RULE.into(),
        budget_tokens,
        achieved_tokens,
        selected,
    })
}

/// Weighted sampling without replacement, probability proportional to the key
/// score, stopping at the first draw that would overflow the budget. The
/// manifest lists documents in draw order.
pub fn select_soft(
    weighted: &[WeightedRecord],
    budget: TokenBudget,
    key: Key,
    seed: u64,
) -> Result<SelectionManifest> {
    let budget_tokens = resolve_budget(weighted, budget)?;
    let scores = weighted
        .iter()
        .map(|w| w.key_score(key))
        .collect::<Result<Vec<_>>>()?;
    let order = weighted_order(&scores, seed)?;
    let (selected, achieved_tokens) = take_until_overflow(weighted, order, budget_tokens);
    Ok(SelectionManifest {
        strategy: Strategy::Soft,
        key,
        seed: Some(seed),
        interval_rule: INTERVAL_RULE.into(),
        budget_tokens,
        achieved_tokens,
        selected,
    })
}

pub fn select(
    weighted: &[WeightedRecord],
    budget: TokenBudget,
    key: Key,
    strategy: Strategy,
    seed: u64,
) -> Result<SelectionManifest> {
    match strategy {
        Strategy::Hard => select_hard(weighted, budget, key),
        Strategy::Soft => select_soft(weighted, budget, key, seed),
    }
}
