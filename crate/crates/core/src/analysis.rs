//! Diagnostics over scored corpora: rank correlations between metrics,
//! histograms, and average-quantile balance of selected subsets.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorers::MetricRecord;
use crate::selection::{available_metrics, Metric, SelectionManifest, WeightedRecord};

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let mean_rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = mean_rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant sequence"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of mean-tie ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "spearman needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InvalidInput("spearman needs at least 3 pairs".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("spearman input has non-finite values".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub metrics: Vec<Metric>,
    pub rho: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Metric, b: Metric) -> Option<f64> {
        let i = self.metrics.iter().position(|&m| m == a)?;
        let j = self.metrics.iter().position(|&m| m == b)?;
        Some(self.rho[i][j])
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric");
        for m in &self.metrics {
            let _ = write!(out, "\t{m}");
        }
        out.push('\n');
        for (m, row) in self.metrics.iter().zip(&self.rho) {
            out.push_str(m.name());
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise Spearman correlations of every metric the records carry.
pub fn correlations(records: &[MetricRecord]) -> Result<CorrelationMatrix> {
    let metrics = available_metrics(records)?;
    let columns: Vec<Vec<f64>> = metrics
        .iter()
        .map(|&m| records.iter().map(|r| m.raw(r).expect("checked")).collect())
        .collect();
    let n = metrics.len();
    let mut rho = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = spearman(&columns[i], &columns[j])?;
            rho[i][j] = r;
            rho[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { metrics, rho })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub metric: Option<Metric>,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lo\thi\tcount\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{c}", self.edges[i], self.edges[i + 1]);
        }
        out
    }
}

/// Equal-width bins over [min, max]; the maximum lands in the last bin and a
/// zero-width range puts everything in the first.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("histogram input has non-finite values".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if values.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let i = if hi > lo {
            (((v - lo) / (hi - lo)) * bins as f64).floor() as usize
        } else {
            0
        };
        counts[i.min(bins - 1)] += 1;
    }
    Ok(Histogram {
        metric: None,
        edges,
        counts,
    })
}

pub fn metric_histogram(records: &[MetricRecord], metric: Metric, bins: usize) -> Result<Histogram> {
    let values = records
        .iter()
        .map(|r| {
            metric
                .raw(r)
                .ok_or_else(|| Error::InvalidInput(format!("record {} has no {metric} score", r.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut h = histogram(&values, bins)?;
    h.metric = Some(metric);
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub subset: String,
    pub documents: usize,
    pub mean_q: BTreeMap<Metric, f64>,
}

impl BalanceReport {
    /// Largest absolute difference between any two per-metric means.
    pub fn max_gap(&self) -> f64 {
        let vals: Vec<f64> = self.mean_q.values().copied().collect();
        let mut gap: f64 = 0.0;
        for (i, a) in vals.iter().enumerate() {
            for b in &vals[i + 1..] {
                gap = gap.max((a - b).abs());
            }
        }
        gap
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# {} ({} documents)\nmetric\tmean_q\n", self.subset, self.documents);
        for (m, v) in &self.mean_q {
            out.push_str(&format!("{}\t{v}\n", m.name()));
        }
        out
    }
}

/// Mean interval score of each metric over the selected documents.
pub fn balance_report(
    subset: impl Into<String>,
    manifest: &SelectionManifest,
    weighted: &[WeightedRecord],
) -> Result<BalanceReport> {
    let index: HashMap<&str, &WeightedRecord> = weighted.iter().map(|w| (w.id.as_str(), w)).collect();
    let chosen = manifest
        .ids()
        .map(|id| index.get(id).copied().ok_or_else(|| Error::UnknownId(id.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if chosen.is_empty() {
        return Err(Error::InvalidInput("balance report of an empty selection".into()));
    }
    let mut mean_q = BTreeMap::new();
    for m in Metric::ALL {
        let vals: Option<Vec<f64>> = chosen.iter().map(|w| w.q(m)).collect();
        if let Some(vals) = vals {
            mean_q.insert(m, vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    Ok(BalanceReport {
        subset: subset.into(),
        documents: chosen.len(),
        mean_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{Key, Selected, Strategy};

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let rev = [50.0, 40.0, 30.0, 20.0, 10.0];
        assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-12);
        // 1 - 6·Σd²/(n(n²-1)) with d = (-1, 1, 0): 1 - 12/24
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ties_get_mean_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn histogram_basics() {
        let h = histogram(&[4.2], 5).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        let v: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let h = histogram(&v, 7).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 37);
        assert_eq!(h.edges.len(), 8);
        assert!(histogram(&v, 0).is_err());
        assert!(h.to_tsv().starts_with("lo\thi\tcount\n"));
    }

    fn wr(id: &str, p: f64, s: f64, e: f64) -> WeightedRecord {
        WeightedRecord {
            id: id.into(),
            n_tokens: 1,
            q_ppl: p,
            q_sim: Some(s),
            q_ent: e,
            q_comb: (p + s + e) / 3.0,
        }
    }

    fn manifest(ids: &[&str]) -> SelectionManifest {
        SelectionManifest {
            strategy: Strategy::Hard,
            key: Key::Com,
            seed: None,
            interval_rule: String::new(),
            budget_tokens: 10,
            achieved_tokens: ids.len() as u64,
            selected: ids
                .iter()
                .map(|id| Selected {
                    id: id.to_string(),
                    n_tokens: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn balance_means_and_gap() {
        let w = vec![wr("a", 0.9, 0.1, 0.5), wr("b", 0.7, 0.3, 0.5), wr("c", 0.1, 0.1, 0.1)];
        let r = balance_report("x", &manifest(&["a", "b"]), &w).unwrap();
        assert!((r.mean_q[&Metric::Ppl] - 0.8).abs() < 1e-12);
        assert!((r.mean_q[&Metric::Sim] - 0.2).abs() < 1e-12);
        assert!((r.max_gap() - 0.6).abs() < 1e-12);
        assert!(matches!(
            balance_report("x", &manifest(&["zz"]), &w),
            Err(Error::UnknownId(_))
        ));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains(r#""mean_q":{"ppl":"#), "{json}");
    }
}
