//! Count-based n-gram language model used as the perplexity surrogate.
//!
//! Each order is additively smoothed toward the next-lower order:
//!
//! ```text
//! P_m(w | ctx) = (c(ctx, w) + k·V·P_{m-1}(w | ctx')) / (c(ctx) + k·V)
//! ```
//!
//! where `V` counts the vocabulary plus the unknown-token symbol and the
//! order-0 prior is uniform (`1/V`). For a unigram model this is plain add-k.
//! A context never seen in training falls through to the lower order.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 5;
pub const MODEL_FORMAT_VERSION: u32 = 1;

const BOS: u32 = u32::MAX;
const UNK: u32 = u32::MAX - 1;

/// Anything that can turn a token sequence into a perplexity.
pub trait PerplexityScorer: Sync {
    fn perplexity(&self, tokens: &[String]) -> Result<f64>;
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: f64,
    next: FxHashMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    k: f64,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    /// `levels[m]` holds counts for contexts of length `m`.
    levels: Vec<FxHashMap<u128, ContextCounts>>,
}

fn pack(ctx: &[u32]) -> u128 {
    ctx.iter().fold(0u128, |key, &id| (key << 32) | id as u128)
}

impl NGramModel {
    fn empty(order: usize, k: f64) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Config(format!(
                "n-gram order must lie in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("smoothing k must be finite and >= 0, got {k}")));
        }
        Ok(NGramModel {
            order,
            k,
            tokens: Vec::new(),
            index: HashMap::new(),
            levels: vec![FxHashMap::default(); order],
        })
    }

    /// Fits an add-k model on the reference corpus.
    pub fn train(reference: &Corpus, order: usize, k: f64) -> Result<Self> {
        let mut model = Self::empty(order, k)?;
        if reference.total_tokens() == 0 {
            return Err(Error::EmptyCorpus("surrogate reference"));
        }
        for doc in reference {
            let ids: Vec<u32> = doc.tokens().into_iter().map(|t| model.intern(t)).collect();
            model.add_counts(&ids, 1.0);
        }
        Ok(model)
    }

    /// Fits a model on raw token sequences; convenient in tests.
    pub fn train_on_tokens<S: AsRef<str>>(docs: &[Vec<S>], order: usize, k: f64) -> Result<Self> {
        let mut model = Self::empty(order, k)?;
        if docs.iter().all(Vec::is_empty) {
            return Err(Error::EmptyCorpus("surrogate reference"));
        }
        for doc in docs {
            let ids: Vec<u32> = doc.iter().map(|t| model.intern(t.as_ref().to_string())).collect();
            model.add_counts(&ids, 1.0);
        }
        Ok(model)
    }

    fn intern(&mut self, token: String) -> u32 {
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    fn add_counts(&mut self, ids: &[u32], weight: f64) {
        let mut history = vec![BOS; self.order - 1];
        history.extend_from_slice(ids);
        for pos in (self.order - 1)..history.len() {
            let w = history[pos];
            for m in 0..self.order {
                let key = pack(&history[pos - m..pos]);
                let cc = self.levels[m].entry(key).or_default();
                cc.total += weight;
                *cc.next.entry(w).or_insert(0.0) += weight;
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Vocabulary size excluding the unknown-token symbol.
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.tokens
    }

    fn support(&self) -> f64 {
        (self.tokens.len() + 1) as f64
    }

    fn id_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    /// `ctx` is the full `order - 1` history, oldest first.
    fn prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let v = self.support();
        let mut p = 1.0 / v;
        let kv = self.k * v;
        for m in 0..self.order {
            let key = pack(&ctx[ctx.len() - m..]);
            let Some(cc) = self.levels[m].get(&key) else {
                // unseen contexts are unseen at every longer length too
                break;
            };
            let denom = cc.total + kv;
            if denom > 0.0 {
                let c = cc.next.get(&w).copied().unwrap_or(0.0);
                p = (c + kv * p) / denom;
            }
        }
        p
    }

    fn context_ids(&self, context: &[&str]) -> Vec<u32> {
        let need = self.order - 1;
        let mut ctx = vec![BOS; need.saturating_sub(context.len())];
        let start = context.len().saturating_sub(need);
        ctx.extend(context[start..].iter().map(|t| self.id_of(t)));
        ctx
    }

    /// P(token | context). Missing history is padded with the begin-of-document symbol;
    /// out-of-vocabulary tokens map to the unknown symbol.
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let ctx = self.context_ids(context);
        self.prob_ids(&ctx, self.id_of(token))
    }

    /// Conditional distribution over the vocabulary (id order) followed by the
    /// unknown-token mass.
    pub fn distribution(&self, context: &[&str]) -> Vec<f64> {
        let ctx = self.context_ids(context);
        (0..self.tokens.len() as u32)
            .chain(std::iter::once(UNK))
            .map(|w| self.prob_ids(&ctx, w))
            .collect()
    }

    /// Sum of natural-log probabilities and the token count.
    pub fn log_likelihood<S: AsRef<str>>(&self, tokens: &[S]) -> (f64, usize) {
        let mut history = vec![BOS; self.order - 1];
        history.extend(tokens.iter().map(|t| self.id_of(t.as_ref())));
        let mut total = 0.0;
        for pos in (self.order - 1)..history.len() {
            total += self.prob_ids(&history[pos + 1 - self.order..pos], history[pos]).ln();
        }
        (total, tokens.len())
    }

    /// Token-weighted perplexity over a whole corpus.
    pub fn corpus_perplexity(&self, corpus: &Corpus) -> Result<f64> {
        let (ll, n) = corpus
            .iter()
            .map(|d| self.log_likelihood(&d.tokens()))
            .fold((0.0, 0usize), |(a, b), (x, y)| (a + x, b + y));
        if n == 0 {
            return Err(Error::EmptyCorpus("perplexity evaluation"));
        }
        finite_ppl((-ll / n as f64).exp())
    }

    /// Count interpolation `(1 - w)·base + w·subset`. The subset's new tokens
    /// join the vocabulary only when `w > 0`.
    pub fn adapt(&self, subset: &Corpus, mix_weight: f64) -> Result<NGramModel> {
        if subset.total_tokens() == 0 {
            return Err(Error::EmptyCorpus("adaptation subset"));
        }
        if !(0.0..=1.0).contains(&mix_weight) {
            return Err(Error::Config(format!(
                "mix_weight must lie in [0, 1], got {mix_weight}"
            )));
        }
        let mut out = self.clone();
        if mix_weight == 0.0 {
            return Ok(out);
        }
        let keep = 1.0 - mix_weight;
        for level in &mut out.levels {
            for cc in level.values_mut() {
                cc.total *= keep;
                for c in cc.next.values_mut() {
                    *c *= keep;
                }
            }
        }
        // Accumulate subset counts at unit weight first so sums stay exact integers.
        let mut delta = NGramModel {
            levels: vec![FxHashMap::default(); out.order],
            ..out.clone()
        };
        for doc in subset {
            let ids: Vec<u32> = doc.tokens().into_iter().map(|t| delta.intern(t)).collect();
            delta.add_counts(&ids, 1.0);
        }
        out.tokens = delta.tokens;
        out.index = delta.index;
        for (level, dlevel) in out.levels.iter_mut().zip(delta.levels) {
            for (key, dcc) in dlevel {
                let cc = level.entry(key).or_default();
                cc.total += mix_weight * dcc.total;
                for (w, c) in dcc.next {
                    *cc.next.entry(w).or_insert(0.0) += mix_weight * c;
                }
            }
        }
        Ok(out)
    }

    /// The model file contents, newline-terminated.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec(&ModelFile::from(self))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mf: ModelFile = serde_json::from_reader(BufReader::new(file))?;
        NGramModel::try_from(mf)
    }
}

fn finite_ppl(ppl: f64) -> Result<f64> {
    if ppl.is_finite() {
        Ok(ppl)
    } else {
        Err(Error::InvalidInput(
            "perplexity is infinite (zero-probability token; use k > 0)".into(),
        ))
    }
}

impl PerplexityScorer for NGramModel {
    fn perplexity(&self, tokens: &[String]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("unscorable: document has no tokens".into()));
        }
        let (ll, n) = self.log_likelihood(tokens);
        finite_ppl((-ll / n as f64).exp())
    }
}

/// On-disk representation: token list in id order, then per-level context rows
/// sorted by context ids for byte-stable output.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: String,
    order: usize,
    k: f64,
    vocab: Vec<String>,
    levels: Vec<Vec<ContextRow>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ContextRow {
    context: Vec<u32>,
    total: f64,
    next: Vec<(u32, f64)>,
}

impl From<&NGramModel> for ModelFile {
    fn from(m: &NGramModel) -> Self {
        let levels = m
            .levels
            .iter()
            .enumerate()
            .map(|(len, level)| {
                let mut rows: Vec<ContextRow> = level
                    .iter()
                    .map(|(&key, cc)| {
                        let context = (0..len)
                            .rev()
                            .map(|i| (key >> (32 * i)) as u32)
                            .collect();
                        let mut next: Vec<(u32, f64)> = cc.next.iter().map(|(&w, &c)| (w, c)).collect();
                        next.sort_unstable_by_key(|&(w, _)| w);
                        ContextRow {
                            context,
                            total: cc.total,
                            next,
                        }
                    })
                    .collect();
                rows.sort_by(|a, b| a.context.cmp(&b.context));
                rows
            })
            .collect();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kind: "ngram-addk".into(),
            order: m.order,
            k: m.k,
            vocab: m.tokens.clone(),
            levels,
        }
    }
}

impl TryFrom<ModelFile> for NGramModel {
    type Error = Error;

    fn try_from(mf: ModelFile) -> Result<Self> {
        if mf.format_version != MODEL_FORMAT_VERSION || mf.kind != "ngram-addk" {
            return Err(Error::InvalidInput(format!(
                "unsupported model file (kind {:?}, version {})",
                mf.kind, mf.format_version
            )));
        }
        let mut model = NGramModel::empty(mf.order, mf.k)?;
        for t in mf.vocab {
            model.intern(t);
        }
        if mf.levels.len() != mf.order {
            return Err(Error::InvalidInput("model file level count does not match order".into()));
        }
        for (len, rows) in mf.levels.into_iter().enumerate() {
            for row in rows {
                if row.context.len() != len {
                    return Err(Error::InvalidInput("model file context length mismatch".into()));
                }
                model.levels[len].insert(
                    pack(&row.context),
                    ContextCounts {
                        total: row.total,
                        next: row.next.into_iter().collect(),
                    },
                );
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Source};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn model(text: &str, order: usize, k: f64) -> NGramModel {
        NGramModel::train_on_tokens(&[toks(text)], order, k).unwrap()
    }

    #[test]
    fn unigram_mle() {
        let m = model("a b a b", 1, 0.0);
        assert_eq!(m.prob(&[], "a"), 0.5);
        assert_eq!(m.prob(&[], "b"), 0.5);
        assert_eq!(m.prob(&[], "zzz"), 0.0);
    }

    #[test]
    fn uniform_counts() {
        let m = model("a b c d", 1, 0.0);
        for t in ["a", "b", "c", "d"] {
            assert_eq!(m.prob(&[], t), 0.25);
        }
        let ppl = m.perplexity(&toks("d a c c b")).unwrap();
        assert!((ppl - 4.0).abs() < 1e-12);
    }

    #[test]
    fn add_one_golden() {
        let m = model("a a a b", 1, 1.0);
        assert!((m.prob(&[], "a") - 4.0 / 7.0).abs() < 1e-15);
        assert!((m.prob(&[], "b") - 2.0 / 7.0).abs() < 1e-15);
        assert!((m.prob(&[], "oov") - 1.0 / 7.0).abs() < 1e-15);
        let ppl = m.perplexity(&toks("b b")).unwrap();
        assert!((ppl - 3.5).abs() < 1e-12, "{ppl}");
    }

    #[test]
    fn delta_model_has_unit_perplexity() {
        let m = model("x x x", 1, 0.0);
        assert_eq!(m.perplexity(&toks("x x")).unwrap(), 1.0);
    }

    #[test]
    fn unscorable_and_infinite() {
        let m = model("a b", 1, 0.0);
        assert!(m.perplexity(&[]).is_err());
        assert!(m.perplexity(&toks("c")).is_err());
    }

    #[test]
    fn bigram_conditionals() {
        let m = model("a b a c", 2, 0.0);
        assert_eq!(m.prob(&["a"], "b"), 0.5);
        assert_eq!(m.prob(&["a"], "c"), 0.5);
        // unseen context falls through to the unigram level
        assert_eq!(m.prob(&["c"], "a"), 0.5);
        let m = model("a b a c", 3, 0.5);
        for ctx in [&[][..], &["a"][..], &["a", "b"][..], &["q", "r"][..]] {
            let s: f64 = m.distribution(ctx).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn order_sensitivity() {
        let uni = model("a b c a b c a a", 1, 0.1);
        let bi = model("a b c a b c a a", 2, 0.1);
        let fwd = toks("a b c");
        let rev = toks("c b a");
        assert!((uni.perplexity(&fwd).unwrap() - uni.perplexity(&rev).unwrap()).abs() < 1e-12);
        assert!((bi.perplexity(&fwd).unwrap() - bi.perplexity(&rev).unwrap()).abs() > 1e-6);
    }

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::new(format!("d{i}"), *t, Source::Other))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn adapt_examples() {
        let base_ref = corpus(&["the cat sat on the mat", "a dog ran"]);
        let base = NGramModel::train(&base_ref, 2, 0.1).unwrap();
        let same = base.adapt(&corpus(&["stocks fell sharply"]), 0.0).unwrap();
        assert_eq!(same, base);

        let refit = base.adapt(&base_ref, 1.0).unwrap();
        for ctx in [&[][..], &["the"][..], &["dog"][..]] {
            for (p, q) in base.distribution(ctx).iter().zip(refit.distribution(ctx)) {
                assert!((p - q).abs() < 1e-12);
            }
        }

        let a = NGramModel::train(&corpus(&["a a"]), 1, 0.0).unwrap();
        let mixed = a.adapt(&corpus(&["b b"]), 0.5).unwrap();
        assert_eq!(mixed.prob(&[], "a"), 0.5);
        assert_eq!(mixed.prob(&[], "b"), 0.5);

        assert!(a.adapt(&Corpus::default(), 0.5).is_err());
        assert!(a.adapt(&corpus(&["b"]), 1.5).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let m = NGramModel::train(&corpus(&["a b c a b", "c c a"]), 3, 0.2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        let back = NGramModel::load(&p).unwrap();
        assert_eq!(back, m);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(r#"{"format_version":1"#));
    }

    #[test]
    fn bad_parameters() {
        assert!(NGramModel::train(&corpus(&["a"]), 0, 0.1).is_err());
        assert!(NGramModel::train(&corpus(&["a"]), 6, 0.1).is_err());
        assert!(NGramModel::train(&corpus(&["a"]), 2, -1.0).is_err());
        assert!(NGramModel::train(&corpus(&["!"]).filtered(|_| false), 2, 0.1).is_err());
    }
}
