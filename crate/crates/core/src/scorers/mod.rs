//! Per-document selection metrics: surrogate perplexity (novelty), cosine
//! similarity to the task centroid, and part-of-speech entropy (diversity).

mod embed;
mod ngram;
mod pos;

pub use embed::{cosine, norm, normalized_mean, Embedder};
pub use ngram::{NGramModel, PerplexityScorer, MAX_ORDER};
pub use pos::{entropy_bits, PosTagger, Tag};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub id: String,
    pub n_tokens: u64,
    pub ppl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<f64>,
    pub ent: f64,
}

pub fn train_surrogate(reference: &Corpus, order: usize, k: f64) -> Result<NGramModel> {
    NGramModel::train(reference, order, k)
}

pub fn perplexity(model: &dyn PerplexityScorer, doc: &Document) -> Result<f64> {
    model.perplexity(&doc.tokens())
}

pub fn pos_entropy(tagger: &PosTagger, doc: &Document) -> Result<f64> {
    tagger.entropy(&doc.text)
}

/// Task-similarity inputs; omit for task-agnostic scoring.
#[derive(Clone, Copy)]
pub struct TaskSimilarity<'a> {
    pub embedder: &'a Embedder,
    pub centroid: &'a [f64],
}

/// Scores every document, in corpus order.
pub fn score_corpus(
    corpus: &Corpus,
    model: &dyn PerplexityScorer,
    task: Option<TaskSimilarity<'_>>,
    tagger: &PosTagger,
) -> Result<Vec<MetricRecord>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("score"));
    }
    let unscorable: Vec<String> = corpus
        .iter()
        .filter(|d| d.n_tokens() == 0)
        .map(|d| d.id.clone())
        .collect();
    if !unscorable.is_empty() {
        return Err(Error::Unscorable(unscorable));
    }
    corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let tokens = doc.tokens();
            let ppl = model.perplexity(&tokens)?;
            let ent = tagger.entropy_tokens(&tokens)?;
            let sim = task.map(|t| t.embedder.similarity_tokens(t.centroid, &tokens));
            Ok(MetricRecord {
                id: doc.id.clone(),
                n_tokens: doc.n_tokens(),
                ppl,
                sim,
                ent,
            })
        })
        .collect()
}
