//! Synthetic two-domain corpus generator.
//!
//! Words are pseudo-words built from syllables, grouped into part-of-speech
//! pools per domain: "general", "finance", a narrow "task" pool inside the
//! finance domain, and a long tail of rare finance jargon. Each domain
//! document draws three independent latent factors:
//!
//! * topic (general bleed-in, generic finance, task-like finance), which drives
//!   task similarity;
//! * style (varied prose or table-like boilerplate), which drives tag entropy;
//! * jargon rate (share of nouns drawn from the rare tail), which drives
//!   perplexity under a general-domain model.
//!
//! The held-out domain test set is task-like finance prose; the general test
//! set and the surrogate's reference corpus are general prose.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Source};
use crate::error::{Error, Result};
use crate::scorers::{PosTagger, Tag};

/// Vocabulary is fixed so the same words appear for every corpus seed.
const VOCAB_SEED: u64 = 0x5eed_b0c4_b1a5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Domain training documents.
    pub docs: usize,
    /// Probability that a finance content word is drawn from the general pools.
    pub overlap: f64,
    pub seed: u64,
    /// Topic mix of the domain corpus: (general, finance, task).
    pub topic_mix: [f64; 3],
    /// Probability that a domain document is written as prose rather than tables.
    pub prose_rate: f64,
    /// Upper bound of the per-document jargon rate.
    pub max_jargon: f64,
    /// Fraction of domain documents re-emitted as exact duplicates.
    pub duplicate_rate: f64,
    pub reference_docs: usize,
    pub task_docs: usize,
    pub domain_test_docs: usize,
    pub general_test_docs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 1000,
            overlap: 0.3,
            seed: 0,
            topic_mix: [0.2, 0.6, 0.2],
            prose_rate: 0.5,
            max_jargon: 0.3,
            duplicate_rate: 0.0,
            reference_docs: 1000,
            task_docs: 40,
            domain_test_docs: 100,
            general_test_docs: 100,
        }
    }
}

impl SynthConfig {
    pub fn with_docs(docs: usize, overlap: f64, seed: u64) -> Self {
        SynthConfig {
            docs,
            overlap,
            seed,
            reference_docs: 2 * docs,
            domain_test_docs: (docs / 10).max(50),
            general_test_docs: (docs / 10).max(50),
            ..SynthConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.docs == 0 || self.reference_docs == 0 || self.task_docs == 0 {
            return Err(Error::Config("synthetic corpus sizes must be positive".into()));
        }
        if self.domain_test_docs == 0 || self.general_test_docs == 0 {
            return Err(Error::Config("synthetic test set sizes must be positive".into()));
        }
        if !unit(self.overlap) || !unit(self.prose_rate) || !unit(self.max_jargon) || !unit(self.duplicate_rate) {
            return Err(Error::Config("synthetic rates must lie in [0, 1]".into()));
        }
        if self.topic_mix.iter().any(|&p| p.is_nan() || p < 0.0) || self.topic_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("topic_mix must be non-negative with positive sum".into()));
        }
        Ok(())
    }
}

/// All corpora needed by the adaptation harness.
#[derive(Debug, Clone)]
pub struct SynthCorpora {
    pub reference: Corpus,
    pub domain: Corpus,
    pub task: Corpus,
    pub domain_test: Corpus,
    pub general_test: Corpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Topic {
    General,
    Finance,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Prose,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Noun,
    Verb,
    Adj,
    Adv,
}

/// Zipf-weighted word pool.
struct Pool {
    words: Vec<String>,
    dist: WeightedIndex<f64>,
}

impl Pool {
    fn new(words: Vec<String>) -> Self {
        let dist = WeightedIndex::new((1..=words.len()).map(|r| 1.0 / r as f64)).expect("non-empty pool");
        Pool { words, dist }
    }

    fn draw<'a>(&'a self, rng: &mut ChaCha8Rng) -> &'a str {
        &self.words[self.dist.sample(rng)]
    }
}

struct DomainPools {
    noun: Pool,
    verb: Pool,
    adj: Pool,
    adv: Pool,
}

impl DomainPools {
    fn get(&self, class: Class) -> &Pool {
        match class {
            Class::Noun => &self.noun,
            Class::Verb => &self.verb,
            Class::Adj => &self.adj,
            Class::Adv => &self.adv,
        }
    }
}

struct Vocabulary {
    general: DomainPools,
    finance: DomainPools,
    task: DomainPools,
    jargon: Pool,
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 6] = ["", "", "n", "r", "m", "k"];

fn stem(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        s.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        s.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    }
    s
}

fn make_words(
    rng: &mut ChaCha8Rng,
    seen: &mut HashSet<String>,
    tagger: &PosTagger,
    class: Class,
    n: usize,
) -> Vec<String> {
    let (suffixes, tag): (&[&str], Tag) = match class {
        Class::Noun => (&["", "", "tion", "ment", "ness", "ity"], Tag::Noun),
        Class::Verb => (&["ed", "ing", "ize"], Tag::Verb),
        Class::Adj => (&["ous", "ive", "ful", "al"], Tag::Adj),
        Class::Adv => (&["ly"], Tag::Adv),
    };
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = format!("{}{}", stem(rng), suffixes[rng.random_range(0..suffixes.len())]);
        if tagger.tag(&w) == tag && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

impl Vocabulary {
    fn build() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(VOCAB_SEED);
        let tagger = PosTagger::default();
        let mut seen = HashSet::new();
        let mut pools = |sizes: [usize; 4]| DomainPools {
            noun: Pool::new(make_words(&mut rng, &mut seen, &tagger, Class::Noun, sizes[0])),
            verb: Pool::new(make_words(&mut rng, &mut seen, &tagger, Class::Verb, sizes[1])),
            adj: Pool::new(make_words(&mut rng, &mut seen, &tagger, Class::Adj, sizes[2])),
            adv: Pool::new(make_words(&mut rng, &mut seen, &tagger, Class::Adv, sizes[3])),
        };
        let general = pools([300, 120, 100, 40]);
        let finance = pools([300, 80, 80, 20]);
        let task = pools([80, 30, 30, 10]);
        let jargon = Pool::new(make_words(&mut rng, &mut seen, &tagger, Class::Noun, 2000));
        Vocabulary {
            general,
            finance,
            task,
            jargon,
        }
    }
}

const DETS: [&str; 6] = ["the", "a", "this", "that", "each", "some"];
const ADPS: [&str; 9] = ["of", "in", "on", "at", "for", "with", "from", "to", "by"];
const CONJS: [&str; 4] = ["and", "but", "or", "while"];
const PRONS: [&str; 5] = ["it", "they", "we", "he", "she"];
const AUXES: [&str; 4] = ["is", "was", "has", "will"];

/// Prose sentence templates. Upper-case slots are open-class words; the rest
/// are closed-class categories or literals.
const TEMPLATES: [&str; 6] = [
    "DET ADJ NOUN VERB ADP DET NOUN .",
    "PRON AUX ADV VERB DET NOUN CONJ DET ADJ NOUN .",
    "DET NOUN ADP NOUN VERB ADV , CONJ PRON VERB NUM NOUN .",
    "ADP DET NOUN , DET ADJ NOUN AUX not VERB DET NOUN .",
    "DET NOUN AUX ADJ CONJ DET NOUN VERB ADP NUM .",
    "PRON VERB DET ADJ NOUN ADP DET NOUN ADP DET ADJ NOUN .",
];

struct Writer<'a> {
    vocab: &'a Vocabulary,
    overlap: f64,
}

impl Writer<'_> {
    fn content(&self, rng: &mut ChaCha8Rng, class: Class, topic: Topic, jargon: f64) -> String {
        let v = self.vocab;
        let pool = match topic {
            Topic::General => &v.general,
            _ if rng.random::<f64>() < self.overlap => &v.general,
            Topic::Finance => &v.finance,
            Topic::Task => {
                if rng.random::<f64>() < 0.6 {
                    &v.task
                } else {
                    &v.finance
                }
            }
        };
        if class == Class::Noun && topic != Topic::General && rng.random::<f64>() < jargon {
            return v.jargon.draw(rng).to_string();
        }
        pool.get(class).draw(rng).to_string()
    }

    fn number(rng: &mut ChaCha8Rng) -> String {
        rng.random_range(1..1000u32).to_string()
    }

    fn prose(&self, rng: &mut ChaCha8Rng, topic: Topic, jargon: f64, out: &mut Vec<String>) {
        let template = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
        for slot in template.split_whitespace() {
            let pick = |xs: &[&str], rng: &mut ChaCha8Rng| xs[rng.random_range(0..xs.len())].to_string();
            let w = match slot {
                "NOUN" => self.content(rng, Class::Noun, topic, jargon),
                "VERB" => self.content(rng, Class::Verb, topic, jargon),
                "ADJ" => self.content(rng, Class::Adj, topic, jargon),
                "ADV" => self.content(rng, Class::Adv, topic, jargon),
                "DET" => pick(&DETS, rng),
                "ADP" => pick(&ADPS, rng),
                "CONJ" => pick(&CONJS, rng),
                "PRON" => pick(&PRONS, rng),
                "AUX" => pick(&AUXES, rng),
                "NUM" => Self::number(rng),
                lit => lit.to_string(),
            };
            out.push(w);
        }
    }

    /// A table row: a label followed by figures.
    fn table_row(&self, rng: &mut ChaCha8Rng, topic: Topic, jargon: f64, out: &mut Vec<String>) {
        out.push(self.content(rng, Class::Noun, topic, jargon));
        for i in 0..rng.random_range(3..=6) {
            if i > 0 {
                out.push(if rng.random::<f64>() < 0.7 { "," } else { ";" }.to_string());
            }
            out.push(Self::number(rng));
        }
        out.push(".".to_string());
    }

    fn document(&self, rng: &mut ChaCha8Rng, topic: Topic, style: Style, jargon: f64) -> String {
        let mut words = Vec::new();
        let units = rng.random_range(5..=12);
        for _ in 0..units {
            match style {
                Style::Prose => self.prose(rng, topic, jargon, &mut words),
                Style::Table => self.table_row(rng, topic, jargon, &mut words),
            }
        }
        words.join(" ")
    }
}

fn general_url(rng: &mut ChaCha8Rng, i: usize) -> String {
    let section = ["business", "sports", "travel", "economy"][rng.random_range(0..4)];
    format!("https://www.dailyplanet.example/{section}/story-{i}")
}

/// Generates every corpus of the two-domain setup from one seed.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpora> {
    cfg.validate()?;
    let vocab = Vocabulary::build();
    let writer = Writer {
        vocab: &vocab,
        overlap: cfg.overlap,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let topic_dist = WeightedIndex::new(cfg.topic_mix).map_err(|e| Error::Config(e.to_string()))?;
    let topics = [Topic::General, Topic::Finance, Topic::Task];

    let mut domain = Vec::with_capacity(cfg.docs);
    for i in 0..cfg.docs {
        let topic = topics[topic_dist.sample(&mut rng)];
        let style = if rng.random::<f64>() < cfg.prose_rate {
            Style::Prose
        } else {
            Style::Table
        };
        let jargon = rng.random::<f64>() * cfg.max_jargon;
        let text = writer.document(&mut rng, topic, style, jargon);
        let id = format!("dom-{i:06}");
        let doc = match (style, topic) {
            (Style::Table, _) => Document::new(id, text, Source::Filing),
            (Style::Prose, Topic::General) => {
                Document::new(id, text, Source::News).with_url(general_url(&mut rng, i))
            }
            (Style::Prose, _) => Document::new(id, text, Source::News)
                .with_url(format!("https://markets.finwire.example/{}/article-{i}", 2016 + i % 7)),
        };
        domain.push(doc);
    }
    let originals = domain.len();
    for i in 0..originals {
        if rng.random::<f64>() < cfg.duplicate_rate {
            let src = &domain[i];
            let mut dup = Document::new(format!("{}-dup", src.id), src.text.clone(), src.source);
            dup.url = src.url.clone();
            domain.push(dup);
        }
    }

    let mut batch = |prefix: &str, n: usize, topic: Topic, prose_rate: f64, source: Source| {
        let docs = (0..n)
            .map(|i| {
                let style = if rng.random::<f64>() < prose_rate {
                    Style::Prose
                } else {
                    Style::Table
                };
                let jargon = rng.random::<f64>() * cfg.max_jargon;
                Document::new(format!("{prefix}-{i:06}"), writer.document(&mut rng, topic, style, jargon), source)
            })
            .collect();
        Corpus::new(docs)
    };
    let reference = batch("ref", cfg.reference_docs, Topic::General, 0.7, Source::Other)?;
    let task = batch("task", cfg.task_docs, Topic::Task, 1.0, Source::Task)?;
    let domain_test = batch("dtest", cfg.domain_test_docs, Topic::Task, 1.0, Source::Other)?;
    let general_test = batch("gtest", cfg.general_test_docs, Topic::General, 0.7, Source::Other)?;

    Ok(SynthCorpora {
        reference,
        domain: Corpus::new(domain)?,
        task,
        domain_test,
        general_test,
    })
}
