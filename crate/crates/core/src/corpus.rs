//! Documents, corpora, tokenization and the JSONL corpus format.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Splits text into lowercased word tokens.
///
/// A token is either a maximal run of alphanumeric characters or a single
/// non-alphanumeric, non-whitespace character.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            run.extend(ch.to_lowercase());
            continue;
        }
        if !run.is_empty() {
            tokens.push(std::mem::take(&mut run));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_lowercase().collect());
        }
    }
    if !run.is_empty() {
        tokens.push(run);
    }
    tokens
}

/// True for tokens made of a single punctuation/symbol character.
pub fn is_punct_token(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    News,
    Filing,
    Task,
    #[default]
    Other,
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "news" => Ok(Source::News),
            "filing" => Ok(Source::Filing),
            "task" => Ok(Source::Task),
            "other" => Ok(Source::Other),
            _ => Err(Error::InvalidInput(format!("unknown source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub source: Source,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(skip)]
    n_tokens: u64,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: Source) -> Self {
        let text = text.into();
        let n_tokens = tokenize(&text).len() as u64;
        Document {
            id: id.into(),
            text,
            url: None,
            source,
            timestamp: None,
            n_tokens,
        }
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self
    }

    pub fn with_timestamp(mut self, ts: impl Into<String>) -> Self {
        self.timestamp = Some(ts.into());
        self
    }

    pub fn n_tokens(&self) -> u64 {
        self.n_tokens
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    id: Option<String>,
    text: Option<String>,
    url: Option<String>,
    source: Option<String>,
    timestamp: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    total_tokens: u64,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        let total_tokens = documents.iter().map(|d| d.n_tokens).sum();
        Ok(Corpus {
            documents,
            total_tokens,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// Keeps documents satisfying `keep`, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&Document) -> bool) -> Corpus {
        let documents: Vec<Document> = self.documents.iter().filter(|d| keep(d)).cloned().collect();
        let total_tokens = documents.iter().map(|d| d.n_tokens).sum();
        Corpus {
            documents,
            total_tokens,
        }
    }

    /// Returns the documents whose ids appear in `ids`, in the order of `ids`.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Corpus> {
        let index: std::collections::HashMap<&str, &Document> =
            self.documents.iter().map(|d| (d.id.as_str(), d)).collect();
        let docs = ids
            .into_iter()
            .map(|id| {
                index
                    .get(id)
                    .map(|d| (*d).clone())
                    .ok_or_else(|| Error::UnknownId(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(docs)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus_from(BufReader::new(file), path)
}

pub fn read_corpus_from<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let raw: RawDocument =
            serde_json::from_str(&line).map_err(|e| parse_err(format!("malformed JSON: {e}")))?;
        let id = raw.id.ok_or_else(|| parse_err("missing field id".into()))?;
        let text = raw
            .text
            .ok_or_else(|| parse_err("missing field text".into()))?;
        let source = match raw.source {
            Some(s) => s.parse().map_err(|e: Error| parse_err(e.to_string()))?,
            None => Source::Other,
        };
        let mut doc = Document::new(id, text, source);
        doc.url = raw.url;
        doc.timestamp = raw.timestamp;
        docs.push(doc);
    }
    Corpus::new(docs)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    crate::jsonl::write_to(&mut w, corpus.documents()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Token budget, either absolute or as a fraction of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenBudget {
    Tokens(u64),
    Fraction(f64),
}

impl TokenBudget {
    pub fn tokens(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("budget_tokens must be positive".into()));
        }
        Ok(TokenBudget::Tokens(n))
    }

    pub fn fraction(f: f64) -> Result<Self> {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!(
                "budget_fraction must lie in (0, 1], got {f}"
            )));
        }
        Ok(TokenBudget::Fraction(f))
    }

    pub fn resolve(&self, total_tokens: u64) -> u64 {
        match *self {
            TokenBudget::Tokens(n) => n,
            TokenBudget::Fraction(f) => (f * total_tokens as f64).floor() as u64,
        }
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget::Fraction(0.10)
    }
}
