use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::corpus::{is_punct_token, tokenize, Corpus, Document, Source};
use crate::error::{Error, Result};

pub const DEFAULT_URL_KEYWORDS: [&str; 8] = [
    "economy", "market", "finance", "money", "wealth", "invest", "business", "industry",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub domain_allowlist: BTreeSet<String>,
    pub url_keywords: BTreeSet<String>,
    pub min_section_tokens: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            domain_allowlist: BTreeSet::new(),
            url_keywords: DEFAULT_URL_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            min_section_tokens: 20,
        }
    }
}

impl FilterConfig {
    /// Lowercases entries and strips a leading `www.` from allowlisted hosts.
    pub fn normalized(mut self) -> Self {
        self.domain_allowlist = self
            .domain_allowlist
            .iter()
            .map(|h| {
                let h = h.trim().to_lowercase();
                h.strip_prefix("www.").map(str::to_string).unwrap_or(h)
            })
            .filter(|h| !h.is_empty())
            .collect();
        self.url_keywords = self
            .url_keywords
            .iter()
            .map(|k| k.trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoUrl,
    UnparseableUrl,
    OffDomain,
    ShortSection,
    EmptyText,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::NoUrl => "no_url",
            RejectReason::UnparseableUrl => "unparseable_url",
            RejectReason::OffDomain => "off_domain",
            RejectReason::ShortSection => "short_section",
            RejectReason::EmptyText => "empty_text",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub id: String,
    pub reason: RejectReason,
}

fn host_allowed(host: &str, allow: &BTreeSet<String>) -> bool {
    let host = host.strip_prefix("www.").unwrap_or(host);
    allow.iter().any(|entry| {
        host == entry
            || (host.len() > entry.len()
                && host.ends_with(entry.as_str())
                && host.as_bytes()[host.len() - entry.len() - 1] == b'.')
    })
}

/// Labels in front of the registrable name, e.g. `money.cnn.com` -> `money`.
fn subdomain(host: &str) -> &str {
    let mut dots = host.rmatch_indices('.');
    dots.next();
    match dots.next() {
        Some((i, _)) => &host[..i],
        None => "",
    }
}

/// Decides a document's fate from its URL alone (or its source when it has none).
pub fn url_verdict(doc: &Document, cfg: &FilterConfig) -> std::result::Result<(), RejectReason> {
    let Some(raw) = doc.url.as_deref() else {
        return match doc.source {
            Source::Filing | Source::Task => Ok(()),
            _ => Err(RejectReason::NoUrl),
        };
    };
    let url = Url::parse(raw.trim()).map_err(|_| RejectReason::UnparseableUrl)?;
    let host = match url.host_str() {
        Some(h) if !h.is_empty() => h.to_lowercase(),
        _ => return Err(RejectReason::UnparseableUrl),
    };
    if host_allowed(&host, &cfg.domain_allowlist) {
        return Ok(());
    }
    let path = url.path().to_lowercase();
    let sub = subdomain(&host);
    if cfg
        .url_keywords
        .iter()
        .any(|k| path.contains(k.as_str()) || sub.contains(k.as_str()))
    {
        Ok(())
    } else {
        Err(RejectReason::OffDomain)
    }
}

pub fn url_filter(doc: &Document, cfg: &FilterConfig) -> bool {
    url_verdict(doc, cfg).is_ok()
}

/// Keeps filing sections with at least `min_section_tokens` word tokens
/// (standalone punctuation does not count).
pub fn section_filter(doc: &Document, cfg: &FilterConfig) -> bool {
    let words = tokenize(&doc.text)
        .iter()
        .filter(|t| !is_punct_token(t))
        .count() as u64;
    words >= cfg.min_section_tokens
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub kept: Corpus,
    pub rejects: Vec<Reject>,
}

/// Applies the URL filter to every document and the section filter to filings.
pub fn ingest(corpus: &Corpus, cfg: &FilterConfig) -> Result<IngestReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("ingest"));
    }
    let mut rejects = Vec::new();
    let mut keep = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let verdict = if doc.n_tokens() == 0 {
            Err(RejectReason::EmptyText)
        } else {
            url_verdict(doc, cfg).and_then(|()| {
                if doc.source == Source::Filing && !section_filter(doc, cfg) {
                    Err(RejectReason::ShortSection)
                } else {
                    Ok(())
                }
            })
        };
        match verdict {
            Ok(()) => keep.push(doc.clone()),
            Err(reason) => rejects.push(Reject {
                id: doc.id.clone(),
                reason,
            }),
        }
    }
    Ok(IngestReport {
        kept: Corpus::new(keep)?,
        rejects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn news(url: &str) -> Document {
        Document::new("n", "some text", Source::News).with_url(url)
    }

    fn cfg_with(allow: &[&str]) -> FilterConfig {
        FilterConfig {
            domain_allowlist: allow.iter().map(|s| s.to_string()).collect(),
            ..FilterConfig::default()
        }
        .normalized()
    }

    #[test]
    fn default_keywords() {
        let cfg = FilterConfig::default();
        assert_eq!(cfg.url_keywords.len(), 8);
        for k in ["economy", "market", "finance", "money", "wealth", "invest", "business", "industry"] {
            assert!(cfg.url_keywords.contains(k));
        }
        assert_eq!(cfg.min_section_tokens, 20);
    }

    #[test]
    fn allowlisted_domain_kept() {
        let cfg = cfg_with(&["cnbc.com"]);
        assert!(url_filter(&news("https://www.cnbc.com/2020/x"), &cfg));
        assert!(url_filter(&news("https://cnbc.com/sports"), &cfg));
        assert!(!url_filter(&news("https://notcnbc.com/sports"), &cfg));
    }

    #[test]
    fn keyword_in_path_or_subdomain() {
        let cfg = cfg_with(&[]);
        assert!(url_filter(&news("https://example.com/business/story"), &cfg));
        assert!(url_filter(&news("https://money.example.com/story"), &cfg));
        assert!(url_filter(&news("https://example.com/Markets/today"), &cfg));
        assert_eq!(
            url_verdict(&news("https://example.com/sports/story"), &cfg),
            Err(RejectReason::OffDomain)
        );
        // registrable name is not a subdomain
        assert!(!url_filter(&news("https://business.com/sports"), &cfg));
    }

    #[test]
    fn unparseable_url_rejected() {
        let cfg = cfg_with(&["cnbc.com"]);
        assert_eq!(
            url_verdict(&news("not a url"), &cfg),
            Err(RejectReason::UnparseableUrl)
        );
        assert_eq!(
            url_verdict(&news("mailto:someone@business.com"), &cfg),
            Err(RejectReason::UnparseableUrl)
        );
    }

    #[test]
    fn documents_without_url() {
        let cfg = cfg_with(&[]);
        assert!(url_filter(&Document::new("f", "t", Source::Filing), &cfg));
        assert!(url_filter(&Document::new("t", "t", Source::Task), &cfg));
        assert!(!url_filter(&Document::new("n", "t", Source::News), &cfg));
        assert!(!url_filter(&Document::new("o", "t", Source::Other), &cfg));
    }

    #[test]
    fn url_filter_ignores_text() {
        let cfg = cfg_with(&[]);
        let a = Document::new("a", "business finance market", Source::News)
            .with_url("https://example.com/sports");
        assert!(!url_filter(&a, &cfg));
    }

    fn words(n: usize) -> String {
        let mut s = (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" , ");
        s.push('.');
        s
    }

    #[test]
    fn section_length_boundary() {
        let cfg = FilterConfig::default();
        let doc = |n| Document::new("s", words(n), Source::Filing);
        assert!(!section_filter(&doc(19), &cfg));
        assert!(section_filter(&doc(20), &cfg));
        assert!(!section_filter(&Document::new("e", "", Source::Filing), &cfg));
    }

    #[test]
    fn ingest_collects_rejects() {
        let cfg = cfg_with(&["cnbc.com"]);
        let corpus = Corpus::new(vec![
            news("https://www.cnbc.com/a"),
            Document::new("short", "too short", Source::Filing),
            Document::new("long", words(25), Source::Filing),
            Document::new("x", "text", Source::News).with_url("https://example.com/sports"),
            Document::new("empty", "", Source::Task),
        ])
        .unwrap();
        let rep = ingest(&corpus, &cfg).unwrap();
        let kept: Vec<_> = rep.kept.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(kept, ["n", "long"]);
        let reasons: Vec<_> = rep.rejects.iter().map(|r| (r.id.as_str(), r.reason)).collect();
        assert_eq!(
            reasons,
            [
                ("short", RejectReason::ShortSection),
                ("x", RejectReason::OffDomain),
                ("empty", RejectReason::EmptyText)
            ]
        );
        assert_eq!(
            serde_json::to_string(&rep.rejects[0]).unwrap(),
            r#"{"id":"short","reason":"short_section"}"#
        );
    }

    #[test]
    fn ingest_empty_corpus_errors() {
        let err = ingest(&Corpus::default(), &FilterConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "ingest: empty corpus");
    }
}
