//! Corpus curation: URL/domain filtering, short-section removal and
//! MinHash-LSH near-duplicate removal.

mod dedup;
mod filter;

pub use dedup::{dedup, dedup_with_report, exact_jaccard, shingles, DedupConfig, DedupReport, MinHasher};
pub use filter::{ingest, section_filter, url_filter, url_verdict, FilterConfig, IngestReport, Reject, RejectReason};
