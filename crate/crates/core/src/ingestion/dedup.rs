use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus};
use crate::error::{Error, Result};
use crate::hash::{hash_tokens, mix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub shingle_size: usize,
    pub num_hashes: usize,
    pub jaccard_threshold: f64,
    pub bands: usize,
    pub rows_per_band: usize,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            shingle_size: 5,
            num_hashes: 128,
            jaccard_threshold: 0.87,
            bands: 16,
            rows_per_band: 8,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_size == 0 || self.num_hashes == 0 || self.bands == 0 || self.rows_per_band == 0 {
            return Err(Error::Config(
                "dedup shingle_size, num_hashes, bands and rows_per_band must be positive".into(),
            ));
        }
        if self.bands * self.rows_per_band != self.num_hashes {
            return Err(Error::Config(format!(
                "dedup bands ({}) x rows_per_band ({}) must equal num_hashes ({})",
                self.bands, self.rows_per_band, self.num_hashes
            )));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "jaccard_threshold must lie in (0, 1], got {}",
                self.jaccard_threshold
            )));
        }
        Ok(())
    }
}

/// Sorted, distinct hashes of the document's `k`-token shingles. Texts shorter
/// than `k` tokens yield a single shingle covering all of them.
pub fn shingles(text: &str, k: usize) -> Vec<u64> {
    let tokens = tokenize(text);
    let mut out: Vec<u64> = if tokens.len() < k {
        vec![hash_tokens(&tokens)]
    } else {
        tokens.windows(k).map(hash_tokens).collect()
    };
    out.sort_unstable();
    out.dedup();
    out
}

/// |A ∩ B| / |A ∪ B| over two sorted, distinct hash sets.
pub fn exact_jaccard(a: &[u64], b: &[u64]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// One seeded 64-bit mixer per signature slot.
#[derive(Debug, Clone)]
pub struct MinHasher {
    salts: Vec<u64>,
}

impl MinHasher {
    pub fn new(num_hashes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MinHasher {
            salts: (0..num_hashes).map(|_| rng.random()).collect(),
        }
    }

    pub fn signature(&self, shingles: &[u64]) -> Vec<u64> {
        self.salts
            .iter()
            .map(|&salt| {
                shingles
                    .iter()
                    .map(|&s| mix64(s ^ salt))
                    .min()
                    .unwrap_or(u64::MAX)
            })
            .collect()
    }

    pub fn estimate(a: &[u64], b: &[u64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
        same as f64 / a.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct DedupReport {
    pub kept: Corpus,
    /// (removed id, id of the kept cluster representative), in input order.
    pub removed: Vec<(String, String)>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // smallest index becomes the root so the earliest document represents the cluster
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

pub fn dedup_with_report(corpus: &Corpus, cfg: &DedupConfig, seed: u64) -> Result<DedupReport> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("dedup"));
    }
    let hasher = MinHasher::new(cfg.num_hashes, seed);
    let signatures: Vec<Vec<u64>> = corpus
        .documents()
        .par_iter()
        .map(|d| hasher.signature(&shingles(&d.text, cfg.shingle_size)))
        .collect();

    let n = signatures.len();
    let mut candidates: HashSet<(usize, usize)> = HashSet::new();
    for band in 0..cfg.bands {
        let lo = band * cfg.rows_per_band;
        let hi = lo + cfg.rows_per_band;
        let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
        for (i, sig) in signatures.iter().enumerate() {
            buckets.entry(&sig[lo..hi]).or_default().push(i);
        }
        for members in buckets.values().filter(|m| m.len() > 1) {
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    candidates.insert((i, j));
                }
            }
        }
    }

    let mut parent: Vec<usize> = (0..n).collect();
    for &(i, j) in &candidates {
        if MinHasher::estimate(&signatures[i], &signatures[j]) >= cfg.jaccard_threshold {
            union(&mut parent, i, j);
        }
    }

    let docs = corpus.documents();
    let mut kept = Vec::with_capacity(n);
    let mut removed = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if root == i {
            kept.push(docs[i].clone());
        } else {
            removed.push((docs[i].id.clone(), docs[root].id.clone()));
        }
    }
    Ok(DedupReport {
        kept: Corpus::new(kept)?,
        removed,
    })
}

/// Removes near-duplicates, keeping the earliest document of each cluster.
pub fn dedup(corpus: &Corpus, cfg: &DedupConfig, seed: u64) -> Result<Corpus> {
    dedup_with_report(corpus, cfg, seed).map(|r| r.kept)
}
