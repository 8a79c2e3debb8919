//! Static document embeddings from hashed random projections.
//!
//! Every vocabulary token owns a unit vector drawn from a Gaussian whose RNG is
//! seeded by the token's stable hash and the embedder seed. A document embeds
//! to the idf-weighted mean of its tokens' vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, Document};
use crate::error::{Error, Result};
use crate::hash::{hash_tokens, mix64};

pub const EMBEDDER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Embedder {
    dim: usize,
    seed: u64,
    idf: HashMap<String, f64>,
    vectors: HashMap<String, Vec<f64>>,
}

fn token_vector(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(hash_tokens(&[token]) ^ seed));
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm(&v);
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// L2-normalized mean of `vectors`; errors when the mean vanishes.
pub fn normalized_mean(vectors: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = norm(&mean);
    if vectors.is_empty() || n <= 1e-12 * vectors.len() as f64 {
        return Err(Error::InvalidInput(
            "task centroid is the zero vector (no usable task embeddings)".into(),
        ));
    }
    Ok(mean.into_iter().map(|x| x / n).collect())
}

impl Embedder {
    /// Fits smoothed idf weights `ln((1 + N) / (1 + df)) + 1` on `reference`.
    pub fn fit(reference: &Corpus, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if reference.is_empty() {
            return Err(Error::EmptyCorpus("embedder reference"));
        }
        let mut df: HashMap<String, u64> = HashMap::new();
        for doc in reference {
            let distinct: HashSet<String> = doc.tokens().into_iter().collect();
            for t in distinct {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n = reference.len() as f64;
        let idf = df
            .into_iter()
            .map(|(t, c)| (t, ((1.0 + n) / (1.0 + c as f64)).ln() + 1.0))
            .collect();
        Ok(Self::from_idf(idf, dim, seed))
    }

    fn from_idf(idf: HashMap<String, f64>, dim: usize, seed: u64) -> Self {
        let vectors = idf
            .keys()
            .map(|t| (t.clone(), token_vector(t, dim, seed)))
            .collect();
        Embedder {
            dim,
            seed,
            idf,
            vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab_size(&self) -> usize {
        self.idf.len()
    }

    pub fn embed_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let mut weight = 0.0;
        for t in tokens {
            let t = t.as_ref();
            if let (Some(&w), Some(v)) = (self.idf.get(t), self.vectors.get(t)) {
                weight += w;
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += w * x;
                }
            }
        }
        if weight > 0.0 {
            for a in &mut acc {
                *a /= weight;
            }
        }
        acc
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        self.embed_tokens(&tokenize(text))
    }

    /// Unit-norm mean of the task documents' embeddings.
    pub fn task_centroid(&self, task: &Corpus) -> Result<Vec<f64>> {
        if task.is_empty() {
            return Err(Error::EmptyCorpus("task"));
        }
        let embs: Vec<Vec<f64>> = task.iter().map(|d| self.embed(&d.text)).collect();
        normalized_mean(&embs, self.dim)
    }

    /// Cosine to the centroid; documents that embed to zero score -1.
    pub fn similarity(&self, centroid: &[f64], doc: &Document) -> f64 {
        self.similarity_tokens(centroid, &doc.tokens())
    }

    pub fn similarity_tokens<S: AsRef<str>>(&self, centroid: &[f64], tokens: &[S]) -> f64 {
        let e = self.embed_tokens(tokens);
        if norm(&e) == 0.0 {
            -1.0
        } else {
            cosine(&e, centroid)
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let out = EmbedderFile {
            format_version: EMBEDDER_FORMAT_VERSION,
            kind: "hashed-projection".into(),
            dim: self.dim,
            seed: self.seed,
            idf: self.idf.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        };
        let mut bytes = serde_json::to_vec(&out)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let f: EmbedderFile = serde_json::from_reader(BufReader::new(file))?;
        if f.format_version != EMBEDDER_FORMAT_VERSION || f.kind != "hashed-projection" {
            return Err(Error::InvalidInput(format!(
                "unsupported embedder file (kind {:?}, version {})",
                f.kind, f.format_version
            )));
        }
        Ok(Self::from_idf(f.idf.into_iter().collect(), f.dim, f.seed))
    }
}

#[derive(Serialize, Deserialize)]
struct EmbedderFile {
    format_version: u32,
    kind: String,
    dim: usize,
    seed: u64,
    idf: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

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

    fn embedder() -> Embedder {
        Embedder::fit(
            &corpus(&["rates rose as the fed met", "stocks fell on weak earnings", "the game ended late"]),
            64,
            11,
        )
        .unwrap()
    }

    #[test]
    fn analytic_cosine() {
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        a[0] = 1.0;
        a[1] = 1.0;
        b[0] = 1.0;
        assert!((cosine(&a, &b) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        let mut c = vec![0.0; 8];
        c[2] = 3.0;
        assert_eq!(cosine(&a, &c), 0.0);
    }

    #[test]
    fn empty_and_oov_text_embed_to_zero() {
        let e = embedder();
        assert!(e.embed("").iter().all(|&x| x == 0.0));
        assert!(e.embed("zzz qqq").iter().all(|&x| x == 0.0));
        assert!(norm(&e.embed("rates rose")) > 0.0);
        assert_eq!(e.embed("rates").len(), 64);
    }

    #[test]
    fn order_and_duplication_invariance() {
        let e = embedder();
        let a = e.embed("stocks fell on weak earnings");
        let b = e.embed("earnings weak on fell stocks");
        let c = e.embed("stocks fell on weak earnings stocks fell on weak earnings");
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_across_instances() {
        let a = embedder().embed("the fed met");
        let b = embedder().embed("the fed met");
        assert_eq!(a, b);
    }

    #[test]
    fn centroid_contracts() {
        let e = embedder();
        let one = corpus(&["stocks fell"]);
        let c = e.task_centroid(&one).unwrap();
        assert!((norm(&c) - 1.0).abs() < 1e-12);
        let emb = e.embed("stocks fell");
        let n = norm(&emb);
        for (x, y) in c.iter().zip(&emb) {
            assert!((x - y / n).abs() < 1e-12);
        }
        let doc = Document::new("x", "stocks fell", Source::News);
        assert!((e.similarity(&c, &doc) - 1.0).abs() < 1e-12);
        assert_eq!(e.similarity(&c, &Document::new("z", "zzz", Source::News)), -1.0);

        let v = vec![0.5, -0.25, 1.0];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!(normalized_mean(&[v, neg], 3).is_err());
        assert!(e.task_centroid(&corpus(&["qqq"])).is_err());

        let fwd = e.task_centroid(&corpus(&["stocks fell", "the game ended"])).unwrap();
        let rev = e.task_centroid(&corpus(&["the game ended", "stocks fell"])).unwrap();
        for (x, y) in fwd.iter().zip(&rev) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let e = embedder();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.json");
        e.save(&p).unwrap();
        let back = Embedder::load(&p).unwrap();
        assert_eq!(back.embed("the fed met"), e.embed("the fed met"));
    }
}
