//! Lexicon and suffix-rule part-of-speech tagger over a 12-class universal tagset.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_punct_token, tokenize};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    X,
}

impl Tag {
    pub const ALL: [Tag; 12] = [
        Tag::Noun,
        Tag::Verb,
        Tag::Adj,
        Tag::Adv,
        Tag::Pron,
        Tag::Det,
        Tag::Adp,
        Tag::Num,
        Tag::Conj,
        Tag::Prt,
        Tag::Punct,
        Tag::X,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::Noun => "NOUN",
            Tag::Verb => "VERB",
            Tag::Adj => "ADJ",
            Tag::Adv => "ADV",
            Tag::Pron => "PRON",
            Tag::Det => "DET",
            Tag::Adp => "ADP",
            Tag::Num => "NUM",
            Tag::Conj => "CONJ",
            Tag::Prt => "PRT",
            Tag::Punct => "PUNCT",
            Tag::X => "X",
        };
        f.write_str(s)
    }
}

const LEXICON: &[(Tag, &str)] = &[
    (Tag::Det, "the a an this that these those each every some any no another all both either neither"),
    (Tag::Pron, "i you he she it we they me him her us them my your his its our their mine yours ours theirs \
                 who whom whose which what myself itself themselves ourselves"),
    (Tag::Adp, "of in on at by for with from to into onto over under about above below between among through \
                during before after against without within across along around behind beyond despite toward \
                towards upon via per than amid"),
    (Tag::Conj, "and or but nor yet so because although though while whereas if unless whether"),
    (Tag::Prt, "not up out off"),
    (Tag::Verb, "is are was were be been being am has have had do does did will would can could shall should \
                 may might must said says say make makes made get gets got go goes went take takes took rose \
                 fell grew cut see saw know knew expect expects"),
    (Tag::Adv, "very also just now then there here still even too often never always ever again already soon \
                quite rather almost only yet"),
    (Tag::Adj, "new good high low big small large strong weak many much more most less least other same own \
                few old early late"),
    (Tag::Num, "one two three four five six seven eight nine ten hundred thousand million billion trillion"),
];

/// Ordered suffix rules; the first match wins. Only applied to words at least
/// three characters longer than the suffix.
const SUFFIX_RULES: &[(&str, Tag)] = &[
    ("ly", Tag::Adv),
    ("ing", Tag::Verb),
    ("ed", Tag::Verb),
    ("ize", Tag::Verb),
    ("ise", Tag::Verb),
    ("ify", Tag::Verb),
    ("ous", Tag::Adj),
    ("ful", Tag::Adj),
    ("ive", Tag::Adj),
    ("able", Tag::Adj),
    ("ible", Tag::Adj),
    ("less", Tag::Adj),
    ("ical", Tag::Adj),
    ("ic", Tag::Adj),
    ("al", Tag::Adj),
    ("tion", Tag::Noun),
    ("sion", Tag::Noun),
    ("ment", Tag::Noun),
    ("ness", Tag::Noun),
    ("ity", Tag::Noun),
    ("ship", Tag::Noun),
];

#[derive(Debug, Clone)]
pub struct PosTagger {
    lexicon: HashMap<String, Tag>,
    suffix_rules: Vec<(String, Tag)>,
}

impl Default for PosTagger {
    fn default() -> Self {
        let mut lexicon = HashMap::new();
        for (tag, words) in LEXICON {
            for w in words.split_whitespace() {
                // first listing wins for ambiguous words
                lexicon.entry(w.to_string()).or_insert(*tag);
            }
        }
        PosTagger {
            lexicon,
            suffix_rules: SUFFIX_RULES.iter().map(|(s, t)| (s.to_string(), *t)).collect(),
        }
    }
}

impl PosTagger {
    /// Tags a lowercased token. Punctuation, numerals and the lexicon come
    /// first, then suffix rules; remaining alphabetic words are nouns and
    /// anything else (mixed alphanumerics, symbols) is `X`.
    pub fn tag(&self, token: &str) -> Tag {
        if token.is_empty() {
            return Tag::X;
        }
        if is_punct_token(token) {
            return Tag::Punct;
        }
        if token.chars().all(|c| c.is_numeric()) {
            return Tag::Num;
        }
        if let Some(&t) = self.lexicon.get(token) {
            return t;
        }
        if !token.chars().all(char::is_alphabetic) {
            return Tag::X;
        }
        let len = token.chars().count();
        for (suffix, tag) in &self.suffix_rules {
            if len >= suffix.len() + 3 && token.ends_with(suffix.as_str()) {
                return *tag;
            }
        }
        Tag::Noun
    }

    pub fn tag_counts<S: AsRef<str>>(&self, tokens: &[S]) -> [u64; 12] {
        let mut counts = [0u64; 12];
        for t in tokens {
            counts[self.tag(t.as_ref()).index()] += 1;
        }
        counts
    }

    /// Shannon entropy (bits) of the tag distribution over `tokens`.
    pub fn entropy_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("unscorable: document has no tokens".into()));
        }
        Ok(entropy_bits(&self.tag_counts(tokens)))
    }

    pub fn entropy(&self, text: &str) -> Result<f64> {
        self.entropy_tokens(&tokenize(text))
    }
}

/// Shannon entropy in bits of a count histogram; zero for an empty histogram.
pub fn entropy_bits(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_class_and_rules() {
        let t = PosTagger::default();
        let cases = [
            ("the", Tag::Det),
            ("they", Tag::Pron),
            ("of", Tag::Adp),
            ("and", Tag::Conj),
            ("not", Tag::Prt),
            ("quickly", Tag::Adv),
            ("trading", Tag::Verb),
            ("hiked", Tag::Verb),
            ("volatile", Tag::Noun),
            ("financial", Tag::Adj),
            ("inflation", Tag::Noun),
            ("2021", Tag::Num),
            ("million", Tag::Num),
            (".", Tag::Punct),
            ("%", Tag::Punct),
            ("q3", Tag::X),
            ("bank", Tag::Noun),
            ("red", Tag::Noun),
            ("fly", Tag::Noun),
        ];
        for (tok, tag) in cases {
            assert_eq!(t.tag(tok), tag, "{tok}");
        }
    }

    #[test]
    fn entropy_examples() {
        let t = PosTagger::default();
        assert_eq!(t.entropy("bank loan rate stock").unwrap(), 0.0);
        // NOUN, VERB, DET, PUNCT
        assert!((t.entropy("the bank hiked .").unwrap() - 2.0).abs() < 1e-12);
        let expected = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        assert!((expected - 0.91830).abs() < 1e-5);
        assert!((t.entropy("bank loan hiked").unwrap() - expected).abs() < 1e-12);
        assert!(t.entropy("").is_err());
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(entropy_bits(&[0; 12]), 0.0);
        assert!((entropy_bits(&[1; 12]) - 12f64.log2()).abs() < 1e-12);
    }
}
