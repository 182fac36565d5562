//! Raw segment-pair similarity functions.
//!
//! Every cosine here is computed as `dot / sqrt(|a|² · |b|²)` and clamped to
//! `[-1, 1]`, so identical inputs give exactly 1.0. The matrix builder goes
//! through the same helpers on precomputed features, which keeps a recomputed
//! cell bit-identical to the stored one.

use std::collections::{BTreeMap, HashMap};

use super::tables::{EmbeddingTable, WordVectorTable};
use super::ScorerKind;
use crate::corpus::Segment;
use crate::{Error, Result};

/// Multiset Jaccard: per-token minimum over per-token maximum counts.
pub fn jaccard<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    jaccard_bags(&bag(a), &bag(b))
}

type Bag = Vec<(String, u32)>;

fn bag<S: AsRef<str>>(tokens: &[S]) -> Bag {
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    counts.into_iter().map(|(t, c)| (t.to_owned(), c)).collect()
}

fn jaccard_bags(a: &Bag, b: &Bag) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                union += u64::from(a[i].1);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                union += u64::from(b[j].1);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                inter += u64::from(a[i].1.min(b[j].1));
                union += u64::from(a[i].1.max(b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    union += a[i..].iter().map(|x| u64::from(x.1)).sum::<u64>();
    union += b[j..].iter().map(|x| u64::from(x.1)).sum::<u64>();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Document frequencies over a set of segments, each segment counting as one
/// document.
#[derive(Debug, Clone, Default)]
pub struct DocumentFrequency {
    pub n_docs: usize,
    pub df: HashMap<String, usize>,
}

impl DocumentFrequency {
    pub fn from_token_lists<'a, I, S>(lists: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut table = DocumentFrequency::default();
        for tokens in lists {
            table.n_docs += 1;
            let distinct: std::collections::HashSet<&str> =
                tokens.iter().map(AsRef::as_ref).collect();
            for t in distinct {
                *table.df.entry(t.to_owned()).or_default() += 1;
            }
        }
        table
    }

    pub fn from_segments<'a>(segments: impl IntoIterator<Item = &'a Segment>) -> Self {
        Self::from_token_lists(segments.into_iter().map(|s| s.tokens.as_slice()))
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.df.get(token).copied().unwrap_or(0);
        ((1 + self.n_docs) as f64 / (1 + df) as f64).ln() + 1.0
    }
}

#[derive(Debug, Clone)]
struct SparseVec {
    entries: Vec<(String, f64)>,
    sq_norm: f64,
}

fn tfidf_vector(tokens: &[String], df: &DocumentFrequency) -> SparseVec {
    let entries: Vec<(String, f64)> = bag(tokens)
        .into_iter()
        .map(|(t, c)| {
            let w = f64::from(c) * df.idf(&t);
            (t, w)
        })
        .collect();
    let sq_norm = entries.iter().map(|(_, w)| w * w).sum();
    SparseVec { entries, sq_norm }
}

fn cosine_from_parts(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    if sq_a == 0.0 || sq_b == 0.0 {
        return 0.0;
    }
    (dot / (sq_a * sq_b).sqrt()).clamp(-1.0, 1.0)
}

fn sparse_cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.entries.len() && j < b.entries.len() {
        match a.entries[i].0.cmp(&b.entries[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a.entries[i].1 * b.entries[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    cosine_from_parts(dot, a.sq_norm, b.sq_norm)
}

/// Cosine of raw-count TF-IDF vectors; `df` must cover the segments of both
/// documents being aligned.
pub fn tfidf_cosine(a: &Segment, b: &Segment, df: &DocumentFrequency) -> f64 {
    sparse_cosine(&tfidf_vector(&a.tokens, df), &tfidf_vector(&b.tokens, df))
}

fn dot<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.into() * y.into()).sum()
}

fn sq_norm<T: Copy + Into<f64>>(a: &[T]) -> f64 {
    dot(a, a)
}

fn mean_vector(tokens: &[String], table: &WordVectorTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dim];
    let mut found = 0usize;
    for v in tokens.iter().filter_map(|t| table.get(t)) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        found += 1;
    }
    (found > 0).then(|| {
        let n = found as f64;
        sum.into_iter().map(|s| s / n).collect()
    })
}

fn dense_cosine(a: Option<&[f64]>, b: Option<&[f64]>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => cosine_from_parts(dot(a, b), sq_norm(a), sq_norm(b)),
        _ => 0.0,
    }
}

/// Cosine between the mean word vectors of the two segments. Out-of-vocabulary
/// tokens are skipped; a segment with no known token scores 0.
pub fn wordvec_mean_cosine(a: &Segment, b: &Segment, table: &WordVectorTable) -> f64 {
    let ma = mean_vector(&a.tokens, table);
    let mb = mean_vector(&b.tokens, table);
    dense_cosine(ma.as_deref(), mb.as_deref())
}

pub fn embedding_cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (sa, sb) = (sq_norm(a), sq_norm(b));
    if sa == 0.0 || sb == 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    Ok(cosine_from_parts(dot(a, b), sa, sb))
}

/// One minus the fraction of chunks of the longer list that miss the
/// corresponding token of the shorter one. Argument order does not matter.
pub fn hamming_similarity<S: AsRef<str> + PartialEq>(a: &[S], b: &[S]) -> Result<f64> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    if m == 0 {
        return Err(Error::InvalidArgument(
            "hamming similarity needs a non-empty token list".into(),
        ));
    }
    let n = long.len();
    let hits = short
        .iter()
        .enumerate()
        .filter(|&(i, word)| long[i * n / m..(i + 1) * n / m].contains(word))
        .count();
    Ok(hits as f64 / m as f64)
}

/// A similarity function together with the resources it needs.
#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a> {
    Jaccard,
    TfidfCosine,
    WordvecMeanCosine(&'a WordVectorTable),
    EmbeddingCosine(&'a EmbeddingTable),
    Hamming,
}

impl Scorer<'_> {
    pub fn kind(&self) -> ScorerKind {
        match self {
            Scorer::Jaccard => ScorerKind::Jaccard,
            Scorer::TfidfCosine => ScorerKind::TfidfCosine,
            Scorer::WordvecMeanCosine(_) => ScorerKind::WordvecMeanCosine,
            Scorer::EmbeddingCosine(_) => ScorerKind::EmbeddingCosine,
            Scorer::Hamming => ScorerKind::Hamming,
        }
    }

    /// Scorer for `kind` without external resources, if it needs none.
    pub fn standalone(kind: ScorerKind) -> Result<Scorer<'static>> {
        match kind {
            ScorerKind::Jaccard => Ok(Scorer::Jaccard),
            ScorerKind::TfidfCosine => Ok(Scorer::TfidfCosine),
            ScorerKind::Hamming => Ok(Scorer::Hamming),
            ScorerKind::WordvecMeanCosine => Err(Error::MissingResource {
                scorer: kind.name(),
                resource: "a word-vector table".into(),
            }),
            ScorerKind::EmbeddingCosine => Err(Error::MissingResource {
                scorer: kind.name(),
                resource: "an embedding table".into(),
            }),
        }
    }
}

enum Features<'a> {
    Bag(Bag),
    Sparse(SparseVec),
    Dense(Option<Vec<f64>>),
    Embedding(&'a [f32]),
    Tokens(&'a [String]),
}

/// Per-segment features for a fixed set of segments, scored by index.
pub(crate) struct Prepared<'a> {
    features: Vec<Features<'a>>,
}

impl<'a> Prepared<'a> {
    /// `items` pairs each segment with the id of the document it belongs to.
    /// TF-IDF document frequencies are taken over exactly these segments.
    pub fn new(scorer: &Scorer<'a>, items: &[(&str, &'a Segment)]) -> Result<Self> {
        let features = match *scorer {
            Scorer::Jaccard => items
                .iter()
                .map(|(_, s)| Features::Bag(bag(&s.tokens)))
                .collect(),
            Scorer::TfidfCosine => {
                let df = DocumentFrequency::from_segments(items.iter().map(|(_, s)| *s));
                items
                    .iter()
                    .map(|(_, s)| Features::Sparse(tfidf_vector(&s.tokens, &df)))
                    .collect()
            }
            Scorer::WordvecMeanCosine(table) => items
                .iter()
                .map(|(_, s)| Features::Dense(mean_vector(&s.tokens, table)))
                .collect(),
            Scorer::EmbeddingCosine(table) => items
                .iter()
                .map(|&(doc, s)| {
                    table
                        .get(doc, s.index)
                        .map(Features::Embedding)
                        .ok_or_else(|| Error::MissingResource {
                            scorer: ScorerKind::EmbeddingCosine.name(),
                            resource: format!("an embedding for `{doc}` segment {}", s.index),
                        })
                })
                .collect::<Result<_>>()?,
            Scorer::Hamming => items
                .iter()
                .map(|(_, s)| Features::Tokens(&s.tokens))
                .collect(),
        };
        Ok(Prepared { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn score(&self, i: usize, j: usize) -> Result<f64> {
        match (&self.features[i], &self.features[j]) {
            (Features::Bag(a), Features::Bag(b)) => Ok(jaccard_bags(a, b)),
            (Features::Sparse(a), Features::Sparse(b)) => Ok(sparse_cosine(a, b)),
            (Features::Dense(a), Features::Dense(b)) => Ok(dense_cosine(a.as_deref(), b.as_deref())),
            (Features::Embedding(a), Features::Embedding(b)) => embedding_cosine(a, b),
            (Features::Tokens(a), Features::Tokens(b)) => hamming_similarity(a, b),
            _ => unreachable!("features prepared by one scorer"),
        }
    }
}
