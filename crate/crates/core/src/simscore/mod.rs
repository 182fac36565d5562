//! Segment-pair similarity and its calibration onto `(-1, 1)`.
//!
//! Raw scores from the different scorers live on different scales. Each is
//! standardized against a background of unrelated segment pairs and pushed
//! through a shifted logistic,
//!
//! ```text
//! S = 2 · logistic(Z − th_s) − 1,    Z = (raw − mu) / sigma
//! ```
//!
//! so a pair scores positive only when it beats the background by more than
//! `th_s` standard deviations.

mod scorers;
mod tables;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use scorers::{
    embedding_cosine, hamming_similarity, jaccard, tfidf_cosine, wordvec_mean_cosine,
    DocumentFrequency, Scorer,
};
pub(crate) use scorers::Prepared;
pub use tables::{EmbeddingTable, WordVectorTable, EMBEDDING_MAGIC, EMBEDDING_VERSION};

use crate::corpus::{Segment, SegmentedDocument};
use crate::{Error, Result};

/// Default z-score threshold separating positive from negative similarity.
pub const DEFAULT_TH_S: f64 = 3.0;

/// Background of sentence-embedding cosine between unrelated paragraphs.
pub const BUILTIN_EMBEDDING_MU: f64 = 0.097;
pub const BUILTIN_EMBEDDING_SIGMA: f64 = 0.099;

/// Largest double below 1; calibrated values are clamped to the open interval.
const OPEN_UNIT: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Jaccard,
    TfidfCosine,
    WordvecMeanCosine,
    EmbeddingCosine,
    Hamming,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 5] = [
        ScorerKind::Jaccard,
        ScorerKind::TfidfCosine,
        ScorerKind::WordvecMeanCosine,
        ScorerKind::EmbeddingCosine,
        ScorerKind::Hamming,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Jaccard => "jaccard",
            ScorerKind::TfidfCosine => "tfidf_cosine",
            ScorerKind::WordvecMeanCosine => "wordvec_mean_cosine",
            ScorerKind::EmbeddingCosine => "embedding_cosine",
            ScorerKind::Hamming => "hamming",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "jaccard" => ScorerKind::Jaccard,
            "tfidf" | "tfidf_cosine" => ScorerKind::TfidfCosine,
            "wordvec" | "glove" | "wordvec_mean_cosine" => ScorerKind::WordvecMeanCosine,
            "embedding" | "sbert" | "embedding_cosine" => ScorerKind::EmbeddingCosine,
            "hamming" => ScorerKind::Hamming,
            _ => return Err(Error::InvalidArgument(format!("unknown scorer `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStats {
    pub scorer: ScorerKind,
    pub mu: f64,
    pub sigma: f64,
    pub sample_count: u64,
}

impl CalibrationStats {
    pub fn new(scorer: ScorerKind, mu: f64, sigma: f64, sample_count: u64) -> Result<Self> {
        let stats = CalibrationStats {
            scorer,
            mu,
            sigma,
            sample_count,
        };
        stats.validate()?;
        Ok(stats)
    }

    /// Published background for embedding cosine, fitted on 10^8 random
    /// paragraph pairs. Only embedding cosine has one.
    pub fn builtin(scorer: ScorerKind) -> Option<Self> {
        (scorer == ScorerKind::EmbeddingCosine).then_some(CalibrationStats {
            scorer,
            mu: BUILTIN_EMBEDDING_MU,
            sigma: BUILTIN_EMBEDDING_SIGMA,
            sample_count: 100_000_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite() && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "calibration needs finite mu and sigma > 0, got mu={} sigma={}",
                self.mu, self.sigma
            )));
        }
        if self.sample_count < 2 {
            return Err(Error::InvalidArgument(
                "calibration needs at least 2 samples".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stats: CalibrationStats = serde_json::from_str(&text)?;
        stats.validate()?;
        Ok(stats)
    }
}

/// Maps a raw score onto `(-1, 1)`; exactly 0 when its z-score equals `th_s`.
pub fn calibrate(raw: f64, stats: &CalibrationStats, th_s: f64) -> f64 {
    let z = (raw - stats.mu) / stats.sigma;
    // 2·logistic(t) − 1 = tanh(t / 2), without the cancellation near t = 0.
    ((z - th_s) / 2.0).tanh().clamp(-OPEN_UNIT, OPEN_UNIT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub m: usize,
    pub n: usize,
    /// Row-major `m × n`.
    pub raw: Vec<f64>,
    pub calibrated: Vec<f64>,
    pub th_s: f64,
    pub stats: CalibrationStats,
}

impl SimilarityMatrix {
    /// Wraps already calibrated values, e.g. for synthetic instances. `raw`
    /// is set equal to `calibrated`.
    pub fn from_calibrated(m: usize, n: usize, calibrated: Vec<f64>) -> Result<Self> {
        if calibrated.len() != m * n {
            return Err(Error::DimensionMismatch {
                left: m * n,
                right: calibrated.len(),
            });
        }
        Ok(SimilarityMatrix {
            m,
            n,
            raw: calibrated.clone(),
            calibrated,
            th_s: 0.0,
            stats: CalibrationStats {
                scorer: ScorerKind::Jaccard,
                mu: 0.0,
                sigma: 1.0,
                sample_count: 2,
            },
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("ragged similarity rows".into()));
        }
        Self::from_calibrated(rows.len(), n, rows.concat())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.calibrated[i * self.n + j]
    }

    pub fn raw_at(&self, i: usize, j: usize) -> f64 {
        self.raw[i * self.n + j]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sim: SimilarityMatrix = serde_json::from_str(&text)?;
        if sim.raw.len() != sim.m * sim.n || sim.calibrated.len() != sim.m * sim.n {
            return Err(Error::format(
                "similarity matrix",
                format!("expected {}×{} cells", sim.m, sim.n),
            ));
        }
        Ok(sim)
    }
}

fn doc_items(doc: &SegmentedDocument) -> impl Iterator<Item = (&str, &Segment)> {
    doc.segments.iter().map(move |s| (doc.doc_id.as_str(), s))
}

/// Scores every segment of `a` against every segment of `b`. TF-IDF document
/// frequencies are taken over the segments of both documents.
pub fn build_similarity_matrix(
    a: &SegmentedDocument,
    b: &SegmentedDocument,
    scorer: &Scorer<'_>,
    stats: &CalibrationStats,
    th_s: f64,
) -> Result<SimilarityMatrix> {
    stats.validate()?;
    let (m, n) = (a.len(), b.len());
    let items: Vec<(&str, &Segment)> = doc_items(a).chain(doc_items(b)).collect();
    let prepared = Prepared::new(scorer, &items)?;

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    prepared.score(i, m + j).map_err(|e| Error::Cell {
                        row: i,
                        col: j,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let raw = rows.concat();
    let calibrated = raw.iter().map(|&r| calibrate(r, stats, th_s)).collect();
    Ok(SimilarityMatrix {
        m,
        n,
        raw,
        calibrated,
        th_s,
        stats: *stats,
    })
}

/// Mean and Bessel-corrected standard deviation of `score(i, j)` over
/// `num_pairs` random pairs of distinct indices below `pool_size`.
pub fn estimate_background(
    pool_size: usize,
    num_pairs: usize,
    seed: u64,
    mut score: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<(f64, f64)> {
    if pool_size < 2 || num_pairs < 2 {
        return Err(Error::InvalidArgument(format!(
            "calibration needs a pool of at least 2 segments and 2 pairs, got {pool_size} and {num_pairs}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(num_pairs);
    for _ in 0..num_pairs {
        let i = rng.random_range(0..pool_size);
        let mut j = rng.random_range(0..pool_size - 1);
        if j >= i {
            j += 1;
        }
        scores.push(score(i, j)?);
    }
    let count = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / count;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let sd = var.sqrt();
    let constant = scores.iter().all(|&s| s == scores[0]);
    if constant || sd <= 1e-12 * mean.abs() || !sd.is_finite() {
        return Err(Error::DegenerateBackground(num_pairs));
    }
    Ok((mean, sd))
}

/// Fits the background distribution of raw `scorer` scores over random pairs
/// of segments pooled from `docs`.
pub fn estimate_calibration(
    scorer: &Scorer<'_>,
    docs: &[&SegmentedDocument],
    num_pairs: usize,
    seed: u64,
) -> Result<CalibrationStats> {
    let items: Vec<(&str, &Segment)> = docs.iter().flat_map(|d| doc_items(d)).collect();
    let prepared = Prepared::new(scorer, &items)?;
    let (mu, sigma) = estimate_background(prepared.len(), num_pairs, seed, |i, j| {
        prepared.score(i, j)
    })?;
    Ok(CalibrationStats {
        scorer: scorer.kind(),
        mu,
        sigma,
        sample_count: num_pairs as u64,
    })
}
