//! Evaluation metrics: relatedness ROC/AUC, ranking, span and
//! sentence-pair precision/recall, and alignment-order correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::AlignmentResult;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub value: f64,
    pub label: bool,
}

impl LabeledScore {
    pub fn new(value: f64, label: bool) -> Self {
        LabeledScore { value, label }
    }
}

/// Average 1-based ranks, ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Area under the ROC curve by the Mann-Whitney rank sum; tied
/// positive/negative pairs count one half.
pub fn roc_auc(scores: &[LabeledScore]) -> Result<f64> {
    if let Some(s) = scores.iter().find(|s| !s.value.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite score {}", s.value)));
    }
    let n_pos = scores.iter().filter(|s| s.label).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(format!(
            "roc needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
    let ranks = average_ranks(&values);
    let rank_sum: f64 = scores
        .iter()
        .zip(&ranks)
        .filter(|(s, _)| s.label)
        .map(|(_, r)| r)
        .sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTrial {
    pub candidate_scores: Vec<f64>,
    pub true_index: usize,
}

impl RankingTrial {
    /// Pessimistic rank: one plus the number of candidates scoring strictly
    /// higher or tied with the true one.
    pub fn rank(&self) -> Result<usize> {
        let Some(&truth) = self.candidate_scores.get(self.true_index) else {
            return Err(Error::InvalidArgument(format!(
                "true_index {} outside {} candidates",
                self.true_index,
                self.candidate_scores.len()
            )));
        };
        let above = self
            .candidate_scores
            .iter()
            .enumerate()
            .filter(|&(k, &s)| k != self.true_index && s >= truth)
            .count();
        Ok(1 + above)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub mrr: f64,
    pub mean_rank: f64,
    pub worst_rank: usize,
    pub fidelity: f64,
}

pub fn ranking_metrics(trials: &[RankingTrial]) -> Result<RankingMetrics> {
    if trials.is_empty() {
        return Err(Error::InvalidArgument("no ranking trials".into()));
    }
    let ranks = trials.iter().map(RankingTrial::rank).collect::<Result<Vec<_>>>()?;
    let n = ranks.len() as f64;
    Ok(RankingMetrics {
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        mean_rank: ranks.iter().sum::<usize>() as f64 / n,
        worst_rank: ranks.iter().copied().max().unwrap_or(0),
        fidelity: ranks.iter().filter(|&&r| r == 1).count() as f64 / n,
    })
}

/// Character range `start..end` of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpan {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
}

/// A source passage and the target passage it was copied into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPair {
    pub src_doc: String,
    pub src_start: usize,
    pub src_end: usize,
    pub tgt_doc: String,
    pub tgt_start: usize,
    pub tgt_end: usize,
}

impl SpanPair {
    pub fn source(&self) -> CharSpan {
        CharSpan {
            doc_id: self.src_doc.clone(),
            start: self.src_start,
            end: self.src_end,
        }
    }

    pub fn target(&self) -> CharSpan {
        CharSpan {
            doc_id: self.tgt_doc.clone(),
            start: self.tgt_start,
            end: self.tgt_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.src_start >= self.src_end || self.tgt_start >= self.tgt_end {
            return Err(Error::InvalidArgument(format!("empty or reversed span pair {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Precision and recall from raw counts; an empty denominator gives 0.
    pub fn from_counts(hit: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(hit, predicted);
        let recall = ratio(hit, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Union of character ranges per document, as sorted disjoint intervals.
fn coverage(spans: &[SpanPair]) -> BTreeMap<&str, Vec<(usize, usize)>> {
    let mut raw: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for s in spans {
        raw.entry(&s.src_doc).or_default().push((s.src_start, s.src_end));
        raw.entry(&s.tgt_doc).or_default().push((s.tgt_start, s.tgt_end));
    }
    for ranges in raw.values_mut() {
        ranges.retain(|r| r.0 < r.1);
        ranges.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
        for &(a, b) in ranges.iter() {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        *ranges = merged;
    }
    raw
}

fn covered(c: &BTreeMap<&str, Vec<(usize, usize)>>) -> usize {
    c.values().flatten().map(|(a, b)| b - a).sum()
}

fn overlap(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Character-level micro precision/recall over the source and target
/// characters covered by each side.
pub fn span_prf(predicted: &[SpanPair], gold: &[SpanPair]) -> Prf {
    let pred = coverage(predicted);
    let gold = coverage(gold);
    let hit: usize = pred
        .iter()
        .filter_map(|(doc, p)| gold.get(doc).map(|g| overlap(p, g)))
        .sum();
    Prf::from_counts(hit, covered(&pred), covered(&gold))
}

/// Aligned sentence pairs `(i, j)`; `j = -1` marks an unaligned sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePairSet {
    pub pairs: Vec<(i64, i64)>,
}

impl SentencePairSet {
    fn positives(&self) -> BTreeSet<(i64, i64)> {
        self.pairs.iter().copied().filter(|&(_, j)| j >= 0).collect()
    }

    /// Pairs matched along the paths of every span in `result`.
    pub fn from_alignment(result: &AlignmentResult) -> Self {
        let mut pairs: Vec<(i64, i64)> = result
            .spans
            .iter()
            .flat_map(|s| s.matched_pairs())
            .map(|(x, y)| (x as i64, y as i64))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        SentencePairSet { pairs }
    }
}

/// `(hits, predicted, gold)` counts of positive pairs.
pub fn sentence_pair_counts(predicted: &SentencePairSet, gold: &SentencePairSet) -> (usize, usize, usize) {
    let pred = predicted.positives();
    let gold = gold.positives();
    (pred.intersection(&gold).count(), pred.len(), gold.len())
}

pub fn sentence_pair_prf(predicted: &SentencePairSet, gold: &SentencePairSet) -> Prf {
    let (hit, pred, gold) = sentence_pair_counts(predicted, gold);
    Prf::from_counts(hit, pred, gold)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
        })
    }
}

impl FromStr for CorrelationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(CorrelationMethod::Pearson),
            "spearman" => Ok(CorrelationMethod::Spearman),
            _ => Err(Error::InvalidArgument(format!("unknown correlation method {s:?}"))),
        }
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs two equal-length series of at least 2 values, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateCorrelation(format!(
            "zero variance in {}",
            if sxx == 0.0 { "x" } else { "y" }
        )));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Correlation of `x_start` with `y_start` over the `top_k` best spans.
pub fn alignment_order_correlation(
    result: &AlignmentResult,
    top_k: usize,
    method: CorrelationMethod,
) -> Result<f64> {
    let mut spans: Vec<_> = result.spans.iter().collect();
    spans.sort_by(|a, b| b.score.total_cmp(&a.score));
    spans.truncate(top_k);
    if spans.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "order correlation needs at least 2 spans, got {}",
            spans.len()
        )));
    }
    let xs: Vec<f64> = spans.iter().map(|s| s.x_start as f64).collect();
    let ys: Vec<f64> = spans.iter().map(|s| s.y_start as f64).collect();
    match method {
        CorrelationMethod::Pearson => pearson(&xs, &ys),
        CorrelationMethod::Spearman => spearman(&xs, &ys),
    }
}
