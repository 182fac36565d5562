//! Smith-Waterman local alignment over a [`SimilarityMatrix`].

mod dp;
mod extract;

use serde::{Deserialize, Serialize};

pub use dp::{smith_waterman, DpState, Move};
pub use extract::extract_alignments;

use crate::corpus::{SegmentationPolicy, SegmentedDocument};
use crate::simscore::{build_similarity_matrix, CalibrationStats, Scorer, ScorerKind, SimilarityMatrix};
use crate::{Error, Result};

pub const DEFAULT_GAP: f64 = -1.0;
pub const DEFAULT_GAP_OPEN: f64 = -1.0;
pub const DEFAULT_GAP_EXTEND: f64 = -0.25;
pub const DEFAULT_MAX_ALIGNMENTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMode {
    Linear,
    Affine,
}

/// Gap penalties, all non-positive. A gap of length `k` costs `gap · k` in
/// linear mode and `gap_open + gap_extend · (k − 1)` in affine mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapParams {
    pub mode: GapMode,
    pub gap: f64,
    pub gap_open: f64,
    pub gap_extend: f64,
    #[serde(default)]
    pub many_to_many: bool,
}

impl Default for GapParams {
    fn default() -> Self {
        GapParams {
            mode: GapMode::Affine,
            gap: DEFAULT_GAP,
            gap_open: DEFAULT_GAP_OPEN,
            gap_extend: DEFAULT_GAP_EXTEND,
            many_to_many: false,
        }
    }
}

impl GapParams {
    pub fn linear(gap: f64) -> Self {
        GapParams {
            mode: GapMode::Linear,
            gap,
            ..Default::default()
        }
    }

    pub fn affine(gap_open: f64, gap_extend: f64) -> Self {
        GapParams {
            mode: GapMode::Affine,
            gap_open,
            gap_extend,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v <= 0.0;
        if !(ok(self.gap) && ok(self.gap_open) && ok(self.gap_extend)) {
            return Err(Error::InvalidArgument(format!(
                "gap penalties must be finite and ≤ 0 (gap={}, open={}, extend={})",
                self.gap, self.gap_open, self.gap_extend
            )));
        }
        if self.mode == GapMode::Affine && self.gap_extend < self.gap_open {
            return Err(Error::InvalidArgument(format!(
                "gap_extend ({}) must not be more negative than gap_open ({})",
                self.gap_extend, self.gap_open
            )));
        }
        Ok(())
    }

    /// Multiplies every penalty by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        GapParams {
            gap: self.gap * k,
            gap_open: self.gap_open * k,
            gap_extend: self.gap_extend * k,
            ..*self
        }
    }
}

/// One DP cell on an alignment path, as 0-based segment indices, with the
/// move that entered it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub x: usize,
    pub y: usize,
    pub step: Move,
}

/// Segments `x_start..=x_end` of X aligned to `y_start..=y_end` of Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSpan {
    pub x_start: usize,
    pub x_end: usize,
    pub y_start: usize,
    pub y_end: usize,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<PathStep>,
}

impl AlignmentSpan {
    /// Segment pairs `(x, y)` matched along the path.
    pub fn matched_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.path
            .iter()
            .filter(|s| s.step.is_match())
            .map(|s| (s.x, s.y))
    }

    /// Score recomputed from the path: similarities of matched cells plus
    /// gap penalties, an affine gap run paying `gap_open` once.
    pub fn path_score(&self, sim: &SimilarityMatrix, gap: &GapParams) -> f64 {
        let mut total = 0.0;
        let mut prev: Option<Move> = None;
        for s in &self.path {
            total += match s.step {
                Move::Diag | Move::MatchUp | Move::MatchLeft => sim.get(s.x, s.y),
                Move::Up | Move::Left => match gap.mode {
                    GapMode::Linear => gap.gap,
                    GapMode::Affine if prev == Some(s.step) => gap.gap_extend,
                    GapMode::Affine => gap.gap_open,
                },
                Move::Stop => 0.0,
            };
            prev = Some(s.step);
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub spans: Vec<AlignmentSpan>,
    pub max_score: f64,
    pub m: usize,
    pub n: usize,
    pub gap: GapParams,
    pub scorer: ScorerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub th_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_a: Option<SegmentationPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_b: Option<SegmentationPolicy>,
}

impl AlignmentResult {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn strip_paths(&mut self) {
        for s in &mut self.spans {
            s.path.clear();
        }
    }
}

/// Runs the DP and extraction on an already built matrix.
pub fn align_matrix(
    sim: &SimilarityMatrix,
    gap: &GapParams,
    max_count: usize,
    min_score: f64,
) -> Result<AlignmentResult> {
    let dp = smith_waterman(sim, gap)?;
    let spans = extract_alignments(&dp, max_count, min_score);
    Ok(AlignmentResult {
        spans,
        max_score: dp.max_score(),
        m: sim.m,
        n: sim.n,
        gap: *gap,
        scorer: sim.stats.scorer,
        p_value: None,
        th_s: Some(sim.th_s),
        calibration: Some(sim.stats),
        policy_a: None,
        policy_b: None,
    })
}

/// Similarity matrix, DP and span extraction for one document pair.
pub fn align_pair(
    a: &SegmentedDocument,
    b: &SegmentedDocument,
    scorer: &Scorer<'_>,
    stats: &CalibrationStats,
    th_s: f64,
    gap: &GapParams,
    max_count: usize,
) -> Result<AlignmentResult> {
    let sim = build_similarity_matrix(a, b, scorer, stats, th_s)?;
    let mut result = align_matrix(&sim, gap, max_count, 0.0)?;
    result.scorer = scorer.kind();
    result.policy_a = Some(a.policy);
    result.policy_b = Some(b.policy);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(rows: &[&[f64]]) -> SimilarityMatrix {
        SimilarityMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn extraction_empty_when_all_zero() {
        let s = sim(&[&[-0.3, -0.2], &[-0.9, -0.1]]);
        let r = align_matrix(&s, &GapParams::default(), 5, 0.0).unwrap();
        assert!(r.spans.is_empty());
        assert_eq!(r.max_score, 0.0);
    }

    #[test]
    fn two_by_two_single_span() {
        let s = sim(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let r = align_matrix(&s, &GapParams::linear(-1.0), 5, 0.0).unwrap();
        assert_eq!(r.spans.len(), 1);
        let sp = &r.spans[0];
        assert_eq!((sp.x_start, sp.x_end, sp.y_start, sp.y_end), (0, 1, 0, 1));
        assert_eq!(sp.score, 2.0);
        assert_eq!(sp.matched_pairs().collect::<Vec<_>>(), [(0, 0), (1, 1)]);
    }

    #[test]
    fn two_blocks_two_spans() {
        let s = sim(&[
            &[0.9, 0.8, -1.0, -1.0],
            &[0.7, 0.9, -1.0, -1.0],
            &[-1.0, -1.0, -1.0, 0.5],
            &[-1.0, -1.0, 0.6, -1.0],
        ]);
        let r = align_matrix(&s, &GapParams::affine(-2.0, -1.0), 10, 0.0).unwrap();
        assert!((r.max_score - 1.8).abs() < 1e-12);
        assert_eq!(r.spans[0].score, r.max_score);
        assert_eq!((r.spans[0].x_start, r.spans[0].x_end), (0, 1));
        assert_eq!((r.spans[0].y_start, r.spans[0].y_end), (0, 1));
        let rest: Vec<_> = r.spans[1..]
            .iter()
            .map(|s| (s.x_start, s.x_end, s.y_start, s.y_end))
            .collect();
        assert_eq!(rest, [(3, 3, 2, 2), (2, 2, 3, 3)]);
        assert!((r.spans[1].score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn gap_span_path_score() {
        let s = sim(&[&[0.9, -1.0, -1.0, -1.0], &[-1.0, -1.0, -1.0, 0.9]]);
        let gap = GapParams::affine(-0.5, -0.1);
        let r = align_matrix(&s, &gap, 3, 0.0).unwrap();
        let sp = &r.spans[0];
        assert_eq!((sp.x_start, sp.x_end, sp.y_start, sp.y_end), (0, 1, 0, 3));
        assert!((sp.path_score(&s, &gap) - sp.score).abs() < 1e-12);
        let gaps = sp.path.iter().filter(|p| !p.step.is_match()).count();
        assert_eq!(gaps, 2);
    }

    #[test]
    fn max_count_and_min_score() {
        let s = sim(&[&[-1.0, 0.9], &[0.3, -1.0]]);
        let gap = GapParams::linear(-1.0);
        assert_eq!(align_matrix(&s, &gap, 1, 0.0).unwrap().spans.len(), 1);
        assert_eq!(align_matrix(&s, &gap, 0, 0.0).unwrap().spans.len(), 0);
        assert_eq!(align_matrix(&s, &gap, 5, 0.0).unwrap().spans.len(), 2);
        assert_eq!(align_matrix(&s, &gap, 5, 0.5).unwrap().spans.len(), 1);
    }

    #[test]
    fn gap_validation() {
        assert!(GapParams::default().validate().is_ok());
        assert!(GapParams::affine(-1.0, -0.25).validate().is_ok());
        assert!(GapParams::affine(-0.25, -1.0).validate().is_err());
        assert!(GapParams::linear(f64::NAN).validate().is_err());
    }

    #[test]
    fn result_json_omits_empty_path() {
        let s = sim(&[&[1.0]]);
        let mut r = align_matrix(&s, &GapParams::default(), 1, 0.0).unwrap();
        r.strip_paths();
        let v = serde_json::to_value(&r).unwrap();
        assert!(v["spans"][0].get("path").is_none());
        assert_eq!(v["gap"]["mode"], "affine");
        let back: AlignmentResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
