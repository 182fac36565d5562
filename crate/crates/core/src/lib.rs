//! Local alignment of narrative texts.
//!
//! Documents are segmented into sentences, paragraphs or word chunks
//! ([`corpus`]), every pair of segments is scored and calibrated into a
//! common `(-1, 1)` range ([`simscore`]), Smith-Waterman with affine gaps finds
//! ranked, non-overlapping local alignments ([`align`]), and the maximum
//! alignment score is turned into a p-value under a fitted Gumbel null
//! ([`sigstats`]). [`eval`] holds the evaluation metrics and [`render`] the
//! heatmap and report writers used by the `gnat` binary.

pub mod align;
pub mod corpus;
mod error;
pub mod eval;
pub mod json;
pub mod render;
pub mod sigstats;
pub mod simscore;

pub use error::{Error, Result};

pub use align::{
    align_pair, extract_alignments, smith_waterman, AlignmentResult, AlignmentSpan, DpState,
    GapMode, GapParams, Move,
};
pub use corpus::{
    load_document, segment, tokenize, RawDocument, Segment, SegmentUnit, SegmentationPolicy,
    SegmentedDocument,
};
pub use sigstats::{fit_gumbel, p_value, sample_null_scores, GumbelParams, NullSample};
pub use simscore::{
    build_similarity_matrix, calibrate, estimate_calibration, CalibrationStats, EmbeddingTable,
    Scorer, ScorerKind, SimilarityMatrix, WordVectorTable,
};
