//! C ABI for the gnat alignment library.
//!
//! Every fallible function returns a [`GnatStatus`]; on failure a message is
//! available from [`gnat_last_error`] on the same thread until the next call.
//! Objects are opaque handles created by `gnat_*_new`/`_load`/`_fit` style
//! functions and released with the matching `_free`. Strings passed in must be
//! NUL-terminated UTF-8; strings handed out are released with
//! [`gnat_string_free`]. Pointers documented as optional may be NULL.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use gnat::align::{align_matrix, DEFAULT_GAP, DEFAULT_GAP_EXTEND, DEFAULT_GAP_OPEN, DEFAULT_MAX_ALIGNMENTS};
use gnat::simscore::{DEFAULT_TH_S, EmbeddingTable, WordVectorTable};
use gnat::{
    build_similarity_matrix, calibrate, estimate_calibration, fit_gumbel, load_document, p_value, segment,
    AlignmentResult, CalibrationStats, GapMode, GapParams, GumbelParams, NullSample, RawDocument, Scorer,
    ScorerKind, SegmentUnit, SegmentationPolicy, SegmentedDocument,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Format = 5,
    InsufficientData = 6,
    NonConvergence = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnatScorer {
    Jaccard = 0,
    TfidfCosine = 1,
    WordvecMeanCosine = 2,
    EmbeddingCosine = 3,
    Hamming = 4,
}

impl From<GnatScorer> for ScorerKind {
    fn from(s: GnatScorer) -> Self {
        match s {
            GnatScorer::Jaccard => ScorerKind::Jaccard,
            GnatScorer::TfidfCosine => ScorerKind::TfidfCosine,
            GnatScorer::WordvecMeanCosine => ScorerKind::WordvecMeanCosine,
            GnatScorer::EmbeddingCosine => ScorerKind::EmbeddingCosine,
            GnatScorer::Hamming => ScorerKind::Hamming,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnatGapMode {
    Linear = 0,
    Affine = 1,
}

/// Where calibration statistics come from.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnatCalibration {
    /// Estimated over the segments of both documents.
    Auto = 0,
    /// The published embedding background; embedding cosine only.
    Builtin = 1,
    /// `calibration_mu`, `calibration_sigma` and `calibration_samples` from
    /// the config.
    Explicit = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GnatAlignConfig {
    pub scorer: GnatScorer,
    pub th_s: f64,
    pub gap_mode: GnatGapMode,
    pub gap: f64,
    pub gap_open: f64,
    pub gap_extend: f64,
    pub many_to_many: bool,
    pub max_alignments: usize,
    pub calibration: GnatCalibration,
    pub calibration_mu: f64,
    pub calibration_sigma: f64,
    /// Number of scores behind an explicit background, at least 2.
    pub calibration_samples: u64,
    /// Random pairs sampled by automatic calibration.
    pub calibration_pairs: usize,
    pub seed: u64,
    /// Evaluate p-values at the pair's own lengths instead of the reference
    /// lengths.
    pub length_correction: bool,
}

/// One extracted span, 0-based inclusive segment ranges.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GnatSpan {
    pub x_start: usize,
    pub x_end: usize,
    pub y_start: usize,
    pub y_end: usize,
    pub score: f64,
    /// NaN when the alignment was run without Gumbel parameters.
    pub p_value: f64,
}

pub struct GnatDocument(SegmentedDocument);
pub struct GnatEmbeddings(EmbeddingTable);
pub struct GnatWordVectors(WordVectorTable);
pub struct GnatGumbel(GumbelParams);
pub struct GnatAlignment(AlignmentResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GnatStatus, String);

impl From<gnat::Error> for Failure {
    fn from(e: gnat::Error) -> Self {
        use gnat::Error as E;
        let status = match &e {
            E::Io { .. } => GnatStatus::Io,
            E::Decode { .. } | E::Format { .. } | E::Json(_) => GnatStatus::Format,
            E::EmptyDocument(_) | E::InsufficientText { .. } | E::InsufficientNullSample { .. } => {
                GnatStatus::InsufficientData
            }
            E::NonConvergence(_) => GnatStatus::NonConvergence,
            _ => GnatStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

/// Runs `f`, records any failure or panic, and reports its status.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> GnatStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GnatStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GnatStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GnatStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(GnatStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Stores `value` behind `out`, which must be non-NULL.
unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn out_arg<T>(out: *mut *mut T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = std::ptr::null_mut();
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn policy(unit: Option<&str>) -> FfiResult<SegmentationPolicy> {
    let unit: SegmentUnit = unit.unwrap_or("sentence").parse()?;
    let policy = SegmentationPolicy::new(unit);
    policy.validate()?;
    Ok(policy)
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn gnat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next gnat call on the same thread.
#[no_mangle]
pub extern "C" fn gnat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn gnat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Segments `text` as document `id`. `unit` is `sentence` (when NULL),
/// `paragraph`, `chunk:N` or `equal:M`.
#[no_mangle]
pub unsafe extern "C" fn gnat_document_from_text(
    id: *const c_char,
    text: *const c_char,
    unit: *const c_char,
    out: *mut *mut GnatDocument,
) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        let id = str_arg(id, "id")?;
        let text = str_arg(text, "text")?;
        let unit = if unit.is_null() { None } else { Some(str_arg(unit, "unit")?) };
        let doc = segment(&RawDocument::new(id, text)?, &policy(unit)?)?;
        put(out, GnatDocument(doc));
        Ok(())
    })
}

/// Loads and segments a UTF-8 file; the document id is the file stem.
#[no_mangle]
pub unsafe extern "C" fn gnat_document_load(
    path: *const c_char,
    unit: *const c_char,
    out: *mut *mut GnatDocument,
) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        let path = Path::new(str_arg(path, "path")?);
        let unit = if unit.is_null() { None } else { Some(str_arg(unit, "unit")?) };
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let doc = segment(&load_document(path, id)?, &policy(unit)?)?;
        put(out, GnatDocument(doc));
        Ok(())
    })
}

/// Number of segments, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn gnat_document_len(doc: *const GnatDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn gnat_document_free(doc: *mut GnatDocument) {
    free(doc)
}

#[no_mangle]
pub unsafe extern "C" fn gnat_embeddings_load(path: *const c_char, out: *mut *mut GnatEmbeddings) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        let table = EmbeddingTable::load(str_arg(path, "path")?)?;
        put(out, GnatEmbeddings(table));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gnat_embeddings_free(table: *mut GnatEmbeddings) {
    free(table)
}

#[no_mangle]
pub unsafe extern "C" fn gnat_word_vectors_load(path: *const c_char, out: *mut *mut GnatWordVectors) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        let table = WordVectorTable::load(str_arg(path, "path")?)?;
        put(out, GnatWordVectors(table));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gnat_word_vectors_free(table: *mut GnatWordVectors) {
    free(table)
}

#[no_mangle]
pub extern "C" fn gnat_align_config_default() -> GnatAlignConfig {
    GnatAlignConfig {
        scorer: GnatScorer::Jaccard,
        th_s: DEFAULT_TH_S,
        gap_mode: GnatGapMode::Affine,
        gap: DEFAULT_GAP,
        gap_open: DEFAULT_GAP_OPEN,
        gap_extend: DEFAULT_GAP_EXTEND,
        many_to_many: false,
        max_alignments: DEFAULT_MAX_ALIGNMENTS,
        calibration: GnatCalibration::Auto,
        calibration_mu: 0.0,
        calibration_sigma: 0.0,
        calibration_samples: 0,
        calibration_pairs: 10_000,
        seed: 0,
        length_correction: false,
    }
}

fn scorer_for<'r>(
    kind: ScorerKind,
    embeddings: Option<&'r GnatEmbeddings>,
    word_vectors: Option<&'r GnatWordVectors>,
) -> FfiResult<Scorer<'r>> {
    let missing = |what: &str| Failure(GnatStatus::NullPointer, format!("scorer {kind} needs {what}"));
    Ok(match kind {
        ScorerKind::EmbeddingCosine => Scorer::EmbeddingCosine(&embeddings.ok_or_else(|| missing("embeddings"))?.0),
        ScorerKind::WordvecMeanCosine => {
            Scorer::WordvecMeanCosine(&word_vectors.ok_or_else(|| missing("word vectors"))?.0)
        }
        other => Scorer::standalone(other)?,
    })
}

fn stats_for(cfg: &GnatAlignConfig, scorer: &Scorer<'_>, docs: &[&SegmentedDocument]) -> FfiResult<CalibrationStats> {
    Ok(match cfg.calibration {
        GnatCalibration::Auto => estimate_calibration(scorer, docs, cfg.calibration_pairs, cfg.seed)?,
        GnatCalibration::Builtin => CalibrationStats::builtin(scorer.kind()).ok_or_else(|| {
            Failure(
                GnatStatus::InvalidArgument,
                format!("no builtin calibration for scorer {}", scorer.kind()),
            )
        })?,
        GnatCalibration::Explicit => CalibrationStats::new(
            scorer.kind(),
            cfg.calibration_mu,
            cfg.calibration_sigma,
            cfg.calibration_samples,
        )?,
    })
}

/// Aligns `a` against `b`. `config` NULL means defaults; `embeddings` and
/// `word_vectors` are needed only by their scorers; with `gumbel` the result
/// carries p-values.
#[no_mangle]
pub unsafe extern "C" fn gnat_align(
    a: *const GnatDocument,
    b: *const GnatDocument,
    config: *const GnatAlignConfig,
    embeddings: *const GnatEmbeddings,
    word_vectors: *const GnatWordVectors,
    gumbel: *const GnatGumbel,
    out: *mut *mut GnatAlignment,
) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        let (a, b) = (&ref_arg(a, "a")?.0, &ref_arg(b, "b")?.0);
        let cfg = config.as_ref().copied().unwrap_or_else(|| gnat_align_config_default());
        let gap = GapParams {
            mode: match cfg.gap_mode {
                GnatGapMode::Linear => GapMode::Linear,
                GnatGapMode::Affine => GapMode::Affine,
            },
            gap: cfg.gap,
            gap_open: cfg.gap_open,
            gap_extend: cfg.gap_extend,
            many_to_many: cfg.many_to_many,
        };
        gap.validate()?;
        let scorer = scorer_for(cfg.scorer.into(), embeddings.as_ref(), word_vectors.as_ref())?;
        let stats = stats_for(&cfg, &scorer, &[a, b])?;
        let sim = build_similarity_matrix(a, b, &scorer, &stats, cfg.th_s)?;
        let mut result = align_matrix(&sim, &gap, cfg.max_alignments, 0.0)?;
        result.scorer = scorer.kind();
        result.policy_a = Some(a.policy);
        result.policy_b = Some(b.policy);
        if let Some(g) = gumbel.as_ref() {
            let (m, n) = if cfg.length_correction {
                (Some(a.len() as f64), Some(b.len() as f64))
            } else {
                (None, None)
            };
            result.p_value = Some(p_value(result.max_score, &g.0, m, n));
            for span in &mut result.spans {
                span.p_value = Some(p_value(span.score, &g.0, m, n));
            }
        }
        put(out, GnatAlignment(result));
        Ok(())
    })
}

/// Best local alignment score, NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn gnat_alignment_max_score(al: *const GnatAlignment) -> f64 {
    al.as_ref().map_or(f64::NAN, |r| r.0.max_score)
}

/// Number of spans, best first; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn gnat_alignment_span_count(al: *const GnatAlignment) -> usize {
    al.as_ref().map_or(0, |r| r.0.spans.len())
}

#[no_mangle]
pub unsafe extern "C" fn gnat_alignment_span(al: *const GnatAlignment, index: usize, out: *mut GnatSpan) -> GnatStatus {
    guard(|| {
        let al = ref_arg(al, "alignment")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let span = al.0.spans.get(index).ok_or_else(|| {
            Failure(
                GnatStatus::OutOfRange,
                format!("span {index} of {}", al.0.spans.len()),
            )
        })?;
        *out = GnatSpan {
            x_start: span.x_start,
            x_end: span.x_end,
            y_start: span.y_start,
            y_end: span.y_end,
            score: span.score,
            p_value: span.p_value.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Canonical JSON of the alignment result; free with [`gnat_string_free`].
#[no_mangle]
pub unsafe extern "C" fn gnat_alignment_to_json(al: *const GnatAlignment, out: *mut *mut c_char) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        let json = gnat::json::to_canonical_string(&ref_arg(al, "alignment")?.0)?;
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gnat_alignment_free(al: *mut GnatAlignment) {
    free(al)
}

#[no_mangle]
pub unsafe extern "C" fn gnat_gumbel_from_location_scale(
    mu: f64,
    beta: f64,
    m_ref: f64,
    n_ref: f64,
    out: *mut *mut GnatGumbel,
) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        put(out, GnatGumbel(GumbelParams::from_location_scale(mu, beta, m_ref, n_ref)?));
        Ok(())
    })
}

/// Maximum-likelihood Gumbel fit to `len` positive null scores observed at
/// reference lengths `m_ref` × `n_ref`.
#[no_mangle]
pub unsafe extern "C" fn gnat_gumbel_fit(
    scores: *const f64,
    len: usize,
    m_ref: f64,
    n_ref: f64,
    out: *mut *mut GnatGumbel,
) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        if scores.is_null() && len > 0 {
            return Err(null("scores"));
        }
        let scores = if len == 0 { &[][..] } else { std::slice::from_raw_parts(scores, len) };
        let sample = NullSample {
            scores: scores.to_vec(),
            mean_m: m_ref,
            mean_n: n_ref,
            excluded_zero_pairs: 0,
        };
        put(out, GnatGumbel(fit_gumbel(&sample)?));
        Ok(())
    })
}

/// Reads Gumbel parameters JSON as written by `gnat fit-null`.
#[no_mangle]
pub unsafe extern "C" fn gnat_gumbel_load(path: *const c_char, out: *mut *mut GnatGumbel) -> GnatStatus {
    guard(|| {
        out_arg(out)?;
        put(out, GnatGumbel(GumbelParams::load(str_arg(path, "path")?)?));
        Ok(())
    })
}

/// Copies the parameters out; any output pointer may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gnat_gumbel_params(
    g: *const GnatGumbel,
    mu: *mut f64,
    beta: *mut f64,
    lambda: *mut f64,
    k: *mut f64,
) -> GnatStatus {
    guard(|| {
        let g = &ref_arg(g, "gumbel")?.0;
        for (dst, v) in [(mu, g.mu), (beta, g.beta), (lambda, g.lambda), (k, g.k)] {
            if let Some(d) = dst.as_mut() {
                *d = v;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gnat_gumbel_free(g: *mut GnatGumbel) {
    free(g)
}

/// Probability of a chance alignment scoring at least `score` between
/// documents of `m` and `n` segments; 0 selects the reference length.
#[no_mangle]
pub unsafe extern "C" fn gnat_p_value(g: *const GnatGumbel, score: f64, m: f64, n: f64, out: *mut f64) -> GnatStatus {
    guard(|| {
        let g = &ref_arg(g, "gumbel")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let length = |v: f64, name: &str| match v {
            0.0 => Ok(None),
            v if v > 0.0 && v.is_finite() => Ok(Some(v)),
            _ => Err(Failure(GnatStatus::InvalidArgument, format!("{name} must be positive or 0, got {v}"))),
        };
        *out = p_value(score, g, length(m, "m")?, length(n, "n")?);
        Ok(())
    })
}

/// Maps a raw score to the calibrated range (−1, 1) given its background
/// mean and standard deviation.
#[no_mangle]
pub unsafe extern "C" fn gnat_calibrate(raw: f64, mu: f64, sigma: f64, th_s: f64, out: *mut f64) -> GnatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(raw.is_finite() && th_s.is_finite() && mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Failure(
                GnatStatus::InvalidArgument,
                format!("need finite inputs and sigma > 0, got raw={raw} mu={mu} sigma={sigma} th_s={th_s}"),
            ));
        }
        // The transform reads only mu and sigma.
        let stats = CalibrationStats {
            scorer: ScorerKind::Jaccard,
            mu,
            sigma,
            sample_count: 0,
        };
        *out = calibrate(raw, &stats, th_s);
        Ok(())
    })
}
