use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gnat::align::{
    align_matrix, DEFAULT_GAP, DEFAULT_GAP_EXTEND, DEFAULT_GAP_OPEN, DEFAULT_MAX_ALIGNMENTS,
};
use gnat::eval::{
    alignment_order_correlation, ranking_metrics, roc_auc, sentence_pair_counts, span_prf,
    CorrelationMethod, LabeledScore, Prf, RankingTrial, SentencePairSet, SpanPair,
};
use gnat::json::{format_g17, to_canonical_string, write_canonical};
use gnat::render::{self, ReportFormat};
use gnat::simscore::DEFAULT_TH_S;
use gnat::{
    build_similarity_matrix, estimate_calibration, fit_gumbel, load_document, p_value,
    sample_null_scores, segment, AlignmentResult, CalibrationStats, EmbeddingTable, GapMode,
    GapParams, GumbelParams, NullSample, Scorer, ScorerKind, SegmentUnit, SegmentationPolicy,
    SegmentedDocument, SimilarityMatrix, WordVectorTable,
};

/// Local alignment of narrative texts.
#[derive(Parser)]
#[command(name = "gnat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a text file and print the segments as JSON.
    Segment {
        input: PathBuf,
        #[arg(long, default_value = "sentence")]
        unit: SegmentUnit,
        #[arg(long)]
        min_words: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align two text files.
    Align(AlignCmd),
    /// Estimate calibration statistics over a directory of .txt files.
    Calibrate {
        dir: PathBuf,
        #[command(flatten)]
        pipe: PipelineArgs,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a Gumbel null to maximum alignment scores of unrelated pairs.
    FitNull(FitNullCmd),
    /// Probability of reaching SCORE by chance.
    Pvalue {
        #[arg(allow_hyphen_values = true)]
        score: f64,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        n: Option<f64>,
    },
    /// Render a similarity matrix or an alignment as PGM or SVG.
    Heatmap {
        #[arg(long, conflicts_with = "alignment", required_unless_present = "alignment")]
        matrix: Option<PathBuf>,
        #[arg(long)]
        alignment: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pgm")]
        format: HeatmapFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side report of the aligned segments.
    Report {
        alignment: PathBuf,
        a: PathBuf,
        b: PathBuf,
        /// Segmentation when the alignment does not record one.
        #[arg(long)]
        unit: Option<SegmentUnit>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluation protocols.
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum HeatmapFormat {
    Pgm,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Text,
    Html,
}

#[derive(Clone, Copy, ValueEnum)]
enum GapModeArg {
    Linear,
    Affine,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long, default_value = "jaccard")]
    scorer: ScorerKind,
    #[arg(long, default_value = "sentence")]
    unit: SegmentUnit,
    #[arg(long)]
    unit_a: Option<SegmentUnit>,
    #[arg(long)]
    unit_b: Option<SegmentUnit>,
    #[arg(long)]
    min_words: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TH_S, allow_hyphen_values = true)]
    th_s: f64,
    #[arg(long, value_enum, default_value = "affine")]
    gap_mode: GapModeArg,
    #[arg(long, default_value_t = DEFAULT_GAP, allow_hyphen_values = true)]
    gap: f64,
    #[arg(long, default_value_t = DEFAULT_GAP_OPEN, allow_hyphen_values = true)]
    gap_open: f64,
    #[arg(long, default_value_t = DEFAULT_GAP_EXTEND, allow_hyphen_values = true)]
    gap_extend: f64,
    #[arg(long)]
    many_to_many: bool,
    /// `auto`, `builtin`, or a calibration JSON file.
    #[arg(long, default_value = "auto")]
    calibration: String,
    #[arg(long, default_value_t = 10_000)]
    calibration_pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    word_vectors: Option<PathBuf>,
}

#[derive(Args)]
struct AlignCmd {
    a: PathBuf,
    b: PathBuf,
    #[command(flatten)]
    pipe: PipelineArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_ALIGNMENTS)]
    max_alignments: usize,
    #[command(flatten)]
    sig: SignificanceArgs,
    /// Keep each span's cell path in the output.
    #[arg(long)]
    emit_paths: bool,
    #[arg(long)]
    matrix_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SignificanceArgs {
    /// Gumbel parameters JSON; adds p-values to the result.
    #[arg(long)]
    gumbel: Option<PathBuf>,
    /// Evaluate p-values at the pair's own lengths instead of the reference
    /// lengths.
    #[arg(long, requires = "gumbel")]
    length_correction: bool,
}

#[derive(Args)]
struct FitNullCmd {
    /// Directory of unrelated .txt documents.
    #[arg(required_unless_present = "scores")]
    dir: Option<PathBuf>,
    /// Fit precomputed scores (JSON array or whitespace-separated) instead.
    #[arg(long, conflicts_with = "dir")]
    scores: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    m_ref: f64,
    #[arg(long, default_value_t = 1.0)]
    n_ref: f64,
    #[command(flatten)]
    pipe: PipelineArgs,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// ROC/AUC of max alignment scores; manifest lines {doc_a, doc_b, label}.
    Roc {
        manifest: PathBuf,
        #[command(flatten)]
        pipe: PipelineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranking metrics; manifest lines {summary, candidates, true_index}.
    Rank {
        manifest: PathBuf,
        #[command(flatten)]
        pipe: PipelineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Character-level span P/R/F1 against gold span pairs.
    Pan {
        /// Lines {src, tgt}; aligned spans become predictions.
        #[arg(required_unless_present = "predicted")]
        manifest: Option<PathBuf>,
        #[arg(long, conflicts_with = "manifest")]
        predicted: Option<PathBuf>,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        pipe: PipelineArgs,
        #[command(flatten)]
        sig: SignificanceArgs,
        /// Keep spans whose p-value is at most this (needs --gumbel).
        #[arg(long, requires = "gumbel")]
        alpha: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MAX_ALIGNMENTS)]
        max_alignments: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sentence-pair P/R/F1; manifest lines {a, b, gold}.
    Fables {
        #[arg(required_unless_present = "predicted")]
        manifest: Option<PathBuf>,
        #[arg(long, conflicts_with = "manifest", requires = "gold")]
        predicted: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[command(flatten)]
        pipe: PipelineArgs,
        #[arg(long, default_value_t = DEFAULT_MAX_ALIGNMENTS)]
        max_alignments: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation of span start positions in an alignment result.
    Order {
        alignment: PathBuf,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        #[arg(long, default_value = "pearson")]
        method: CorrelationMethod,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<gnat::Error> for Failure {
    fn from(e: gnat::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = configure_threads().and_then(|()| run(cli.command));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("gnat: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("gnat: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("GNAT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("GNAT_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Segment {
            input,
            unit,
            min_words,
            out,
        } => {
            let doc = load_segmented(&input, &policy(unit, min_words)?)?;
            emit_json(out.as_deref(), &doc)
        }
        Command::Align(cmd) => cmd_align(cmd),
        Command::Calibrate {
            dir,
            pipe,
            pairs,
            out,
        } => {
            let res = Resources::load(&pipe)?;
            let scorer = res.scorer(pipe.scorer)?;
            let docs = load_corpus(&dir, &policy(pipe.unit, pipe.min_words)?)?;
            let refs: Vec<&SegmentedDocument> = docs.iter().collect();
            let stats = estimate_calibration(&scorer, &refs, pairs, pipe.seed)?;
            emit_json(out.as_deref(), &stats)
        }
        Command::FitNull(cmd) => cmd_fit_null(cmd),
        Command::Pvalue { score, params, m, n } => {
            let params = GumbelParams::load(&params)?;
            println!("{}", format_g17(p_value(score, &params, m, n)));
            Ok(())
        }
        Command::Heatmap {
            matrix,
            alignment,
            format,
            out,
        } => {
            let sim = matrix.map(SimilarityMatrix::load).transpose()?;
            let result = alignment.map(AlignmentResult::load).transpose()?;
            let bytes = match (format, &sim, &result) {
                (HeatmapFormat::Pgm, Some(s), _) => render::similarity_pgm(s),
                (HeatmapFormat::Pgm, None, Some(r)) => render::alignment_pgm(r),
                (HeatmapFormat::Svg, s, r) => render::heatmap_svg(s.as_ref(), r.as_ref()).into_bytes(),
                (HeatmapFormat::Pgm, None, None) => unreachable!("clap requires an input"),
            };
            std::fs::write(&out, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))
        }
        Command::Report {
            alignment,
            a,
            b,
            unit,
            format,
            out,
        } => {
            let result = AlignmentResult::load(&alignment)?;
            let fallback = unit.map(SegmentationPolicy::new);
            let pick = |p: Option<SegmentationPolicy>| {
                p.or(fallback)
                    .ok_or_else(|| usage("alignment records no segmentation; pass --unit"))
            };
            let doc_a = load_segmented(&a, &pick(result.policy_a)?)?;
            let doc_b = load_segmented(&b, &pick(result.policy_b)?)?;
            if (doc_a.len(), doc_b.len()) != (result.m, result.n) {
                return Err(Failure::Runtime(format!(
                    "alignment is {}×{} segments but the documents segment into {}×{}",
                    result.m,
                    result.n,
                    doc_a.len(),
                    doc_b.len()
                )));
            }
            let format = match format {
                ReportArg::Text => ReportFormat::Text,
                ReportArg::Html => ReportFormat::Html,
            };
            emit_text(out.as_deref(), &render::report(&result, &doc_a, &doc_b, format))
        }
        Command::Eval(cmd) => cmd_eval(cmd),
    }
}

fn policy(unit: SegmentUnit, min_words: Option<usize>) -> CliResult<SegmentationPolicy> {
    let mut p = SegmentationPolicy::new(unit);
    if let Some(w) = min_words {
        p = p.with_min_words(w);
    }
    p.validate().map_err(|e| usage(e.to_string()))?;
    Ok(p)
}

fn doc_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_segmented(path: &Path, policy: &SegmentationPolicy) -> CliResult<SegmentedDocument> {
    let raw = load_document(path, &doc_id(path))?;
    Ok(segment(&raw, policy)?)
}

/// Every `.txt` file of `dir`, in file-name order.
fn load_corpus(dir: &Path, policy: &SegmentationPolicy) -> CliResult<Vec<SegmentedDocument>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Runtime(format!("{}: no .txt documents", dir.display())));
    }
    paths.iter().map(|p| load_segmented(p, policy)).collect()
}

fn emit_text(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Failure::Runtime(format!("stdout: {e}")))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    match out {
        Some(path) => Ok(write_canonical(path, value)?),
        None => emit_text(None, &(to_canonical_string(value)? + "\n")),
    }
}

struct Resources {
    embeddings: Option<EmbeddingTable>,
    word_vectors: Option<WordVectorTable>,
}

impl Resources {
    fn load(pipe: &PipelineArgs) -> CliResult<Self> {
        let needs = |flag: &str| usage(format!("--scorer {} needs {flag}", pipe.scorer));
        match pipe.scorer {
            ScorerKind::EmbeddingCosine if pipe.embeddings.is_none() => return Err(needs("--embeddings")),
            ScorerKind::WordvecMeanCosine if pipe.word_vectors.is_none() => {
                return Err(needs("--word-vectors"))
            }
            _ => {}
        }
        let embeddings = match (pipe.scorer, &pipe.embeddings) {
            (ScorerKind::EmbeddingCosine, Some(p)) => Some(EmbeddingTable::load(p)?),
            _ => None,
        };
        let word_vectors = match (pipe.scorer, &pipe.word_vectors) {
            (ScorerKind::WordvecMeanCosine, Some(p)) => Some(WordVectorTable::load(p)?),
            _ => None,
        };
        Ok(Resources {
            embeddings,
            word_vectors,
        })
    }

    fn scorer(&self, kind: ScorerKind) -> CliResult<Scorer<'_>> {
        Ok(match kind {
            ScorerKind::EmbeddingCosine => {
                Scorer::EmbeddingCosine(self.embeddings.as_ref().expect("loaded"))
            }
            ScorerKind::WordvecMeanCosine => {
                Scorer::WordvecMeanCosine(self.word_vectors.as_ref().expect("loaded"))
            }
            other => Scorer::standalone(other)?,
        })
    }
}

impl PipelineArgs {
    fn gap(&self) -> CliResult<GapParams> {
        let gap = GapParams {
            mode: match self.gap_mode {
                GapModeArg::Linear => GapMode::Linear,
                GapModeArg::Affine => GapMode::Affine,
            },
            gap: self.gap,
            gap_open: self.gap_open,
            gap_extend: self.gap_extend,
            many_to_many: self.many_to_many,
        };
        gap.validate().map_err(|e| usage(e.to_string()))?;
        if !self.th_s.is_finite() {
            return Err(usage("--th-s must be finite"));
        }
        Ok(gap)
    }

    fn policies(&self) -> CliResult<(SegmentationPolicy, SegmentationPolicy)> {
        Ok((
            policy(self.unit_a.unwrap_or(self.unit), self.min_words)?,
            policy(self.unit_b.unwrap_or(self.unit), self.min_words)?,
        ))
    }

    /// Calibration from `--calibration`; `auto` estimates it over `docs`.
    fn stats(&self, scorer: &Scorer<'_>, docs: &[&SegmentedDocument]) -> CliResult<CalibrationStats> {
        match self.calibration.as_str() {
            "auto" => Ok(estimate_calibration(
                scorer,
                docs,
                self.calibration_pairs,
                self.seed,
            )?),
            "builtin" => CalibrationStats::builtin(scorer.kind()).ok_or_else(|| {
                usage(format!("no builtin calibration for scorer {}", scorer.kind()))
            }),
            path => {
                let stats = CalibrationStats::load(path)?;
                if stats.scorer != scorer.kind() {
                    return Err(Failure::Runtime(format!(
                        "{path}: calibration is for scorer {}, not {}",
                        stats.scorer,
                        scorer.kind()
                    )));
                }
                Ok(stats)
            }
        }
    }
}

struct Aligner<'r> {
    scorer: Scorer<'r>,
    stats: CalibrationStats,
    th_s: f64,
    gap: GapParams,
    max_alignments: usize,
    gumbel: Option<GumbelParams>,
    length_correction: bool,
}

impl Aligner<'_> {
    fn align(&self, a: &SegmentedDocument, b: &SegmentedDocument) -> gnat::Result<(AlignmentResult, SimilarityMatrix)> {
        let sim = build_similarity_matrix(a, b, &self.scorer, &self.stats, self.th_s)?;
        let mut result = align_matrix(&sim, &self.gap, self.max_alignments, 0.0)?;
        result.scorer = self.scorer.kind();
        result.policy_a = Some(a.policy);
        result.policy_b = Some(b.policy);
        if let Some(g) = &self.gumbel {
            let (m, n) = if self.length_correction {
                (Some(a.len() as f64), Some(b.len() as f64))
            } else {
                (None, None)
            };
            result.p_value = Some(p_value(result.max_score, g, m, n));
            for span in &mut result.spans {
                span.p_value = Some(p_value(span.score, g, m, n));
            }
        }
        Ok((result, sim))
    }
}

fn load_gumbel(sig: &SignificanceArgs) -> CliResult<Option<GumbelParams>> {
    Ok(sig.gumbel.as_ref().map(GumbelParams::load).transpose()?)
}

fn cmd_align(cmd: AlignCmd) -> CliResult<()> {
    let pipe = &cmd.pipe;
    let gap = pipe.gap()?;
    let (pa, pb) = pipe.policies()?;
    let res = Resources::load(pipe)?;
    let scorer = res.scorer(pipe.scorer)?;
    let gumbel = load_gumbel(&cmd.sig)?;
    let a = load_segmented(&cmd.a, &pa)?;
    let b = load_segmented(&cmd.b, &pb)?;
    let stats = pipe.stats(&scorer, &[&a, &b])?;
    let aligner = Aligner {
        scorer,
        stats,
        th_s: pipe.th_s,
        gap,
        max_alignments: cmd.max_alignments,
        gumbel,
        length_correction: cmd.sig.length_correction,
    };
    let (mut result, sim) = aligner.align(&a, &b)?;
    if !cmd.emit_paths {
        result.strip_paths();
    }
    if let Some(path) = &cmd.matrix_out {
        write_canonical(path, &sim)?;
    }
    emit_json(cmd.out.as_deref(), &result)
}

/// Scores from a JSON array or whitespace-separated text.
fn read_scores(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    if let Ok(v) = serde_json::from_str::<Vec<f64>>(&text) {
        return Ok(v);
    }
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Failure::Runtime(format!("{}: `{t}` is not a number", path.display())))
        })
        .collect()
}

fn cmd_fit_null(cmd: FitNullCmd) -> CliResult<()> {
    let params = if let Some(path) = &cmd.scores {
        let scores = read_scores(path)?;
        let sample = NullSample {
            scores,
            mean_m: cmd.m_ref,
            mean_n: cmd.n_ref,
            excluded_zero_pairs: 0,
        };
        fit_gumbel(&sample)?
    } else {
        let dir = cmd.dir.as_ref().expect("clap requires dir or --scores");
        let pipe = &cmd.pipe;
        let gap = pipe.gap()?;
        let res = Resources::load(pipe)?;
        let scorer = res.scorer(pipe.scorer)?;
        let docs = load_corpus(dir, &policy(pipe.unit, pipe.min_words)?)?;
        let refs: Vec<&SegmentedDocument> = docs.iter().collect();
        let stats = pipe.stats(&scorer, &refs)?;
        let sample = sample_null_scores(&docs, &scorer, &stats, pipe.th_s, &gap, cmd.pairs, pipe.seed)?;
        fit_gumbel(&sample)?
    };
    emit_json(cmd.out.as_deref(), &params)
}

/// JSON lines; a missing file is a usage error.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(usage(format!("{}: file not found", path.display())))
        }
        Err(e) => return Err(Failure::Runtime(format!("{}: {e}", path.display()))),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l)
                .map_err(|e| Failure::Runtime(format!("{}:{}: {e}", path.display(), k + 1)))
        })
        .collect()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(usage(format!("{}: file not found", path.display())))
        }
        Err(e) => return Err(Failure::Runtime(format!("{}: {e}", path.display()))),
    };
    serde_json::from_str(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn relative_to(manifest: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Documents referenced by an evaluation, segmented once per side.
struct DocSet {
    a: BTreeMap<PathBuf, SegmentedDocument>,
    b: BTreeMap<PathBuf, SegmentedDocument>,
}

impl DocSet {
    fn load<'p>(
        pipe: &PipelineArgs,
        a_paths: impl IntoIterator<Item = &'p PathBuf>,
        b_paths: impl IntoIterator<Item = &'p PathBuf>,
    ) -> CliResult<Self> {
        let (pa, pb) = pipe.policies()?;
        let mut a = BTreeMap::new();
        for p in a_paths {
            if !a.contains_key(p) {
                a.insert(p.clone(), load_segmented(p, &pa)?);
            }
        }
        let mut b = BTreeMap::new();
        for p in b_paths {
            if !b.contains_key(p) {
                b.insert(p.clone(), load_segmented(p, &pb)?);
            }
        }
        Ok(DocSet { a, b })
    }

    fn all(&self) -> Vec<&SegmentedDocument> {
        self.a.values().chain(self.b.values()).collect()
    }
}

fn aligner<'r>(
    pipe: &PipelineArgs,
    res: &'r Resources,
    docs: &DocSet,
    max_alignments: usize,
    sig: Option<&SignificanceArgs>,
) -> CliResult<Aligner<'r>> {
    let scorer = res.scorer(pipe.scorer)?;
    let stats = pipe.stats(&scorer, &docs.all())?;
    Ok(Aligner {
        scorer,
        stats,
        th_s: pipe.th_s,
        gap: pipe.gap()?,
        max_alignments,
        gumbel: sig.map(load_gumbel).transpose()?.flatten(),
        length_correction: sig.is_some_and(|s| s.length_correction),
    })
}

#[derive(Deserialize)]
struct RocLine {
    doc_a: String,
    doc_b: String,
    label: bool,
}

#[derive(Serialize)]
struct RocPair {
    doc_a: String,
    doc_b: String,
    label: bool,
    max_score: f64,
}

#[derive(Serialize)]
struct RocReport {
    auc: f64,
    pairs: Vec<RocPair>,
}

#[derive(Deserialize)]
struct RankLine {
    summary: String,
    candidates: Vec<String>,
    true_index: usize,
}

#[derive(Serialize)]
struct RankReport {
    #[serde(flatten)]
    metrics: gnat::eval::RankingMetrics,
    ranks: Vec<usize>,
}

#[derive(Deserialize)]
struct PanLine {
    src: String,
    tgt: String,
}

#[derive(Deserialize)]
struct FableLine {
    a: String,
    b: String,
    gold: String,
}

#[derive(Serialize)]
struct PrfReport {
    #[serde(flatten)]
    prf: Prf,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    per_pair: Vec<Prf>,
}

/// Character range of segments `from..=to`.
fn char_range(doc: &SegmentedDocument, from: usize, to: usize) -> (usize, usize) {
    (doc.segments[from].char_span.0, doc.segments[to].char_span.1)
}

fn cmd_eval(cmd: EvalCmd) -> CliResult<()> {
    match cmd {
        EvalCmd::Roc {
            manifest,
            pipe,
            out,
        } => {
            let lines: Vec<RocLine> = read_jsonl(&manifest)?;
            let pairs: Vec<(PathBuf, PathBuf)> = lines
                .iter()
                .map(|l| (relative_to(&manifest, &l.doc_a), relative_to(&manifest, &l.doc_b)))
                .collect();
            let res = Resources::load(&pipe)?;
            let docs = DocSet::load(&pipe, pairs.iter().map(|p| &p.0), pairs.iter().map(|p| &p.1))?;
            let al = aligner(&pipe, &res, &docs, 1, None)?;
            let maxima: Vec<f64> = pairs
                .par_iter()
                .map(|(a, b)| Ok(al.align(&docs.a[a], &docs.b[b])?.0.max_score))
                .collect::<gnat::Result<_>>()?;
            let scores: Vec<LabeledScore> = lines
                .iter()
                .zip(&maxima)
                .map(|(l, &s)| LabeledScore::new(s, l.label))
                .collect();
            let report = RocReport {
                auc: roc_auc(&scores)?,
                pairs: lines
                    .into_iter()
                    .zip(maxima)
                    .map(|(l, max_score)| RocPair {
                        doc_a: l.doc_a,
                        doc_b: l.doc_b,
                        label: l.label,
                        max_score,
                    })
                    .collect(),
            };
            emit_json(out.as_deref(), &report)
        }
        EvalCmd::Rank {
            manifest,
            pipe,
            out,
        } => {
            let lines: Vec<RankLine> = read_jsonl(&manifest)?;
            let summaries: Vec<PathBuf> = lines.iter().map(|l| relative_to(&manifest, &l.summary)).collect();
            let candidates: Vec<Vec<PathBuf>> = lines
                .iter()
                .map(|l| l.candidates.iter().map(|c| relative_to(&manifest, c)).collect())
                .collect();
            let res = Resources::load(&pipe)?;
            let docs = DocSet::load(&pipe, &summaries, candidates.iter().flatten())?;
            let al = aligner(&pipe, &res, &docs, 1, None)?;
            let trials: Vec<RankingTrial> = summaries
                .iter()
                .zip(&candidates)
                .zip(&lines)
                .map(|((s, cands), line)| {
                    let candidate_scores = cands
                        .par_iter()
                        .map(|c| Ok(al.align(&docs.a[s], &docs.b[c])?.0.max_score))
                        .collect::<gnat::Result<Vec<f64>>>()?;
                    Ok(RankingTrial {
                        candidate_scores,
                        true_index: line.true_index,
                    })
                })
                .collect::<gnat::Result<_>>()?;
            let metrics = ranking_metrics(&trials)?;
            let ranks = trials.iter().map(|t| t.rank()).collect::<gnat::Result<_>>()?;
            emit_json(out.as_deref(), &RankReport { metrics, ranks })
        }
        EvalCmd::Pan {
            manifest,
            predicted,
            gold,
            pipe,
            sig,
            alpha,
            max_alignments,
            out,
        } => {
            let gold: Vec<SpanPair> = read_jsonl(&gold)?;
            let predicted: Vec<SpanPair> = match (predicted, manifest) {
                (Some(p), _) => read_jsonl(&p)?,
                (None, Some(manifest)) => {
                    let lines: Vec<PanLine> = read_jsonl(&manifest)?;
                    let pairs: Vec<(PathBuf, PathBuf)> = lines
                        .iter()
                        .map(|l| (relative_to(&manifest, &l.src), relative_to(&manifest, &l.tgt)))
                        .collect();
                    let res = Resources::load(&pipe)?;
                    let docs = DocSet::load(&pipe, pairs.iter().map(|p| &p.0), pairs.iter().map(|p| &p.1))?;
                    let al = aligner(&pipe, &res, &docs, max_alignments, Some(&sig))?;
                    let per_pair = pairs
                        .par_iter()
                        .map(|(s, t)| {
                            let (src, tgt) = (&docs.a[s], &docs.b[t]);
                            let (result, _) = al.align(src, tgt)?;
                            Ok(result
                                .spans
                                .iter()
                                .filter(|sp| match (alpha, sp.p_value) {
                                    (Some(a), Some(p)) => p <= a,
                                    _ => true,
                                })
                                .map(|sp| {
                                    let (src_start, src_end) = char_range(src, sp.x_start, sp.x_end);
                                    let (tgt_start, tgt_end) = char_range(tgt, sp.y_start, sp.y_end);
                                    SpanPair {
                                        src_doc: src.doc_id.clone(),
                                        src_start,
                                        src_end,
                                        tgt_doc: tgt.doc_id.clone(),
                                        tgt_start,
                                        tgt_end,
                                    }
                                })
                                .collect::<Vec<_>>())
                        })
                        .collect::<gnat::Result<Vec<_>>>()?;
                    per_pair.into_iter().flatten().collect()
                }
                (None, None) => unreachable!("clap requires a manifest or --predicted"),
            };
            let report = PrfReport {
                prf: span_prf(&predicted, &gold),
                per_pair: Vec::new(),
            };
            emit_json(out.as_deref(), &report)
        }
        EvalCmd::Fables {
            manifest,
            predicted,
            gold,
            pipe,
            max_alignments,
            out,
        } => {
            let sets: Vec<(SentencePairSet, SentencePairSet)> = match (predicted, manifest) {
                (Some(p), _) => {
                    let gold = gold.expect("clap requires --gold with --predicted");
                    vec![(read_json(&p)?, read_json(&gold)?)]
                }
                (None, Some(manifest)) => {
                    let lines: Vec<FableLine> = read_jsonl(&manifest)?;
                    let golds = lines
                        .iter()
                        .map(|l| read_json(&relative_to(&manifest, &l.gold)))
                        .collect::<CliResult<Vec<SentencePairSet>>>()?;
                    let pairs: Vec<(PathBuf, PathBuf)> = lines
                        .iter()
                        .map(|l| (relative_to(&manifest, &l.a), relative_to(&manifest, &l.b)))
                        .collect();
                    let res = Resources::load(&pipe)?;
                    let docs = DocSet::load(&pipe, pairs.iter().map(|p| &p.0), pairs.iter().map(|p| &p.1))?;
                    let al = aligner(&pipe, &res, &docs, max_alignments, None)?;
                    let preds = pairs
                        .par_iter()
                        .map(|(a, b)| Ok(SentencePairSet::from_alignment(&al.align(&docs.a[a], &docs.b[b])?.0)))
                        .collect::<gnat::Result<Vec<_>>>()?;
                    preds.into_iter().zip(golds).collect()
                }
                (None, None) => unreachable!("clap requires a manifest or --predicted"),
            };
            let (mut hit, mut npred, mut ngold) = (0, 0, 0);
            let mut per_pair = Vec::new();
            for (p, g) in &sets {
                let (h, np, ng) = sentence_pair_counts(p, g);
                per_pair.push(Prf::from_counts(h, np, ng));
                hit += h;
                npred += np;
                ngold += ng;
            }
            let report = PrfReport {
                prf: Prf::from_counts(hit, npred, ngold),
                per_pair,
            };
            emit_json(out.as_deref(), &report)
        }
        EvalCmd::Order {
            alignment,
            top_k,
            method,
        } => {
            let result = AlignmentResult::load(&alignment)?;
            let r = alignment_order_correlation(&result, top_k, method)?;
            println!("{}", format_g17(r));
            Ok(())
        }
    }
}
