//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, Normal};

use gnat::align::align_matrix;
use gnat::eval::{
    alignment_order_correlation, ranking_metrics, roc_auc, sentence_pair_prf, span_prf,
    CorrelationMethod, LabeledScore, RankingTrial, SentencePairSet, SpanPair,
};
use gnat::sigstats::fit_location_scale;
use gnat::simscore::{
    embedding_cosine, hamming_similarity, jaccard, tfidf_cosine, wordvec_mean_cosine,
    estimate_background, DocumentFrequency,
};
use gnat::{
    build_similarity_matrix, calibrate, estimate_calibration, extract_alignments, load_document,
    p_value, segment, smith_waterman, AlignmentResult, CalibrationStats, GapMode, GapParams,
    GumbelParams, Scorer, ScorerKind, Segment, SegmentationPolicy, SegmentedDocument,
    SimilarityMatrix, WordVectorTable,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> SimilarityMatrix {
    let cells = (0..m * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    SimilarityMatrix::from_calibrated(m, n, cells).unwrap()
}

/// Cost of moving from one matched cell to the next when `dx` X segments and
/// `dy` Y segments are skipped in between.
fn gap_cost(gap: &GapParams, dx: usize, dy: usize) -> f64 {
    let run = |k: usize| match (k, gap.mode) {
        (0, _) => 0.0,
        (k, GapMode::Linear) => gap.gap * k as f64,
        (k, GapMode::Affine) => gap.gap_open + gap.gap_extend * (k - 1) as f64,
    };
    run(dx) + run(dy)
}

/// Best local alignment by enumerating every chain of matched cells with
/// strictly increasing rows and columns.
fn exhaustive_best(sim: &SimilarityMatrix, gap: &GapParams) -> f64 {
    fn extend(sim: &SimilarityMatrix, gap: &GapParams, i: usize, j: usize, score: f64, best: &mut f64) {
        *best = best.max(score);
        for i2 in i + 1..sim.m {
            for j2 in j + 1..sim.n {
                let s = score + gap_cost(gap, i2 - i - 1, j2 - j - 1) + sim.get(i2, j2);
                extend(sim, gap, i2, j2, s, best);
            }
        }
    }
    let mut best = 0.0f64;
    for i in 0..sim.m {
        for j in 0..sim.n {
            extend(sim, gap, i, j, sim.get(i, j), &mut best);
        }
    }
    best
}

fn dp_oracle_linear() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst = 0.0f64;
    for k in 0..500 {
        let (m, n) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let sim = random_matrix(&mut rng, m, n);
        let gap = GapParams::linear(-rng.random_range(0.0..1.5));
        let got = smith_waterman(&sim, &gap).unwrap().max_score();
        let want = exhaustive_best(&sim, &gap);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-12, "instance {k}: DP {got} vs oracle {want}");
    }
    Ok(format!("500 instances, max |diff| {worst:.1e}"))
}

fn dp_oracle_affine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for k in 0..200 {
        let (m, n) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let sim = random_matrix(&mut rng, m, n);
        let open = -rng.random_range(0.0..1.5);
        let gap = GapParams::affine(open, open * rng.random_range(0.0..=1.0));
        let got = smith_waterman(&sim, &gap).unwrap().max_score();
        let want = exhaustive_best(&sim, &gap);
        ensure!((got - want).abs() <= 1e-12, "affine instance {k}: DP {got} vs oracle {want}");
    }
    for k in 0..100 {
        let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let sim = random_matrix(&mut rng, m, n);
        let g = -rng.random_range(0.0..1.5);
        let affine = smith_waterman(&sim, &GapParams::affine(g, g)).unwrap();
        let linear = smith_waterman(&sim, &GapParams::linear(g)).unwrap();
        ensure!(
            affine.h_values() == linear.h_values(),
            "instance {k}: affine({g}, {g}) differs from linear({g})"
        );
    }
    Ok("200 affine instances match; affine(g, g) ≡ linear(g) on 100".into())
}

/// Background in [−1, −0.9] with diagonal runs of values in [0.5, 1].
fn planted(rng: &mut ChaCha8Rng, m: usize, n: usize, blocks: &[(usize, usize, usize)]) -> SimilarityMatrix {
    let mut cells: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..=-0.9)).collect();
    for &(r, c, len) in blocks {
        for d in 0..len {
            cells[(r + d) * n + c + d] = rng.random_range(0.5..=1.0);
        }
    }
    SimilarityMatrix::from_calibrated(m, n, cells).unwrap()
}

/// Block rows/columns: starts at least 12 apart, lengths 3–5, so that no
/// path through the background can join two blocks profitably.
fn random_blocks(rng: &mut ChaCha8Rng, count: usize, shuffle_cols: bool) -> Vec<(usize, usize, usize)> {
    let rows: Vec<usize> = (0..count).map(|k| 12 * k + rng.random_range(0..4)).collect();
    let mut cols: Vec<usize> = (0..count).map(|k| 12 * k + rng.random_range(0..4)).collect();
    if shuffle_cols {
        cols.shuffle(rng);
    }
    rows.into_iter()
        .zip(cols)
        .map(|(r, c)| (r, c, rng.random_range(3..=5)))
        .collect()
}

fn extraction_blocks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let gap = GapParams::default();
    for trial in 0..60 {
        let count = 2 + trial % 2;
        let blocks = random_blocks(&mut rng, count, true);
        let sim = planted(&mut rng, 12 * count + 6, 12 * count + 6, &blocks);
        let dp = smith_waterman(&sim, &gap).unwrap();
        let spans = extract_alignments(&dp, 20, 0.0);
        ensure!(spans.len() == count, "trial {trial}: {} spans for {count} blocks", spans.len());
        ensure!(spans[0].score == dp.max_score(), "trial {trial}: first span is not max H");
        for w in spans.windows(2) {
            ensure!(w[0].score >= w[1].score, "trial {trial}: scores not descending");
        }
        for (a, s) in spans.iter().enumerate() {
            for t in &spans[a + 1..] {
                let rows = s.x_end < t.x_start || t.x_end < s.x_start;
                let cols = s.y_end < t.y_start || t.y_end < s.y_start;
                ensure!(rows && cols, "trial {trial}: spans share rows or columns");
            }
        }
        let mut got: Vec<_> = spans
            .iter()
            .map(|s| (s.x_start, s.y_start, s.x_end - s.x_start + 1))
            .collect();
        let mut want = blocks.clone();
        got.sort_unstable();
        want.sort_unstable();
        ensure!(got == want, "trial {trial}: recovered {got:?}, planted {want:?}");
        ensure!(
            spans.iter().all(|s| s.y_end - s.y_start == s.x_end - s.x_start),
            "trial {trial}: span is not a diagonal run"
        );
    }
    Ok("60 fixtures with 2–3 planted blocks recovered exactly".into())
}

fn gumbel_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let law = Gumbel::new(1.29, 0.30).unwrap();
    let xs: Vec<f64> = (0..250_000).map(|_| law.sample(&mut rng)).collect();
    let (mu, beta) = fit_location_scale(&xs).map_err(|e| e.to_string())?;
    ensure!((mu - 1.29).abs() <= 0.01, "mu {mu}");
    ensure!((beta - 0.30).abs() <= 0.003, "beta {beta}");
    Ok(format!("mu {mu:.5}, beta {beta:.5}"))
}

fn p_value_reproduction() -> Outcome {
    let g = GumbelParams::from_location_scale(1.29, 0.30, 1.0, 1.0).unwrap();
    let p = |s: f64| p_value(s, &g, None, None);
    let (a, b, c, d) = (p(1.60), p(1.92), p(2.87), p(42.96));
    ensure!((a - 0.299).abs() <= 0.01, "p(1.60) = {a}");
    ensure!((b - 0.118).abs() <= 0.01, "p(1.92) = {b}");
    ensure!(((c - 5.45e-3) / 5.45e-3).abs() <= 0.30, "p(2.87) = {c}");
    ensure!((1e-62..=1e-59).contains(&d), "p(42.96) = {d:e}");
    Ok(format!("{a:.4}, {b:.4}, {c:.3e}, {d:.2e}"))
}

fn calibration() -> Outcome {
    let stats = CalibrationStats::new(ScorerKind::EmbeddingCosine, 0.25, 0.125, 100).unwrap();
    ensure!(calibrate(0.25 + 3.0 * 0.125, &stats, 3.0) == 0.0, "Z = th_s is not 0");
    let grid: Vec<f64> = (0..1000).map(|k| -1.0 + 2.0 * k as f64 / 999.0).collect();
    let values: Vec<f64> = grid.iter().map(|&r| calibrate(r, &stats, 3.0)).collect();
    ensure!(values.windows(2).all(|w| w[0] < w[1]), "not strictly increasing on the grid");
    ensure!(values.iter().all(|v| v.abs() < 1.0), "value outside (-1, 1)");

    let mut source = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(0.097, 0.099).unwrap();
    let (mu, sigma) =
        estimate_background(1000, 100_000, 1, |_, _| Ok(normal.sample(&mut source))).unwrap();
    ensure!((mu - 0.097).abs() <= 0.002, "mu {mu}");
    ensure!((sigma - 0.099).abs() <= 0.002, "sigma {sigma}");

    // One-sided three-sigma tail of a standard normal Z.
    let unit = CalibrationStats::new(ScorerKind::EmbeddingCosine, 0.0, 1.0, 2).unwrap();
    let z = Normal::new(0.0, 1.0).unwrap();
    let draws = 1_000_000;
    let positive = (0..draws)
        .filter(|_| calibrate(z.sample(&mut source), &unit, 3.0) > 0.0)
        .count() as f64
        / draws as f64;
    ensure!((positive - 0.00135).abs() <= 0.00015, "P(calibrated > 0) = {positive}");
    Ok(format!("mu {mu:.4}, sigma {sigma:.4}, tail {positive:.5}"))
}

fn seg(text: &str) -> Segment {
    Segment::new(0, text, (0, text.chars().count()))
}

fn scorer_oracles() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    ensure!(jaccard(&["a", "b", "b"], &["b", "b", "c"]) == 0.5, "jaccard multiset");
    ensure!(jaccard(&["x", "y", "y"], &["y", "x", "y"]) == 1.0, "jaccard identical");
    ensure!(jaccard(&["x"], &["z"]) == 0.0, "jaccard disjoint");
    ensure!(jaccard::<&str>(&[], &[]) == 0.0, "jaccard empty");

    let df = DocumentFrequency::from_token_lists([
        &["cat", "sat"][..],
        &["cat", "ran"],
        &["dog"],
        &["bird"],
    ]);
    let (cat, other) = ((5.0f64 / 3.0).ln() + 1.0, (5.0f64 / 2.0).ln() + 1.0);
    let want = cat * cat / (cat * cat + other * other);
    let got = tfidf_cosine(&seg("cat sat"), &seg("cat ran"), &df);
    ensure!(close(got, want), "tfidf {got} vs {want}");
    ensure!(close(tfidf_cosine(&seg("cat sat"), &seg("cat sat"), &df), 1.0), "tfidf identical");
    ensure!(tfidf_cosine(&seg("cat"), &seg("dog"), &df) == 0.0, "tfidf disjoint");

    let wv = WordVectorTable::from_pairs(2, vec![
        ("up", vec![1.0, 0.0]),
        ("down", vec![-1.0, 0.0]),
        ("left", vec![0.0, 1.0]),
        ("half", vec![0.5, 0.5]),
    ])
    .unwrap();
    ensure!(close(wordvec_mean_cosine(&seg("up"), &seg("up"), &wv), 1.0), "wordvec same");
    ensure!(close(wordvec_mean_cosine(&seg("up"), &seg("down"), &wv), -1.0), "wordvec antipodal");
    // Means: "up left" → (0.5, 0.5), "half down" → (−0.25, 0.25).
    let got = wordvec_mean_cosine(&seg("up left"), &seg("half down"), &wv);
    let want = (0.5 * -0.25 + 0.5 * 0.25) / ((0.5f64 * 0.5 + 0.5 * 0.5).sqrt() * (0.0625f64 * 2.0).sqrt());
    ensure!(close(got, want), "wordvec hand {got} vs {want}");
    ensure!(wordvec_mean_cosine(&seg("zzz"), &seg("up"), &wv) == 0.0, "wordvec all OOV");

    ensure!(embedding_cosine(&[0.3, 0.4], &[0.3, 0.4]).unwrap() == 1.0, "embedding identical");
    ensure!(embedding_cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap() == 0.0, "embedding orthogonal");
    let e = embedding_cosine(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
    ensure!(close(e, 8.0 / 9.0), "embedding 8/9: {e}");
    ensure!(embedding_cosine(&[1.0], &[1.0, 0.0]).is_err(), "embedding dimension mismatch");
    ensure!(embedding_cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err(), "embedding zero vector");

    let h = |a: &[&str], b: &[&str]| hamming_similarity(a, b).unwrap();
    ensure!(h(&["a", "b"], &["a", "x", "b", "y"]) == 1.0, "hamming partition");
    ensure!(h(&["a", "x", "b", "y"], &["a", "b"]) == 1.0, "hamming either order");
    ensure!(h(&["p", "q", "r"], &["p", "q", "r"]) == 1.0, "hamming equal");
    ensure!(h(&["a", "b"], &["x", "y", "z", "w"]) == 0.0, "hamming no hits");
    ensure!(hamming_similarity::<&str>(&[], &["a"]).is_err(), "hamming empty");

    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let wv = WordVectorTable::from_pairs(
        3,
        vocab.iter().enumerate().map(|(i, w)| (*w, vec![i as f64 - 2.5, 1.0, (i * i) as f64])),
    )
    .unwrap();
    for k in 0..1000 {
        let bag = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            let len = rng.random_range(1..8);
            (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect()
        };
        let (a, b) = (bag(&mut rng), bag(&mut rng));
        ensure!(jaccard(&a, &b) == jaccard(&b, &a), "jaccard asymmetric at {k}");
        ensure!(h(&a, &b) == h(&b, &a), "hamming asymmetric at {k}");
        let (sa, sb) = (seg(&a.join(" ")), seg(&b.join(" ")));
        let df = DocumentFrequency::from_token_lists([&a[..], &b[..]]);
        ensure!(tfidf_cosine(&sa, &sb, &df) == tfidf_cosine(&sb, &sa, &df), "tfidf asymmetric at {k}");
        ensure!(
            wordvec_mean_cosine(&sa, &sb, &wv) == wordvec_mean_cosine(&sb, &sa, &wv),
            "wordvec asymmetric at {k}"
        );
        let va: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vb: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        ensure!(
            embedding_cosine(&va, &vb).unwrap() == embedding_cosine(&vb, &va).unwrap(),
            "embedding asymmetric at {k}"
        );
    }
    Ok("hand cases exact; symmetry on 1000 random multisets".into())
}

fn toy_docs(policy: &SegmentationPolicy) -> Vec<SegmentedDocument> {
    ["fox_grapes_a", "fox_grapes_b", "tortoise_hare", "north_wind_sun"]
        .iter()
        .map(|name| {
            let raw = load_document(data(&format!("toy/{name}.txt")), name).unwrap();
            segment(&raw, policy).unwrap()
        })
        .collect()
}

fn permuted(doc: &SegmentedDocument, seed: u64) -> SegmentedDocument {
    let mut texts: Vec<&str> = doc.segments.iter().map(|s| s.text.as_str()).collect();
    texts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    SegmentedDocument::from_texts(format!("{}-shuffled", doc.doc_id), &texts)
}

fn toy_corpus() -> Outcome {
    let gap = GapParams::default();
    let docs = toy_docs(&SegmentationPolicy::sentence());
    let refs: Vec<&SegmentedDocument> = docs.iter().collect();
    let stats = estimate_calibration(&Scorer::Jaccard, &refs, 10_000, 3).unwrap();
    let max = |a: &SegmentedDocument, b: &SegmentedDocument| {
        let sim = build_similarity_matrix(a, b, &Scorer::Jaccard, &stats, 3.0).unwrap();
        smith_waterman(&sim, &gap).unwrap().max_score()
    };
    let related = max(&docs[0], &docs[1]);
    let mut unrelated = Vec::new();
    for i in 0..docs.len() {
        for j in i + 1..docs.len() {
            if (i, j) != (0, 1) {
                unrelated.push(max(&docs[i], &docs[j]));
            }
        }
    }
    let worst = unrelated.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure!(related > worst, "related {related} vs best unrelated {worst}");

    // Order correlation on word chunks, related vs the same pair with the
    // second document's chunks shuffled.
    let chunks = toy_docs(&SegmentationPolicy::fixed_chunk(8));
    let refs: Vec<&SegmentedDocument> = chunks.iter().collect();
    let stats = estimate_calibration(&Scorer::Jaccard, &refs, 10_000, 3).unwrap();
    let corr = |a: &SegmentedDocument, b: &SegmentedDocument| -> Option<f64> {
        let sim = build_similarity_matrix(a, b, &Scorer::Jaccard, &stats, 3.5).unwrap();
        let r = align_matrix(&sim, &gap, 20, 0.0).unwrap();
        alignment_order_correlation(&r, 20, CorrelationMethod::Pearson).ok()
    };
    let toy_related = corr(&chunks[0], &chunks[1]).ok_or("related toy pair has < 2 spans")?;
    let shuffled: Vec<f64> = (0..20).filter_map(|s| corr(&chunks[0], &permuted(&chunks[1], s))).collect();
    ensure!(shuffled.len() >= 10, "only {} shuffled toy pairs had 2 spans", shuffled.len());
    let toy_shuffled = shuffled.iter().sum::<f64>() / shuffled.len() as f64;
    ensure!(toy_related > toy_shuffled, "toy order corr {toy_related} vs shuffled {toy_shuffled}");

    // Seeded synthetic ensembles: blocks along the diagonal vs blocks with
    // shuffled columns.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut ensemble = |shuffle: bool| -> f64 {
        let values: Vec<f64> = (0..50)
            .map(|_| {
                let blocks = random_blocks(&mut rng, 6, shuffle);
                let sim = planted(&mut rng, 80, 80, &blocks);
                let r = align_matrix(&sim, &gap, 20, 0.0).unwrap();
                alignment_order_correlation(&r, 20, CorrelationMethod::Pearson).unwrap()
            })
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    };
    let (syn_related, syn_shuffled) = (ensemble(false), ensemble(true));
    ensure!(syn_related > syn_shuffled, "synthetic {syn_related} vs {syn_shuffled}");
    Ok(format!(
        "max score related {related:.3} > unrelated {worst:.3}; order corr toy {toy_related:.3} > {toy_shuffled:.3}, synthetic {syn_related:.3} > {syn_shuffled:.3}"
    ))
}

fn eval_metrics() -> Outcome {
    let ls = |v: &[(f64, bool)]| v.iter().map(|&(x, l)| LabeledScore::new(x, l)).collect::<Vec<_>>();
    ensure!(roc_auc(&ls(&[(1.0, true), (1.0, true), (0.0, false)])).unwrap() == 1.0, "perfect AUC");
    ensure!(roc_auc(&ls(&[(0.7, true), (0.7, false), (0.7, false)])).unwrap() == 0.5, "tied AUC");
    // Pairs (3 vs 2) win and (1 vs 2) lose.
    ensure!(roc_auc(&ls(&[(3.0, true), (1.0, true), (2.0, false)])).unwrap() == 0.5, "hand AUC");

    let trial = |scores: &[f64], t| RankingTrial { candidate_scores: scores.to_vec(), true_index: t };
    let r = ranking_metrics(&[
        trial(&[9.0, 1.0, 2.0, 3.0], 0),
        trial(&[9.0, 8.0, 1.0], 1),
        trial(&[9.0, 8.0, 7.0, 6.0], 3),
    ])
    .unwrap();
    ensure!((r.mrr - 0.5833).abs() <= 1e-4, "mrr {}", r.mrr);
    ensure!((r.mrr - 1.75 / 3.0).abs() <= 1e-12, "mrr {} vs 1.75/3", r.mrr);
    ensure!(trial(&[0.4, 0.4], 1).rank().unwrap() == 2, "pessimistic tie");

    let pair = |s: (usize, usize), t: (usize, usize)| SpanPair {
        src_doc: "src".into(),
        src_start: s.0,
        src_end: s.1,
        tgt_doc: "tgt".into(),
        tgt_start: t.0,
        tgt_end: t.1,
    };
    let gold = [pair((10, 30), (100, 140))];
    let same = span_prf(&gold, &gold);
    ensure!((same.precision, same.recall, same.f1) == (1.0, 1.0, 1.0), "span identical");
    ensure!(span_prf(&[pair((40, 50), (0, 10))], &gold).f1 == 0.0, "span disjoint");
    let half = span_prf(&[pair((10, 20), (100, 120))], &gold);
    ensure!((half.precision, half.recall) == (1.0, 0.5), "span half {half:?}");
    ensure!(half.f1 == 2.0 / 3.0, "span half f1 {}", half.f1);

    let set = |p: &[(i64, i64)]| SentencePairSet { pairs: p.to_vec() };
    let g = set(&[(0, 0), (2, 1), (4, -1)]);
    ensure!(sentence_pair_prf(&g, &g).f1 == 1.0, "sentence identical");
    let empty = sentence_pair_prf(&set(&[]), &g);
    ensure!((empty.precision, empty.recall, empty.f1) == (0.0, 0.0, 0.0), "sentence empty");
    let hand = sentence_pair_prf(&set(&[(0, 0), (1, 1)]), &set(&[(0, 0), (2, 1)]));
    ensure!((hand.precision, hand.recall, hand.f1) == (0.5, 0.5, 0.5), "sentence hand {hand:?}");
    Ok(format!("mrr {:.6}", r.mrr))
}

fn gnat(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gnat"))
        .args(args)
        .env_remove("GNAT_THREADS")
        .output()
        .expect("run gnat")
}

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let tmp = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let fox_a = data("toy/fox_grapes_a.txt").to_string_lossy().into_owned();
    let fox_b = data("toy/fox_grapes_b.txt").to_string_lossy().into_owned();
    let toy = data("toy").to_string_lossy().into_owned();

    let (r1, r2) = (tmp("r1.json"), tmp("r2.json"));
    for out in [&r1, &r2] {
        let o = gnat(&["align", &fox_a, &fox_b, "--scorer", "jaccard", "--seed", "7", "--out", out]);
        ensure!(o.status.code() == Some(0), "align failed: {}", String::from_utf8_lossy(&o.stderr));
    }
    let (b1, b2) = (std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    ensure!(b1 == b2, "align outputs differ under the same seed");
    let parsed: AlignmentResult = serde_json::from_slice(&b1).map_err(|e| e.to_string())?;
    ensure!(!parsed.spans.is_empty(), "no spans for the related pair");
    let again = gnat::json::to_canonical_string(&serde_json::from_slice::<serde_json::Value>(&b1).unwrap()).unwrap() + "\n";
    ensure!(again.as_bytes() == b1.as_slice(), "JSON does not round-trip byte-identically");

    let code = |args: &[&str]| gnat(args).status.code();
    let params = tmp("g.json");
    let fig = GumbelParams::from_location_scale(1.29, 0.30, 1.0, 1.0).unwrap();
    gnat::json::write_canonical(&params, &fig).unwrap();
    let checks: Vec<(&str, Vec<&str>, i32)> = vec![
        ("unknown flag", vec!["align", &fox_a, &fox_b, "--bogus"], 2),
        ("unknown subcommand", vec!["frobnicate"], 2),
        ("bad scorer name", vec!["align", &fox_a, &fox_b, "--scorer", "nope"], 2),
        ("positive gap", vec!["align", &fox_a, &fox_b, "--gap-open", "0.5"], 2),
        ("embedding without table", vec!["align", &fox_a, &fox_b, "--scorer", "embedding"], 2),
        ("unknown heatmap format", vec!["heatmap", "--matrix", &r1, "--format", "gif", "--out", "x"], 2),
        ("missing manifest", vec!["eval", "roc", "/nonexistent/manifest.jsonl"], 2),
        ("missing input text", vec!["align", "/nonexistent/a.txt", &fox_b], 1),
        ("missing embeddings file", vec!["align", &fox_a, &fox_b, "--scorer", "embedding", "--embeddings", "/nonexistent/missing.bin", "--calibration", "builtin"], 1),
        ("corrupt gumbel file", vec!["pvalue", "1.0", "--params", &r1], 1),
        ("null sample too small", vec!["fit-null", &toy, "--pairs", "1"], 1),
        ("pvalue ok", vec!["pvalue", "1.60", "--params", &params], 0),
        ("help", vec!["--help"], 0),
    ];
    for (name, args, want) in &checks {
        let got = code(args);
        ensure!(got == Some(*want), "{name}: exit {got:?}, expected {want}");
    }
    let o = gnat(&["align", &fox_a, &fox_b, "--scorer", "embedding", "--embeddings", "/nonexistent/missing.bin", "--calibration", "builtin"]);
    ensure!(String::from_utf8_lossy(&o.stderr).contains("missing.bin"), "error does not name the missing file");
    Ok(format!("byte-identical reruns; {} exit-code cases", checks.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("DP oracle equivalence (linear)", dp_oracle_linear, Duration::from_secs(10)),
        ("DP oracle equivalence (affine)", dp_oracle_affine, Duration::from_secs(10)),
        ("multi-alignment extraction on planted blocks", extraction_blocks, Duration::from_secs(5)),
        ("Gumbel fit recovery", gumbel_recovery, Duration::from_secs(60)),
        ("p-value reproduction", p_value_reproduction, Duration::from_secs(1)),
        ("calibration", calibration, Duration::from_secs(10)),
        ("scorer oracles", scorer_oracles, Duration::from_secs(5)),
        ("toy corpus separation", toy_corpus, Duration::from_secs(10)),
        ("evaluation metrics", eval_metrics, Duration::from_secs(1)),
        ("CLI determinism and exit codes", cli_contract, Duration::from_secs(5)),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => {
                Err(format!("{detail}; took {took:.2?}, budget {budget:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name} ({took:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({took:.2?}): {why}");
            }
        }
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
