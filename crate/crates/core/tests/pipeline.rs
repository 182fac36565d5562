use std::path::Path;

use gnat::align::align_matrix;
use gnat::{
    align_pair, estimate_calibration, fit_gumbel, load_document, p_value, sample_null_scores, segment, tokenize,
    GapParams, Move, Scorer, SegmentationPolicy, SegmentedDocument, SimilarityMatrix,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn load(rel: &str) -> SegmentedDocument {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel);
    let id = path.file_stem().unwrap().to_str().unwrap().to_owned();
    segment(&load_document(&path, &id).unwrap(), &SegmentationPolicy::sentence()).unwrap()
}

/// Documents whose sentences draw words at random from the token stream of
/// `sources`, so word frequencies match but no sentence is shared.
fn synthetic_corpus(sources: &[&SegmentedDocument], docs: usize, seed: u64) -> Vec<SegmentedDocument> {
    let words: Vec<String> = sources
        .iter()
        .flat_map(|d| d.segments.iter().flat_map(|s| tokenize(&s.text)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..docs)
        .map(|d| {
            let sentences: Vec<String> = (0..rng.random_range(10..18))
                .map(|_| {
                    let len = rng.random_range(6..16);
                    (0..len).map(|_| words[rng.random_range(0..words.len())].as_str()).collect::<Vec<_>>().join(" ")
                })
                .collect();
            SegmentedDocument::from_texts(format!("synthetic_{d}"), &sentences)
        })
        .collect()
}

#[test]
fn p_values_order_paraphrase_then_sequel_then_unrelated() {
    let fox_a = load("toy/fox_grapes_a.txt");
    let fox_b = load("toy/fox_grapes_b.txt");
    let later = load("parts/fox_grapes_later.txt");
    let tortoise = load("toy/tortoise_hare.txt");
    let wind = load("toy/north_wind_sun.txt");
    let all = [&fox_a, &fox_b, &later, &tortoise, &wind];

    let null_corpus = synthetic_corpus(&all, 40, 11);
    let scorer = Scorer::Jaccard;
    let refs: Vec<&SegmentedDocument> = null_corpus.iter().collect();
    let stats = estimate_calibration(&scorer, &refs, 20_000, 3).unwrap();
    let gap = GapParams::default();
    let th_s = gnat::simscore::DEFAULT_TH_S;
    let null = sample_null_scores(&null_corpus, &scorer, &stats, th_s, &gap, 780, 5).unwrap();
    assert!(null.scores.len() > 100, "only {} positive null scores", null.scores.len());
    let params = fit_gumbel(&null).unwrap();

    let p = |x: &SegmentedDocument, y: &SegmentedDocument| {
        let r = align_pair(x, y, &scorer, &stats, th_s, &gap, 1).unwrap();
        (r.max_score, p_value(r.max_score, &params, None, None))
    };
    let (s_para, p_para) = p(&fox_a, &fox_b);
    let (s_part, p_part) = p(&fox_a, &later);
    let unrelated = [p(&fox_a, &tortoise), p(&fox_a, &wind), p(&fox_b, &tortoise), p(&later, &wind), p(&tortoise, &wind)];
    let (s_unrel, p_unrel) = unrelated
        .iter()
        .copied()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(s, p), (s2, p2)| (s.max(s2), p.min(p2)));
    assert!(s_para > s_part && s_part > s_unrel, "scores {s_para} {s_part} {s_unrel}");
    assert!(p_para < p_part && p_part < p_unrel, "p-values {p_para:e} {p_part:e} {p_unrel:e}");
}

#[test]
fn fitted_gumbel_matches_its_sample_in_ks_distance() {
    let gumbel = rand_distr::Gumbel::new(1.29, 0.30).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut scores: Vec<f64> = (0..250_000).map(|_| rng.sample(gumbel)).collect();
    let sample = gnat::NullSample {
        scores: scores.clone(),
        mean_m: 100.0,
        mean_n: 100.0,
        excluded_zero_pairs: 0,
    };
    let params = fit_gumbel(&sample).unwrap();
    scores.sort_by(f64::total_cmp);
    let n = scores.len() as f64;
    let ks = scores
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = (-(-(x - params.mu) / params.beta).exp()).exp();
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS {ks}");
}

fn matrix(m: usize, n: usize) -> impl Strategy<Value = SimilarityMatrix> {
    prop::collection::vec(-1.0f64..1.0, m * n)
        .prop_map(move |v| SimilarityMatrix::from_calibrated(m, n, v).unwrap())
}

fn any_matrix() -> impl Strategy<Value = SimilarityMatrix> {
    (1usize..12, 1usize..12).prop_flat_map(|(m, n)| matrix(m, n))
}

fn any_gap() -> impl Strategy<Value = GapParams> {
    prop_oneof![
        (-2.0f64..-0.01).prop_map(GapParams::linear),
        (-2.0f64..-0.01, 0.0f64..1.0).prop_map(|(open, frac)| GapParams::affine(open, open * frac)),
    ]
    .prop_flat_map(|g| {
        any::<bool>().prop_map(move |mm| GapParams {
            many_to_many: mm,
            ..g
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spans_are_disjoint_sorted_and_rescorable(sim in any_matrix(), gap in any_gap()) {
        let r = align_matrix(&sim, &gap, 50, 0.0).unwrap();
        prop_assert!(r.max_score >= 0.0);
        if let Some(first) = r.spans.first() {
            prop_assert_eq!(first.score, r.max_score);
        } else {
            prop_assert_eq!(r.max_score, 0.0);
        }
        let mut rows = vec![false; sim.m];
        let mut cols = vec![false; sim.n];
        for w in r.spans.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
        for span in &r.spans {
            prop_assert!(span.score > 0.0);
            prop_assert!(span.x_start <= span.x_end && span.x_end < sim.m);
            prop_assert!(span.y_start <= span.y_end && span.y_end < sim.n);
            prop_assert!((span.path_score(&sim, &gap) - span.score).abs() < 1e-9,
                "path {} vs span {}", span.path_score(&sim, &gap), span.score);
            let first = span.path.first().unwrap();
            let last = span.path.last().unwrap();
            prop_assert!(first.step.is_match() && last.step.is_match());
            for step in &span.path {
                prop_assert!(step.step != Move::Stop);
                prop_assert!(!rows[step.x] && !cols[step.y], "cell ({}, {}) claimed twice", step.x, step.y);
            }
            rows[span.x_start..=span.x_end].fill(true);
            cols[span.y_start..=span.y_end].fill(true);
        }
    }

    #[test]
    fn scaling_scores_and_gaps_scales_the_optimum(sim in any_matrix(), gap in any_gap(), k in 0.1f64..10.0) {
        let scaled_values: Vec<f64> = (0..sim.m).flat_map(|i| (0..sim.n).map(move |j| (i, j))).map(|(i, j)| sim.get(i, j) * k).collect();
        let scaled = SimilarityMatrix::from_calibrated(sim.m, sim.n, scaled_values).unwrap();
        let base = align_matrix(&sim, &gap, 1, 0.0).unwrap().max_score;
        let big = align_matrix(&scaled, &gap.scaled(k), 1, 0.0).unwrap().max_score;
        prop_assert!((big - k * base).abs() <= 1e-9 * (1.0 + k * base));
    }

    #[test]
    fn transposing_keeps_the_optimum(sim in any_matrix(), gap in any_gap()) {
        let t: Vec<f64> = (0..sim.n).flat_map(|j| (0..sim.m).map(move |i| (i, j))).map(|(i, j)| sim.get(i, j)).collect();
        let tr = SimilarityMatrix::from_calibrated(sim.n, sim.m, t).unwrap();
        let a = align_matrix(&sim, &gap, 1, 0.0).unwrap().max_score;
        let b = align_matrix(&tr, &gap, 1, 0.0).unwrap().max_score;
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn raising_one_cell_never_lowers_the_optimum(sim in any_matrix(), gap in any_gap(), i in 0usize..12, j in 0usize..12, bump in 0.0f64..1.0) {
        let (i, j) = (i % sim.m, j % sim.n);
        let mut v: Vec<f64> = (0..sim.m).flat_map(|a| (0..sim.n).map(move |b| (a, b))).map(|(a, b)| sim.get(a, b)).collect();
        v[i * sim.n + j] = (v[i * sim.n + j] + bump).min(1.0);
        let raised = SimilarityMatrix::from_calibrated(sim.m, sim.n, v).unwrap();
        let before = align_matrix(&sim, &gap, 1, 0.0).unwrap().max_score;
        let after = align_matrix(&raised, &gap, 1, 0.0).unwrap().max_score;
        prop_assert!(after >= before - 1e-12);
    }
}
