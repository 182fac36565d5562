//! Significance of alignment scores under a Gumbel null.
//!
//! The maximum Smith-Waterman score between unrelated sequences of lengths
//! `m` and `n` is modelled as
//!
//! ```text
//! P(S ≥ x) = 1 − exp(−K·m·n·e^(−λx))
//! ```
//!
//! With `m`, `n` fixed at reference lengths this is a Gumbel law with location
//! `mu = ln(K·m·n)/λ` and scale `beta = 1/λ`, fitted by maximum likelihood to
//! scores of unrelated document pairs.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{smith_waterman, GapParams};
use crate::corpus::SegmentedDocument;
use crate::simscore::{build_similarity_matrix, CalibrationStats, Scorer};
use crate::{Error, Result};

const NEWTON_TOLERANCE: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 200;
const SMALL_SAMPLE: usize = 100;
const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    pub mu: f64,
    pub beta: f64,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub m_ref: f64,
    pub n_ref: f64,
    #[serde(default)]
    pub sample_count: u64,
    #[serde(default)]
    pub excluded_zero_pairs: u64,
}

impl GumbelParams {
    pub fn from_location_scale(mu: f64, beta: f64, m_ref: f64, n_ref: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gumbel needs finite mu and beta > 0, got mu={mu} beta={beta}"
            )));
        }
        if !(m_ref > 0.0 && n_ref > 0.0 && m_ref.is_finite() && n_ref.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reference lengths must be positive, got {m_ref} × {n_ref}"
            )));
        }
        let lambda = 1.0 / beta;
        Ok(GumbelParams {
            mu,
            beta,
            lambda,
            k: (lambda * mu).exp() / (m_ref * n_ref),
            m_ref,
            n_ref,
            sample_count: 0,
            excluded_zero_pairs: 0,
        })
    }

    /// Checks `lambda = 1/beta` and `K = e^(λμ)/(m_ref·n_ref)`.
    pub fn validate(&self) -> Result<()> {
        let expect = Self::from_location_scale(self.mu, self.beta, self.m_ref, self.n_ref)?;
        let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE);
        if !close(self.lambda, expect.lambda, 1e-12) || !close(self.k, expect.k, 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "inconsistent gumbel parameters: lambda={} K={} but mu={} beta={} imply lambda={} K={}",
                self.lambda, self.k, self.mu, self.beta, expect.lambda, expect.k
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: GumbelParams = serde_json::from_str(&text)?;
        params.validate()?;
        Ok(params)
    }

    /// `P(S ≤ x)` at the reference lengths.
    pub fn cdf(&self, x: f64) -> f64 {
        (-(-(x - self.mu) / self.beta).exp()).exp()
    }
}

/// Maximum alignment scores of unrelated document pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSample {
    pub scores: Vec<f64>,
    pub mean_m: f64,
    pub mean_n: f64,
    pub excluded_zero_pairs: u64,
}

/// The `k`-th unordered pair `(a, b)`, `a < b`, of `d` items in
/// lexicographic order.
fn unrank_pair(mut k: usize, d: usize) -> (usize, usize) {
    let mut a = 0;
    while k >= d - 1 - a {
        k -= d - 1 - a;
        a += 1;
    }
    (a, a + 1 + k)
}

/// Aligns `num_pairs` distinct random document pairs from `corpus` (all pairs
/// if there are fewer) and keeps the positive maximum scores.
#[allow(clippy::too_many_arguments)]
pub fn sample_null_scores(
    corpus: &[SegmentedDocument],
    scorer: &Scorer<'_>,
    stats: &CalibrationStats,
    th_s: f64,
    gap: &GapParams,
    num_pairs: usize,
    seed: u64,
) -> Result<NullSample> {
    let d = corpus.len();
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "null sampling needs at least 2 documents, got {d}"
        )));
    }
    let total = d * (d - 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, total, num_pairs.min(total)).into_vec();

    let maxima: Vec<f64> = picks
        .par_iter()
        .map(|&k| {
            let (a, b) = unrank_pair(k, d);
            let sim = build_similarity_matrix(&corpus[a], &corpus[b], scorer, stats, th_s)?;
            Ok(smith_waterman(&sim, gap)?.max_score())
        })
        .collect::<Result<_>>()?;

    let scores: Vec<f64> = maxima.iter().copied().filter(|&s| s > 0.0).collect();
    let excluded = (maxima.len() - scores.len()) as u64;
    if scores.len() < 2 {
        return Err(Error::InsufficientNullSample {
            found: scores.len(),
            excluded: excluded as usize,
        });
    }
    let mean_len = corpus.iter().map(|doc| doc.len() as f64).sum::<f64>() / d as f64;
    Ok(NullSample {
        scores,
        mean_m: mean_len,
        mean_n: mean_len,
        excluded_zero_pairs: excluded,
    })
}

/// Maximum-likelihood Gumbel location and scale of `xs`.
///
/// The scale solves `beta = mean(x) − Σ x·w / Σ w` with `w = e^(−x/beta)`,
/// found by Newton's method from the moment estimate `sd·√6/π`; then
/// `mu = −beta·ln(mean(w))`.
pub fn fit_location_scale(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("gumbel fit needs at least 2 scores".into()));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("gumbel fit needs finite scores".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::NonConvergence(format!(
            "degenerate sample: all {} scores equal {mean}",
            xs.len()
        )));
    }
    let shift = xs.iter().copied().fold(f64::INFINITY, f64::min);

    // Weighted sums with w = e^(−(x − shift)/beta); the shift cancels in
    // every ratio used below.
    let sums = |beta: f64| {
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for &x in xs {
            let w = (-(x - shift) / beta).exp();
            a += w;
            b += x * w;
            c += x * x * w;
        }
        (a, b, c)
    };

    let mut beta = sd * 6f64.sqrt() / std::f64::consts::PI;
    let mut trail = Vec::with_capacity(NEWTON_MAX_ITER);
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let (a, b, c) = sums(beta);
        let ratio = b / a;
        let g = beta - mean + ratio;
        let dg = 1.0 + (c / a - ratio * ratio) / (beta * beta);
        let mut next = beta - g / dg;
        if !(next > 0.0) || !next.is_finite() {
            next = beta / 2.0;
        }
        trail.push(next);
        let step = (next - beta).abs();
        beta = next;
        if step < NEWTON_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        let tail: Vec<String> = trail.iter().rev().take(5).map(|b| format!("{b:.12}")).collect();
        return Err(Error::NonConvergence(format!(
            "beta not within {NEWTON_TOLERANCE} after {NEWTON_MAX_ITER} Newton steps; last iterates {}",
            tail.join(", ")
        )));
    }
    let (a, _, _) = sums(beta);
    let mu = shift - beta * (a / n).ln();
    Ok((mu, beta))
}

pub fn fit_gumbel(sample: &NullSample) -> Result<GumbelParams> {
    if sample.scores.len() < SMALL_SAMPLE {
        log::warn!(
            "fitting a Gumbel null to only {} scores; estimates will be noisy",
            sample.scores.len()
        );
    }
    let (mu, beta) = fit_location_scale(&sample.scores)?;
    let mut params = GumbelParams::from_location_scale(mu, beta, sample.mean_m, sample.mean_n)?;
    params.sample_count = sample.scores.len() as u64;
    params.excluded_zero_pairs = sample.excluded_zero_pairs;
    Ok(params)
}

/// Probability that unrelated sequences of lengths `m × n` (reference lengths
/// by default) reach `score`. Evaluated in log space; below 1e-300 the
/// first-order term `K·m·n·e^(−λx)` is returned.
pub fn p_value(score: f64, params: &GumbelParams, m: Option<f64>, n: Option<f64>) -> f64 {
    let m = m.unwrap_or(params.m_ref);
    let n = n.unwrap_or(params.n_ref);
    // ln(K·m·n) = λμ − ln(m_ref·n_ref) + ln(m·n), without forming K.
    let log_kmn = params.lambda * params.mu + (m / params.m_ref).ln() + (n / params.n_ref).ln();
    let x = (log_kmn - params.lambda * score).exp();
    let p = if x < UNDERFLOW { x } else { -(-x).exp_m1() };
    p.clamp(f64::MIN_POSITIVE, 1.0)
}
