//! Heatmaps and side-by-side reports.

use std::fmt::Write as _;

use crate::align::{AlignmentResult, AlignmentSpan};
use crate::corpus::SegmentedDocument;
use crate::json::format_g17;
use crate::simscore::SimilarityMatrix;

const CELL_PX: usize = 8;

/// Grey level of a calibrated similarity: −1 → 0, +1 → 255.
pub fn pixel(c: f64) -> u8 {
    (255.0 * (c + 1.0) / 2.0).round().clamp(0.0, 255.0) as u8
}

fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Binary PGM, one pixel per cell, row `i` = segment `i` of X.
pub fn similarity_pgm(sim: &SimilarityMatrix) -> Vec<u8> {
    let px: Vec<u8> = (0..sim.m)
        .flat_map(|i| (0..sim.n).map(move |j| (i, j)))
        .map(|(i, j)| pixel(sim.get(i, j)))
        .collect();
    pgm(sim.n, sim.m, &px)
}

/// Cells covered by each span: its path, or its whole box when no path was
/// kept.
fn span_cells(span: &AlignmentSpan) -> Vec<(usize, usize)> {
    if span.path.is_empty() {
        (span.x_start..=span.x_end)
            .flat_map(|i| (span.y_start..=span.y_end).map(move |j| (i, j)))
            .collect()
    } else {
        span.path.iter().map(|s| (s.x, s.y)).collect()
    }
}

/// Binary PGM of an alignment alone: span cells white, the rest black.
pub fn alignment_pgm(result: &AlignmentResult) -> Vec<u8> {
    let mut px = vec![0u8; result.m * result.n];
    for span in &result.spans {
        for (i, j) in span_cells(span) {
            if i < result.m && j < result.n {
                px[i * result.n + j] = 255;
            }
        }
    }
    pgm(result.n, result.m, &px)
}

/// SVG heatmap: a grey rect per cell (or per span cell without a matrix) and
/// a red outline around each span.
pub fn heatmap_svg(sim: Option<&SimilarityMatrix>, result: Option<&AlignmentResult>) -> String {
    let (m, n) = match (sim, result) {
        (Some(s), _) => (s.m, s.n),
        (None, Some(r)) => (r.m, r.n),
        (None, None) => (0, 0),
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {0} {1}">"#,
        n * CELL_PX,
        m * CELL_PX
    );
    let mut rect = |i: usize, j: usize, g: u8| {
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}" fill="rgb({g},{g},{g})"/>"#,
            j * CELL_PX,
            i * CELL_PX
        );
    };
    match (sim, result) {
        (Some(s), _) => {
            for i in 0..m {
                for j in 0..n {
                    rect(i, j, pixel(s.get(i, j)));
                }
            }
        }
        (None, Some(r)) => {
            for span in &r.spans {
                for (i, j) in span_cells(span) {
                    rect(i, j, 255);
                }
            }
        }
        (None, None) => {}
    }
    if let Some(r) = result {
        for (k, span) in r.spans.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<rect class="span span-{k}" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="red" stroke-width="1"><title>score {}</title></rect>"#,
                span.y_start * CELL_PX,
                span.x_start * CELL_PX,
                (span.y_end - span.y_start + 1) * CELL_PX,
                (span.x_end - span.x_start + 1) * CELL_PX,
                format_g17(span.score)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Html,
}

pub const NO_ALIGNMENTS: &str = "no significant alignments";

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn segment_texts(doc: &SegmentedDocument, from: usize, to: usize) -> Vec<&str> {
    doc.segments
        .get(from..=to.min(doc.segments.len().saturating_sub(1)))
        .unwrap_or_default()
        .iter()
        .map(|s| s.text.as_str())
        .collect()
}

fn span_header(rank: usize, span: &AlignmentSpan) -> String {
    let mut h = format!(
        "span {rank}: score {} X[{}..={}] Y[{}..={}]",
        format_g17(span.score),
        span.x_start,
        span.x_end,
        span.y_start,
        span.y_end
    );
    if let Some(p) = span.p_value {
        let _ = write!(h, " p {}", format_g17(p));
    }
    h
}

/// Aligned segment ranges of `a` and `b`, best span first.
pub fn report(
    result: &AlignmentResult,
    a: &SegmentedDocument,
    b: &SegmentedDocument,
    format: ReportFormat,
) -> String {
    let mut spans: Vec<&AlignmentSpan> = result.spans.iter().collect();
    spans.sort_by(|x, y| y.score.total_cmp(&x.score));
    let mut out = String::new();
    match format {
        ReportFormat::Text => {
            let _ = writeln!(out, "{} vs {}", a.doc_id, b.doc_id);
            if spans.is_empty() {
                let _ = writeln!(out, "{NO_ALIGNMENTS}");
            }
            for (k, span) in spans.iter().enumerate() {
                let _ = writeln!(out, "\n== {} ==", span_header(k + 1, span));
                for t in segment_texts(a, span.x_start, span.x_end) {
                    let _ = writeln!(out, "  X | {}", t.replace('\n', " "));
                }
                for t in segment_texts(b, span.y_start, span.y_end) {
                    let _ = writeln!(out, "  Y | {}", t.replace('\n', " "));
                }
            }
        }
        ReportFormat::Html => {
            out.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>alignment report</title>\n");
            out.push_str("<style>table{border-collapse:collapse;width:100%}td{vertical-align:top;padding:4px;border:1px solid #ccc;width:50%}");
            for k in 0..spans.len() {
                let hue = (k * 67) % 360;
                let _ = write!(out, ".span-{k}{{background:hsl({hue},70%,88%)}}");
            }
            out.push_str("</style></head><body>\n");
            let _ = writeln!(
                out,
                "<h1>{} vs {}</h1>",
                escape_html(&a.doc_id),
                escape_html(&b.doc_id)
            );
            if spans.is_empty() {
                let _ = writeln!(out, "<p>{NO_ALIGNMENTS}</p>");
            }
            for (k, span) in spans.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "<h2>{}</h2>\n<table class=\"span-{k}\"><tr>",
                    escape_html(&span_header(k + 1, span))
                );
                for (doc, from, to) in [(a, span.x_start, span.x_end), (b, span.y_start, span.y_end)] {
                    out.push_str("<td>");
                    for t in segment_texts(doc, from, to) {
                        let _ = write!(out, "<p>{}</p>", escape_html(t));
                    }
                    out.push_str("</td>");
                }
                out.push_str("</tr></table>\n");
            }
            out.push_str("</body></html>\n");
        }
    }
    out
}
