//! Greedy extraction of several local alignments from one DP fill.
//!
//! Cells are sorted by `H` once. Starting from the best cell whose row and
//! column are still free, the path is traced back until it reaches a zero
//! cell or a row/column owned by an earlier alignment. The rows and columns
//! the path covers are then claimed. The first alignment is the exact
//! Smith-Waterman optimum; later ones are approximations.

use super::dp::{DpState, Move};
use super::{AlignmentSpan, PathStep};

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    H,
    E,
    F,
}

struct Claims {
    rows: Vec<bool>,
    cols: Vec<bool>,
}

impl Claims {
    fn free(&self, i: usize, j: usize) -> bool {
        !self.rows[i] && !self.cols[j]
    }
}

/// Up to `max_count` row- and column-disjoint alignments ending in cells with
/// `H > min_score`, sorted by descending score.
pub fn extract_alignments(dp: &DpState, max_count: usize, min_score: f64) -> Vec<AlignmentSpan> {
    let mut cells: Vec<(usize, usize)> = (1..=dp.m)
        .flat_map(|i| (1..=dp.n).map(move |j| (i, j)))
        .filter(|&(i, j)| dp.h(i, j) > min_score && dp.h(i, j) > 0.0)
        .collect();
    // Stable: equal scores keep row-major order.
    cells.sort_by(|a, b| dp.h(b.0, b.1).total_cmp(&dp.h(a.0, a.1)));

    let mut claims = Claims {
        rows: vec![false; dp.m + 1],
        cols: vec![false; dp.n + 1],
    };
    let mut spans = Vec::new();
    for (i, j) in cells {
        if spans.len() >= max_count {
            break;
        }
        if !claims.free(i, j) {
            continue;
        }
        let Some(span) = trace(dp, (i, j), &claims) else {
            continue;
        };
        for r in span.x_start..=span.x_end {
            claims.rows[r + 1] = true;
        }
        for c in span.y_start..=span.y_end {
            claims.cols[c + 1] = true;
        }
        spans.push(span);
    }
    spans.sort_by(|a, b| b.score.total_cmp(&a.score));
    spans
}

/// Backtrace from `end`, stopping before zero cells and claimed rows/columns.
fn trace(dp: &DpState, end: (usize, usize), claims: &Claims) -> Option<AlignmentSpan> {
    let (mut i, mut j) = end;
    let mut state = State::H;
    // Cells in reverse path order with the move that entered them.
    let mut steps: Vec<(usize, usize, Move)> = Vec::new();

    loop {
        let (step, next, next_state) = match state {
            State::H => match dp.move_at(i, j) {
                Move::Stop => break,
                Move::Diag => (Move::Diag, (i - 1, j - 1), State::H),
                Move::MatchUp => (Move::MatchUp, (i - 1, j), State::H),
                Move::MatchLeft => (Move::MatchLeft, (i, j - 1), State::H),
                Move::Up => {
                    state = State::F;
                    continue;
                }
                Move::Left => {
                    state = State::E;
                    continue;
                }
            },
            State::F => {
                let s = if dp.f_extends(i, j) { State::F } else { State::H };
                (Move::Up, (i - 1, j), s)
            }
            State::E => {
                let s = if dp.e_extends(i, j) { State::E } else { State::H };
                (Move::Left, (i, j - 1), s)
            }
        };
        steps.push((i, j, step));
        (i, j) = next;
        state = next_state;
        let at_zero = next_state == State::H && dp.h(i, j) <= 0.0;
        if at_zero || i == 0 || j == 0 || !claims.free(i, j) {
            break;
        }
    }

    steps.reverse();
    // A local alignment starts with a match; leading gaps come from a trace
    // cut short by a claimed row or column.
    let first = steps.iter().position(|s| s.2.is_match())?;
    let steps = &steps[first..];
    let (i0, j0, first_move) = steps[0];
    let origin = match first_move {
        Move::Diag => (i0 - 1, j0 - 1),
        Move::MatchUp => (i0 - 1, j0),
        _ => (i0, j0 - 1),
    };
    let score = dp.h(end.0, end.1) - dp.h(origin.0, origin.1);
    if score <= 0.0 {
        return None;
    }

    Some(AlignmentSpan {
        x_start: i0 - 1,
        x_end: end.0 - 1,
        y_start: j0 - 1,
        y_end: end.1 - 1,
        score,
        p_value: None,
        path: steps
            .iter()
            .map(|&(i, j, step)| PathStep {
                x: i - 1,
                y: j - 1,
                step,
            })
            .collect(),
    })
}
