use serde::{Deserialize, Serialize};

use super::{GapMode, GapParams};
use crate::simscore::SimilarityMatrix;
use crate::{Error, Result};

/// How a DP cell's `H` value was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    /// `H[i-1][j-1] + S`: segment `i-1` of X matched to segment `j-1` of Y.
    Diag,
    /// Gap step from row `i-1`: segment `i-1` of X left unmatched.
    Up,
    /// Gap step from column `j-1`: segment `j-1` of Y left unmatched.
    Left,
    /// Many-to-many: `H[i-1][j] + S`, Y segment `j-1` matched again.
    MatchUp,
    /// Many-to-many: `H[i][j-1] + S`, X segment `i-1` matched again.
    MatchLeft,
    Stop,
}

impl Move {
    pub fn is_match(self) -> bool {
        matches!(self, Move::Diag | Move::MatchUp | Move::MatchLeft)
    }

    fn code(self) -> u8 {
        match self {
            Move::Stop => 0,
            Move::Diag => 1,
            Move::Up => 2,
            Move::Left => 3,
            Move::MatchUp => 4,
            Move::MatchLeft => 5,
        }
    }

    fn from_code(c: u8) -> Move {
        match c & MOVE_MASK {
            1 => Move::Diag,
            2 => Move::Up,
            3 => Move::Left,
            4 => Move::MatchUp,
            5 => Move::MatchLeft,
            _ => Move::Stop,
        }
    }
}

const MOVE_MASK: u8 = 0b0111;
const E_EXTEND: u8 = 0b1000;
const F_EXTEND: u8 = 0b1_0000;

/// Filled Smith-Waterman matrices, `(m + 1) × (n + 1)`, row-major. Row and
/// column 0 are the empty prefixes.
#[derive(Debug, Clone)]
pub struct DpState {
    pub m: usize,
    pub n: usize,
    pub gap: GapParams,
    h: Vec<f64>,
    e: Vec<f64>,
    f: Vec<f64>,
    trace: Vec<u8>,
}

impl DpState {
    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.h[self.at(i, j)]
    }

    /// Best score ending in a gap that leaves a Y segment unmatched.
    pub fn e(&self, i: usize, j: usize) -> f64 {
        self.e[self.at(i, j)]
    }

    /// Best score ending in a gap that leaves an X segment unmatched.
    pub fn f(&self, i: usize, j: usize) -> f64 {
        self.f[self.at(i, j)]
    }

    pub fn move_at(&self, i: usize, j: usize) -> Move {
        Move::from_code(self.trace[self.at(i, j)])
    }

    /// Whether `E[i][j]` continues the gap from `E[i][j-1]`.
    pub(crate) fn e_extends(&self, i: usize, j: usize) -> bool {
        self.trace[self.at(i, j)] & E_EXTEND != 0
    }

    pub(crate) fn f_extends(&self, i: usize, j: usize) -> bool {
        self.trace[self.at(i, j)] & F_EXTEND != 0
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h
    }

    pub fn max_score(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    /// First cell in row-major order holding the maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut value = 0.0;
        for i in 1..=self.m {
            for j in 1..=self.n {
                if self.h(i, j) > value {
                    value = self.h(i, j);
                    best = (i, j);
                }
            }
        }
        best
    }
}

/// Fills the Smith-Waterman matrices over the calibrated similarities.
///
/// Candidates for `H[i][j]` are tried in the order diag, match-up,
/// match-left, up, left; a later one wins only if strictly greater, and
/// anything not above zero becomes a stop.
pub fn smith_waterman(sim: &SimilarityMatrix, gap: &GapParams) -> Result<DpState> {
    gap.validate()?;
    let (m, n) = (sim.m, sim.n);
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot align empty sequences ({m}×{n})"
        )));
    }
    let width = n + 1;
    let cells = (m + 1) * width;
    let mut h = vec![0.0; cells];
    let mut e = vec![f64::NEG_INFINITY; cells];
    let mut f = vec![f64::NEG_INFINITY; cells];
    let mut trace = vec![0u8; cells];

    let (open, extend) = match gap.mode {
        GapMode::Linear => (gap.gap, gap.gap),
        GapMode::Affine => (gap.gap_open, gap.gap_extend),
    };
    let affine = gap.mode == GapMode::Affine;

    for i in 1..=m {
        for j in 1..=n {
            let s = sim.get(i - 1, j - 1);
            if !s.is_finite() {
                return Err(Error::NonFinite {
                    row: i - 1,
                    col: j - 1,
                    value: s,
                });
            }
            let here = i * width + j;
            let up = here - width;
            let left = here - 1;
            let mut flags = 0u8;

            let e_open = h[left] + open;
            let e_val = if affine && e[left] + extend >= e_open {
                flags |= E_EXTEND;
                e[left] + extend
            } else {
                e_open
            };
            let f_open = h[up] + open;
            let f_val = if affine && f[up] + extend >= f_open {
                flags |= F_EXTEND;
                f[up] + extend
            } else {
                f_open
            };
            e[here] = e_val;
            f[here] = f_val;

            let mut best = h[up - 1] + s;
            let mut mv = Move::Diag;
            if gap.many_to_many {
                for (cand, tag) in [(h[up] + s, Move::MatchUp), (h[left] + s, Move::MatchLeft)] {
                    if cand > best {
                        best = cand;
                        mv = tag;
                    }
                }
            }
            for (cand, tag) in [(f_val, Move::Up), (e_val, Move::Left)] {
                if cand > best {
                    best = cand;
                    mv = tag;
                }
            }
            if best > 0.0 {
                h[here] = best;
            } else {
                mv = Move::Stop;
            }
            trace[here] = mv.code() | flags;
        }
    }

    Ok(DpState {
        m,
        n,
        gap: *gap,
        h,
        e,
        f,
        trace,
    })
}
