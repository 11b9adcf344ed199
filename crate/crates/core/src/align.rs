//! Document-scale global alignment of reference text against predicted text,
//! and projection of sentence boundaries onto frame spans.
//!
//! Two modes share one scoring scheme. `Full` materializes a packed 2-bit
//! traceback over the whole score matrix, so a 20k x 20k document costs about
//! 100MB. `LinearSpace` is a divide-and-conquer scheme that keeps memory
//! linear in the sequence lengths and returns an alignment with the same
//! optimal score (the chosen path may differ among co-optimal ones).

use crate::error::{Error, Result};
use crate::types::{
    AlignStep, AlignmentMap, CharRange, FrameSpan, PredictedText, ReferenceDocument, ScoreParams,
};

/// Alignment strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignMode {
    /// Pick `Full` when its projected memory fits the budget, else `LinearSpace`.
    #[default]
    Auto,
    /// Full traceback matrix; errors when the projected memory exceeds the budget.
    Full,
    /// Divide-and-conquer with memory linear in the sequence lengths.
    LinearSpace,
}

/// Configuration for [`align`].
#[derive(Debug, Clone)]
pub struct AlignerConfig {
    pub scores: ScoreParams,
    pub mode: AlignMode,
    pub memory_budget_bytes: usize,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            scores: ScoreParams::default(),
            mode: AlignMode::Auto,
            memory_budget_bytes: 512 * 1024 * 1024,
        }
    }
}

/// Projected heap use of a full-traceback alignment of `n` by `np` characters.
pub fn projected_full_memory(n: usize, np: usize) -> usize {
    let cells = (n + 1).saturating_mul(np + 1);
    let traceback = cells / 4 + 1;
    let rows = 2 * (np + 1) * std::mem::size_of::<i64>();
    traceback + rows
}

/// One sentence of `R` with its projected ranges in `P` and in frames.
///
/// `p_range` and `frame_range` are `None` when every character of the
/// sentence aligned to a gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceSpan {
    pub sentence_index: usize,
    pub r_range: CharRange,
    pub p_range: Option<CharRange>,
    pub frame_range: Option<FrameSpan>,
}

/// Globally aligns a reference document against predicted text.
pub fn align(
    doc: &ReferenceDocument,
    pred: &PredictedText,
    cfg: &AlignerConfig,
) -> Result<AlignmentMap> {
    align_chars(doc.text(), pred.chars(), cfg)
}

/// Globally aligns two character sequences.
///
/// Traceback ties break diagonal over up (gap in `P`) over left (gap in `R`),
/// so identical inputs always produce identical alignments.
pub fn align_chars(r: &[char], p: &[char], cfg: &AlignerConfig) -> Result<AlignmentMap> {
    if cfg.memory_budget_bytes == 0 {
        return Err(Error::invalid(
            "aligner config",
            "memory budget must be positive",
        ));
    }
    let projected = projected_full_memory(r.len(), p.len());
    let mode = match cfg.mode {
        AlignMode::Full => {
            if projected > cfg.memory_budget_bytes {
                return Err(Error::MemoryBudgetExceeded {
                    projected,
                    budget: cfg.memory_budget_bytes,
                });
            }
            AlignMode::Full
        }
        AlignMode::LinearSpace => AlignMode::LinearSpace,
        AlignMode::Auto => {
            if projected > cfg.memory_budget_bytes {
                AlignMode::LinearSpace
            } else {
                AlignMode::Full
            }
        }
    };

    let steps = match mode {
        AlignMode::Full => full_align(r, p, &cfg.scores),
        AlignMode::LinearSpace => {
            let mut steps = Vec::with_capacity(r.len().max(p.len()));
            hirschberg(r, p, 0, 0, &cfg.scores, &mut steps);
            steps
        }
        AlignMode::Auto => unreachable!(),
    };
    let map = AlignmentMap::new(steps);
    debug_assert!(map.validate(r.len(), p.len()).is_ok());
    Ok(map)
}

/// Total score of an alignment under the given parameters; equals the
/// dynamic program's terminal cell value for maps produced by [`align`].
pub fn alignment_score_total(map: &AlignmentMap, scores: &ScoreParams) -> i64 {
    map.steps()
        .iter()
        .map(|step| match step {
            AlignStep::Match { .. } => scores.match_score() as i64,
            AlignStep::Mismatch { .. } => scores.mismatch_score() as i64,
            AlignStep::GapInP { .. } | AlignStep::GapInR { .. } => scores.gap_score() as i64,
        })
        .sum()
}

// Traceback codes packed two bits per cell.
const TB_DIAG: u8 = 0;
const TB_UP: u8 = 1; // gap in P, consumes r
const TB_LEFT: u8 = 2; // gap in R, consumes p

fn full_align(r: &[char], p: &[char], scores: &ScoreParams) -> Vec<AlignStep> {
    let n = r.len();
    let np = p.len();
    let stride = np + 1;
    let mat = scores.match_score() as i64;
    let mis = scores.mismatch_score() as i64;
    let gap = scores.gap_score() as i64;

    // Row 0 and column 0 are forced moves; only interior cells are stored.
    let mut tb = vec![0u8; ((n + 1) * stride) / 4 + 1];
    let mut prev: Vec<i64> = (0..=np as i64).map(|j| j * gap).collect();
    let mut cur = vec![0i64; stride];

    for i in 1..=n {
        cur[0] = i as i64 * gap;
        let ri = r[i - 1];
        let row_base = i * stride;
        for j in 1..=np {
            let diag = prev[j - 1] + if ri == p[j - 1] { mat } else { mis };
            let up = prev[j] + gap;
            let left = cur[j - 1] + gap;
            let (best, code) = if diag >= up {
                if diag >= left {
                    (diag, TB_DIAG)
                } else {
                    (left, TB_LEFT)
                }
            } else if up >= left {
                (up, TB_UP)
            } else {
                (left, TB_LEFT)
            };
            cur[j] = best;
            let idx = row_base + j;
            tb[idx >> 2] |= code << ((idx & 3) << 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let mut steps = Vec::with_capacity(n.max(np));
    let mut i = n;
    let mut j = np;
    while i > 0 || j > 0 {
        let code = if i == 0 {
            TB_LEFT
        } else if j == 0 {
            TB_UP
        } else {
            let idx = i * stride + j;
            (tb[idx >> 2] >> ((idx & 3) << 1)) & 3
        };
        match code {
            TB_DIAG => {
                i -= 1;
                j -= 1;
                steps.push(if r[i] == p[j] {
                    AlignStep::Match { r: i, p: j }
                } else {
                    AlignStep::Mismatch { r: i, p: j }
                });
            }
            TB_UP => {
                i -= 1;
                steps.push(AlignStep::GapInP { r: i });
            }
            _ => {
                j -= 1;
                steps.push(AlignStep::GapInR { p: j });
            }
        }
    }
    steps.reverse();
    steps
}

// Blocks at or below this cell count fall back to the full aligner.
const HIRSCHBERG_BLOCK_CELLS: usize = 1 << 15;

fn hirschberg(
    r: &[char],
    p: &[char],
    r_off: usize,
    p_off: usize,
    scores: &ScoreParams,
    steps: &mut Vec<AlignStep>,
) {
    if r.is_empty() {
        steps.extend((0..p.len()).map(|k| AlignStep::GapInR { p: p_off + k }));
        return;
    }
    if p.is_empty() {
        steps.extend((0..r.len()).map(|k| AlignStep::GapInP { r: r_off + k }));
        return;
    }
    if r.len() == 1 || (r.len() + 1) * (p.len() + 1) <= HIRSCHBERG_BLOCK_CELLS {
        for step in full_align(r, p, scores) {
            steps.push(offset_step(step, r_off, p_off));
        }
        return;
    }

    let mid = r.len() / 2;
    let fwd = score_last_row(&r[..mid], p, scores, false);
    let bwd = score_last_row(&r[mid..], p, scores, true);
    // bwd[k] scores r[mid..] against p[p.len()-k..]; pick the split of p that
    // maximizes the combined score, lowest index on ties.
    let mut best_j = 0;
    let mut best = i64::MIN;
    for j in 0..=p.len() {
        let total = fwd[j] + bwd[p.len() - j];
        if total > best {
            best = total;
            best_j = j;
        }
    }

    hirschberg(&r[..mid], &p[..best_j], r_off, p_off, scores, steps);
    hirschberg(
        &r[mid..],
        &p[best_j..],
        r_off + mid,
        p_off + best_j,
        scores,
        steps,
    );
}

fn offset_step(step: AlignStep, r_off: usize, p_off: usize) -> AlignStep {
    match step {
        AlignStep::Match { r, p } => AlignStep::Match {
            r: r + r_off,
            p: p + p_off,
        },
        AlignStep::Mismatch { r, p } => AlignStep::Mismatch {
            r: r + r_off,
            p: p + p_off,
        },
        AlignStep::GapInP { r } => AlignStep::GapInP { r: r + r_off },
        AlignStep::GapInR { p } => AlignStep::GapInR { p: p + p_off },
    }
}

/// Last row of the score matrix for `r` against `p`. With `reversed` the
/// sequences are scored back-to-front, giving suffix scores.
fn score_last_row(r: &[char], p: &[char], scores: &ScoreParams, reversed: bool) -> Vec<i64> {
    let n = r.len();
    let np = p.len();
    let mat = scores.match_score() as i64;
    let mis = scores.mismatch_score() as i64;
    let gap = scores.gap_score() as i64;

    let mut prev: Vec<i64> = (0..=np as i64).map(|j| j * gap).collect();
    let mut cur = vec![0i64; np + 1];
    for i in 1..=n {
        cur[0] = i as i64 * gap;
        let ri = if reversed { r[n - i] } else { r[i - 1] };
        for j in 1..=np {
            let pj = if reversed { p[np - j] } else { p[j - 1] };
            let diag = prev[j - 1] + if ri == pj { mat } else { mis };
            let up = prev[j] + gap;
            let left = cur[j - 1] + gap;
            cur[j] = diag.max(up).max(left);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

/// Projects sentence boundaries through an alignment map onto ranges of `P`
/// and onto frame spans.
///
/// For each sentence, the projected range runs from the first to the last
/// character of `P` that a character of the sentence aligned to; sentences
/// whose characters all fell into gaps come back empty. Boundary characters
/// that aligned to gaps are effectively snapped inward to the nearest aligned
/// character of the same sentence, never outward.
pub fn project_sentences(
    doc: &ReferenceDocument,
    map: &AlignmentMap,
    pred: &PredictedText,
) -> Vec<SentenceSpan> {
    debug_assert!(map.validate(doc.len(), pred.len()).is_ok());
    let ranges = doc.boundaries().ranges();
    let mut p_ranges: Vec<Option<(usize, usize)>> = vec![None; ranges.len()];

    let mut sentence = 0usize;
    for step in map.steps() {
        let Some((r_idx, p_idx)) = step.pair() else {
            continue;
        };
        while sentence < ranges.len() && ranges[sentence].end < r_idx {
            sentence += 1;
        }
        if sentence >= ranges.len() {
            break;
        }
        let range = ranges[sentence];
        if r_idx >= range.start && r_idx <= range.end {
            match &mut p_ranges[sentence] {
                slot @ None => *slot = Some((p_idx, p_idx)),
                Some((_, end)) => *end = p_idx,
            }
        }
    }

    ranges
        .iter()
        .enumerate()
        .map(|(i, &r_range)| {
            let p_range = p_ranges[i].map(|(s, e)| CharRange::new(s, e));
            let frame_range = p_range.map(|pr| {
                FrameSpan::new(pred.spans().get(pr.start).start, pred.spans().get(pr.end).end)
            });
            SentenceSpan {
                sentence_index: i,
                r_range,
                p_range,
                frame_range,
            }
        })
        .collect()
}

/// Converts an inclusive frame span to a padded millisecond interval:
/// `[max(0, start*d - pad), (end+1)*d + pad)`.
pub fn frames_to_interval(span: FrameSpan, frame_duration_ms: f64, pad_ms: f64) -> (f64, f64) {
    let start = (span.start as f64 * frame_duration_ms - pad_ms).max(0.0);
    let end = (span.end + 1) as f64 * frame_duration_ms + pad_ms;
    (start, end)
}
