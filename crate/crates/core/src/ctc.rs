//! Greedy ASR prediction over an emission matrix and CTC collapse into a
//! character sequence with per-character frame spans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{EmissionMatrix, FrameSpan, GreedyPath, LabelSet, PredictedText, SpanTable};

/// Picks the best-scoring label per frame. Ties break toward the lowest
/// label index, so decoding is deterministic.
pub fn greedy_decode(m: &EmissionMatrix) -> GreedyPath {
    let mut labels = Vec::with_capacity(m.frame_count());
    for t in 0..m.frame_count() {
        let row = m.row(t);
        let mut best = 0usize;
        let mut best_score = f32::NEG_INFINITY;
        for (i, &s) in row.iter().enumerate() {
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        labels.push(best);
    }
    GreedyPath::new(labels)
}

/// Collapses a greedy path: maximal runs of a non-blank label become one
/// character, blanks are dropped, and a blank between two runs of the same
/// label keeps them distinct. Each character's span covers the first and
/// last frame of its run, excluding blank frames.
pub fn collapse(path: &GreedyPath, labels: &LabelSet) -> Result<PredictedText> {
    let blank = labels.blank_index();
    let size = labels.label_count();
    let mut chars = Vec::new();
    let mut spans = Vec::new();
    // (label, run start, run end)
    let mut run: Option<(usize, usize, usize)> = None;

    let flush = |run: &mut Option<(usize, usize, usize)>,
                 chars: &mut Vec<char>,
                 spans: &mut Vec<FrameSpan>| {
        if let Some((label, start, end)) = run.take() {
            chars.push(labels.char_for_label(label).expect("non-blank run"));
            spans.push(FrameSpan::new(start, end));
        }
    };

    for (t, &label) in path.labels().iter().enumerate() {
        if label >= size {
            return Err(Error::LabelOutOfRange { label, size });
        }
        if label == blank {
            flush(&mut run, &mut chars, &mut spans);
            continue;
        }
        match run {
            Some((l, s, _)) if l == label => run = Some((l, s, t)),
            Some(_) => {
                flush(&mut run, &mut chars, &mut spans);
                run = Some((label, t, t));
            }
            None => run = Some((label, t, t)),
        }
    }
    flush(&mut run, &mut chars, &mut spans);

    PredictedText::new(chars, SpanTable::new(spans)?)
}

/// Builds a random valid greedy path of exactly `total_frames` frames that
/// collapses back to `chars`. Repeated characters get a mandatory blank
/// separator; all remaining frame budget is scattered over blank runs and
/// character runs at random. Used as a property-test generator.
pub fn expand(
    chars: &[char],
    labels: &LabelSet,
    total_frames: usize,
    seed: u64,
) -> Result<GreedyPath> {
    let mut indices = Vec::with_capacity(chars.len());
    for &c in chars {
        indices.push(labels.label_for_char(c).ok_or(Error::UnknownChar { ch: c })?);
    }

    // Segment layout: blank | char 0 | blank | char 1 | ... | char n-1 | blank.
    // Character segments need at least one frame; a separator blank needs one
    // frame only between equal characters.
    let n = indices.len();
    let mut min_len = vec![0usize; 2 * n + 1];
    for i in 0..n {
        min_len[2 * i + 1] = 1;
        if i + 1 < n && indices[i] == indices[i + 1] {
            min_len[2 * i + 2] = 1;
        }
    }
    let required: usize = min_len.iter().sum();
    if total_frames < required {
        return Err(Error::InsufficientFrames {
            required,
            budget: total_frames,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lens = min_len;
    for _ in 0..total_frames - required {
        let i = rng.gen_range(0..lens.len());
        lens[i] += 1;
    }

    let blank = labels.blank_index();
    let mut path = Vec::with_capacity(total_frames);
    for (seg, &len) in lens.iter().enumerate() {
        let label = if seg % 2 == 0 { blank } else { indices[seg / 2] };
        path.extend(std::iter::repeat(label).take(len));
    }
    debug_assert_eq!(path.len(), total_frames);
    Ok(GreedyPath::new(path))
}
