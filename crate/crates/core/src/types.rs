//! Domain types shared across the pipeline.
//!
//! All types are immutable after construction; constructors validate the
//! structural invariants so downstream code can rely on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The character inventory of a language plus the CTC blank token.
///
/// `characters` is the plain set `L`; label indices used by emissions and
/// decoded paths range over the extended set `L' = L ∪ {blank}`, with the
/// blank occupying `blank_index` and the characters filling the remaining
/// dense indices in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    characters: Vec<char>,
    blank_index: usize,
}

impl LabelSet {
    pub fn new(characters: Vec<char>, blank_index: usize) -> Result<Self> {
        if blank_index > characters.len() {
            return Err(Error::invalid(
                "label set",
                format!(
                    "blank index {} exceeds extended set size {}",
                    blank_index,
                    characters.len() + 1
                ),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for &c in &characters {
            if !seen.insert(c) {
                return Err(Error::invalid(
                    "label set",
                    format!("duplicate character {c:?}"),
                ));
            }
        }
        Ok(LabelSet {
            characters,
            blank_index,
        })
    }

    /// Size of the extended set `L'` (characters plus blank).
    pub fn label_count(&self) -> usize {
        self.characters.len() + 1
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    /// Characters of `L`, in label order (blank excluded).
    pub fn characters(&self) -> &[char] {
        &self.characters
    }

    /// Character for a label index; `None` for the blank.
    ///
    /// # Panics
    /// Panics if `label >= label_count()`.
    pub fn char_for_label(&self, label: usize) -> Option<char> {
        use std::cmp::Ordering::*;
        match label.cmp(&self.blank_index) {
            Equal => None,
            Less => Some(self.characters[label]),
            Greater => {
                assert!(label < self.label_count(), "label {label} out of range");
                Some(self.characters[label - 1])
            }
        }
    }

    /// Label index for a character, or `None` if it is not in `L`.
    pub fn label_for_char(&self, c: char) -> Option<usize> {
        self.characters.iter().position(|&x| x == c).map(|i| {
            if i >= self.blank_index {
                i + 1
            } else {
                i
            }
        })
    }
}

/// Per-frame log-scores over an extended label set, row-major `T x |L'|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    audio_id: String,
    frame_count: usize,
    label_count: usize,
    scores: Vec<f32>,
    frame_duration_ms: f64,
}

impl EmissionMatrix {
    pub fn new(
        audio_id: impl Into<String>,
        frame_count: usize,
        label_count: usize,
        scores: Vec<f32>,
        frame_duration_ms: f64,
    ) -> Result<Self> {
        let expected = frame_count.checked_mul(label_count).ok_or_else(|| {
            Error::invalid("emission matrix", "frame_count * label_count overflows")
        })?;
        if scores.len() != expected {
            return Err(Error::invalid(
                "emission matrix",
                format!("expected {expected} scores, got {}", scores.len()),
            ));
        }
        if !(frame_duration_ms > 0.0) {
            return Err(Error::invalid(
                "emission matrix",
                format!("frame duration must be positive, got {frame_duration_ms}"),
            ));
        }
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteScore {
                    frame: if label_count == 0 { 0 } else { i / label_count },
                    label: if label_count == 0 { 0 } else { i % label_count },
                });
            }
        }
        Ok(EmissionMatrix {
            audio_id: audio_id.into(),
            frame_count,
            label_count,
            scores,
            frame_duration_ms,
        })
    }

    pub fn audio_id(&self) -> &str {
        &self.audio_id
    }

    pub fn with_audio_id(mut self, audio_id: impl Into<String>) -> Self {
        self.audio_id = audio_id.into();
        self
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn frame_duration_ms(&self) -> f64 {
        self.frame_duration_ms
    }

    /// Scores of one frame.
    pub fn row(&self, frame: usize) -> &[f32] {
        let base = frame * self.label_count;
        &self.scores[base..base + self.label_count]
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    /// Total audio duration covered by the matrix, in milliseconds.
    pub fn duration_ms(&self) -> f64 {
        self.frame_count as f64 * self.frame_duration_ms
    }
}

/// Per-frame label indices produced by greedy decoding, length `T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyPath {
    labels: Vec<usize>,
}

impl GreedyPath {
    pub fn new(labels: Vec<usize>) -> Self {
        GreedyPath { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Inclusive frame index pair `(start, end)` covering one decoded character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
}

impl FrameSpan {
    pub fn new(start: usize, end: usize) -> Self {
        FrameSpan { start, end }
    }

    /// Number of frames covered (inclusive bounds).
    pub fn frames(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Per-character frame spans recovered during CTC collapse.
///
/// Entries are strictly ordered: each span ends before the next one starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanTable {
    entries: Vec<FrameSpan>,
}

impl SpanTable {
    pub fn new(entries: Vec<FrameSpan>) -> Result<Self> {
        for (i, span) in entries.iter().enumerate() {
            if span.start > span.end {
                return Err(Error::invalid(
                    "span table",
                    format!("entry {i} has start {} after end {}", span.start, span.end),
                ));
            }
            if i > 0 && entries[i - 1].end >= span.start {
                return Err(Error::invalid(
                    "span table",
                    format!(
                        "entry {i} starting at {} overlaps previous ending at {}",
                        span.start,
                        entries[i - 1].end
                    ),
                ));
            }
        }
        Ok(SpanTable { entries })
    }

    pub fn entries(&self) -> &[FrameSpan] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> FrameSpan {
        self.entries[i]
    }
}

/// Collapsed character sequence `P` with one frame span per character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedText {
    chars: Vec<char>,
    spans: SpanTable,
}

impl PredictedText {
    pub fn new(chars: Vec<char>, spans: SpanTable) -> Result<Self> {
        if chars.len() != spans.len() {
            return Err(Error::invalid(
                "predicted text",
                format!("{} characters but {} spans", chars.len(), spans.len()),
            ));
        }
        Ok(PredictedText { chars, spans })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn spans(&self) -> &SpanTable {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Substring over an inclusive character range.
    pub fn substring(&self, start: usize, end: usize) -> String {
        self.chars[start..=end].iter().collect()
    }
}

/// Inclusive character index pair `(start, end)` of one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Self {
        CharRange { start, end }
    }
}

/// Ordered, disjoint sentence ranges over a reference document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceBoundaries {
    ranges: Vec<CharRange>,
}

impl SentenceBoundaries {
    pub fn new(ranges: Vec<CharRange>) -> Result<Self> {
        for (i, r) in ranges.iter().enumerate() {
            if r.start > r.end {
                return Err(Error::invalid(
                    "sentence boundaries",
                    format!("range {i} has start {} after end {}", r.start, r.end),
                ));
            }
            if i > 0 && ranges[i - 1].end >= r.start {
                return Err(Error::invalid(
                    "sentence boundaries",
                    format!(
                        "range {i} starting at {} overlaps previous ending at {}",
                        r.start,
                        ranges[i - 1].end
                    ),
                ));
            }
        }
        Ok(SentenceBoundaries { ranges })
    }

    pub fn ranges(&self) -> &[CharRange] {
        &self.ranges
    }

    /// Number of sentences `W`.
    pub fn count(&self) -> usize {
        self.ranges.len()
    }
}

/// Cleaned reference transcript `R` with sentence boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceDocument {
    text: Vec<char>,
    boundaries: SentenceBoundaries,
}

impl ReferenceDocument {
    pub fn new(text: Vec<char>, boundaries: SentenceBoundaries) -> Result<Self> {
        if let Some(last) = boundaries.ranges().last() {
            if last.end >= text.len() {
                return Err(Error::invalid(
                    "reference document",
                    format!(
                        "boundary ends at {} but text has {} characters",
                        last.end,
                        text.len()
                    ),
                ));
            }
        }
        Ok(ReferenceDocument { text, boundaries })
    }

    pub fn text(&self) -> &[char] {
        &self.text
    }

    pub fn text_string(&self) -> String {
        self.text.iter().collect()
    }

    pub fn boundaries(&self) -> &SentenceBoundaries {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Text of one sentence, including its end-of-sentence character.
    pub fn sentence_text(&self, index: usize) -> String {
        let r = self.boundaries.ranges()[index];
        self.text[r.start..=r.end].iter().collect()
    }
}

/// Match, mismatch, and gap scores for global alignment.
///
/// Construction rejects parameter sets where gaps or mismatches pay as well
/// as matches, since those make degenerate all-gap alignments optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreParams {
    match_score: i32,
    mismatch_score: i32,
    gap_score: i32,
}

impl ScoreParams {
    pub fn new(match_score: i32, mismatch_score: i32, gap_score: i32) -> Result<Self> {
        if match_score <= mismatch_score {
            return Err(Error::invalid(
                "score parameters",
                format!("match {match_score} must exceed mismatch {mismatch_score}"),
            ));
        }
        if match_score <= gap_score {
            return Err(Error::invalid(
                "score parameters",
                format!("match {match_score} must exceed gap {gap_score}"),
            ));
        }
        Ok(ScoreParams {
            match_score,
            mismatch_score,
            gap_score,
        })
    }

    pub fn match_score(&self) -> i32 {
        self.match_score
    }

    pub fn mismatch_score(&self) -> i32 {
        self.mismatch_score
    }

    pub fn gap_score(&self) -> i32 {
        self.gap_score
    }
}

impl Default for ScoreParams {
    /// +10 / -5 / -5.
    fn default() -> Self {
        ScoreParams {
            match_score: 10,
            mismatch_score: -5,
            gap_score: -5,
        }
    }
}

/// One step of a global alignment between `R` and `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignStep {
    /// `R[r]` aligned to `P[p]` with equal characters.
    Match { r: usize, p: usize },
    /// `R[r]` aligned to `P[p]` with differing characters.
    Mismatch { r: usize, p: usize },
    /// `R[r]` aligned to a gap in `P`.
    GapInP { r: usize },
    /// `P[p]` aligned to a gap in `R`.
    GapInR { p: usize },
}

impl AlignStep {
    /// `(r, p)` for steps that consume both sequences.
    pub fn pair(&self) -> Option<(usize, usize)> {
        match *self {
            AlignStep::Match { r, p } | AlignStep::Mismatch { r, p } => Some((r, p)),
            _ => None,
        }
    }
}

/// Global character-level correspondence between `R` and `P`, with gaps.
///
/// Replaying the steps consumes every index of `R` and of `P` exactly once,
/// in order; the induced partial map from `R` indices to `P` indices is
/// non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentMap {
    steps: Vec<AlignStep>,
}

impl AlignmentMap {
    pub fn new(steps: Vec<AlignStep>) -> Self {
        AlignmentMap { steps }
    }

    pub fn steps(&self) -> &[AlignStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Replays the steps and checks that they consume exactly `0..r_len`
    /// and `0..p_len`, each in order.
    pub fn validate(&self, r_len: usize, p_len: usize) -> Result<()> {
        let mut next_r = 0usize;
        let mut next_p = 0usize;
        for (i, step) in self.steps.iter().enumerate() {
            let (r, p) = match *step {
                AlignStep::Match { r, p } | AlignStep::Mismatch { r, p } => (Some(r), Some(p)),
                AlignStep::GapInP { r } => (Some(r), None),
                AlignStep::GapInR { p } => (None, Some(p)),
            };
            if let Some(r) = r {
                if r != next_r {
                    return Err(Error::invalid(
                        "alignment map",
                        format!("step {i} consumes r index {r}, expected {next_r}"),
                    ));
                }
                next_r += 1;
            }
            if let Some(p) = p {
                if p != next_p {
                    return Err(Error::invalid(
                        "alignment map",
                        format!("step {i} consumes p index {p}, expected {next_p}"),
                    ));
                }
                next_p += 1;
            }
        }
        if next_r != r_len || next_p != p_len {
            return Err(Error::invalid(
                "alignment map",
                format!("consumed {next_r}/{r_len} r indices and {next_p}/{p_len} p indices"),
            ));
        }
        Ok(())
    }
}

/// One mined audio/text pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub audio_id: String,
    pub start_ms: f64,
    pub end_ms: f64,
    pub ref_text: String,
    pub hyp_text: String,
    pub score: f64,
}

impl SegmentRecord {
    /// Checks the per-record invariants (interval ordering, score range).
    pub fn validate(&self) -> Result<()> {
        if !(self.start_ms >= 0.0 && self.end_ms > self.start_ms) {
            return Err(Error::invalid(
                "segment record",
                format!(
                    "interval [{}, {}) is not ordered and non-negative",
                    self.start_ms, self.end_ms
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::invalid(
                "segment record",
                format!("score {} outside [0, 1]", self.score),
            ));
        }
        Ok(())
    }

    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}
