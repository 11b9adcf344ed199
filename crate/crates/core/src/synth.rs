//! Ground-truth synthetic corpus generator, the brute-force alignment
//! oracle, and the evaluation harness that scores pipeline output against
//! generator ground truth.
//!
//! The generator reproduces the irregularities long-audio mining has to
//! survive: intro/outro music, interior non-transcribed speech, extraneous
//! headers, reader word skips and additions, OCR word joins, and ASR-side
//! character noise. Emissions are near-one-hot (winning label at log-score
//! 0, all others at -10) so greedy decoding is unambiguous; the generator
//! exercises alignment, not acoustic modeling.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{
    CharRange, EmissionMatrix, FrameSpan, LabelSet, ReferenceDocument, ScoreParams,
    SegmentRecord, SentenceBoundaries,
};

/// Fault injection parameters. All rates are probabilities; frame ranges are
/// inclusive `(min, max)` bounds sampled uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultModel {
    /// ASR-side character substitutions (letters only; word separators stay intact).
    pub sub_rate: f64,
    /// ASR-side spurious character insertions.
    pub ins_rate: f64,
    /// ASR-side character deletions.
    pub del_rate: f64,
    /// Per word gap: the transcript joins two words into one.
    pub ocr_join_rate: f64,
    /// Intro music/noise frames with no transcript.
    pub untranscribed_prefix_frames: (usize, usize),
    /// Outro music/noise frames with no transcript.
    pub untranscribed_suffix_frames: (usize, usize),
    /// Per document: insert one stretch of spoken-but-untranscribed words at
    /// a uniformly chosen interior sentence gap.
    pub interior_untranscribed_prob: f64,
    /// Per document: prepend a short never-spoken header sentence.
    pub extraneous_header_prob: f64,
    /// Per word: the reader skips it.
    pub skipped_word_prob: f64,
    /// Per word: the reader speaks an extra word after it.
    pub extra_word_prob: f64,
    pub seed: u64,
}

impl Default for FaultModel {
    fn default() -> Self {
        FaultModel {
            sub_rate: 0.0,
            ins_rate: 0.0,
            del_rate: 0.0,
            ocr_join_rate: 0.0,
            untranscribed_prefix_frames: (0, 0),
            untranscribed_suffix_frames: (0, 0),
            interior_untranscribed_prob: 0.0,
            extraneous_header_prob: 0.0,
            skipped_word_prob: 0.0,
            extra_word_prob: 0.0,
            seed: 0,
        }
    }
}

impl FaultModel {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("sub_rate", self.sub_rate),
            ("ins_rate", self.ins_rate),
            ("del_rate", self.del_rate),
            ("ocr_join_rate", self.ocr_join_rate),
            ("skipped_word_prob", self.skipped_word_prob),
            ("extra_word_prob", self.extra_word_prob),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::invalid(
                    "fault model",
                    format!("{name} must be in [0, 1), got {rate}"),
                ));
            }
        }
        for (name, prob) in [
            ("interior_untranscribed_prob", self.interior_untranscribed_prob),
            ("extraneous_header_prob", self.extraneous_header_prob),
        ] {
            if !(0.0..=1.0).contains(&prob) {
                return Err(Error::invalid(
                    "fault model",
                    format!("{name} must be in [0, 1], got {prob}"),
                ));
            }
        }
        for (name, range) in [
            ("untranscribed_prefix_frames", self.untranscribed_prefix_frames),
            ("untranscribed_suffix_frames", self.untranscribed_suffix_frames),
        ] {
            if range.0 > range.1 {
                return Err(Error::invalid(
                    "fault model",
                    format!("{name} range ({}, {}) is inverted", range.0, range.1),
                ));
            }
        }
        Ok(())
    }
}

/// Ground truth for one generated sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceTruth {
    pub text: String,
    /// True frame interval of the spoken sentence; `None` if never spoken.
    pub interval: Option<FrameSpan>,
    /// True when the audio and the transcript disagree in any way.
    pub corrupted: bool,
}

/// Ground truth for one generated document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub audio_id: String,
    pub frame_duration_ms: f64,
    pub total_frames: usize,
    pub sentences: Vec<SentenceTruth>,
    /// Injected frame spans with no transcript (intro, outro, interior speech).
    pub untranscribed: Vec<FrameSpan>,
}

/// A generated document: emissions, reference text, and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDocument {
    pub emissions: EmissionMatrix,
    pub document: ReferenceDocument,
    pub truth: GroundTruth,
}

const FRAME_DURATION_MS: f64 = 25.0;
const EMISSION_HIT: f32 = 0.0;
const EMISSION_MISS: f32 = -10.0;

struct SentencePlan {
    text: Vec<char>,
    spoken: Vec<char>,
    corrupted: bool,
}

struct FrameBuilder<'a> {
    labels: &'a LabelSet,
    frames: Vec<usize>,
    last_frame_label: Option<usize>,
}

impl<'a> FrameBuilder<'a> {
    fn new(labels: &'a LabelSet) -> Self {
        FrameBuilder {
            labels,
            frames: Vec::new(),
            last_frame_label: None,
        }
    }

    fn push_blanks(&mut self, count: usize) {
        let blank = self.labels.blank_index();
        self.frames.extend(std::iter::repeat(blank).take(count));
        if count > 0 {
            self.last_frame_label = None;
        }
    }

    /// Emits one character as a run of 1-5 frames after 0-3 blank frames,
    /// forcing a blank separator when the previous frame carries the same
    /// label (CTC would merge the runs otherwise).
    fn push_char(&mut self, c: char, rng: &mut ChaCha8Rng) -> Result<FrameSpan> {
        let label = self
            .labels
            .label_for_char(c)
            .ok_or(Error::UnknownChar { ch: c })?;
        let mut blanks = rng.gen_range(0..=3);
        if blanks == 0 && self.last_frame_label == Some(label) {
            blanks = 1;
        }
        self.push_blanks(blanks);
        let run = rng.gen_range(1..=5);
        let start = self.frames.len();
        self.frames.extend(std::iter::repeat(label).take(run));
        self.last_frame_label = Some(label);
        Ok(FrameSpan::new(start, self.frames.len() - 1))
    }

    /// Emits noise frames with uniformly random labels from `pool`, the
    /// worst case for collapse. The pool holds letters only: separators and
    /// terminators are the characters alignment anchors on, so noise never
    /// mimics them.
    fn push_noise(
        &mut self,
        count: usize,
        pool: &[char],
        rng: &mut ChaCha8Rng,
    ) -> Option<FrameSpan> {
        if count == 0 {
            return None;
        }
        let start = self.frames.len();
        for _ in 0..count {
            let c = pool[rng.gen_range(0..pool.len())];
            let label = self.labels.label_for_char(c).expect("own character");
            self.frames.push(label);
            self.last_frame_label = Some(label);
        }
        let span = FrameSpan::new(start, self.frames.len() - 1);
        // silence between noise and speech keeps collapse from merging runs
        self.push_blanks(rng.gen_range(1..=3));
        Some(span)
    }

    fn into_matrix(self, audio_id: String) -> EmissionMatrix {
        let label_count = self.labels.label_count();
        let mut scores = vec![EMISSION_MISS; self.frames.len() * label_count];
        for (t, &label) in self.frames.iter().enumerate() {
            scores[t * label_count + label] = EMISSION_HIT;
        }
        EmissionMatrix::new(
            audio_id,
            self.frames.len(),
            label_count,
            scores,
            FRAME_DURATION_MS,
        )
        .expect("one-hot matrix is well-formed")
    }
}

/// Generates a random document over the label set, applies the fault model,
/// and emits near-one-hot emissions together with exact ground truth.
/// Deterministic given the fault model's seed.
pub fn generate(
    n_sentences: usize,
    fm: &FaultModel,
    labels: &LabelSet,
) -> Result<SyntheticDocument> {
    fm.validate()?;
    if labels.characters().len() < 4 {
        return Err(Error::invalid(
            "label set",
            format!(
                "generation needs at least 4 non-blank characters, got {}",
                labels.characters().len()
            ),
        ));
    }
    let letters: Vec<char> = labels
        .characters()
        .iter()
        .copied()
        .filter(|&c| c != ' ' && c != '.')
        .collect();
    if letters.is_empty() {
        return Err(Error::invalid(
            "label set",
            "generation needs at least one non-separator character",
        ));
    }
    let word_sep = labels.label_for_char(' ').map(|_| ' ');
    let terminator = labels.label_for_char('.').map(|_| '.');

    let mut rng = ChaCha8Rng::seed_from_u64(fm.seed);
    let random_word = |rng: &mut ChaCha8Rng| -> Vec<char> {
        let len = rng.gen_range(2..=8);
        (0..len)
            .map(|_| letters[rng.gen_range(0..letters.len())])
            .collect()
    };
    let join_words = |words: &[Vec<char>], joins: Option<&[bool]>| -> Vec<char> {
        let mut out = Vec::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                let joined = joins.map_or(false, |j| j[i - 1]);
                if let (Some(sep), false) = (word_sep, joined) {
                    out.push(sep);
                }
            }
            out.extend(w.iter());
        }
        out
    };

    // Plan the text and its spoken counterpart.
    let mut plans: Vec<SentencePlan> = Vec::new();
    if fm.extraneous_header_prob > 0.0 && rng.gen_bool(fm.extraneous_header_prob) {
        let words: Vec<Vec<char>> = (0..rng.gen_range(2..=3)).map(|_| random_word(&mut rng)).collect();
        let mut text = join_words(&words, None);
        text.extend(terminator);
        plans.push(SentencePlan {
            text,
            spoken: Vec::new(),
            corrupted: true,
        });
    }

    for _ in 0..n_sentences {
        let word_count = rng.gen_range(3..=8);
        let words: Vec<Vec<char>> = (0..word_count).map(|_| random_word(&mut rng)).collect();
        let mut corrupted = false;

        // reader-side word faults
        let mut spoken_words: Vec<Vec<char>> = Vec::new();
        for w in &words {
            if fm.skipped_word_prob > 0.0 && rng.gen_bool(fm.skipped_word_prob) {
                corrupted = true;
            } else {
                spoken_words.push(w.clone());
            }
            if fm.extra_word_prob > 0.0 && rng.gen_bool(fm.extra_word_prob) {
                spoken_words.push(random_word(&mut rng));
                corrupted = true;
            }
        }

        // ASR-side character noise on letters only
        let mut noisy_words: Vec<Vec<char>> = Vec::new();
        for w in &spoken_words {
            let mut noisy = Vec::with_capacity(w.len());
            for &c in w {
                if fm.del_rate > 0.0 && rng.gen_bool(fm.del_rate) {
                    corrupted = true;
                    continue;
                }
                if fm.sub_rate > 0.0 && rng.gen_bool(fm.sub_rate) {
                    let replacement = loop {
                        let pick = letters[rng.gen_range(0..letters.len())];
                        if pick != c || letters.len() == 1 {
                            break pick;
                        }
                    };
                    corrupted = true;
                    noisy.push(replacement);
                } else {
                    noisy.push(c);
                }
                if fm.ins_rate > 0.0 && rng.gen_bool(fm.ins_rate) {
                    noisy.push(letters[rng.gen_range(0..letters.len())]);
                    corrupted = true;
                }
            }
            if noisy.is_empty() {
                corrupted = true;
            } else {
                noisy_words.push(noisy);
            }
        }

        // transcript-side word joins
        let joins: Vec<bool> = (1..words.len())
            .map(|_| fm.ocr_join_rate > 0.0 && rng.gen_bool(fm.ocr_join_rate))
            .collect();
        if joins.iter().any(|&j| j) {
            corrupted = true;
        }

        let mut text = join_words(&words, Some(&joins));
        text.extend(terminator);
        let mut spoken = join_words(&noisy_words, None);
        if !spoken.is_empty() {
            spoken.extend(terminator);
        } else {
            corrupted = true;
        }
        plans.push(SentencePlan {
            text,
            spoken,
            corrupted,
        });
    }

    // Where to inject interior non-transcribed speech.
    let announcement_gap = if plans.len() >= 2
        && fm.interior_untranscribed_prob > 0.0
        && rng.gen_bool(fm.interior_untranscribed_prob)
    {
        Some(rng.gen_range(1..plans.len()))
    } else {
        None
    };

    // Assemble the audio.
    let mut builder = FrameBuilder::new(labels);
    let mut untranscribed = Vec::new();
    let prefix_len = rng.gen_range(fm.untranscribed_prefix_frames.0..=fm.untranscribed_prefix_frames.1);
    untranscribed.extend(builder.push_noise(prefix_len, &letters, &mut rng));

    let mut spoken_anything = false;
    let mut intervals: Vec<Option<FrameSpan>> = Vec::with_capacity(plans.len());
    for (i, plan) in plans.iter().enumerate() {
        if announcement_gap == Some(i) {
            let words: Vec<Vec<char>> = (0..rng.gen_range(4..=10)).map(|_| random_word(&mut rng)).collect();
            let chars = join_words(&words, None);
            if spoken_anything {
                if let Some(sep) = word_sep {
                    builder.push_char(sep, &mut rng)?;
                }
            }
            let mut first = None;
            let mut last = None;
            for &c in &chars {
                let span = builder.push_char(c, &mut rng)?;
                first.get_or_insert(span.start);
                last = Some(span.end);
            }
            if let (Some(s), Some(e)) = (first, last) {
                untranscribed.push(FrameSpan::new(s, e));
                spoken_anything = true;
            }
        }
        if plan.spoken.is_empty() {
            intervals.push(None);
            continue;
        }
        if spoken_anything {
            if let Some(sep) = word_sep {
                builder.push_char(sep, &mut rng)?;
            }
        }
        let mut first = None;
        let mut last = None;
        for &c in &plan.spoken {
            let span = builder.push_char(c, &mut rng)?;
            first.get_or_insert(span.start);
            last = Some(span.end);
        }
        intervals.push(Some(FrameSpan::new(
            first.expect("nonempty spoken"),
            last.expect("nonempty spoken"),
        )));
        spoken_anything = true;
    }

    let suffix_len = rng.gen_range(fm.untranscribed_suffix_frames.0..=fm.untranscribed_suffix_frames.1);
    if suffix_len > 0 {
        builder.push_blanks(rng.gen_range(1..=3));
        untranscribed.extend(builder.push_noise(suffix_len, &letters, &mut rng));
    }

    // Assemble the reference text and boundaries.
    let mut text = Vec::new();
    let mut ranges = Vec::with_capacity(plans.len());
    for (i, plan) in plans.iter().enumerate() {
        if i > 0 {
            text.push(word_sep.unwrap_or(' '));
        }
        let start = text.len();
        text.extend(plan.text.iter());
        ranges.push(CharRange::new(start, text.len() - 1));
    }
    let document = ReferenceDocument::new(text, SentenceBoundaries::new(ranges)?)?;

    let audio_id = format!("synth-{:016x}", fm.seed);
    let truth = GroundTruth {
        audio_id: audio_id.clone(),
        frame_duration_ms: FRAME_DURATION_MS,
        total_frames: builder.frames.len(),
        sentences: plans
            .iter()
            .zip(&intervals)
            .map(|(plan, &interval)| SentenceTruth {
                text: plan.text.iter().collect(),
                interval,
                corrupted: plan.corrupted,
            })
            .collect(),
        untranscribed,
    };
    let emissions = builder.into_matrix(audio_id);
    Ok(SyntheticDocument {
        emissions,
        document,
        truth,
    })
}

/// Precision/recall style evaluation of mined records against ground truth.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub boundary_mae_frames: f64,
    pub yield_fraction: f64,
    pub true_positives: usize,
    pub relevant_true_positives: usize,
    pub record_count: usize,
    pub relevant_count: usize,
    pub boundary_error_frames_total: f64,
    pub audio_total_ms: f64,
    pub audio_kept_ms: f64,
}

impl EvalReport {
    fn ratios(mut self) -> Self {
        self.precision = if self.record_count == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.record_count as f64
        };
        self.recall = if self.relevant_count == 0 {
            1.0
        } else {
            self.relevant_true_positives as f64 / self.relevant_count as f64
        };
        self.boundary_mae_frames = if self.true_positives == 0 {
            0.0
        } else {
            self.boundary_error_frames_total / self.true_positives as f64
        };
        self.yield_fraction = if self.audio_total_ms > 0.0 {
            self.audio_kept_ms / self.audio_total_ms
        } else {
            0.0
        };
        self
    }

    /// Micro-averaged aggregate across documents.
    pub fn merged(reports: &[EvalReport]) -> EvalReport {
        let mut total = EvalReport::default();
        for r in reports {
            total.true_positives += r.true_positives;
            total.relevant_true_positives += r.relevant_true_positives;
            total.record_count += r.record_count;
            total.relevant_count += r.relevant_count;
            total.boundary_error_frames_total += r.boundary_error_frames_total;
            total.audio_total_ms += r.audio_total_ms;
            total.audio_kept_ms += r.audio_kept_ms;
        }
        total.ratios()
    }
}

/// Scores mined records against ground truth from the same document.
///
/// A record is a true positive when its text matches a spoken ground-truth
/// sentence and both boundaries land within `tol_frames` of that sentence's
/// interval. Precision is over records (1.0 for no records); recall counts
/// recovered uncorrupted sentences over all uncorrupted sentences.
pub fn evaluate(
    records: &[SegmentRecord],
    gt: &GroundTruth,
    tol_frames: usize,
) -> Result<EvalReport> {
    for r in records {
        if r.audio_id != gt.audio_id {
            return Err(Error::AudioIdMismatch {
                records: r.audio_id.clone(),
                truth: gt.audio_id.clone(),
            });
        }
    }

    let d = gt.frame_duration_ms;
    let mut matched = vec![false; gt.sentences.len()];
    let mut report = EvalReport {
        record_count: records.len(),
        relevant_count: gt.sentences.iter().filter(|s| !s.corrupted).count(),
        audio_total_ms: gt.total_frames as f64 * d,
        ..EvalReport::default()
    };

    for record in records {
        report.audio_kept_ms += record.duration_ms();
        let rec_start = (record.start_ms / d).round() as i64;
        let rec_end = (record.end_ms / d).round() as i64 - 1;

        let mut best: Option<(usize, f64, bool)> = None; // (sentence, error, within tol)
        for (i, sentence) in gt.sentences.iter().enumerate() {
            if matched[i] || sentence.text != record.ref_text {
                continue;
            }
            let Some(interval) = sentence.interval else {
                continue;
            };
            let ds = (rec_start - interval.start as i64).abs();
            let de = (rec_end - interval.end as i64).abs();
            let err = (ds + de) as f64 / 2.0;
            let within = ds <= tol_frames as i64 && de <= tol_frames as i64;
            if best.map_or(true, |(_, e, _)| err < e) {
                best = Some((i, err, within));
            }
        }
        if let Some((i, err, true)) = best {
            matched[i] = true;
            report.true_positives += 1;
            report.boundary_error_frames_total += err;
            if !gt.sentences[i].corrupted {
                report.relevant_true_positives += 1;
            }
        }
    }

    Ok(report.ratios())
}

const ORACLE_MAX_LEN: usize = 16;

/// Maximum global alignment score by exhaustive three-way recursion.
/// Guarded to short inputs; this is the oracle the dynamic program is
/// checked against, so it stays deliberately naive.
pub fn brute_force_align(r: &str, p: &str, scores: &ScoreParams) -> Result<i64> {
    let rc: Vec<char> = r.chars().collect();
    let pc: Vec<char> = p.chars().collect();
    let len = rc.len() + pc.len();
    if len > ORACLE_MAX_LEN {
        return Err(Error::OracleGuard {
            len,
            max: ORACLE_MAX_LEN,
        });
    }

    fn recurse(r: &[char], p: &[char], s: &ScoreParams) -> i64 {
        if r.is_empty() {
            return p.len() as i64 * s.gap_score() as i64;
        }
        if p.is_empty() {
            return r.len() as i64 * s.gap_score() as i64;
        }
        let pair = if r[0] == p[0] {
            s.match_score() as i64
        } else {
            s.mismatch_score() as i64
        };
        (recurse(&r[1..], &p[1..], s) + pair)
            .max(recurse(&r[1..], p, s) + s.gap_score() as i64)
            .max(recurse(r, &p[1..], s) + s.gap_score() as i64)
    }

    Ok(recurse(&rc, &pc, scores))
}
