//! The end-to-end mining pipeline: decode, align, project, score, filter,
//! plus corpus-level batch orchestration and yield accounting.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::align::{align, project_sentences, AlignerConfig};
use crate::ctc::{collapse, greedy_decode};
use crate::error::{Error, Result};
use crate::io::{read_emission_matrix, read_predecoded, write_manifest_line};
use crate::textproc::{clean_document, normalize, read_ocr_tokens, segment_sentences, SegmenterConfig};
use crate::types::{EmissionMatrix, LabelSet, PredictedText, ReferenceDocument, SegmentRecord};

/// Keep/discard threshold on the similarity ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub tau: f64,
}

impl FilterConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::invalid(
                "filter config",
                format!("tau must be in (0, 1], got {tau}"),
            ));
        }
        Ok(FilterConfig { tau })
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { tau: 0.8 }
    }
}

/// Per-document (or aggregated) mining statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MiningReport {
    pub total_sentences: usize,
    pub kept: usize,
    pub dropped_low_score: usize,
    pub dropped_empty: usize,
    pub audio_total_ms: f64,
    pub audio_kept_ms: f64,
    pub yield_fraction: f64,
}

impl MiningReport {
    fn finish(mut self) -> Self {
        self.yield_fraction = if self.audio_total_ms > 0.0 {
            self.audio_kept_ms / self.audio_total_ms
        } else {
            0.0
        };
        self
    }

    pub fn merge(&mut self, other: &MiningReport) {
        self.total_sentences += other.total_sentences;
        self.kept += other.kept;
        self.dropped_low_score += other.dropped_low_score;
        self.dropped_empty += other.dropped_empty;
        self.audio_total_ms += other.audio_total_ms;
        self.audio_kept_ms += other.audio_kept_ms;
        self.yield_fraction = if self.audio_total_ms > 0.0 {
            self.audio_kept_ms / self.audio_total_ms
        } else {
            0.0
        };
    }
}

/// Minimum edit distance with unit-cost insertions, deletions, and
/// substitutions, over code points.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(diag + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

/// Levenshtein similarity ratio `1 - LD(r, p) / (|r| + |p|)`.
///
/// Equals 1 exactly when the strings are equal and stays within `[0, 1]`;
/// undefined (an error) when both strings are empty.
pub fn alignment_score(r: &str, p: &str) -> Result<f64> {
    let denom = r.chars().count() + p.chars().count();
    if denom == 0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(1.0 - levenshtein(r, p) as f64 / denom as f64)
}

/// Mines one document from its emission matrix: decode, collapse, align,
/// project, score, filter.
pub fn mine_document(
    matrix: &EmissionMatrix,
    labels: &LabelSet,
    doc: &ReferenceDocument,
    aligner: &AlignerConfig,
    filter: &FilterConfig,
    pad_ms: f64,
) -> Result<(Vec<SegmentRecord>, MiningReport)> {
    let path = greedy_decode(matrix);
    let pred = collapse(&path, labels)?;
    mine_predicted(
        &pred,
        matrix.frame_count(),
        matrix.frame_duration_ms(),
        matrix.audio_id(),
        doc,
        aligner,
        filter,
        pad_ms,
    )
}

/// Mines one document from already-decoded text with frame spans (the
/// bring-your-own-CTC path).
#[allow(clippy::too_many_arguments)]
pub fn mine_predicted(
    pred: &PredictedText,
    total_frames: usize,
    frame_duration_ms: f64,
    audio_id: &str,
    doc: &ReferenceDocument,
    aligner: &AlignerConfig,
    filter: &FilterConfig,
    pad_ms: f64,
) -> Result<(Vec<SegmentRecord>, MiningReport)> {
    FilterConfig::new(filter.tau)?;
    if !(pad_ms >= 0.0) {
        return Err(Error::invalid(
            "pad",
            format!("pad_ms must be non-negative, got {pad_ms}"),
        ));
    }
    let map = align(doc, pred, aligner)?;
    let spans = project_sentences(doc, &map, pred);

    let mut report = MiningReport {
        total_sentences: doc.boundaries().count(),
        audio_total_ms: total_frames as f64 * frame_duration_ms,
        ..MiningReport::default()
    };

    struct Kept {
        ref_text: String,
        hyp_text: String,
        score: f64,
        start_frame: usize,
        end_frame: usize,
    }
    let mut kept = Vec::new();
    for span in &spans {
        let (Some(p_range), Some(frame_range)) = (span.p_range, span.frame_range) else {
            report.dropped_empty += 1;
            continue;
        };
        let ref_text = doc.sentence_text(span.sentence_index);
        let hyp_text = pred.substring(p_range.start, p_range.end);
        let score = alignment_score(&ref_text, &hyp_text)?;
        if score >= filter.tau {
            kept.push(Kept {
                ref_text,
                hyp_text,
                score,
                start_frame: frame_range.start,
                end_frame: frame_range.end,
            });
        } else {
            report.dropped_low_score += 1;
        }
    }

    // Padding never crosses the midpoint of the gap to a neighboring kept
    // segment, so intervals stay disjoint.
    let d = frame_duration_ms;
    let mut records = Vec::with_capacity(kept.len());
    for (k, item) in kept.iter().enumerate() {
        let raw_start = item.start_frame as f64 * d;
        let raw_end = (item.end_frame + 1) as f64 * d;
        let left_gap = if k == 0 {
            f64::INFINITY
        } else {
            raw_start - (kept[k - 1].end_frame + 1) as f64 * d
        };
        let right_gap = if k + 1 == kept.len() {
            f64::INFINITY
        } else {
            kept[k + 1].start_frame as f64 * d - raw_end
        };
        let start_ms = (raw_start - pad_ms.min(left_gap / 2.0)).max(0.0);
        let end_ms = raw_end + pad_ms.min(right_gap / 2.0);
        let record = SegmentRecord {
            audio_id: audio_id.to_string(),
            start_ms,
            end_ms,
            ref_text: item.ref_text.clone(),
            hyp_text: item.hyp_text.clone(),
            score: item.score,
        };
        record.validate()?;
        report.audio_kept_ms += record.duration_ms();
        report.kept += 1;
        records.push(record);
    }

    Ok((records, report.finish()))
}

/// How the transcript side of a mining job is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptKind {
    /// `transcript` is an OCR token dump; `emissions` is an emission matrix.
    OcrTokens,
    /// `transcript` is plain UTF-8 text; `emissions` is an emission matrix.
    PlainText,
    /// `transcript` is plain UTF-8 text; `emissions` is a pre-decoded
    /// chars+spans JSON file.
    Predecoded,
}

/// One corpus entry: where to find the inputs for a single document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningJob {
    pub audio_id: String,
    pub emissions: PathBuf,
    pub transcript: PathBuf,
    pub transcript_kind: TranscriptKind,
}

/// Reads a job list: JSON Lines with fields
/// `audio_id, emissions, transcript, transcript_kind`.
pub fn read_jobs(path: &Path) -> Result<Vec<MiningJob>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut jobs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let job: MiningJob = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            path: path.into(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        jobs.push(job);
    }
    Ok(jobs)
}

/// Everything a corpus run needs besides the job list.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub labels: LabelSet,
    pub aligner: AlignerConfig,
    pub filter: FilterConfig,
    pub segmenter: SegmenterConfig,
    pub pad_ms: f64,
    /// Frame duration assumed for pre-decoded inputs, which carry no timing.
    pub frame_duration_ms: f64,
}

/// A job that failed; the batch keeps going.
#[derive(Debug, Clone, Serialize)]
pub struct JobFailure {
    pub audio_id: String,
    pub error: String,
}

/// Outcome of a corpus run.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub documents_processed: usize,
    pub report: MiningReport,
    pub failures: Vec<JobFailure>,
}

fn process_job(job: &MiningJob, cfg: &PipelineConfig) -> Result<(Vec<SegmentRecord>, MiningReport)> {
    let read_text_doc = |path: &Path| -> Result<ReferenceDocument> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        segment_sentences(&normalize(&text), &cfg.segmenter)
    };
    match job.transcript_kind {
        TranscriptKind::OcrTokens => {
            let tokens = read_ocr_tokens(&job.transcript)?;
            let doc = clean_document(&tokens, &cfg.segmenter)?;
            let matrix = read_emission_matrix(&job.emissions)?.with_audio_id(&job.audio_id);
            mine_document(&matrix, &cfg.labels, &doc, &cfg.aligner, &cfg.filter, cfg.pad_ms)
        }
        TranscriptKind::PlainText => {
            let doc = read_text_doc(&job.transcript)?;
            let matrix = read_emission_matrix(&job.emissions)?.with_audio_id(&job.audio_id);
            mine_document(&matrix, &cfg.labels, &doc, &cfg.aligner, &cfg.filter, cfg.pad_ms)
        }
        TranscriptKind::Predecoded => {
            let doc = read_text_doc(&job.transcript)?;
            let pred = read_predecoded(&job.emissions)?;
            let total_frames = pred.spans().entries().last().map_or(0, |s| s.end + 1);
            mine_predicted(
                &pred,
                total_frames,
                cfg.frame_duration_ms,
                &job.audio_id,
                &doc,
                &cfg.aligner,
                &cfg.filter,
                cfg.pad_ms,
            )
        }
    }
}

/// Processes every job, writes one manifest grouped by document in input
/// order, and returns the aggregate report.
///
/// Documents are mined independently (optionally in parallel); a failing
/// document is recorded and skipped rather than aborting the batch. Output
/// bytes are identical for any worker count.
pub fn mine_corpus(
    jobs: &[MiningJob],
    cfg: &PipelineConfig,
    workers: usize,
    out_path: &Path,
) -> Result<CorpusReport> {
    type DocOutcome = Result<(Vec<SegmentRecord>, MiningReport)>;

    let results: Vec<Mutex<Option<DocOutcome>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let workers = workers.max(1).min(jobs.len().max(1));
    if workers <= 1 {
        for (job, slot) in jobs.iter().zip(&results) {
            *slot.lock().unwrap() = Some(process_job(job, cfg));
        }
    } else {
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs.len() {
                        break;
                    }
                    let outcome = process_job(&jobs[i], cfg);
                    *results[i].lock().unwrap() = Some(outcome);
                });
            }
        });
    }

    let file = std::fs::File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut writer = BufWriter::new(file);
    let mut aggregate = MiningReport::default();
    let mut failures = Vec::new();
    let mut succeeded = 0usize;
    for (job, slot) in jobs.iter().zip(&results) {
        let outcome = slot.lock().unwrap().take().expect("job processed");
        match outcome {
            Ok((records, report)) => {
                for record in &records {
                    write_manifest_line(&mut writer, record, out_path)?;
                }
                aggregate.merge(&report);
                succeeded += 1;
            }
            Err(e) => failures.push(JobFailure {
                audio_id: job.audio_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    writer.flush().map_err(|e| Error::io(out_path, e))?;

    if !jobs.is_empty() && succeeded == 0 {
        return Err(Error::NoSuccessfulDocuments {
            failed: failures.len(),
        });
    }
    Ok(CorpusReport {
        documents_processed: succeeded,
        report: aggregate,
        failures,
    })
}
