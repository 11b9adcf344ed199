//! Mining of sentence-level audio/text pairs from long recordings.
//!
//! The pipeline aligns CTC-decoded ASR output against a reference transcript
//! (plain text or OCR token dumps), projects sentence boundaries onto frame
//! spans, and filters the resulting pairs by a Levenshtein similarity ratio.

pub mod align;
pub mod ctc;
mod error;
pub mod io;
pub mod mine;
pub mod synth;
pub mod textproc;
mod types;

pub use error::{Error, Result};
pub use types::{
    AlignStep, AlignmentMap, CharRange, EmissionMatrix, FrameSpan, GreedyPath, LabelSet,
    PredictedText, ReferenceDocument, ScoreParams, SegmentRecord, SentenceBoundaries, SpanTable,
};
