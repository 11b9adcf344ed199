//! OCR post-correction: line grouping by bounding boxes, reading-order
//! reconstruction, header removal, and sentence segmentation.

use std::path::Path;

use serde::Deserialize;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::types::{CharRange, ReferenceDocument, SentenceBoundaries};

/// A single character detected by OCR, with its bounding box. Page
/// coordinates grow downward in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcrToken {
    pub ch: char,
    pub page: usize,
    /// (x, y, width, height)
    pub bbox: (f64, f64, f64, f64),
}

impl OcrToken {
    pub fn new(ch: char, page: usize, bbox: (f64, f64, f64, f64)) -> Result<Self> {
        if !(bbox.2 > 0.0 && bbox.3 > 0.0) {
            return Err(Error::invalid(
                "ocr token",
                format!("box width and height must be positive, got {bbox:?}"),
            ));
        }
        Ok(OcrToken { ch, page, bbox })
    }

    pub fn center_x(&self) -> f64 {
        self.bbox.0 + self.bbox.2 / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.bbox.1 + self.bbox.3 / 2.0
    }

    pub fn height(&self) -> f64 {
        self.bbox.3
    }
}

/// A reconstructed text line: tokens in left-to-right order on one page.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    tokens: Vec<OcrToken>,
    page: usize,
}

impl Line {
    pub fn tokens(&self) -> &[OcrToken] {
        &self.tokens
    }

    pub fn page(&self) -> usize {
        self.page
    }

    pub fn text(&self) -> String {
        self.tokens.iter().map(|t| t.ch).collect()
    }

    pub fn word_count(&self) -> usize {
        self.text().split_whitespace().count()
    }

    fn mean_center_y(&self) -> f64 {
        self.tokens.iter().map(OcrToken::center_y).sum::<f64>() / self.tokens.len() as f64
    }
}

/// Sentence segmentation and header removal parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    /// Characters that terminate a sentence.
    pub eos_characters: Vec<char>,
    /// Leading lines with fewer words than this are treated as headers.
    pub min_header_words: usize,
    /// At most this many leading header lines are removed.
    pub max_header_lines: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            eos_characters: vec!['।', '॥', '.', '?', '!', '۔'],
            min_header_words: 5,
            max_header_lines: 3,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eos_characters.is_empty() {
            return Err(Error::invalid(
                "segmenter config",
                "end-of-sentence character set is empty",
            ));
        }
        if self.min_header_words < 1 {
            return Err(Error::invalid(
                "segmenter config",
                "min_header_words must be at least 1",
            ));
        }
        Ok(())
    }

    fn is_eos(&self, c: char) -> bool {
        self.eos_characters.contains(&c)
    }
}

/// NFC-normalizes text; all ingestion paths funnel through this so that
/// character comparison is by code point on a canonical form.
pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

/// Same-line predicate anchored on `a`: the vertical centers differ by less
/// than `a`'s height, and the heights differ by less than twice `a`'s height.
pub fn same_line(a: &OcrToken, b: &OcrToken) -> bool {
    (a.center_y() - b.center_y()).abs() < a.height()
        && (a.height() - b.height()).abs() < 2.0 * a.height()
}

/// Groups tokens into lines and restores reading order.
///
/// A greedy pass in input order attaches each token to the first open line
/// on its page whose anchor (opening) token satisfies [`same_line`], or opens
/// a new line. Lines are then ordered by page and mean vertical center, and
/// tokens within a line by horizontal center.
pub fn group_lines(tokens: &[OcrToken]) -> Vec<Line> {
    struct OpenLine {
        anchor: OcrToken,
        tokens: Vec<OcrToken>,
    }

    let mut open: Vec<OpenLine> = Vec::new();
    for tok in tokens {
        match open
            .iter_mut()
            .find(|l| l.anchor.page == tok.page && same_line(&l.anchor, tok))
        {
            Some(line) => line.tokens.push(tok.clone()),
            None => open.push(OpenLine {
                anchor: tok.clone(),
                tokens: vec![tok.clone()],
            }),
        }
    }

    let mut lines: Vec<Line> = open
        .into_iter()
        .map(|mut l| {
            l.tokens
                .sort_by(|a, b| a.center_x().total_cmp(&b.center_x()));
            Line {
                page: l.anchor.page,
                tokens: l.tokens,
            }
        })
        .collect();
    lines.sort_by(|a, b| {
        a.page
            .cmp(&b.page)
            .then_with(|| a.mean_center_y().total_cmp(&b.mean_center_y()))
    });
    lines
}

/// Removes leading header lines: lines with fewer than `min_header_words`
/// words, up to `max_header_lines` removals, stopping at the first line with
/// enough words.
pub fn strip_headers(lines: Vec<Line>, cfg: &SegmenterConfig) -> Result<Vec<Line>> {
    cfg.validate()?;
    let mut removed = 0;
    let mut iter = lines.into_iter().peekable();
    while removed < cfg.max_header_lines {
        match iter.peek() {
            Some(line) if line.word_count() < cfg.min_header_words => {
                iter.next();
                removed += 1;
            }
            _ => break,
        }
    }
    Ok(iter.collect())
}

/// Segments NFC-normalized text into sentences delimited by the configured
/// end-of-sentence characters.
///
/// The terminating character (and any run of them) belongs to the sentence it
/// ends; whitespace between sentences belongs to no sentence; text after the
/// last terminator forms a final sentence; candidates with no content besides
/// terminators are dropped.
pub fn segment_sentences(text: &str, cfg: &SegmenterConfig) -> Result<ReferenceDocument> {
    cfg.validate()?;
    let chars: Vec<char> = text.chars().collect();
    let mut ranges = Vec::new();
    let mut start: Option<usize> = None;
    let mut has_content = false;
    let mut last_non_ws = 0usize;

    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if cfg.is_eos(c) {
            let mut end = i;
            while end + 1 < chars.len() && cfg.is_eos(chars[end + 1]) {
                end += 1;
            }
            if let Some(s) = start {
                if has_content {
                    ranges.push(CharRange::new(s, end));
                }
            }
            start = None;
            has_content = false;
            i = end + 1;
        } else {
            if !c.is_whitespace() {
                if start.is_none() {
                    start = Some(i);
                }
                has_content = true;
                last_non_ws = i;
            }
            i += 1;
        }
    }
    if let Some(s) = start {
        if has_content {
            ranges.push(CharRange::new(s, last_non_ws));
        }
    }

    ReferenceDocument::new(chars, SentenceBoundaries::new(ranges)?)
}

/// Full OCR cleanup: group lines, strip headers, join the remaining lines
/// with single spaces, normalize, and segment into sentences.
pub fn clean_document(tokens: &[OcrToken], cfg: &SegmenterConfig) -> Result<ReferenceDocument> {
    let lines = strip_headers(group_lines(tokens), cfg)?;
    let text = lines
        .iter()
        .map(Line::text)
        .collect::<Vec<_>>()
        .join(" ");
    segment_sentences(&normalize(&text), cfg)
}

#[derive(Deserialize)]
struct RawToken {
    text: String,
    bbox: (f64, f64, f64, f64),
}

/// Reads OCR token input: a JSON array of pages, each a list of
/// `{ "text": "<char>", "bbox": [x, y, w, h] }` objects.
pub fn read_ocr_tokens(path: &Path) -> Result<Vec<OcrToken>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pages: Vec<Vec<RawToken>> =
        serde_json::from_str(&content).map_err(|e| Error::MalformedLine {
            path: path.into(),
            line: 1,
            reason: e.to_string(),
        })?;
    let mut tokens = Vec::new();
    for (page, raw_tokens) in pages.into_iter().enumerate() {
        for raw in raw_tokens {
            let mut chars = raw.text.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(Error::invalid(
                    "ocr token",
                    format!("text {:?} is not a single character", raw.text),
                ));
            };
            tokens.push(OcrToken::new(c, page, raw.bbox)?);
        }
    }
    Ok(tokens)
}
