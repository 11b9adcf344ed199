//! External file formats: emission matrix binary, label set file, segment
//! manifest (JSON Lines), and the pre-decoded chars+spans alternative.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EmissionMatrix, FrameSpan, LabelSet, PredictedText, SegmentRecord, SpanTable};

const EMISSION_MAGIC: &[u8; 6] = b"EMIS1\0";

/// Writes the emission matrix binary format:
/// magic `EMIS1\0`, then little-endian u64 frame count, u64 label count,
/// u64 frame duration in microseconds, the row-major f32 payload, and a
/// trailing CRC32 of the payload bytes.
pub fn write_emission_matrix(m: &EmissionMatrix, path: &Path) -> Result<()> {
    let micros = (m.frame_duration_ms() * 1000.0).round();
    if !(micros >= 1.0) {
        return Err(Error::invalid(
            "emission matrix",
            format!(
                "frame duration {}ms rounds below one microsecond",
                m.frame_duration_ms()
            ),
        ));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    w.write_all(EMISSION_MAGIC).map_err(io_err)?;
    w.write_all(&(m.frame_count() as u64).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&(m.label_count() as u64).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&(micros as u64).to_le_bytes()).map_err(io_err)?;

    let mut hasher = crc32fast::Hasher::new();
    let mut buf = Vec::with_capacity(m.scores().len() * 4);
    for &s in m.scores() {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    hasher.update(&buf);
    w.write_all(&buf).map_err(io_err)?;
    w.write_all(&hasher.finalize().to_le_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads the emission matrix binary format. The audio id is taken from the
/// file stem; callers that know better should override it with
/// [`EmissionMatrix::with_audio_id`].
pub fn read_emission_matrix(path: &Path) -> Result<EmissionMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut header = [0u8; 6 + 8 * 3];
    read_exact_or(&mut r, &mut header, path, "header")?;
    if &header[..6] != EMISSION_MAGIC {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: format!("bad magic {:?}", &header[..6]),
        });
    }
    let frame_count = u64::from_le_bytes(header[6..14].try_into().unwrap());
    let label_count = u64::from_le_bytes(header[14..22].try_into().unwrap());
    let micros = u64::from_le_bytes(header[22..30].try_into().unwrap());
    if micros == 0 {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: "frame duration of zero microseconds".into(),
        });
    }
    let cells = frame_count.checked_mul(label_count).ok_or_else(|| {
        Error::MalformedHeader {
            path: path.into(),
            reason: format!("{frame_count} x {label_count} cells overflow"),
        }
    })?;
    let payload_bytes = cells.checked_mul(4).ok_or_else(|| Error::MalformedHeader {
        path: path.into(),
        reason: "payload size overflows".into(),
    })?;
    if usize::try_from(payload_bytes).is_err() {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: format!("payload of {payload_bytes} bytes does not fit in memory"),
        });
    }

    let mut payload = vec![0u8; payload_bytes as usize];
    read_exact_or(&mut r, &mut payload, path, "payload")?;

    let mut crc_buf = [0u8; 4];
    read_exact_or(&mut r, &mut crc_buf, path, "checksum")?;
    let stored = u32::from_le_bytes(crc_buf);
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&payload);
    let computed = hasher.finalize();
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.into(),
            stored,
            computed,
        });
    }

    let scores: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let audio_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    EmissionMatrix::new(
        audio_id,
        frame_count as usize,
        label_count as usize,
        scores,
        micros as f64 / 1000.0,
    )
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(if what == "header" {
                    Error::MalformedHeader {
                        path: path.into(),
                        reason: format!("file ends after {filled} header bytes"),
                    }
                } else {
                    Error::Truncated {
                        path: path.into(),
                        expected: buf.len() as u64,
                        got: filled as u64,
                    }
                });
            }
            Ok(n) => filled += n,
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    Ok(())
}

/// Reads a label set file: UTF-8, one label per line, first line the literal
/// token `<blank>`.
pub fn read_label_set(path: &Path) -> Result<LabelSet> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut characters = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if i == 0 {
            if line != "<blank>" {
                return Err(Error::MalformedLine {
                    path: path.into(),
                    line: 1,
                    reason: format!("expected literal <blank>, got {line:?}"),
                });
            }
            continue;
        }
        let mut chars = line.chars();
        let c = chars.next().ok_or_else(|| Error::MalformedLine {
            path: path.into(),
            line: i + 1,
            reason: "empty label".into(),
        })?;
        if chars.next().is_some() {
            return Err(Error::MalformedLine {
                path: path.into(),
                line: i + 1,
                reason: format!("label {line:?} is not a single character"),
            });
        }
        characters.push(c);
    }
    if content.is_empty() {
        return Err(Error::MalformedLine {
            path: path.into(),
            line: 1,
            reason: "expected literal <blank>, got empty file".into(),
        });
    }
    LabelSet::new(characters, 0)
}

/// Writes a label set file. The on-disk format places the blank first, so
/// the set must use blank index 0.
pub fn write_label_set(labels: &LabelSet, path: &Path) -> Result<()> {
    if labels.blank_index() != 0 {
        return Err(Error::invalid(
            "label set",
            "file format requires blank index 0",
        ));
    }
    let mut out = String::from("<blank>\n");
    for &c in labels.characters() {
        out.push(c);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes segment records as JSON Lines with the stable field order
/// `audio_id, start_ms, end_ms, ref_text, hyp_text, score`.
pub fn write_manifest(records: &[SegmentRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        write_manifest_line(&mut w, rec, path)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_manifest_line<W: Write>(
    w: &mut W,
    rec: &SegmentRecord,
    path: &Path,
) -> Result<()> {
    let line = serde_json::to_string(rec).map_err(|e| Error::invalid(
        "segment record",
        format!("serialization failed: {e}"),
    ))?;
    w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

/// Reads a segment manifest, reporting the 1-based line number of any
/// malformed record.
pub fn read_manifest(path: &Path) -> Result<Vec<SegmentRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let r = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let rec: SegmentRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: path.into(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        rec.validate().map_err(|e| Error::MalformedLine {
            path: path.into(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

#[derive(Serialize, Deserialize)]
struct PredecodedFile {
    chars: String,
    spans: Vec<(usize, usize)>,
}

/// Writes the pre-decoded alternative input: JSON with `chars` and `spans`.
pub fn write_predecoded(p: &PredictedText, path: &Path) -> Result<()> {
    let file = PredecodedFile {
        chars: p.chars().iter().collect(),
        spans: p.spans().entries().iter().map(|s| (s.start, s.end)).collect(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::invalid("predecoded text", e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Reads the pre-decoded alternative input.
pub fn read_predecoded(path: &Path) -> Result<PredictedText> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PredecodedFile = serde_json::from_str(&content).map_err(|e| Error::MalformedLine {
        path: path.into(),
        line: 1,
        reason: e.to_string(),
    })?;
    let spans = SpanTable::new(
        file.spans
            .iter()
            .map(|&(start, end)| FrameSpan::new(start, end))
            .collect(),
    )?;
    PredictedText::new(file.chars.chars().collect(), spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn random_matrix(rng: &mut ChaCha8Rng, id: &str) -> EmissionMatrix {
        let t = rng.gen_range(0..40);
        let l = rng.gen_range(1..12);
        let scores: Vec<f32> = (0..t * l).map(|_| rng.gen_range(-30.0..0.0)).collect();
        let micros = rng.gen_range(1..100_000u64);
        EmissionMatrix::new(id, t, l, scores, micros as f64 / 1000.0).unwrap()
    }

    #[test]
    fn empty_matrix_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.emis");
        let m = EmissionMatrix::new("m", 0, 3, vec![], 25.0).unwrap();
        write_emission_matrix(&m, &path).unwrap();
        let back = read_emission_matrix(&path).unwrap();
        assert_eq!(back.frame_count(), 0);
        assert_eq!(back.label_count(), 3);
        assert_eq!(back, m);
    }

    #[test]
    fn small_matrix_echoes_values() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.emis");
        let m = EmissionMatrix::new("m", 2, 2, vec![0.0, -1.0, -1.0, 0.0], 25.0).unwrap();
        write_emission_matrix(&m, &path).unwrap();
        let back = read_emission_matrix(&path).unwrap();
        assert_eq!(back.row(0), &[0.0, -1.0]);
        assert_eq!(back.row(1), &[-1.0, 0.0]);
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_round_trip_is_bitwise_for_random_matrices() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.emis");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_matrix(&mut rng, "m");
            write_emission_matrix(&m, &path).unwrap();
            let back = read_emission_matrix(&path).unwrap();
            assert_eq!(back, m);
            for (a, b) in m.scores().iter().zip(back.scores()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn matrix_read_rejects_corruption() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.emis");
        let m = EmissionMatrix::new("m", 2, 2, vec![0.0, -1.0, -1.0, 0.0], 25.0).unwrap();
        write_emission_matrix(&m, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        // bad magic
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            read_emission_matrix(&path),
            Err(Error::MalformedHeader { .. })
        ));

        // truncated payload
        std::fs::write(&path, &bytes[..bytes.len() - 6]).unwrap();
        assert!(matches!(
            read_emission_matrix(&path),
            Err(Error::Truncated { .. })
        ));

        // flipped payload byte fails the checksum
        let mut flipped = bytes.clone();
        flipped[30] ^= 0xff;
        std::fs::write(&path, &flipped).unwrap();
        assert!(matches!(
            read_emission_matrix(&path),
            Err(Error::ChecksumMismatch { .. })
        ));

        // non-finite score with a valid checksum
        let nan = f32::NAN.to_le_bytes();
        let mut evil = bytes.clone();
        evil[30..34].copy_from_slice(&nan);
        let crc = crc32fast::hash(&evil[30..30 + 16]);
        let len = evil.len();
        evil[len - 4..].copy_from_slice(&crc.to_le_bytes());
        std::fs::write(&path, &evil).unwrap();
        assert!(matches!(
            read_emission_matrix(&path),
            Err(Error::NonFiniteScore { .. })
        ));
    }

    #[test]
    fn label_set_file_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        let labels = LabelSet::new(vec!['a', 'b', ' ', '.'], 0).unwrap();
        write_label_set(&labels, &path).unwrap();
        let back = read_label_set(&path).unwrap();
        assert_eq!(back, labels);
    }

    #[test]
    fn label_set_file_rejects_bad_first_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        std::fs::write(&path, "a\nb\n").unwrap();
        assert!(matches!(
            read_label_set(&path),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        std::fs::write(&path, "<blank>\nab\n").unwrap();
        assert!(matches!(
            read_label_set(&path),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }

    fn random_record(rng: &mut ChaCha8Rng) -> SegmentRecord {
        let start = rng.gen_range(0.0..10_000.0);
        let chars = "abcdefg हिन् ";
        let text: String = (0..rng.gen_range(1..20))
            .map(|_| {
                chars
                    .chars()
                    .nth(rng.gen_range(0..chars.chars().count()))
                    .unwrap()
            })
            .collect();
        SegmentRecord {
            audio_id: format!("doc-{}", rng.gen_range(0..100)),
            start_ms: start,
            end_ms: start + rng.gen_range(1.0..5_000.0),
            ref_text: text.clone(),
            hyp_text: text,
            score: rng.gen_range(0.0..=1.0),
        }
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.jsonl");

        write_manifest(&[], &path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), vec![]);

        let one = SegmentRecord {
            audio_id: "bulletin-1".into(),
            start_ms: 0.0,
            end_ms: 1000.0,
            ref_text: "नमस्ते।".into(),
            hyp_text: "नमस्ते।".into(),
            score: 1.0,
        };
        write_manifest(std::slice::from_ref(&one), &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.lines().count(), 1);
        assert!(content.starts_with("{\"audio_id\":"));
        assert_eq!(read_manifest(&path).unwrap(), vec![one]);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let records: Vec<SegmentRecord> = (0..1000).map(|_| random_record(&mut rng)).collect();
        write_manifest(&records, &path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), records);
    }

    #[test]
    fn manifest_reports_bad_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(
            &path,
            "{\"audio_id\":\"a\",\"start_ms\":0.0,\"end_ms\":1.0,\"ref_text\":\"x\",\"hyp_text\":\"x\",\"score\":1.0}\nnot json\n",
        )
        .unwrap();
        match read_manifest(&path) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed line error, got {other:?}"),
        }
    }

    #[test]
    fn predecoded_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.json");
        let spans = SpanTable::new(vec![FrameSpan::new(0, 1), FrameSpan::new(3, 3)]).unwrap();
        let p = PredictedText::new(vec!['a', 'b'], spans).unwrap();
        write_predecoded(&p, &path).unwrap();
        assert_eq!(read_predecoded(&path).unwrap(), p);
    }

    #[test]
    fn predecoded_rejects_unordered_spans() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.json");
        std::fs::write(&path, "{\"chars\":\"ab\",\"spans\":[[3,3],[0,1]]}").unwrap();
        assert!(read_predecoded(&path).is_err());
    }
}
