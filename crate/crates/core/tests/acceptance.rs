//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The tests share a lock so they run one at a time; the performance
//! criterion measures peak heap through a counting allocator and parallel
//! neighbors would pollute it.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segmine_core::align::{
    align_chars, alignment_score_total, AlignMode, AlignerConfig,
};
use segmine_core::ctc::{collapse, expand};
use segmine_core::mine::{
    mine_corpus, mine_document, FilterConfig, MiningJob, PipelineConfig, TranscriptKind,
};
use segmine_core::synth::{brute_force_align, evaluate, generate, EvalReport, FaultModel};
use segmine_core::textproc::{same_line, OcrToken, SegmenterConfig};
use segmine_core::{FrameSpan, LabelSet, ScoreParams, SegmentRecord};

struct CountingAllocator;

static IN_USE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = unsafe { System.alloc(layout) };
        if !ptr.is_null() {
            let now = IN_USE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        IN_USE.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let new_ptr = unsafe { System.realloc(ptr, layout, new_size) };
        if !new_ptr.is_null() {
            if new_size >= layout.size() {
                let grown = new_size - layout.size();
                let now = IN_USE.fetch_add(grown, Ordering::Relaxed) + grown;
                PEAK.fetch_max(now, Ordering::Relaxed);
            } else {
                IN_USE.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        new_ptr
    }
}

#[global_allocator]
static ALLOCATOR: CountingAllocator = CountingAllocator;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn reset_peak() -> usize {
    let now = IN_USE.load(Ordering::Relaxed);
    PEAK.store(now, Ordering::Relaxed);
    now
}

fn peak_since(baseline: usize) -> usize {
    PEAK.load(Ordering::Relaxed).saturating_sub(baseline)
}

fn full_cfg() -> AlignerConfig {
    AlignerConfig {
        mode: AlignMode::Full,
        ..AlignerConfig::default()
    }
}

fn linear_cfg() -> AlignerConfig {
    AlignerConfig {
        mode: AlignMode::LinearSpace,
        ..AlignerConfig::default()
    }
}

/// All strings over `alphabet` with length 0..=max_len.
fn enumerate_strings(alphabet: &[char], max_len: usize) -> Vec<Vec<char>> {
    let mut all: Vec<Vec<char>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<char>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for s in &frontier {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

fn random_string(rng: &mut ChaCha8Rng, alphabet: &[char], len: usize) -> Vec<char> {
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect()
}

#[test]
fn criterion_01_alignment_optimality() {
    let _guard = serial();
    let started = Instant::now();
    let scores = ScoreParams::default();
    let alphabet = ['a', 'b', 'c', 'd'];
    let cfg = full_cfg();

    let mut checked = 0u64;
    let mut check = |r: &[char], p: &[char]| {
        let map = align_chars(r, p, &cfg).unwrap();
        let got = alignment_score_total(&map, &scores);
        let r_str: String = r.iter().collect();
        let p_str: String = p.iter().collect();
        let want = brute_force_align(&r_str, &p_str, &scores).unwrap();
        assert_eq!(got, want, "optimality broken on ({r_str:?}, {p_str:?})");
        checked += 1;
    };

    // exhaustive for lengths <= 5
    let strings = enumerate_strings(&alphabet, 5);
    for r in &strings {
        for p in &strings {
            check(r, p);
        }
    }

    // 500 random pairs at lengths 6-8
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..500 {
        let (rl, pl) = (rng.gen_range(6..=8), rng.gen_range(6..=8));
        let r = random_string(&mut rng, &alphabet, rl);
        let p = random_string(&mut rng, &alphabet, pl);
        check(&r, &p);
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "took {elapsed:?}, budget is 60s"
    );
    println!(
        "criterion 1 (alignment optimality, {checked} pairs in {elapsed:.2?}): PASS"
    );
}

#[test]
fn criterion_02_mode_equivalence() {
    let _guard = serial();
    let started = Instant::now();
    let scores = ScoreParams::default();
    let alphabet = ['a', 'b', 'c', 'd'];
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    for case in 0..50 {
        let r = random_string(&mut rng, &alphabet, 2000);
        let p = random_string(&mut rng, &alphabet, 2000);
        let full = align_chars(&r, &p, &full_cfg()).unwrap();
        let linear = align_chars(&r, &p, &linear_cfg()).unwrap();
        assert_eq!(
            alignment_score_total(&full, &scores),
            alignment_score_total(&linear, &scores),
            "modes disagree on case {case}"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}, budget is 120s");
    println!("criterion 2 (mode equivalence, 50 pairs of length 2000 in {elapsed:.2?}): PASS");
}

fn lev_oracle(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let cost = usize::from(a[0] != b[0]);
    (lev_oracle(&a[1..], &b[1..]) + cost)
        .min(lev_oracle(&a[1..], b) + 1)
        .min(lev_oracle(a, &b[1..]) + 1)
}

#[test]
fn criterion_03_levenshtein_oracle() {
    let _guard = serial();
    let started = Instant::now();

    // exhaustive on all pairs over a binary alphabet, lengths <= 6
    let strings = enumerate_strings(&['a', 'b'], 6);
    let mut checked = 0u64;
    for r in &strings {
        for p in &strings {
            let r_str: String = r.iter().collect();
            let p_str: String = p.iter().collect();
            assert_eq!(
                segmine_core::mine::levenshtein(&r_str, &p_str),
                lev_oracle(r, p),
                "distance broken on ({r_str:?}, {p_str:?})"
            );
            checked += 1;
        }
    }

    // 1000 random pairs with lengths <= 10
    let alphabet = ['a', 'b', 'c', 'd'];
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..1000 {
        let (rl, pl) = (rng.gen_range(0..=10), rng.gen_range(0..=10));
        let r = random_string(&mut rng, &alphabet, rl);
        let p = random_string(&mut rng, &alphabet, pl);
        let r_str: String = r.iter().collect();
        let p_str: String = p.iter().collect();
        assert_eq!(
            segmine_core::mine::levenshtein(&r_str, &p_str),
            lev_oracle(&r, &p)
        );
        checked += 1;
    }

    let elapsed = started.elapsed();
    println!("criterion 3 (levenshtein oracle, {checked} pairs in {elapsed:.2?}): PASS");
}

#[test]
fn criterion_04_ctc_round_trip() {
    let _guard = serial();
    let labels = LabelSet::new(vec!['a', 'b', 'c', 'd', 'e'], 0).unwrap();
    let pool = ['a', 'b', 'c', 'd', 'e'];
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    for case in 0..1000u64 {
        let len = rng.gen_range(0..=40);
        let chars = random_string(&mut rng, &pool, len);
        let required = chars.len() + chars.windows(2).filter(|w| w[0] == w[1]).count();
        let budget = required + rng.gen_range(0..=50);
        let path = expand(&chars, &labels, budget, case).unwrap();
        let collapsed = collapse(&path, &labels).unwrap();
        assert_eq!(collapsed.chars(), chars.as_slice(), "round trip broke on case {case}");
        for span in collapsed.spans().entries() {
            assert!(span.end < budget);
        }
    }
    println!("criterion 4 (ctc expand/collapse round trip, 1000 texts): PASS");
}

fn synth_labels() -> LabelSet {
    let mut chars: Vec<char> = ('a'..='z').collect();
    chars.push(' ');
    chars.push('.');
    LabelSet::new(chars, 0).unwrap()
}

struct MinedDoc {
    records: Vec<SegmentRecord>,
    doc: segmine_core::synth::SyntheticDocument,
}

fn mine_synthetic_corpus(
    docs: usize,
    sentences: usize,
    base: FaultModel,
    seed_base: u64,
    tau: f64,
) -> Vec<MinedDoc> {
    let labels = synth_labels();
    let filter = FilterConfig::new(tau).unwrap();
    (0..docs)
        .map(|i| {
            let fm = FaultModel {
                seed: seed_base + i as u64,
                ..base.clone()
            };
            let doc = generate(sentences, &fm, &labels).unwrap();
            let (records, _) = mine_document(
                &doc.emissions,
                &labels,
                &doc.document,
                &AlignerConfig::default(),
                &filter,
                0.0,
            )
            .unwrap();
            MinedDoc { records, doc }
        })
        .collect()
}

#[test]
fn criterion_05_end_to_end_closure() {
    let _guard = serial();
    let started = Instant::now();
    let mined = mine_synthetic_corpus(50, 20, FaultModel::default(), 5000, 0.8);

    let reports: Vec<EvalReport> = mined
        .iter()
        .map(|m| evaluate(&m.records, &m.doc.truth, 0).unwrap())
        .collect();
    let total = EvalReport::merged(&reports);
    for m in &mined {
        for r in &m.records {
            assert_eq!(r.score, 1.0, "non-exact pair in {}", r.audio_id);
        }
    }
    assert_eq!(total.precision, 1.0);
    assert_eq!(total.recall, 1.0);
    assert_eq!(total.relevant_count, 50 * 20);
    println!(
        "criterion 5 (zero-fault closure, 50x20 sentences in {:.2?}): PASS",
        started.elapsed()
    );
}

fn noisy_fault_model() -> FaultModel {
    FaultModel {
        sub_rate: 0.05,
        untranscribed_prefix_frames: (200, 200),
        untranscribed_suffix_frames: (200, 200),
        interior_untranscribed_prob: 1.0,
        ..FaultModel::default()
    }
}

#[test]
fn criterion_06_noisy_recovery() {
    let _guard = serial();
    let started = Instant::now();
    let mined = mine_synthetic_corpus(50, 20, noisy_fault_model(), 6000, 0.8);

    let reports: Vec<EvalReport> = mined
        .iter()
        .map(|m| evaluate(&m.records, &m.doc.truth, 2).unwrap())
        .collect();
    let total = EvalReport::merged(&reports);
    assert!(
        total.recall >= 0.9,
        "recall {} below 0.9 ({}/{} uncorrupted sentences)",
        total.recall,
        total.relevant_true_positives,
        total.relevant_count
    );

    let mut kept_total = 0usize;
    for m in &mined {
        let truth = &m.doc.truth;
        let d = truth.frame_duration_ms;
        for record in &m.records {
            kept_total += 1;
            let rec_start = (record.start_ms / d).round() as i64;
            let rec_end = (record.end_ms / d).round() as i64 - 1;

            // every kept boundary within +-2 frames of its sentence's truth
            let best = truth
                .sentences
                .iter()
                .filter(|s| s.text == record.ref_text)
                .filter_map(|s| s.interval)
                .map(|iv| {
                    (rec_start - iv.start as i64)
                        .abs()
                        .max((rec_end - iv.end as i64).abs())
                })
                .min()
                .expect("kept record corresponds to a spoken sentence");
            assert!(
                best <= 2,
                "boundary off by {best} frames in {}",
                record.audio_id
            );

            // kept segments stay out of injected untranscribed spans
            for span in &truth.untranscribed {
                let overlap =
                    rec_end.min(span.end as i64) - rec_start.max(span.start as i64) + 1;
                assert!(
                    overlap <= 2,
                    "segment overlaps untranscribed span by {overlap} frames in {}",
                    record.audio_id
                );
            }
        }
    }
    assert!(kept_total > 0);
    println!(
        "criterion 6 (noisy recovery, recall {:.4}, {} kept segments in {:.2?}): PASS",
        total.recall,
        kept_total,
        started.elapsed()
    );
}

#[test]
fn criterion_07_threshold_monotonicity() {
    let _guard = serial();
    let started = Instant::now();
    let mut yields = Vec::new();
    for tau in [0.8, 0.9, 0.95] {
        let mined = mine_synthetic_corpus(50, 20, noisy_fault_model(), 6000, tau);
        let reports: Vec<EvalReport> = mined
            .iter()
            .map(|m| evaluate(&m.records, &m.doc.truth, 2).unwrap())
            .collect();
        yields.push(EvalReport::merged(&reports).yield_fraction);
    }
    assert!(
        yields[2] <= yields[1] && yields[1] <= yields[0],
        "yield not monotone: {yields:?}"
    );
    println!(
        "criterion 7 (threshold monotonicity, yields {:.4} >= {:.4} >= {:.4} in {:.2?}): PASS",
        yields[0],
        yields[1],
        yields[2],
        started.elapsed()
    );
}

#[test]
fn criterion_08_performance_budget() {
    let _guard = serial();
    let alphabet = ['a', 'b', 'c', 'd'];
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let r = random_string(&mut rng, &alphabet, 20_000);
    let p = random_string(&mut rng, &alphabet, 20_000);
    let scores = ScoreParams::default();

    let baseline = reset_peak();
    let started = Instant::now();
    let full = align_chars(&r, &p, &full_cfg()).unwrap();
    let full_time = started.elapsed();
    let full_peak = peak_since(baseline);
    let full_score = alignment_score_total(&full, &scores);
    drop(full);
    assert!(
        full_time.as_secs() < 60,
        "full mode took {full_time:?}, budget is 60s"
    );
    assert!(
        full_peak < 500 * 1024 * 1024,
        "full mode peaked at {full_peak} bytes, budget is 500MB"
    );

    let baseline = reset_peak();
    let started = Instant::now();
    let linear = align_chars(&r, &p, &linear_cfg()).unwrap();
    let linear_time = started.elapsed();
    let linear_peak = peak_since(baseline);
    let linear_score = alignment_score_total(&linear, &scores);
    drop(linear);
    assert!(
        linear_time.as_secs() < 300,
        "linear mode took {linear_time:?}, budget is 300s"
    );
    assert!(
        linear_peak < 100 * 1024 * 1024,
        "linear mode peaked at {linear_peak} bytes, budget is 100MB"
    );

    assert_eq!(full_score, linear_score);
    println!(
        "criterion 8 (20k x 20k: full {:.2?}/{:.1}MB, linear {:.2?}/{:.1}MB): PASS",
        full_time,
        full_peak as f64 / (1024.0 * 1024.0),
        linear_time,
        linear_peak as f64 / (1024.0 * 1024.0),
    );
}

#[test]
fn criterion_09_corpus_determinism() {
    let _guard = serial();
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let labels = synth_labels();

    let jobs: Vec<MiningJob> = (0..50)
        .map(|i| {
            let fm = FaultModel {
                seed: 6000 + i as u64,
                ..noisy_fault_model()
            };
            let doc = generate(20, &fm, &labels).unwrap();
            let id = doc.truth.audio_id.clone();
            let emissions = dir.path().join(format!("{id}.emis"));
            let transcript = dir.path().join(format!("{id}.txt"));
            segmine_core::io::write_emission_matrix(&doc.emissions, &emissions).unwrap();
            std::fs::write(&transcript, doc.document.text_string()).unwrap();
            MiningJob {
                audio_id: id,
                emissions,
                transcript,
                transcript_kind: TranscriptKind::PlainText,
            }
        })
        .collect();

    let cfg = PipelineConfig {
        labels,
        aligner: AlignerConfig::default(),
        filter: FilterConfig::default(),
        segmenter: SegmenterConfig::default(),
        pad_ms: 0.0,
        frame_duration_ms: 25.0,
    };
    let out1 = dir.path().join("manifest-w1.jsonl");
    let out8 = dir.path().join("manifest-w8.jsonl");
    let r1 = mine_corpus(&jobs, &cfg, 1, &out1).unwrap();
    let r8 = mine_corpus(&jobs, &cfg, 8, &out8).unwrap();
    assert_eq!(r1.documents_processed, 50);
    assert_eq!(r8.documents_processed, 50);

    let bytes1 = std::fs::read(&out1).unwrap();
    let bytes8 = std::fs::read(&out8).unwrap();
    assert!(!bytes1.is_empty());
    assert_eq!(bytes1, bytes8, "manifests differ between 1 and 8 workers");
    println!(
        "criterion 9 (corpus determinism across worker counts in {:.2?}): PASS",
        started.elapsed()
    );
}

#[test]
fn criterion_10_line_grouping_conformance() {
    let _guard = serial();
    // token with a given vertical center and height
    let tok = |cy: f64, h: f64| OcrToken::new('x', 0, (0.0, cy - h / 2.0, 5.0, h)).unwrap();

    let a = tok(100.0, 10.0);
    let b = tok(105.0, 12.0);
    assert!(same_line(&a, &b), "|100-105| < 10 and |10-12| < 20");

    let c = tok(100.0, 10.0);
    assert!(same_line(&a, &c), "identical boxes share a line");

    let d = tok(115.0, 10.0);
    assert!(!same_line(&a, &d), "|100-115| >= 10");

    println!("criterion 10 (line-grouping rule conformance): PASS");
}
