use segmine_core::align::AlignerConfig;
use segmine_core::mine::{mine_document, FilterConfig};
use segmine_core::synth::{generate, FaultModel};
use segmine_core::LabelSet;

fn main() {
    let mut chars: Vec<char> = ('a'..='z').collect();
    chars.push(' ');
    chars.push('.');
    let labels = LabelSet::new(chars, 0).unwrap();
    let fm = FaultModel {
        sub_rate: 0.05,
        untranscribed_prefix_frames: (200, 200),
        untranscribed_suffix_frames: (200, 200),
        interior_untranscribed_prob: 1.0,
        seed: 0x1774,
        ..FaultModel::default()
    };
    let doc = generate(20, &fm, &labels).unwrap();
    let (records, _) = mine_document(
        &doc.emissions,
        &labels,
        &doc.document,
        &AlignerConfig::default(),
        &FilterConfig::new(0.8).unwrap(),
        0.0,
    )
    .unwrap();
    let d = doc.truth.frame_duration_ms;
    for record in &records {
        let rec_start = (record.start_ms / d).round() as i64;
        let rec_end = (record.end_ms / d).round() as i64 - 1;
        let best = doc
            .truth
            .sentences
            .iter()
            .filter(|s| s.text == record.ref_text)
            .filter_map(|s| s.interval)
            .map(|iv| {
                (
                    (rec_start - iv.start as i64).abs().max((rec_end - iv.end as i64).abs()),
                    iv,
                )
            })
            .min_by_key(|(err, _)| *err)
            .unwrap();
        if best.0 > 2 {
            println!("OFF BY {}:", best.0);
            println!("  rec frames [{rec_start}, {rec_end}] truth {:?}", best.1);
            println!("  ref: {:?}", record.ref_text);
            println!("  hyp: {:?}", record.hyp_text);
            println!("  score: {}", record.score);
            // locate the sentence in truth
            for (i, s) in doc.truth.sentences.iter().enumerate() {
                if s.text == record.ref_text {
                    println!("  sentence {} corrupted={} interval={:?}", i, s.corrupted, s.interval);
                    if i > 0 {
                        println!("  prev: {:?} {:?}", doc.truth.sentences[i-1].text, doc.truth.sentences[i-1].interval);
                    }
                    if i + 1 < doc.truth.sentences.len() {
                        println!("  next: {:?} {:?}", doc.truth.sentences[i+1].text, doc.truth.sentences[i+1].interval);
                    }
                }
            }
            println!("  untranscribed: {:?}", doc.truth.untranscribed);
        }
    }
}
