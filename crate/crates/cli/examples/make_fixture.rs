//! Writes the synthetic 30-language fixture used by the CLI tests.
//!
//! Usage: `cargo run -p mutox-cli --example make_fixture -- <out-dir>`

use std::collections::BTreeSet;
use std::path::PathBuf;

use mutox::corpus::{
    self, DatasetManifest, EmbeddingRecord, LabelRecord, Modality, ScoreCategory, ScoreRecord, ScoreSide,
    ToxicityCategory, Utterance, Verdict, SEED_LANGUAGES,
};
use mutox::rng::{seeded, unit_f64, SplitMix64};

const ITEMS_PER_LANG: usize = 100;
const DIM: usize = 16;
const CMN_FILLER: [&str; 8] = ["今天", "天气", "我们", "学校", "朋友", "晚饭", "电影", "音乐"];
const CMN_TOXIC: [&str; 4] = ["笨蛋", "混蛋", "滚开", "废物"];

fn normal(rng: &mut SplitMix64) -> f64 {
    let u1 = unit_f64(rng).max(1e-300);
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pick<'a, T>(rng: &mut SplitMix64, items: &'a [T]) -> &'a T {
    &items[(unit_f64(rng) * items.len() as f64) as usize]
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).expect("usage: make_fixture <out-dir>"));
    std::fs::create_dir_all(out.join("wordlists")).expect("create fixture dir");
    let mut rng = seeded(20240601);

    let mut utterances = Vec::new();
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    let mut embeddings = Vec::new();

    for lang in SEED_LANGUAGES {
        let cmn = lang == "cmn";
        let toxic_words: Vec<String> = if cmn {
            CMN_TOXIC.iter().map(|s| s.to_string()).collect()
        } else {
            (1..=5).map(|k| format!("{lang}bad{k}")).collect()
        };
        let filler: Vec<String> = if cmn {
            CMN_FILLER.iter().map(|s| s.to_string()).collect()
        } else {
            (0..20).map(|k| format!("{lang}w{k}")).collect()
        };
        let mut body = String::new();
        if cmn {
            body.push_str("!match: substring\n");
        }
        for w in &toxic_words {
            body.push_str(w);
            body.push('\n');
        }
        std::fs::write(out.join("wordlists").join(format!("{lang}.txt")), body).expect("write wordlist");

        for i in 0..ITEMS_PER_LANG {
            let id = format!("{lang}-{i:03}");
            let r = unit_f64(&mut rng);
            let verdict = if r < 0.35 {
                Verdict::Toxic
            } else if r < 0.95 {
                Verdict::NotToxic
            } else {
                Verdict::CannotSay
            };
            let toxic = verdict == Verdict::Toxic;

            let n_words = 4 + (unit_f64(&mut rng) * 6.0) as usize;
            let mut words: Vec<String> = (0..n_words).map(|_| pick(&mut rng, &filler).clone()).collect();
            let lexical_hit = if toxic { 0.7 } else { 0.1 };
            if unit_f64(&mut rng) < lexical_hit {
                let pos = (unit_f64(&mut rng) * words.len() as f64) as usize;
                words.insert(pos, pick(&mut rng, &toxic_words).clone());
            }
            let transcript = if cmn { words.concat() } else { words.join(" ") };

            let duration = if unit_f64(&mut rng) < 0.05 {
                9.5
            } else {
                round4(2.0 + 6.0 * unit_f64(&mut rng))
            };
            utterances.push(Utterance {
                id: id.clone(),
                lang: lang.to_string(),
                modality: Modality::Speech,
                duration_s: Some(duration),
                transcript: Some(transcript),
                audio_path: Some(format!("{lang}/{id}.wav")),
                source: if i % 2 == 0 { "cc".into() } else { "web".into() },
                parallel_eng_id: None,
            });

            let mut categories = BTreeSet::new();
            if toxic {
                categories.insert(*pick(&mut rng, &ToxicityCategory::ALL));
                if unit_f64(&mut rng) < 0.3 {
                    categories.insert(*pick(&mut rng, &ToxicityCategory::ALL));
                }
            }
            labels.push(LabelRecord {
                id: id.clone(),
                lang: lang.to_string(),
                verdict,
                categories,
            });

            let overall = if toxic && unit_f64(&mut rng) < 0.75 {
                0.5 + 0.5 * unit_f64(&mut rng)
            } else {
                0.6 * unit_f64(&mut rng)
            };
            let side = if ["eng", "fra", "ita", "por", "rus", "tur"].contains(&lang) {
                ScoreSide::Native
            } else {
                ScoreSide::EnglishParallel
            };
            let hot = *pick(&mut rng, &ScoreCategory::TOXICITY);
            for c in ScoreCategory::TOXICITY.into_iter().chain([ScoreCategory::Overall]) {
                let score = match c {
                    ScoreCategory::Overall => overall,
                    c if c == hot => overall,
                    _ => overall * 0.5 * unit_f64(&mut rng),
                };
                scores.push(ScoreRecord {
                    utterance_id: id.clone(),
                    provider: "detoxify".into(),
                    category: c,
                    score: round4(score),
                    score_side: side,
                });
            }

            let sign = match verdict {
                Verdict::Toxic => 1.0,
                Verdict::NotToxic => -1.0,
                Verdict::CannotSay => 0.0,
            };
            let vector = (0..DIM)
                .map(|d| {
                    let mean = if d < 4 { 0.6 * sign } else { 0.0 };
                    (mean + normal(&mut rng)) as f32
                })
                .collect();
            embeddings.push(EmbeddingRecord {
                utterance_id: id,
                encoder_id: "speech".into(),
                modality: None,
                vector,
            });
        }
    }

    let manifest = DatasetManifest {
        utterances,
        provenance: Vec::new(),
    };
    corpus::save_manifest(out.join("manifest.tsv"), &manifest).expect("write manifest");
    corpus::save_labels(out.join("labels.tsv"), &labels).expect("write labels");
    corpus::save_scores(out.join("detoxify_scores.tsv"), &scores).expect("write scores");
    corpus::save_embeddings(out.join("speech.mtxe"), DIM, &embeddings).expect("write embeddings");
    println!("wrote {} utterances into {}", manifest.utterances.len(), out.display());
}
