//! Synthetic cohorts with known effects: a question bank plus complete
//! session logs generated from a logistic response model with per-participant
//! random intercepts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BankEntry, Keywords, Question, QuestionBank, QuestionKind};
use crate::protocol::preference::{Choice, Dimension, PreferenceBallot, Vote, PAIRS};
use crate::protocol::{generate_assignment, participant_id, Condition, ItemLog, SessionLog};
use crate::textmodel::{Document, KhmerTagset, Language, PosTag};

/// Start of the synthetic clock (ms since the epoch, 2024-01-01T00:00:00Z).
pub const EPOCH_MS: u64 = 1_704_067_200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// Participants who complete every item.
    pub participants: usize,
    pub texts: usize,
    /// Baseline logit of a correct answer, per question kind.
    pub base_logit: [f64; 4],
    /// Added to the logit when the text is styled, per question kind.
    pub styled_shift: [f64; 4],
    /// SD of the per-participant random intercept on the logit scale.
    pub ability_sd: f64,
    /// Logit that a target keyword is selected (distractors use the negative).
    pub keyword_logit: f64,
    pub keyword_shift: f64,
    /// Median reading speed, characters per minute.
    pub cpm: f64,
    /// Multiplicative styled effect on reading speed.
    pub styled_speed: f64,
    pub chars_per_text: usize,
    pub answering_s: f64,
    /// Gap between submitting one item and seeing the next.
    pub pause_s: f64,
    /// Extra participants whose sessions end early (abandoned).
    pub incomplete: usize,
    /// Completed participants whose sessions are compressed under 30 minutes.
    pub short_sessions: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            participants: 43,
            texts: 10,
            base_logit: [0.0, 0.1, 0.4, 0.9],
            styled_shift: [0.0; 4],
            ability_sd: 0.5,
            keyword_logit: 1.0,
            keyword_shift: 0.0,
            cpm: 700.0,
            styled_speed: 1.0,
            chars_per_text: 1200,
            answering_s: 90.0,
            pause_s: 60.0,
            incomplete: 0,
            short_sessions: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub bank: QuestionBank,
    pub logs: Vec<SessionLog>,
}

impl SynthCohort {
    /// All sessions as one JSONL event stream.
    pub fn sessions_jsonl(&self) -> String {
        let mut out = String::new();
        for log in &self.logs {
            for record in log.to_records() {
                out.push_str(&record.to_line());
                out.push('\n');
            }
        }
        out
    }
}

pub fn text_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("T{i:02}")).collect()
}

/// A question bank with placeholder wording and seeded answer keys.
pub fn synth_bank(texts: usize, seed: u64) -> Result<QuestionBank> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6261_6e6b);
    let entries = text_ids(texts)
        .into_iter()
        .map(|id| BankEntry {
            questions: QuestionKind::ALL
                .iter()
                .map(|kind| Question {
                    kind: *kind,
                    prompt: format!("{id} {} question", kind.name()),
                    options: (1..=4).map(|o| format!("{id}-{}-option{o}", kind.name())).collect(),
                    answer: rng.gen_range(0..4),
                })
                .collect(),
            keywords: Keywords {
                targets: (1..=5).map(|k| format!("{id}-key{k}")).collect(),
                distractors: (1..=5).map(|k| format!("{id}-near{k}")).collect(),
            },
            text_id: id,
        })
        .collect();
    QuestionBank::from_entries(entries)
}

const KHMER_SENTENCE: [(&str, &str); 7] = [
    ("សិស្ស", "n"),
    ("បាន", "part"),
    ("អាន", "v"),
    ("សៀវភៅ", "n"),
    ("ល្អ", "a"),
    ("នេះ", "det"),
    ("។", "o"),
];

const JAPANESE_SENTENCE: [(&str, &str); 8] = [
    ("学生", "NOUN"),
    ("が", "ADP"),
    ("新しい", "ADJ"),
    ("本", "NOUN"),
    ("を", "ADP"),
    ("読み", "VERB"),
    ("ました", "AUX"),
    ("。", "PUNCT"),
];

/// Tagged placeholder documents, `sentences` repetitions of one sentence
/// each, for serving synthetic cohorts.
pub fn synth_documents(ids: &[String], language: Language, sentences: usize) -> Result<Vec<Document>> {
    let tagset = KhmerTagset::default();
    ids.iter()
        .map(|id| {
            let tagged: Vec<(String, PosTag)> = match language {
                Language::Khmer => KHMER_SENTENCE
                    .iter()
                    .cycle()
                    .take(KHMER_SENTENCE.len() * sentences)
                    .map(|(s, t)| Ok((s.to_string(), PosTag::khmer(t, &tagset)?)))
                    .collect::<Result<_>>()?,
                Language::Japanese => JAPANESE_SENTENCE
                    .iter()
                    .cycle()
                    .take(JAPANESE_SENTENCE.len() * sentences)
                    .map(|(s, t)| (s.to_string(), PosTag::ud(t)))
                    .collect(),
            };
            Document::from_tagged(id.clone(), language, tagged)
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates the bank and logs. Each participant draws an ability offset and
/// a personal reading speed; every answer is an independent Bernoulli draw
/// given those.
pub fn synth_cohort(cfg: &SynthConfig) -> Result<SynthCohort> {
    if cfg.texts == 0 || cfg.texts % 2 != 0 || cfg.texts > 10 {
        return Err(Error::Protocol(format!("synthetic cohorts need an even text count up to 10, got {}", cfg.texts)));
    }
    let bank = synth_bank(cfg.texts, cfg.seed)?;
    let ids = text_ids(cfg.texts);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ability = Normal::new(0.0, cfg.ability_sd.max(0.0)).map_err(|e| Error::Stats(e.to_string()))?;
    let speed = LogNormal::new(cfg.cpm.ln(), 0.25).map_err(|e| Error::Stats(e.to_string()))?;
    let jitter = LogNormal::new(0.0, 0.15).map_err(|e| Error::Stats(e.to_string()))?;
    let rating = Normal::new(0.0, 0.8).map_err(|e| Error::Stats(e.to_string()))?;
    let total = cfg.participants + cfg.incomplete;
    let mut logs = Vec::with_capacity(total);
    for p in 0..total {
        let pid = participant_id(p);
        let assignment = generate_assignment(&pid, &ids, cfg.seed.wrapping_mul(1_000_003).wrapping_add(p as u64))?;
        let offset = ability.sample(&mut rng);
        let personal_cpm = speed.sample(&mut rng);
        let short = p >= cfg.participants - cfg.short_sessions.min(cfg.participants) && p < cfg.participants;
        let compress = if short { 0.3 } else { 1.0 };
        let answered = if p >= cfg.participants { rng.gen_range(1..cfg.texts) } else { cfg.texts };
        let mut clock = EPOCH_MS + p as u64 * 86_400_000;
        let mut items = Vec::new();
        for (i, assigned) in assignment.items.iter().enumerate().take(answered) {
            let styled = assigned.condition == Condition::S;
            let entry = bank.get(&assigned.text_id).expect("bank covers every text");
            let mcq = QuestionKind::ALL
                .iter()
                .map(|kind| {
                    let k = kind.index();
                    let logit = cfg.base_logit[k] + offset + if styled { cfg.styled_shift[k] } else { 0.0 };
                    let answer = entry.question(*kind).answer;
                    if rng.gen_bool(sigmoid(logit)) {
                        answer
                    } else {
                        (answer + rng.gen_range(1..4)) % 4
                    }
                })
                .collect();
            let kw_logit = cfg.keyword_logit + if styled { cfg.keyword_shift } else { 0.0 };
            let mut keywords = Vec::new();
            for t in &entry.keywords.targets {
                if rng.gen_bool(sigmoid(kw_logit)) {
                    keywords.push(t.clone());
                }
            }
            for d in &entry.keywords.distractors {
                if rng.gen_bool(sigmoid(-kw_logit)) {
                    keywords.push(d.clone());
                }
            }
            let cpm = personal_cpm * if styled { cfg.styled_speed } else { 1.0 } * jitter.sample(&mut rng);
            let reading_ms = (60_000.0 * cfg.chars_per_text as f64 / cpm * compress).max(1.0) as u64;
            let answering_ms = (cfg.answering_s * 1000.0 * jitter.sample(&mut rng) * compress).max(1.0) as u64;
            let difficulty = (3.0f64 + rating.sample(&mut rng)).round().clamp(1.0, 5.0) as u8;
            let shown = clock;
            let opened = shown + reading_ms;
            let submitted = opened + answering_ms;
            clock = submitted + (cfg.pause_s * 1000.0 * compress) as u64 + 1;
            items.push(ItemLog {
                position: i + 1,
                text_id: assigned.text_id.clone(),
                condition: assigned.condition,
                chars: cfg.chars_per_text,
                text_shown_at: shown,
                answers_opened_at: opened,
                answers_submitted_at: submitted,
                mcq,
                keywords,
                difficulty,
            });
        }
        logs.push(SessionLog {
            participant_id: pid,
            abandoned: answered < cfg.texts,
            assignment: Some(assignment),
            items,
        });
    }
    Ok(SynthCohort { bank, logs })
}

/// Preference ballots: `inside` completed within the counting window and
/// `outside` completed too fast or too slow, alternately.
pub fn synth_ballots(inside: usize, outside: usize, seed: u64) -> Vec<PreferenceBallot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..inside + outside)
        .map(|i| {
            let completion_minutes = if i < inside {
                rng.gen_range(5.5..11.5)
            } else if (i - inside) % 2 == 0 {
                rng.gen_range(1.0..4.5)
            } else {
                rng.gen_range(13.0..30.0)
            };
            let votes = (1..=PAIRS)
                .flat_map(|pair_id| Dimension::ALL.into_iter().map(move |d| (pair_id, d)))
                .map(|(pair_id, dimension)| Vote {
                    pair_id,
                    choice: if rng.gen_bool(0.5) { Choice::A } else { Choice::B },
                    dimension,
                })
                .collect();
            PreferenceBallot {
                participant_id: participant_id(i),
                completion_minutes,
                votes,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{derive_timings, validate_assignment};

    #[test]
    fn cohort_shape() {
        let cfg = SynthConfig { participants: 44, incomplete: 6, short_sessions: 1, seed: 5, ..Default::default() };
        let c = synth_cohort(&cfg).unwrap();
        assert_eq!(c.logs.len(), 50);
        assert_eq!(c.logs.iter().filter(|l| l.is_complete()).count(), 44);
        let short: Vec<_> = c.logs.iter().filter(|l| l.is_complete() && l.duration_minutes() < 30.0).collect();
        assert_eq!(short.len(), 1);
        for log in &c.logs {
            derive_timings(log).unwrap();
            assert!(validate_assignment(log.assignment.as_ref().unwrap()).is_empty());
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig { seed: 9, participants: 5, ..Default::default() };
        let a = synth_cohort(&cfg).unwrap();
        let b = synth_cohort(&cfg).unwrap();
        assert_eq!(a.logs, b.logs);
        assert_eq!(a.sessions_jsonl(), b.sessions_jsonl());
    }

    #[test]
    fn ballots_split_by_window() {
        let b = synth_ballots(59, 2, 1);
        let r = crate::protocol::tally_preferences(&b, 5.0, 12.0);
        assert_eq!((r.submitted, r.counted), (61, 59));
    }
}
