//! Session event records (JSON lines), their assembly into per-participant
//! logs, timing metrics and completion-time exclusion.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::assignment::{AssignedItem, Assignment, Condition, SCHEMA_VERSION};
use crate::error::{Error, Result};

/// Timestamps supplied by the reading client, kept for audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientTimes {
    pub shown_at: u64,
    pub opened_at: u64,
    pub submitted_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Assignment {
        seed: u64,
        rng: String,
        items: Vec<AssignedItem>,
        t: u64,
    },
    TextShown {
        item: usize,
        text_id: String,
        condition: Condition,
        chars: usize,
        t: u64,
    },
    AnswersOpened {
        item: usize,
        t: u64,
    },
    AnswersSubmitted {
        item: usize,
        t: u64,
        /// Selected option per question, in bank order (factual, inferential,
        /// global, cloze), indexed against the bank's option order.
        mcq: Vec<usize>,
        keywords: Vec<String>,
        difficulty: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<ClientTimes>,
    },
    Abandoned {
        t: u64,
    },
}

impl SessionEvent {
    pub fn timestamp(&self) -> u64 {
        match self {
            SessionEvent::Assignment { t, .. }
            | SessionEvent::TextShown { t, .. }
            | SessionEvent::AnswersOpened { t, .. }
            | SessionEvent::AnswersSubmitted { t, .. }
            | SessionEvent::Abandoned { t } => *t,
        }
    }
}

/// One JSON line of a session stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub v: u32,
    pub participant_id: String,
    #[serde(flatten)]
    pub event: SessionEvent,
}

impl SessionRecord {
    pub fn new(participant_id: impl Into<String>, event: SessionEvent) -> Self {
        SessionRecord {
            v: SCHEMA_VERSION,
            participant_id: participant_id.into(),
            event,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// One read text with its answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemLog {
    /// 1-based position in the participant's reading order.
    pub position: usize,
    pub text_id: String,
    pub condition: Condition,
    /// Character count of the displayed text.
    pub chars: usize,
    pub text_shown_at: u64,
    pub answers_opened_at: u64,
    pub answers_submitted_at: u64,
    pub mcq: Vec<usize>,
    pub keywords: Vec<String>,
    pub difficulty: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub participant_id: String,
    pub assignment: Option<Assignment>,
    /// Fully answered items in reading order.
    pub items: Vec<ItemLog>,
    pub abandoned: bool,
}

impl SessionLog {
    /// All assigned items answered and not abandoned.
    pub fn is_complete(&self) -> bool {
        let expected = self.assignment.as_ref().map_or(self.items.len(), |a| a.items.len());
        !self.abandoned && !self.items.is_empty() && self.items.len() == expected
    }

    /// Milliseconds from the first text shown to the last submission.
    pub fn duration_ms(&self) -> u64 {
        match (self.items.first(), self.items.last()) {
            (Some(f), Some(l)) => l.answers_submitted_at.saturating_sub(f.text_shown_at),
            _ => 0,
        }
    }

    pub fn duration_minutes(&self) -> f64 {
        self.duration_ms() as f64 / 60_000.0
    }

    /// Serializes the log back into its event stream.
    pub fn to_records(&self) -> Vec<SessionRecord> {
        let pid = &self.participant_id;
        let mut out = Vec::new();
        if let Some(a) = &self.assignment {
            let t = self.items.first().map_or(0, |i| i.text_shown_at.saturating_sub(1));
            out.push(SessionRecord::new(
                pid.clone(),
                SessionEvent::Assignment {
                    seed: a.seed,
                    rng: a.rng.clone(),
                    items: a.items.clone(),
                    t,
                },
            ));
        }
        for it in &self.items {
            let item = it.position - 1;
            out.push(SessionRecord::new(
                pid.clone(),
                SessionEvent::TextShown {
                    item,
                    text_id: it.text_id.clone(),
                    condition: it.condition,
                    chars: it.chars,
                    t: it.text_shown_at,
                },
            ));
            out.push(SessionRecord::new(pid.clone(), SessionEvent::AnswersOpened { item, t: it.answers_opened_at }));
            out.push(SessionRecord::new(
                pid.clone(),
                SessionEvent::AnswersSubmitted {
                    item,
                    t: it.answers_submitted_at,
                    mcq: it.mcq.clone(),
                    keywords: it.keywords.clone(),
                    difficulty: it.difficulty,
                    client: None,
                },
            ));
        }
        out
    }
}

#[derive(Default)]
struct Partial {
    text_id: Option<(String, Condition, usize, u64)>,
    opened: Option<u64>,
    submitted: Option<(u64, Vec<usize>, Vec<String>, u8)>,
}

/// Groups records by participant (first-appearance order) and assembles
/// their logs. Items missing any of the three events are dropped; repeated
/// events for an item keep the first occurrence.
pub fn assemble_logs(records: &[SessionRecord]) -> Result<Vec<SessionLog>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_pid: BTreeMap<String, (Option<Assignment>, BTreeMap<usize, Partial>, bool)> = BTreeMap::new();
    for rec in records {
        if rec.v != SCHEMA_VERSION {
            return Err(Error::Protocol(format!("unsupported record version {}", rec.v)));
        }
        let entry = by_pid.entry(rec.participant_id.clone()).or_insert_with(|| {
            order.push(rec.participant_id.clone());
            (None, BTreeMap::new(), false)
        });
        match &rec.event {
            SessionEvent::Assignment { seed, rng, items, .. } => {
                entry.0.get_or_insert_with(|| Assignment {
                    v: rec.v,
                    participant_id: rec.participant_id.clone(),
                    seed: *seed,
                    rng: rng.clone(),
                    items: items.clone(),
                });
            }
            SessionEvent::TextShown {
                item,
                text_id,
                condition,
                chars,
                t,
            } => {
                entry.1.entry(*item).or_default().text_id.get_or_insert((text_id.clone(), *condition, *chars, *t));
            }
            SessionEvent::AnswersOpened { item, t } => {
                entry.1.entry(*item).or_default().opened.get_or_insert(*t);
            }
            SessionEvent::AnswersSubmitted {
                item,
                t,
                mcq,
                keywords,
                difficulty,
                ..
            } => {
                entry
                    .1
                    .entry(*item)
                    .or_default()
                    .submitted
                    .get_or_insert((*t, mcq.clone(), keywords.clone(), *difficulty));
            }
            SessionEvent::Abandoned { .. } => entry.2 = true,
        }
    }
    Ok(order
        .into_iter()
        .map(|pid| {
            let (assignment, partials, abandoned) = by_pid.remove(&pid).expect("grouped above");
            let items = partials
                .into_iter()
                .filter_map(|(idx, p)| {
                    let (text_id, condition, chars, shown) = p.text_id?;
                    let opened = p.opened?;
                    let (submitted, mcq, keywords, difficulty) = p.submitted?;
                    Some(ItemLog {
                        position: idx + 1,
                        text_id,
                        condition,
                        chars,
                        text_shown_at: shown,
                        answers_opened_at: opened,
                        answers_submitted_at: submitted,
                        mcq,
                        keywords,
                        difficulty,
                    })
                })
                .collect();
            SessionLog {
                participant_id: pid,
                assignment,
                items,
                abandoned,
            }
        })
        .collect())
}

/// Reads a JSON-lines stream of session records (blank lines ignored).
pub fn read_records(reader: impl BufRead) -> Result<Vec<SessionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_session_logs(input: &str) -> Result<Vec<SessionLog>> {
    assemble_logs(&read_records(input.as_bytes())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemTiming {
    pub position: usize,
    pub text_id: String,
    pub condition: Condition,
    pub reading_time_s: f64,
    pub answering_time_s: f64,
    pub cpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub participant_id: String,
    pub items: Vec<ItemTiming>,
    /// 60 × total characters / total reading seconds.
    pub cpm: f64,
}

impl Timings {
    /// Reading speed over the items of one condition.
    pub fn cpm_for(&self, log: &SessionLog, condition: Condition) -> Option<f64> {
        let (chars, secs) = self
            .items
            .iter()
            .zip(&log.items)
            .filter(|(t, _)| t.condition == condition)
            .fold((0usize, 0.0), |(c, s), (t, item)| (c + item.chars, s + t.reading_time_s));
        (secs > 0.0).then(|| 60.0 * chars as f64 / secs)
    }
}

/// Reading time, answering time and reading speed per item.
pub fn derive_timings(log: &SessionLog) -> Result<Timings> {
    let mut last_submit: Option<u64> = None;
    let mut items = Vec::with_capacity(log.items.len());
    let (mut chars, mut reading_ms) = (0usize, 0u64);
    for it in &log.items {
        let err = |message: String| Error::NonMonotonic {
            item: it.position,
            message,
        };
        if let Some(prev) = last_submit {
            if it.text_shown_at <= prev {
                return Err(err(format!(
                    "shown at {} but the previous item was submitted at {prev}",
                    it.text_shown_at
                )));
            }
        }
        if it.answers_opened_at <= it.text_shown_at {
            return Err(err(format!(
                "answers opened at {} before text shown at {}",
                it.answers_opened_at, it.text_shown_at
            )));
        }
        if it.answers_submitted_at <= it.answers_opened_at {
            return Err(err(format!(
                "answers submitted at {} before they were opened at {}",
                it.answers_submitted_at, it.answers_opened_at
            )));
        }
        last_submit = Some(it.answers_submitted_at);
        let reading = it.answers_opened_at - it.text_shown_at;
        let answering = it.answers_submitted_at - it.answers_opened_at;
        chars += it.chars;
        reading_ms += reading;
        let reading_s = reading as f64 / 1000.0;
        items.push(ItemTiming {
            position: it.position,
            text_id: it.text_id.clone(),
            condition: it.condition,
            reading_time_s: reading_s,
            answering_time_s: answering as f64 / 1000.0,
            cpm: 60.0 * it.chars as f64 / reading_s,
        });
    }
    let cpm = if reading_ms > 0 {
        60.0 * chars as f64 / (reading_ms as f64 / 1000.0)
    } else {
        0.0
    };
    Ok(Timings {
        participant_id: log.participant_id.clone(),
        items,
        cpm,
    })
}

/// Splits logs into those lasting at least `min_total_minutes` and the rest.
pub fn filter_participants(logs: &[SessionLog], min_total_minutes: f64) -> (Vec<SessionLog>, Vec<SessionLog>) {
    logs.iter()
        .cloned()
        .partition(|log| log.duration_minutes() >= min_total_minutes)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn item(position: usize, shown: u64, opened: u64, submitted: u64) -> ItemLog {
        ItemLog {
            position,
            text_id: format!("t{position}"),
            condition: if position % 2 == 0 { Condition::S } else { Condition::NS },
            chars: 250,
            text_shown_at: shown,
            answers_opened_at: opened,
            answers_submitted_at: submitted,
            mcq: vec![0, 1, 2, 3],
            keywords: vec!["k1".into()],
            difficulty: 3,
        }
    }

    fn log(items: Vec<ItemLog>) -> SessionLog {
        SessionLog {
            participant_id: "p".into(),
            assignment: None,
            items,
            abandoned: false,
        }
    }

    #[test]
    fn reading_time_from_timestamps() {
        let t = derive_timings(&log(vec![item(1, 0, 107_590, 200_000)])).unwrap();
        assert!((t.items[0].reading_time_s - 107.59).abs() < 1e-12);
        assert!((t.items[0].answering_time_s - 92.41).abs() < 1e-9);
    }

    #[test]
    fn cpm_from_chars_and_time() {
        let t = derive_timings(&log(vec![item(1, 0, 60_000, 61_000)])).unwrap();
        assert_eq!(t.items[0].cpm, 250.0);
        assert_eq!(t.cpm, 250.0);
    }

    #[test]
    fn opened_before_shown_is_an_error() {
        let err = derive_timings(&log(vec![item(1, 100, 50, 200)])).unwrap_err();
        assert!(matches!(err, Error::NonMonotonic { item: 1, .. }));
        let err = derive_timings(&log(vec![item(1, 0, 10, 20), item(2, 15, 30, 40)])).unwrap_err();
        assert!(matches!(err, Error::NonMonotonic { item: 2, .. }));
    }

    #[test]
    fn per_condition_cpm() {
        let l = log(vec![item(1, 0, 60_000, 61_000), item(2, 62_000, 92_000, 93_000)]);
        let t = derive_timings(&l).unwrap();
        assert_eq!(t.cpm_for(&l, Condition::NS), Some(250.0));
        assert_eq!(t.cpm_for(&l, Condition::S), Some(500.0));
    }

    #[test]
    fn filter_by_total_duration() {
        let minutes = |m: u64| log(vec![item(1, 0, 1000, m * 60_000)]);
        let logs = vec![minutes(40), minutes(28), minutes(31)];
        let (kept, excluded) = filter_participants(&logs, 30.0);
        assert_eq!(kept.len(), 2);
        assert_eq!(excluded.len(), 1);
        let (kept, excluded) = filter_participants(&[], 30.0);
        assert!(kept.is_empty() && excluded.is_empty());
    }

    #[test]
    fn records_round_trip_through_assembly() {
        let l = log(vec![item(1, 0, 10, 20), item(2, 30, 40, 50)]);
        let lines: String = l.to_records().iter().map(|r| r.to_line() + "\n").collect();
        let back = load_session_logs(&lines).unwrap();
        assert_eq!(back, vec![l]);
    }

    #[test]
    fn incomplete_items_are_dropped() {
        let l = log(vec![item(1, 0, 10, 20)]);
        let mut recs = l.to_records();
        recs.push(SessionRecord::new(
            "p",
            SessionEvent::TextShown {
                item: 1,
                text_id: "t2".into(),
                condition: Condition::S,
                chars: 3,
                t: 30,
            },
        ));
        recs.push(SessionRecord::new("p", SessionEvent::Abandoned { t: 99 }));
        let back = assemble_logs(&recs).unwrap();
        assert_eq!(back[0].items.len(), 1);
        assert!(back[0].abandoned);
        assert!(!back[0].is_complete());
    }

    #[test]
    fn record_wire_format() {
        let rec = SessionRecord::new("p", SessionEvent::AnswersOpened { item: 2, t: 5 });
        assert_eq!(rec.to_line(), r#"{"v":1,"participant_id":"p","type":"answers_opened","item":2,"t":5}"#);
    }
}
