//! Event-sourced session store. Each session is an append-only stream of
//! [`SessionRecord`]s, persisted as one JSONL file per session; in-memory
//! state is whatever replaying that stream produces.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::ingest::{QuestionBank, QuestionKind};
use crate::protocol::{
    generate_assignment, read_records, validate_assignment, Assignment, ClientTimes, Condition, Draws, SessionEvent,
    SessionRecord, RNG_ALGORITHM, SCHEMA_VERSION,
};
use crate::render::{span_records, SpanRecord};
use crate::styler::{apply_scheme, plain_runs, StyleScheme};
use crate::textmodel::Document;

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// Settable clock for tests and replays.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    NotFound,
    Conflict,
    Invalid,
    Rejected,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ServiceError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ServiceError {
            kind,
            message: message.into(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self.kind {
            ErrorKind::NotFound => "not_found",
            ErrorKind::Conflict => "conflict",
            ErrorKind::Invalid => "invalid",
            ErrorKind::Rejected => "rejected",
            ErrorKind::Internal => "internal",
        }
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code(), self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Io(_) | Error::Json(_) => ErrorKind::Internal,
            _ => ErrorKind::Invalid,
        };
        ServiceError::new(kind, e.to_string())
    }
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Complete,
    Abandoned,
}

/// State of one session, rebuilt from its events.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub id: String,
    pub assignment: Assignment,
    /// Index of the next item to answer.
    pub cursor: usize,
    pub status: SessionStatus,
    pub events: Vec<SessionRecord>,
    /// Server time the cursor item was shown, if it has been.
    pub shown_at: Option<u64>,
    pub opened_at: Option<u64>,
}

impl SessionState {
    pub fn participant_id(&self) -> &str {
        &self.assignment.participant_id
    }

    pub fn seed(&self) -> u64 {
        self.assignment.seed
    }

    pub fn last_activity(&self) -> u64 {
        self.events.last().map_or(0, |r| r.event.timestamp())
    }

    /// Rebuilds a session from its stream; the first record must be the
    /// assignment.
    pub fn replay(records: &[SessionRecord]) -> crate::Result<SessionState> {
        let first = records
            .first()
            .ok_or_else(|| Error::Protocol("empty session stream".into()))?;
        let SessionEvent::Assignment { seed, rng, items, .. } = &first.event else {
            return Err(Error::Protocol("session stream must start with the assignment".into()));
        };
        let assignment = Assignment {
            v: first.v,
            participant_id: first.participant_id.clone(),
            seed: *seed,
            rng: rng.clone(),
            items: items.clone(),
        };
        let mut state = SessionState {
            id: session_id(&first.participant_id, *seed),
            assignment,
            cursor: 0,
            status: SessionStatus::Active,
            events: vec![first.clone()],
            shown_at: None,
            opened_at: None,
        };
        for rec in &records[1..] {
            state.apply(rec.clone())?;
        }
        Ok(state)
    }

    /// Validates one event against the state machine and appends it.
    pub fn apply(&mut self, rec: SessionRecord) -> crate::Result<()> {
        let err = |m: String| Error::Protocol(format!("session `{}`: {m}", self.id));
        if rec.participant_id != self.assignment.participant_id {
            return Err(err(format!("record for participant `{}`", rec.participant_id)));
        }
        let t = rec.event.timestamp();
        if t < self.last_activity() {
            return Err(Error::NonMonotonic {
                item: self.cursor + 1,
                message: format!("event at {t} precedes the previous event at {}", self.last_activity()),
            });
        }
        if self.status != SessionStatus::Active {
            return Err(err(format!("session is {:?}", self.status)));
        }
        let expect_item = |item: usize| {
            if item == self.cursor {
                Ok(())
            } else {
                Err(err(format!("event for item {item} while item {} is current", self.cursor)))
            }
        };
        match &rec.event {
            SessionEvent::Assignment { .. } => return Err(err("second assignment".into())),
            SessionEvent::TextShown { item, .. } => {
                expect_item(*item)?;
                if self.shown_at.is_some() {
                    return Err(err(format!("item {item} already shown")));
                }
                self.shown_at = Some(t);
            }
            SessionEvent::AnswersOpened { item, .. } => {
                expect_item(*item)?;
                match self.shown_at {
                    Some(s) if t > s && self.opened_at.is_none() => self.opened_at = Some(t),
                    _ => return Err(err(format!("answers opened out of order for item {item}"))),
                }
            }
            SessionEvent::AnswersSubmitted { item, .. } => {
                expect_item(*item)?;
                match self.opened_at {
                    Some(o) if t > o => {
                        self.cursor += 1;
                        self.shown_at = None;
                        self.opened_at = None;
                        if self.cursor == self.assignment.items.len() {
                            self.status = SessionStatus::Complete;
                        }
                    }
                    _ => return Err(err(format!("answers submitted out of order for item {item}"))),
                }
            }
            SessionEvent::Abandoned { .. } => self.status = SessionStatus::Abandoned,
        }
        self.events.push(rec);
        Ok(())
    }
}

/// Stable id for a (participant, seed) pair.
pub fn session_id(participant_id: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(participant_id.as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("s{hex}")
}

/// Seed used when a client does not supply one.
pub fn default_seed(participant_id: &str) -> u64 {
    let digest = Sha256::digest(format!("seed:{participant_id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Texts, questions and the scheme used for the styled condition.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub bank: QuestionBank,
    pub documents: BTreeMap<String, Document>,
    pub scheme: StyleScheme,
}

impl Catalog {
    /// Every bank text must have a document in the scheme's tag scheme.
    pub fn new(bank: QuestionBank, documents: Vec<Document>, scheme: StyleScheme) -> crate::Result<Self> {
        let documents: BTreeMap<String, Document> = documents.into_iter().map(|d| (d.id.clone(), d)).collect();
        for id in bank.text_ids() {
            let doc = documents
                .get(id)
                .ok_or_else(|| Error::QuestionBank(format!("no document for text `{id}`")))?;
            apply_scheme(doc, &scheme)?;
        }
        if bank.is_empty() || bank.len() % 2 != 0 {
            return Err(Error::Protocol(format!(
                "even count required to balance conditions, the bank has {} texts",
                bank.len()
            )));
        }
        Ok(Catalog { bank, documents, scheme })
    }

    pub fn text_ids(&self) -> Vec<String> {
        self.bank.text_ids().map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct StoreConfig {
    /// Where session streams are written; `None` keeps them in memory.
    pub data_dir: Option<PathBuf>,
    /// Active sessions idle longer than this are marked abandoned.
    pub idle_timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub participant_id: String,
    pub seed: u64,
    pub status: SessionStatus,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownQuestion {
    pub kind: QuestionKind,
    pub prompt: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPayload {
    /// 1-based position in the reading order.
    pub position: usize,
    pub total: usize,
    pub text_id: String,
    pub condition: Condition,
    pub text: String,
    pub spans: Vec<SpanRecord>,
    pub questions: Vec<ShownQuestion>,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextItem {
    Item {
        done: bool,
        #[serde(flatten)]
        item: Box<ItemPayload>,
    },
    Done {
        done: bool,
        status: SessionStatus,
    },
}

impl NextItem {
    pub fn is_done(&self) -> bool {
        matches!(self, NextItem::Done { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    /// 1-based position being answered.
    pub position: usize,
    /// Chosen option per question, as displayed, in question order.
    pub mcq: Vec<usize>,
    pub keywords: Vec<String>,
    pub difficulty: u8,
    pub client: ClientTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub cursor: usize,
    pub status: SessionStatus,
}

/// Display permutations for one item: `options[q][shown] = bank index`.
struct Shuffle {
    options: Vec<Vec<usize>>,
    keywords: Vec<String>,
}

fn shuffle_for(catalog: &Catalog, seed: u64, position: usize, text_id: &str) -> Shuffle {
    let entry = catalog.bank.get(text_id).expect("assigned texts are in the bank");
    let mut draws = Draws::new(seed ^ (position as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let options = QuestionKind::ALL
        .iter()
        .map(|_| {
            let mut perm: Vec<usize> = (0..4).collect();
            draws.shuffle(&mut perm);
            perm
        })
        .collect();
    let mut keywords: Vec<String> = entry.keywords.candidates().cloned().collect();
    draws.shuffle(&mut keywords);
    Shuffle { options, keywords }
}

type Shared = Arc<Mutex<SessionState>>;

pub struct SessionStore {
    catalog: Catalog,
    config: StoreConfig,
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Shared>>,
}

impl SessionStore {
    /// Opens the store, replaying every stream found in the data directory.
    pub fn open(catalog: Catalog, config: StoreConfig, clock: Arc<dyn Clock>) -> crate::Result<Self> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &config.data_dir {
            fs::create_dir_all(dir)?;
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            for path in paths {
                let records = read_records(BufReader::new(fs::File::open(&path)?))?;
                let state = SessionState::replay(&records)?;
                sessions.insert(state.id.clone(), Arc::new(Mutex::new(state)));
            }
        }
        Ok(SessionStore {
            catalog,
            config,
            clock,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, id: &str) -> ServiceResult<Shared> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorKind::NotFound, format!("no session `{id}`")))
    }

    /// A copy of the current state.
    pub fn snapshot(&self, id: &str) -> ServiceResult<SessionState> {
        Ok(self.get(id)?.lock().clone())
    }

    fn persist(&self, state: &SessionState, rec: &SessionRecord) -> ServiceResult<()> {
        if let Some(dir) = &self.config.data_dir {
            let path = dir.join(format!("{}.jsonl", state.id));
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| ServiceError::new(ErrorKind::Internal, e.to_string()))?;
            writeln!(f, "{}", rec.to_line()).map_err(|e| ServiceError::new(ErrorKind::Internal, e.to_string()))?;
        }
        Ok(())
    }

    /// Applies, then persists; the caller holds the session lock.
    fn record(&self, state: &mut SessionState, event: SessionEvent) -> ServiceResult<()> {
        let rec = SessionRecord::new(state.participant_id().to_string(), event);
        state.apply(rec.clone())?;
        self.persist(state, &rec)
    }

    /// Server time that keeps the stream monotonic.
    fn now_after(&self, state: &SessionState) -> u64 {
        self.clock.now_ms().max(state.last_activity())
    }

    /// Marks the session abandoned if it has been idle too long.
    fn expire(&self, state: &mut SessionState) -> ServiceResult<()> {
        if let (Some(limit), SessionStatus::Active) = (self.config.idle_timeout_ms, state.status) {
            let now = self.now_after(state);
            if now.saturating_sub(state.last_activity()) > limit {
                self.record(state, SessionEvent::Abandoned { t: now })?;
            }
        }
        Ok(())
    }

    /// Abandons every idle active session; returns how many were closed.
    pub fn sweep_idle(&self) -> usize {
        let sessions: Vec<Shared> = self.sessions.read().values().cloned().collect();
        sessions
            .iter()
            .filter(|s| {
                let mut st = s.lock();
                let before = st.status;
                self.expire(&mut st).is_ok() && before == SessionStatus::Active && st.status == SessionStatus::Abandoned
            })
            .count()
    }

    pub fn create(&self, participant_id: &str, seed: Option<u64>) -> ServiceResult<Created> {
        let pid = participant_id.trim();
        if pid.is_empty() {
            return Err(ServiceError::new(ErrorKind::Invalid, "participant_id must not be empty"));
        }
        let seed = seed.unwrap_or_else(|| default_seed(pid));
        let id = session_id(pid, seed);
        let mut sessions = self.sessions.write();
        if let Some(existing) = sessions.get(&id) {
            let st = existing.lock();
            return Ok(created(&st));
        }
        for other in sessions.values() {
            let mut st = other.lock();
            if st.participant_id() == pid {
                self.expire(&mut st)?;
                if st.status == SessionStatus::Active {
                    return Err(ServiceError::new(
                        ErrorKind::Conflict,
                        format!("participant `{pid}` already has active session `{}`", st.id),
                    ));
                }
            }
        }
        let assignment = generate_assignment(pid, &self.catalog.text_ids(), seed)?;
        let now = self.clock.now_ms();
        let rec = SessionRecord::new(
            pid,
            SessionEvent::Assignment {
                seed,
                rng: RNG_ALGORITHM.to_string(),
                items: assignment.items.clone(),
                t: now,
            },
        );
        let state = SessionState::replay(std::slice::from_ref(&rec))?;
        self.persist(&state, &rec)?;
        let out = created(&state);
        sessions.insert(id, Arc::new(Mutex::new(state)));
        Ok(out)
    }

    pub fn next(&self, id: &str) -> ServiceResult<NextItem> {
        let shared = self.get(id)?;
        let mut st = shared.lock();
        self.expire(&mut st)?;
        if st.status != SessionStatus::Active {
            return Ok(NextItem::Done {
                done: true,
                status: st.status,
            });
        }
        let cursor = st.cursor;
        let assigned = st.assignment.items[cursor].clone();
        let doc = &self.catalog.documents[&assigned.text_id];
        if st.shown_at.is_none() {
            // Strictly after the previous submission so timings stay ordered.
            let t = self.clock.now_ms().max(st.last_activity() + 1);
            self.record(
                &mut st,
                SessionEvent::TextShown {
                    item: cursor,
                    text_id: assigned.text_id.clone(),
                    condition: assigned.condition,
                    chars: doc.char_len(),
                    t,
                },
            )?;
        }
        let runs = if assigned.condition.is_styled() {
            apply_scheme(doc, &self.catalog.scheme)?
        } else {
            plain_runs(doc, &self.catalog.scheme)
        };
        let entry = self.catalog.bank.get(&assigned.text_id).expect("assigned texts are in the bank");
        let shuffle = shuffle_for(&self.catalog, st.seed(), cursor + 1, &assigned.text_id);
        let questions = QuestionKind::ALL
            .iter()
            .zip(&shuffle.options)
            .map(|(kind, perm)| {
                let q = entry.question(*kind);
                ShownQuestion {
                    kind: *kind,
                    prompt: q.prompt.clone(),
                    options: perm.iter().map(|&i| q.options[i].clone()).collect(),
                }
            })
            .collect();
        Ok(NextItem::Item {
            done: false,
            item: Box::new(ItemPayload {
                position: cursor + 1,
                total: st.assignment.items.len(),
                text_id: assigned.text_id.clone(),
                condition: assigned.condition,
                text: doc.source_text.clone(),
                spans: span_records(doc, &runs)?,
                questions,
                keywords: shuffle.keywords,
            }),
        })
    }

    pub fn submit(&self, id: &str, sub: &Submission) -> ServiceResult<Ack> {
        let shared = self.get(id)?;
        let mut st = shared.lock();
        self.expire(&mut st)?;
        if st.status != SessionStatus::Active {
            return Err(ServiceError::new(ErrorKind::Conflict, format!("session is {:?}", st.status)));
        }
        let cursor = st.cursor;
        if sub.position != cursor + 1 {
            return Err(ServiceError::new(
                ErrorKind::Conflict,
                format!("submission for item {} while item {} is current", sub.position, cursor + 1),
            ));
        }
        let Some(shown) = st.shown_at else {
            return Err(ServiceError::new(ErrorKind::Conflict, format!("item {} has not been shown", cursor + 1)));
        };
        let c = sub.client;
        if !(c.shown_at < c.opened_at && c.opened_at < c.submitted_at) {
            return Err(ServiceError::new(
                ErrorKind::Rejected,
                format!(
                    "client timestamps must increase: shown {} opened {} submitted {}",
                    c.shown_at, c.opened_at, c.submitted_at
                ),
            ));
        }
        if sub.mcq.len() != QuestionKind::ALL.len() || sub.mcq.iter().any(|&i| i >= 4) {
            return Err(ServiceError::new(ErrorKind::Invalid, "mcq needs one option index 0..3 per question"));
        }
        if !(1..=5).contains(&sub.difficulty) {
            return Err(ServiceError::new(ErrorKind::Invalid, "difficulty must be 1..5"));
        }
        let text_id = st.assignment.items[cursor].text_id.clone();
        let shuffle = shuffle_for(&self.catalog, st.seed(), cursor + 1, &text_id);
        let mut seen = std::collections::HashSet::new();
        for k in &sub.keywords {
            if !shuffle.keywords.contains(k) || !seen.insert(k) {
                return Err(ServiceError::new(ErrorKind::Invalid, format!("keyword `{k}` is not a fresh candidate")));
            }
        }
        let mcq = sub.mcq.iter().zip(&shuffle.options).map(|(&shown, perm)| perm[shown]).collect();

        // Reading time is measured on the server clock: the client's reading
        // duration is anchored at the server's shown time and kept strictly
        // before submission.
        let submitted = self.now_after(&st).max(shown + 2);
        let opened = (shown + (c.opened_at - c.shown_at)).clamp(shown + 1, submitted - 1);
        self.record(&mut st, SessionEvent::AnswersOpened { item: cursor, t: opened })?;
        self.record(
            &mut st,
            SessionEvent::AnswersSubmitted {
                item: cursor,
                t: submitted,
                mcq,
                keywords: sub.keywords.clone(),
                difficulty: sub.difficulty,
                client: Some(c),
            },
        )?;
        Ok(Ack {
            cursor: st.cursor,
            status: st.status,
        })
    }

    pub fn export(&self, id: &str) -> ServiceResult<Vec<SessionRecord>> {
        let st = self.snapshot(id)?;
        debug_assert!(validate_assignment(&st.assignment).is_empty());
        debug_assert!(st.events.iter().all(|r| r.v == SCHEMA_VERSION));
        Ok(st.events)
    }

    pub fn export_jsonl(&self, id: &str) -> ServiceResult<String> {
        Ok(self
            .export(id)?
            .iter()
            .map(|r| r.to_line() + "\n")
            .collect())
    }
}

fn created(st: &SessionState) -> Created {
    Created {
        session_id: st.id.clone(),
        participant_id: st.participant_id().to_string(),
        seed: st.seed(),
        status: st.status,
        assignment: st.assignment.clone(),
    }
}
