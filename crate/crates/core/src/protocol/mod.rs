//! Experiment protocol: counterbalanced assignments, session logs, timing
//! metrics, participant exclusion and the style-preference survey.

pub mod assignment;
pub mod preference;
pub mod session;

pub use assignment::{
    generate_assignment, generate_cohort, participant_id, validate_assignment, AssignedItem, Assignment, Condition,
    Draws, Violation, RNG_ALGORITHM, SCHEMA_VERSION,
};
pub use preference::{load_ballots, tally_preferences, PreferenceBallot, TallyReport};
pub use session::{
    assemble_logs, derive_timings, filter_participants, load_session_logs, read_records, ClientTimes, ItemLog,
    SessionEvent, SessionLog, SessionRecord, Timings,
};

/// Minimum session length for the readability study, in minutes.
pub const DEFAULT_MIN_SESSION_MINUTES: f64 = 30.0;
