//! Session service: serves counterbalanced assignments and styled texts to
//! reading clients and records their answers as event streams.

pub mod http;
pub mod store;

pub use http::{router, serve, ErrorBody};
pub use store::{
    default_seed, session_id, Ack, Catalog, Clock, Created, ErrorKind, ItemPayload, ManualClock, NextItem,
    ServiceError, SessionState, SessionStatus, SessionStore, ShownQuestion, StoreConfig, Submission, SystemClock,
};
