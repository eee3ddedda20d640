//! Part-of-speech-conditioned styling for unsegmented scripts (Khmer
//! content-word bolding, Japanese syntactic colour coding) and the tooling
//! around a readability experiment: counterbalanced sessions, response
//! capture and the statistical analysis of the collected logs.

pub mod error;
pub mod ingest;
pub mod protocol;
pub mod render;
pub mod segtag;
pub mod service;
pub mod stats;
pub mod styler;
pub mod textmodel;

pub use error::{Error, Result};
