//! Loading external data: tagged text, lexicons and question banks.
//! Session logs and ballots are read by [`crate::protocol`].

pub mod bank;
pub mod conllu;
pub mod lexicon;

pub use bank::{load_question_bank, BankEntry, Keywords, Question, QuestionBank, QuestionKind};
pub use conllu::{parse_conllu, parse_conllu_with, write_conllu, ConlluOptions};
pub use lexicon::{Lexicon, LexiconBuilder};

/// Parses the lexicon TSV format.
pub fn load_lexicon(input: &str) -> crate::Result<Lexicon> {
    Lexicon::parse(input)
}
