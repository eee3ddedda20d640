//! Question banks: four comprehension questions and a ten-word keyword task
//! per text.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OPTIONS_PER_QUESTION: usize = 4;
pub const KEYWORDS_PER_LIST: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionKind {
    Factual,
    Inferential,
    Global,
    Cloze,
}

impl QuestionKind {
    pub const ALL: [QuestionKind; 4] = [
        QuestionKind::Factual,
        QuestionKind::Inferential,
        QuestionKind::Global,
        QuestionKind::Cloze,
    ];

    /// Position in the bank order, Q1..Q4 → 0..3.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            QuestionKind::Factual => "factual",
            QuestionKind::Inferential => "inferential",
            QuestionKind::Global => "global",
            QuestionKind::Cloze => "cloze",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub kind: QuestionKind,
    pub prompt: String,
    pub options: Vec<String>,
    pub answer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keywords {
    pub targets: Vec<String>,
    pub distractors: Vec<String>,
}

impl Keywords {
    /// Targets followed by distractors.
    pub fn candidates(&self) -> impl Iterator<Item = &String> {
        self.targets.iter().chain(self.distractors.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub text_id: String,
    /// Sorted by kind after validation.
    pub questions: Vec<Question>,
    pub keywords: Keywords,
}

impl BankEntry {
    pub fn question(&self, kind: QuestionKind) -> &Question {
        &self.questions[kind.index()]
    }

    fn validate(&mut self) -> Result<()> {
        let id = &self.text_id;
        let err = |m: String| Error::QuestionBank(format!("text `{id}`: {m}"));
        if self.questions.len() != QuestionKind::ALL.len() {
            return Err(err(format!("expected 4 questions, found {}", self.questions.len())));
        }
        let kinds: BTreeSet<QuestionKind> = self.questions.iter().map(|q| q.kind).collect();
        for kind in QuestionKind::ALL {
            if !kinds.contains(&kind) {
                return Err(err(format!("missing {} question", kind.name())));
            }
        }
        for q in &self.questions {
            if q.options.len() != OPTIONS_PER_QUESTION {
                return Err(err(format!("{} question has {} options", q.kind.name(), q.options.len())));
            }
            if q.answer >= OPTIONS_PER_QUESTION {
                return Err(err(format!("{} answer index {} out of range", q.kind.name(), q.answer)));
            }
        }
        let kw = &self.keywords;
        if kw.targets.len() != KEYWORDS_PER_LIST || kw.distractors.len() != KEYWORDS_PER_LIST {
            return Err(err(format!(
                "expected 5 targets and 5 distractors, found {} and {}",
                kw.targets.len(),
                kw.distractors.len()
            )));
        }
        let targets: BTreeSet<&str> = kw.targets.iter().map(String::as_str).collect();
        let distractors: BTreeSet<&str> = kw.distractors.iter().map(String::as_str).collect();
        if targets.len() != KEYWORDS_PER_LIST || distractors.len() != KEYWORDS_PER_LIST {
            return Err(err("duplicate keyword within a list".into()));
        }
        if let Some(shared) = targets.intersection(&distractors).next() {
            return Err(err(format!("`{shared}` is both a target and a distractor")));
        }
        self.questions.sort_by_key(|q| q.kind);
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuestionBank {
    entries: BTreeMap<String, BankEntry>,
}

impl QuestionBank {
    pub fn from_entries(entries: Vec<BankEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for mut entry in entries {
            entry.validate()?;
            if map.contains_key(&entry.text_id) {
                return Err(Error::QuestionBank(format!("duplicate text `{}`", entry.text_id)));
            }
            map.insert(entry.text_id.clone(), entry);
        }
        Ok(QuestionBank { entries: map })
    }

    pub fn get(&self, text_id: &str) -> Option<&BankEntry> {
        self.entries.get(text_id)
    }

    pub fn text_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = &BankEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let list: Vec<&BankEntry> = self.entries.values().collect();
        Ok(serde_json::to_string_pretty(&list)?)
    }
}

/// Parses and validates a JSON array of bank entries.
pub fn load_question_bank(input: &str) -> Result<QuestionBank> {
    let entries: Vec<BankEntry> = serde_json::from_str(input)?;
    QuestionBank::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn entry() -> serde_json::Value {
        let q = |kind: &str| json!({"kind": kind, "prompt": "?", "options": ["a", "b", "c", "d"], "answer": 1});
        json!({
            "text_id": "t1",
            "questions": [q("cloze"), q("factual"), q("global"), q("inferential")],
            "keywords": {
                "targets": ["k1", "k2", "k3", "k4", "k5"],
                "distractors": ["d1", "d2", "d3", "d4", "d5"]
            }
        })
    }

    #[test]
    fn valid_bank_is_accepted_and_sorted() {
        let bank = load_question_bank(&json!([entry()]).to_string()).unwrap();
        let e = bank.get("t1").unwrap();
        assert_eq!(e.questions[0].kind, QuestionKind::Factual);
        assert_eq!(e.question(QuestionKind::Cloze).kind, QuestionKind::Cloze);
        assert_eq!(e.keywords.candidates().count(), 10);
    }

    #[test]
    fn two_factual_questions_are_rejected() {
        let mut e = entry();
        e["questions"][0]["kind"] = json!("factual");
        let err = load_question_bank(&json!([e]).to_string()).unwrap_err();
        assert!(err.to_string().contains("missing cloze"), "{err}");
    }

    #[test]
    fn distractor_equal_to_target_is_rejected() {
        let mut e = entry();
        e["keywords"]["distractors"][2] = json!("k4");
        let err = load_question_bank(&json!([e]).to_string()).unwrap_err();
        assert!(err.to_string().contains("both a target and a distractor"), "{err}");
    }

    #[test]
    fn wrong_option_count_is_rejected() {
        let mut e = entry();
        e["questions"][1]["options"] = json!(["a", "b", "c"]);
        assert!(load_question_bank(&json!([e]).to_string()).is_err());
    }

    #[test]
    fn duplicate_text_ids_are_rejected() {
        assert!(load_question_bank(&json!([entry(), entry()]).to_string()).is_err());
    }

    #[test]
    fn four_keywords_are_rejected() {
        let mut e = entry();
        e["keywords"]["targets"] = json!(["k1", "k2", "k3", "k4"]);
        assert!(load_question_bank(&json!([e]).to_string()).is_err());
    }
}
