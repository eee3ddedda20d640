//! Counterbalanced reading orders: each participant reads half the texts
//! styled and half plain, alternating, in a seeded random order.

use std::collections::HashSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies the generator below so assignments can be replayed elsewhere:
/// ChaCha8 (rand_chacha `seed_from_u64`), Fisher–Yates from the back with
/// Lemire's unbiased bounded draw, then the top bit of one more draw as the
/// starting condition (1 = styled).
pub const RNG_ALGORITHM: &str = "chacha8-fy-lemire-v1";

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    /// Styled.
    S,
    /// Non-styled (control).
    NS,
}

impl Condition {
    pub fn flip(self) -> Condition {
        match self {
            Condition::S => Condition::NS,
            Condition::NS => Condition::S,
        }
    }

    pub fn is_styled(self) -> bool {
        self == Condition::S
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedItem {
    pub text_id: String,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub v: u32,
    pub participant_id: String,
    pub seed: u64,
    pub rng: String,
    pub items: Vec<AssignedItem>,
}

impl Assignment {
    pub fn styled_count(&self) -> usize {
        self.items.iter().filter(|i| i.condition.is_styled()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Unbalanced { styled: usize, plain: usize },
    NotAlternating { position: usize },
    DuplicateText { text_id: String },
}

/// Seeded stream of uniform draws.
pub struct Draws(ChaCha8Rng);

impl Draws {
    pub fn new(seed: u64) -> Self {
        Draws(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `0..n` (Lemire's multiply-and-reject).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = self.next_u64() as u128 * n as u128;
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}

fn check_texts(text_ids: &[String]) -> Result<()> {
    if text_ids.len() % 2 != 0 {
        return Err(Error::Protocol(format!(
            "even count required to balance conditions, got {} texts",
            text_ids.len()
        )));
    }
    let mut seen = HashSet::new();
    for id in text_ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Protocol(format!("duplicate text id `{id}`")));
        }
    }
    Ok(())
}

/// Seeded shuffle of the texts with conditions alternating from a seeded
/// fair coin.
pub fn generate_assignment(participant_id: &str, text_ids: &[String], seed: u64) -> Result<Assignment> {
    check_texts(text_ids)?;
    let mut draws = Draws::new(seed);
    let mut order = text_ids.to_vec();
    draws.shuffle(&mut order);
    let first = if draws.coin() { Condition::S } else { Condition::NS };
    Ok(build(participant_id, seed, order, first))
}

fn build(participant_id: &str, seed: u64, order: Vec<String>, first: Condition) -> Assignment {
    let mut condition = first;
    let items = order
        .into_iter()
        .map(|text_id| {
            let item = AssignedItem { text_id, condition };
            condition = condition.flip();
            item
        })
        .collect();
    Assignment {
        v: SCHEMA_VERSION,
        participant_id: participant_id.to_string(),
        seed,
        rng: RNG_ALGORITHM.to_string(),
        items,
    }
}

/// Participant ids used by [`generate_cohort`]: `P001`, `P002`, …
pub fn participant_id(index: usize) -> String {
    format!("P{:03}", index + 1)
}

/// Assignments for a cohort. Independent mode seeds participant `i` with
/// `seed + i`. Latin-square mode shuffles once with `seed` and gives
/// participant `i` that order rotated by `i`, starting styled in even
/// rotation cycles, so every text appears styled equally often per cycle.
pub fn generate_cohort(text_ids: &[String], participants: usize, seed: u64, latin_square: bool) -> Result<Vec<Assignment>> {
    check_texts(text_ids)?;
    if !latin_square {
        return (0..participants)
            .map(|i| generate_assignment(&participant_id(i), text_ids, seed.wrapping_add(i as u64)))
            .collect();
    }
    let mut base = text_ids.to_vec();
    Draws::new(seed).shuffle(&mut base);
    let n = base.len().max(1);
    Ok((0..participants)
        .map(|i| {
            let mut order = base.clone();
            order.rotate_left(i % n);
            let first = if (i / n) % 2 == 0 { Condition::S } else { Condition::NS };
            build(&participant_id(i), seed, order, first)
        })
        .collect())
}

/// Every violated invariant: balance, alternation, distinct texts.
pub fn validate_assignment(a: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    let styled = a.styled_count();
    let plain = a.items.len() - styled;
    if styled != plain {
        out.push(Violation::Unbalanced { styled, plain });
    }
    for (i, pair) in a.items.windows(2).enumerate() {
        if pair[0].condition == pair[1].condition {
            out.push(Violation::NotAlternating { position: i + 2 });
        }
    }
    let mut seen = HashSet::new();
    for item in &a.items {
        if !seen.insert(item.text_id.as_str()) {
            out.push(Violation::DuplicateText {
                text_id: item.text_id.clone(),
            });
        }
    }
    out
}
