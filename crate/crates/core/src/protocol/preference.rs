//! A/B style-preference survey: ballots over all pairs of candidate styles,
//! completion-time filtering and vote tallies.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of candidate styles; every unordered pair is one survey question.
pub const OPTIONS: usize = 8;
pub const PAIRS: usize = OPTIONS * (OPTIONS - 1) / 2;

pub const DEFAULT_MIN_MINUTES: f64 = 5.0;
pub const DEFAULT_MAX_MINUTES: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    VisualAppeal,
    Readability,
    Professionalism,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::VisualAppeal, Dimension::Readability, Dimension::Professionalism];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub pair_id: usize,
    pub choice: Choice,
    pub dimension: Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceBallot {
    pub participant_id: String,
    pub completion_minutes: f64,
    pub votes: Vec<Vote>,
}

impl PreferenceBallot {
    /// Pair ids in range and distinct within each dimension.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for v in &self.votes {
            if v.pair_id == 0 || v.pair_id > PAIRS {
                return Err(Error::Protocol(format!(
                    "ballot `{}`: pair id {} outside 1..={PAIRS}",
                    self.participant_id, v.pair_id
                )));
            }
            if !seen.insert((v.pair_id, v.dimension)) {
                return Err(Error::Protocol(format!(
                    "ballot `{}`: pair {} voted twice on {:?}",
                    self.participant_id, v.pair_id, v.dimension
                )));
            }
        }
        if !self.completion_minutes.is_finite() || self.completion_minutes < 0.0 {
            return Err(Error::Protocol(format!(
                "ballot `{}`: invalid completion time",
                self.participant_id
            )));
        }
        Ok(())
    }
}

/// Options (1-based) compared by a pair: pairs enumerate `(i, j)` with
/// `i < j` in lexicographic order, so pair 1 is (1, 2) and pair 28 is (7, 8).
/// Choice A picks `i`, choice B picks `j`.
pub fn pair_options(pair_id: usize) -> Option<(usize, usize)> {
    if pair_id == 0 || pair_id > PAIRS {
        return None;
    }
    let mut k = 0;
    for i in 1..=OPTIONS {
        for j in i + 1..=OPTIONS {
            k += 1;
            if k == pair_id {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionTally {
    pub option: usize,
    pub by_dimension: BTreeMap<Dimension, u32>,
    pub overall: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TallyReport {
    pub submitted: usize,
    pub counted: usize,
    pub excluded: usize,
    pub excluded_participants: Vec<String>,
    pub median_minutes_all: Option<f64>,
    pub median_minutes_counted: Option<f64>,
    pub options: Vec<OptionTally>,
}

impl TallyReport {
    pub fn winner(&self) -> Option<usize> {
        self.options
            .iter()
            .max_by(|a, b| a.overall.cmp(&b.overall).then(b.option.cmp(&a.option)))
            .map(|o| o.option)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Counts votes from ballots completed within `[min_minutes, max_minutes]`.
pub fn tally_preferences(ballots: &[PreferenceBallot], min_minutes: f64, max_minutes: f64) -> TallyReport {
    let mut counts = vec![BTreeMap::new(); OPTIONS];
    for c in counts.iter_mut() {
        for d in Dimension::ALL {
            c.insert(d, 0u32);
        }
    }
    let (kept, dropped): (Vec<&PreferenceBallot>, Vec<&PreferenceBallot>) = ballots
        .iter()
        .partition(|b| b.completion_minutes >= min_minutes && b.completion_minutes <= max_minutes);
    for ballot in &kept {
        for vote in &ballot.votes {
            let Some((a, b)) = pair_options(vote.pair_id) else { continue };
            let option = match vote.choice {
                Choice::A => a,
                Choice::B => b,
            };
            *counts[option - 1].get_mut(&vote.dimension).expect("all dimensions present") += 1;
        }
    }
    let all: Vec<f64> = ballots.iter().map(|b| b.completion_minutes).collect();
    let counted: Vec<f64> = kept.iter().map(|b| b.completion_minutes).collect();
    TallyReport {
        submitted: ballots.len(),
        counted: kept.len(),
        excluded: dropped.len(),
        excluded_participants: dropped.iter().map(|b| b.participant_id.clone()).collect(),
        median_minutes_all: median(&all),
        median_minutes_counted: median(&counted),
        options: counts
            .into_iter()
            .enumerate()
            .map(|(i, by_dimension)| OptionTally {
                option: i + 1,
                overall: by_dimension.values().sum(),
                by_dimension,
            })
            .collect(),
    }
}

/// Reads one ballot per JSON line.
pub fn load_ballots(input: &str) -> Result<Vec<PreferenceBallot>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ballot: PreferenceBallot = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        ballot.validate()?;
        out.push(ballot);
    }
    Ok(out)
}
