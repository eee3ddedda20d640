//! Keyword-task scoring, group consensus, reader profiles and the
//! position-based text groupings.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::inference::{mean, sample_sd};
use crate::error::{Error, Result};
use crate::ingest::Keywords;
use crate::protocol::ItemLog;

/// Hits plus correct rejections over all ten candidate judgments.
pub fn keyword_score(selected: &[String], keywords: &Keywords) -> Result<f64> {
    let candidates: HashSet<&str> = keywords.candidates().map(String::as_str).collect();
    let chosen: HashSet<&str> = selected.iter().map(String::as_str).collect();
    if let Some(stray) = chosen.iter().find(|s| !candidates.contains(*s)) {
        return Err(Error::Stats(format!("selected keyword `{stray}` is not a candidate")));
    }
    let hits = keywords.targets.iter().filter(|t| chosen.contains(t.as_str())).count();
    let rejections = keywords.distractors.iter().filter(|d| !chosen.contains(d.as_str())).count();
    Ok((hits + rejections) as f64 / candidates.len() as f64)
}

/// Majority agreement: for each candidate the share `f` of participants
/// selecting it scores `max(f, 1 − f)`; the result is the mean over
/// candidates, so it lies in [0.5, 1].
pub fn crowd_consensus(selections: &[Vec<String>], candidates: &[String]) -> Result<f64> {
    if selections.len() < 2 {
        return Err(Error::Stats("consensus needs at least 2 participants".into()));
    }
    if candidates.is_empty() {
        return Err(Error::Stats("consensus needs at least one candidate".into()));
    }
    let sets: Vec<HashSet<&str>> = selections
        .iter()
        .map(|s| s.iter().map(String::as_str).collect())
        .collect();
    let n = sets.len() as f64;
    let total: f64 = candidates
        .iter()
        .map(|c| {
            let f = sets.iter().filter(|s| s.contains(c.as_str())).count() as f64 / n;
            f.max(1.0 - f)
        })
        .sum();
    Ok(total / candidates.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileLabel {
    SynergisticAdopter,
    EfficiencySeeker,
    DeepProcessor,
    OverloadedReader,
    Skimmer,
}

impl ProfileLabel {
    pub const ALL: [ProfileLabel; 5] = [
        ProfileLabel::SynergisticAdopter,
        ProfileLabel::EfficiencySeeker,
        ProfileLabel::DeepProcessor,
        ProfileLabel::OverloadedReader,
        ProfileLabel::Skimmer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileLabel::SynergisticAdopter => "synergistic_adopter",
            ProfileLabel::EfficiencySeeker => "efficiency_seeker",
            ProfileLabel::DeepProcessor => "deep_processor",
            ProfileLabel::OverloadedReader => "overloaded_reader",
            ProfileLabel::Skimmer => "skimmer",
        }
    }
}

/// Styled-minus-plain differences for one participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDeltas {
    pub cpm: f64,
    pub difficulty: f64,
    pub accuracy: f64,
}

pub const PROFILE_DEAD_BAND: f64 = 0.2;

/// Region of each label in the (speed, difficulty) plane as
/// `[cpm_lo, cpm_hi, diff_lo, diff_hi]`; used for the nearest-rule fallback.
fn region(label: ProfileLabel, band: f64) -> [f64; 4] {
    let inf = f64::INFINITY;
    match label {
        ProfileLabel::SynergisticAdopter => [-band, band, -inf, -band],
        ProfileLabel::EfficiencySeeker => [band, inf, -inf, inf],
        ProfileLabel::DeepProcessor => [-inf, -band, -inf, inf],
        ProfileLabel::OverloadedReader => [-inf, -band, band, inf],
        ProfileLabel::Skimmer => [band, inf, -band, band],
    }
}

fn axis_gap(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

/// Applies the ordered rules to z-scored deltas. The same dead band decides
/// whether a z-score counts as a change in either direction.
pub fn classify_profile(z: ProfileDeltas, band: f64) -> ProfileLabel {
    let stable = |v: f64| v.abs() <= band;
    let (zc, zd, za) = (z.cpm, z.difficulty, z.accuracy);
    if stable(zc) && zd < -band {
        ProfileLabel::SynergisticAdopter
    } else if zc > band && za < -band {
        ProfileLabel::EfficiencySeeker
    } else if zc < -band && za > band {
        ProfileLabel::DeepProcessor
    } else if zc < -band && zd > band {
        ProfileLabel::OverloadedReader
    } else if zc > band && stable(zd) {
        ProfileLabel::Skimmer
    } else {
        let mut best = ProfileLabel::ALL[0];
        let mut best_d = f64::INFINITY;
        for label in ProfileLabel::ALL {
            let [c0, c1, d0, d1] = region(label, band);
            let d = axis_gap(zc, c0, c1).hypot(axis_gap(zd, d0, d1));
            if d < best_d {
                best = label;
                best_d = d;
            }
        }
        best
    }
}

fn zscores(values: &[f64]) -> Vec<f64> {
    let m = mean(values);
    let sd = sample_sd(values);
    values
        .iter()
        .map(|v| if sd > 0.0 && sd.is_finite() { (v - m) / sd } else { 0.0 })
        .collect()
}

/// Z-scores each delta across the cohort and classifies every participant.
pub fn classify_profiles(deltas: &[ProfileDeltas]) -> Result<Vec<ProfileLabel>> {
    if deltas.len() < 3 {
        return Err(Error::Stats(format!("profiles need at least 3 participants, got {}", deltas.len())));
    }
    if deltas
        .iter()
        .any(|d| !(d.cpm.is_finite() && d.difficulty.is_finite() && d.accuracy.is_finite()))
    {
        return Err(Error::Stats("non-finite profile delta".into()));
    }
    let zc = zscores(&deltas.iter().map(|d| d.cpm).collect::<Vec<_>>());
    let zd = zscores(&deltas.iter().map(|d| d.difficulty).collect::<Vec<_>>());
    let za = zscores(&deltas.iter().map(|d| d.accuracy).collect::<Vec<_>>());
    Ok((0..deltas.len())
        .map(|i| {
            classify_profile(
                ProfileDeltas { cpm: zc[i], difficulty: zd[i], accuracy: za[i] },
                PROFILE_DEAD_BAND,
            )
        })
        .collect())
}

/// Position range within each participant's own reading order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupSpec {
    #[serde(rename = "all")]
    All,
    #[serde(rename = "3-8")]
    Texts3To8,
    #[serde(rename = "5-8")]
    Texts5To8,
}

impl GroupSpec {
    pub const ALL: [GroupSpec; 3] = [GroupSpec::All, GroupSpec::Texts3To8, GroupSpec::Texts5To8];

    pub fn label(self) -> &'static str {
        match self {
            GroupSpec::All => "all",
            GroupSpec::Texts3To8 => "3-8",
            GroupSpec::Texts5To8 => "5-8",
        }
    }

    /// Inclusive 1-based positions.
    pub fn range(self) -> std::ops::RangeInclusive<usize> {
        match self {
            GroupSpec::All => 1..=10,
            GroupSpec::Texts3To8 => 3..=8,
            GroupSpec::Texts5To8 => 5..=8,
        }
    }

    pub fn contains(self, position: usize) -> bool {
        self == GroupSpec::All || self.range().contains(&position)
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(GroupSpec::All),
            "3-8" => Ok(GroupSpec::Texts3To8),
            "5-8" => Ok(GroupSpec::Texts5To8),
            other => Err(Error::Stats(format!("unknown group `{other}` (expected all, 3-8 or 5-8)"))),
        }
    }
}

/// Items whose position in the participant's order falls in the group.
pub fn group_filter(items: &[ItemLog], group: GroupSpec) -> Result<Vec<&ItemLog>> {
    if let Some(bad) = items.iter().find(|i| i.position == 0 || i.position > 10) {
        return Err(Error::Stats(format!("item position {} outside 1..=10", bad.position)));
    }
    Ok(items.iter().filter(|i| group.contains(i.position)).collect())
}
