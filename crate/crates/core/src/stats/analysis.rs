//! The full analysis over collected session logs: participant exclusion,
//! per-question accuracy tests, keyword and timing comparisons, mixed models,
//! consensus and reader profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::gee::{gee_logistic, Cluster, WorkingCorrelation};
use super::inference::{bh_fdr_partial, chi2_yates, finite_or_label, mean, paired_t, ContingencyTable2x2, Flag};
use super::lmm::{lmm_random_intercept, Group};
use super::metrics::{classify_profiles, crowd_consensus, keyword_score, GroupSpec, ProfileDeltas, ProfileLabel};
use crate::error::{Error, Result};
use crate::ingest::{QuestionBank, QuestionKind};
use crate::protocol::preference::median as median_of;
use crate::protocol::{derive_timings, validate_assignment, Condition, SessionLog, DEFAULT_MIN_SESSION_MINUTES};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub min_minutes: f64,
    pub correlation: WorkingCorrelation,
    pub groups: Vec<GroupSpec>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            min_minutes: DEFAULT_MIN_SESSION_MINUTES,
            correlation: WorkingCorrelation::Exchangeable,
            groups: GroupSpec::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Abandoned,
    Incomplete,
    InvalidAssignment,
    InvalidTimestamps,
    ShortSession,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub participant_id: String,
    pub reason: ExclusionReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeeSummary {
    #[serde(serialize_with = "finite_or_label")]
    pub odds_ratio: f64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub flags: BTreeSet<Flag>,
}

/// One question × grouping cell. Accuracies are percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McqCell {
    pub group: GroupSpec,
    pub question: QuestionKind,
    pub s_acc: f64,
    pub ns_acc: f64,
    pub delta: f64,
    pub counts: ContingencyTable2x2,
    pub statistic: f64,
    pub p: f64,
    pub q: f64,
    pub flags: BTreeSet<Flag>,
    pub gee: GeeSummary,
}

/// Participant-level paired comparison of a per-condition mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedRow {
    pub measure: &'static str,
    pub group: GroupSpec,
    pub n: usize,
    pub mean_s: f64,
    pub mean_ns: f64,
    pub delta: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedRow {
    pub measure: &'static str,
    pub group: GroupSpec,
    pub mean_s: f64,
    pub mean_ns: f64,
    pub raw_delta: f64,
    pub coefficient: Option<f64>,
    pub se: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub sigma2_u: Option<f64>,
    pub sigma2_e: Option<f64>,
}

/// Consensus per (text, condition) among the participants who read that
/// text in that condition, averaged over texts. Percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusRow {
    pub group: GroupSpec,
    pub texts: usize,
    pub s: f64,
    pub ns: f64,
    pub delta: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantProfile {
    pub participant_id: String,
    pub deltas: ProfileDeltas,
    pub label: ProfileLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub participants_total: usize,
    pub participants_analyzed: usize,
    pub median_minutes_all: Option<f64>,
    pub median_minutes_analyzed: Option<f64>,
    pub correlation: WorkingCorrelation,
    pub exclusions: Vec<Exclusion>,
    pub mcq: Vec<McqCell>,
    pub paired: Vec<PairedRow>,
    pub mixed: Vec<MixedRow>,
    pub consensus: Vec<ConsensusRow>,
    pub profiles: Vec<ParticipantProfile>,
    pub profile_counts: BTreeMap<ProfileLabel, usize>,
}

impl Report {
    pub fn cell(&self, group: GroupSpec, question: QuestionKind) -> Option<&McqCell> {
        self.mcq.iter().find(|c| c.group == group && c.question == question)
    }

    pub fn paired_row(&self, measure: &str, group: GroupSpec) -> Option<&PairedRow> {
        self.paired.iter().find(|r| r.measure == measure && r.group == group)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The MCQ table as CSV.
    pub fn mcq_csv(&self) -> String {
        let mut out = String::from("group,question,s_acc,ns_acc,delta,a,b,c,d,chi2,p,q,flags,gee_or,gee_p,gee_q,gee_flags\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let flags = |f: &BTreeSet<Flag>| {
            f.iter()
                .map(|f| match f {
                    Flag::Separation => "separation",
                    Flag::SmallExpectedCount => "small_expected_count",
                })
                .collect::<Vec<_>>()
                .join(";")
        };
        for c in &self.mcq {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.group,
                c.question.name(),
                c.s_acc,
                c.ns_acc,
                c.delta,
                c.counts.a,
                c.counts.b,
                c.counts.c,
                c.counts.d,
                c.statistic,
                c.p,
                c.q,
                flags(&c.flags),
                c.gee.odds_ratio,
                opt(c.gee.p),
                opt(c.gee.q),
                flags(&c.gee.flags),
            );
        }
        out
    }
}

/// Everything the tests need from one answered item.
#[derive(Debug, Clone)]
struct ItemScore {
    position: usize,
    text_id: String,
    styled: bool,
    correct: [bool; 4],
    keyword: f64,
    keywords: Vec<String>,
    reading_s: f64,
    answering_s: f64,
    chars: usize,
    difficulty: f64,
}

#[derive(Debug, Clone)]
struct Participant {
    id: String,
    items: Vec<ItemScore>,
}

impl Participant {
    fn in_group(&self, g: GroupSpec) -> impl Iterator<Item = &ItemScore> {
        self.items.iter().filter(move |i| g.contains(i.position))
    }

    /// Mean of `f` over the group's items in one condition.
    fn condition_mean(&self, g: GroupSpec, styled: bool, f: impl Fn(&ItemScore) -> f64) -> Option<f64> {
        let v: Vec<f64> = self.in_group(g).filter(|i| i.styled == styled).map(f).collect();
        (!v.is_empty()).then(|| mean(&v))
    }

    fn cpm(&self, g: GroupSpec, styled: bool) -> Option<f64> {
        let (chars, secs) = self
            .in_group(g)
            .filter(|i| i.styled == styled)
            .fold((0usize, 0.0), |(c, s), i| (c + i.chars, s + i.reading_s));
        (secs > 0.0).then(|| 60.0 * chars as f64 / secs)
    }
}

fn score_participant(log: &SessionLog, bank: &QuestionBank) -> Result<Participant> {
    let timings = derive_timings(log)?;
    let items = log
        .items
        .iter()
        .zip(&timings.items)
        .map(|(item, timing)| {
            let entry = bank
                .get(&item.text_id)
                .ok_or_else(|| Error::Stats(format!("text `{}` is not in the question bank", item.text_id)))?;
            if item.mcq.len() != QuestionKind::ALL.len() {
                return Err(Error::Stats(format!(
                    "participant `{}` item {}: expected 4 answers, found {}",
                    log.participant_id,
                    item.position,
                    item.mcq.len()
                )));
            }
            let mut correct = [false; 4];
            for kind in QuestionKind::ALL {
                correct[kind.index()] = item.mcq[kind.index()] == entry.question(kind).answer;
            }
            Ok(ItemScore {
                position: item.position,
                text_id: item.text_id.clone(),
                styled: item.condition == Condition::S,
                correct,
                keyword: keyword_score(&item.keywords, &entry.keywords)?,
                keywords: item.keywords.clone(),
                reading_s: timing.reading_time_s,
                answering_s: timing.answering_time_s,
                chars: item.chars,
                difficulty: item.difficulty as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Participant {
        id: log.participant_id.clone(),
        items,
    })
}

/// Applies the exclusion rules in order; the first failing rule is the
/// reason recorded.
pub fn screen_participants(logs: &[SessionLog], min_minutes: f64) -> (Vec<&SessionLog>, Vec<Exclusion>) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for log in logs {
        let exclude = |reason, detail: String| Exclusion {
            participant_id: log.participant_id.clone(),
            reason,
            detail,
        };
        if log.abandoned {
            excluded.push(exclude(ExclusionReason::Abandoned, format!("{} items answered", log.items.len())));
        } else if !log.is_complete() {
            excluded.push(exclude(ExclusionReason::Incomplete, format!("{} items answered", log.items.len())));
        } else if let Some(v) = log.assignment.as_ref().map(validate_assignment).filter(|v| !v.is_empty()) {
            excluded.push(exclude(ExclusionReason::InvalidAssignment, format!("{v:?}")));
        } else if let Err(e) = derive_timings(log) {
            excluded.push(exclude(ExclusionReason::InvalidTimestamps, e.to_string()));
        } else if log.duration_minutes() < min_minutes {
            excluded.push(exclude(
                ExclusionReason::ShortSession,
                format!("{:.2} minutes", log.duration_minutes()),
            ));
        } else {
            kept.push(log);
        }
    }
    (kept, excluded)
}

fn mcq_cells(participants: &[Participant], groups: &[GroupSpec], correlation: WorkingCorrelation) -> Result<Vec<McqCell>> {
    let rows = QuestionKind::ALL
        .par_iter()
        .map(|&kind| mcq_row(participants, groups, correlation, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn mcq_row(
    participants: &[Participant],
    groups: &[GroupSpec],
    correlation: WorkingCorrelation,
    kind: QuestionKind,
) -> Result<Vec<McqCell>> {
    {
        let k = kind.index();
        let mut row = Vec::new();
        for &g in groups {
            let mut counts = ContingencyTable2x2::default();
            let mut clusters: Vec<Cluster> = Vec::new();
            for p in participants {
                let cluster: Cluster = p.in_group(g).map(|i| (i.styled, i.correct[k])).collect();
                for &(styled, correct) in &cluster {
                    match (styled, correct) {
                        (true, true) => counts.a += 1,
                        (true, false) => counts.b += 1,
                        (false, true) => counts.c += 1,
                        (false, false) => counts.d += 1,
                    }
                }
                clusters.push(cluster);
            }
            let chi = chi2_yates(&counts)?;
            let gee = gee_logistic(&clusters, correlation)?;
            let s_acc = counts.row1_rate() * 100.0;
            let ns_acc = counts.row2_rate() * 100.0;
            row.push(McqCell {
                group: g,
                question: kind,
                s_acc,
                ns_acc,
                delta: s_acc - ns_acc,
                counts,
                statistic: chi.statistic,
                p: chi.p.unwrap_or(1.0),
                q: 1.0,
                flags: chi.flags,
                gee: GeeSummary {
                    odds_ratio: gee.result.effect,
                    p: gee.result.p,
                    q: None,
                    flags: gee.result.flags,
                },
            });
        }
        let q = bh_fdr_partial(&row.iter().map(|c| Some(c.p)).collect::<Vec<_>>())?;
        let gq = bh_fdr_partial(&row.iter().map(|c| c.gee.p).collect::<Vec<_>>())?;
        for ((cell, q), gq) in row.iter_mut().zip(q).zip(gq) {
            cell.q = q.unwrap_or(1.0);
            cell.gee.q = gq;
        }
        Ok(row)
    }
}

type Measure = (&'static str, fn(&Participant, GroupSpec, bool) -> Option<f64>);

const PAIRED_MEASURES: [Measure; 5] = [
    ("keyword_accuracy", |p, g, s| p.condition_mean(g, s, |i| i.keyword * 100.0)),
    ("reading_time_s", |p, g, s| p.condition_mean(g, s, |i| i.reading_s)),
    ("answering_time_s", |p, g, s| p.condition_mean(g, s, |i| i.answering_s)),
    ("difficulty", |p, g, s| p.condition_mean(g, s, |i| i.difficulty)),
    ("cpm", |p, g, s| p.cpm(g, s)),
];

fn paired_rows(participants: &[Participant], groups: &[GroupSpec]) -> Result<Vec<PairedRow>> {
    let mut out = Vec::new();
    for (measure, f) in PAIRED_MEASURES {
        let mut rows: Vec<PairedRow> = groups
            .iter()
            .map(|&g| {
                let pairs: Vec<(f64, f64)> = participants
                    .iter()
                    .filter_map(|p| Some((f(p, g, true)?, f(p, g, false)?)))
                    .collect();
                let s: Vec<f64> = pairs.iter().map(|x| x.0).collect();
                let ns: Vec<f64> = pairs.iter().map(|x| x.1).collect();
                let d: Vec<f64> = pairs.iter().map(|x| x.0 - x.1).collect();
                let test = paired_t(&d).ok();
                PairedRow {
                    measure,
                    group: g,
                    n: pairs.len(),
                    mean_s: if s.is_empty() { f64::NAN } else { mean(&s) },
                    mean_ns: if ns.is_empty() { f64::NAN } else { mean(&ns) },
                    delta: if d.is_empty() { f64::NAN } else { mean(&d) },
                    t: test.as_ref().map(|t| t.statistic),
                    p: test.and_then(|t| t.p),
                    q: None,
                }
            })
            .collect();
        let q = bh_fdr_partial(&rows.iter().map(|r| r.p).collect::<Vec<_>>())?;
        for (r, q) in rows.iter_mut().zip(q) {
            r.q = q;
        }
        out.extend(rows);
    }
    Ok(out)
}

const MIXED_MEASURES: [(&str, fn(&ItemScore) -> f64); 2] = [
    ("reading_time_s", |i| i.reading_s),
    ("keyword_accuracy", |i| i.keyword * 100.0),
];

fn mixed_rows(participants: &[Participant], groups: &[GroupSpec]) -> Result<Vec<MixedRow>> {
    let mut out = Vec::new();
    for (measure, f) in MIXED_MEASURES {
        let mut rows: Vec<MixedRow> = groups
            .iter()
            .map(|&g| {
                let data: Vec<Group> = participants
                    .iter()
                    .map(|p| p.in_group(g).map(|i| (i.styled, f(i))).collect::<Group>())
                    .filter(|obs| obs.len() >= 2)
                    .collect();
                let values = |styled: bool| {
                    let v: Vec<f64> = data.iter().flatten().filter(|o| o.0 == styled).map(|o| o.1).collect();
                    if v.is_empty() { f64::NAN } else { mean(&v) }
                };
                let (mean_s, mean_ns) = (values(true), values(false));
                let fit = lmm_random_intercept(&data).ok();
                MixedRow {
                    measure,
                    group: g,
                    mean_s,
                    mean_ns,
                    raw_delta: mean_s - mean_ns,
                    coefficient: fit.as_ref().map(|f| f.effect),
                    se: fit.as_ref().map(|f| f.se),
                    p: fit.as_ref().map(|f| f.p),
                    q: None,
                    sigma2_u: fit.as_ref().map(|f| f.sigma2_u),
                    sigma2_e: fit.as_ref().map(|f| f.sigma2_e),
                }
            })
            .collect();
        let q = bh_fdr_partial(&rows.iter().map(|r| r.p).collect::<Vec<_>>())?;
        for (r, q) in rows.iter_mut().zip(q) {
            r.q = q;
        }
        out.extend(rows);
    }
    Ok(out)
}

fn consensus_rows(participants: &[Participant], bank: &QuestionBank, groups: &[GroupSpec]) -> Vec<ConsensusRow> {
    groups
        .iter()
        .map(|&g| {
            let mut by_text: BTreeMap<(&str, bool), Vec<Vec<String>>> = BTreeMap::new();
            for p in participants {
                for i in p.in_group(g) {
                    by_text.entry((i.text_id.as_str(), i.styled)).or_default().push(i.keywords.clone());
                }
            }
            let consensus = |text: &str, styled: bool| -> Option<f64> {
                let entry = bank.get(text)?;
                let candidates: Vec<String> = entry.keywords.candidates().cloned().collect();
                crowd_consensus(by_text.get(&(text, styled))?, &candidates).ok().map(|c| c * 100.0)
            };
            let texts: BTreeSet<&str> = by_text.keys().map(|k| k.0).collect();
            let s: Vec<f64> = texts.iter().filter_map(|t| consensus(t, true)).collect();
            let ns: Vec<f64> = texts.iter().filter_map(|t| consensus(t, false)).collect();
            let d: Vec<f64> = texts
                .iter()
                .filter_map(|t| Some(consensus(t, true)? - consensus(t, false)?))
                .collect();
            let test = paired_t(&d).ok();
            let avg = |v: &[f64]| if v.is_empty() { f64::NAN } else { mean(v) };
            ConsensusRow {
                group: g,
                texts: d.len(),
                s: avg(&s),
                ns: avg(&ns),
                delta: avg(&s) - avg(&ns),
                t: test.as_ref().map(|t| t.statistic),
                p: test.and_then(|t| t.p),
            }
        })
        .collect()
}

fn profiles(participants: &[Participant]) -> Vec<ParticipantProfile> {
    let all = GroupSpec::All;
    let accuracy = |p: &Participant, styled: bool| {
        p.condition_mean(all, styled, |i| i.correct.iter().filter(|c| **c).count() as f64 / 4.0)
    };
    let rows: Vec<(String, ProfileDeltas)> = participants
        .iter()
        .filter_map(|p| {
            Some((
                p.id.clone(),
                ProfileDeltas {
                    cpm: p.cpm(all, true)? - p.cpm(all, false)?,
                    difficulty: p.condition_mean(all, true, |i| i.difficulty)?
                        - p.condition_mean(all, false, |i| i.difficulty)?,
                    accuracy: accuracy(p, true)? - accuracy(p, false)?,
                },
            ))
        })
        .collect();
    let deltas: Vec<ProfileDeltas> = rows.iter().map(|r| r.1).collect();
    match classify_profiles(&deltas) {
        Ok(labels) => rows
            .into_iter()
            .zip(labels)
            .map(|((participant_id, deltas), label)| ParticipantProfile {
                participant_id,
                deltas,
                label,
            })
            .collect(),
        Err(_) => Vec::new(),
    }
}

/// Runs every analysis over the logs that survive screening.
pub fn analyze(logs: &[SessionLog], bank: &QuestionBank, options: &AnalysisOptions) -> Result<Report> {
    let (kept, exclusions) = screen_participants(logs, options.min_minutes);
    if kept.len() < 2 {
        return Err(Error::Stats(format!(
            "{} participants left after exclusions; at least 2 are needed",
            kept.len()
        )));
    }
    let participants: Vec<Participant> = kept
        .par_iter()
        .map(|log| score_participant(log, bank))
        .collect::<Result<_>>()?;
    let groups = &options.groups;
    let mcq = mcq_cells(&participants, groups, options.correlation)?;
    let paired = paired_rows(&participants, groups)?;
    let mixed = mixed_rows(&participants, groups)?;
    let consensus = consensus_rows(&participants, bank, groups);
    let profiles = profiles(&participants);
    let mut profile_counts: BTreeMap<ProfileLabel, usize> = ProfileLabel::ALL.iter().map(|l| (*l, 0)).collect();
    for p in &profiles {
        *profile_counts.entry(p.label).or_default() += 1;
    }
    let all_minutes: Vec<f64> = logs.iter().filter(|l| !l.items.is_empty()).map(|l| l.duration_minutes()).collect();
    let kept_minutes: Vec<f64> = kept.iter().map(|l| l.duration_minutes()).collect();
    Ok(Report {
        participants_total: logs.len(),
        participants_analyzed: participants.len(),
        median_minutes_all: median_of(&all_minutes),
        median_minutes_analyzed: median_of(&kept_minutes),
        correlation: options.correlation,
        exclusions,
        mcq,
        paired,
        mixed,
        consensus,
        profiles,
        profile_counts,
    })
}
