//! Statistical analysis of the readability study.

pub mod analysis;
pub mod gee;
pub mod inference;
pub mod lmm;
pub mod metrics;
pub mod special;
pub mod synth;

pub use gee::{gee_logistic, GeeFit, WorkingCorrelation};
pub use inference::{bh_fdr, bh_fdr_partial, chi2_yates, paired_t, paired_t_samples, ContingencyTable2x2, Flag, TestResult};
pub use lmm::{lmm_random_intercept, ols, LmmFit};
pub use metrics::{
    classify_profile, classify_profiles, crowd_consensus, group_filter, keyword_score, GroupSpec, ProfileDeltas,
    ProfileLabel, PROFILE_DEAD_BAND,
};
pub use analysis::{analyze, screen_participants, AnalysisOptions, Exclusion, ExclusionReason, McqCell, Report};
pub use synth::{synth_ballots, synth_bank, synth_cohort, synth_documents, SynthCohort, SynthConfig};
