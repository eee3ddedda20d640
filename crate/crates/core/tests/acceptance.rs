//! Acceptance criteria A1–A10. Each test writes one `A# PASS|FAIL …` line
//! to stderr (outside the test harness capture) before asserting.

mod common;

use std::io::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use common::oracles::{max_error, BETAINC, ERFC, LN_GAMMA, LUMINANCE, T_TWO_SIDED};
use seglit::ingest::{Lexicon, QuestionKind};
use seglit::protocol::{generate_assignment, tally_preferences, validate_assignment, Condition};
use seglit::render::{render_ansi, render_html, span_records, strip_ansi, strip_html, text_from_spans, HtmlOptions};
use seglit::segtag::{segment_tag, segment_tag_bruteforce};
use seglit::stats::gee::Cluster;
use seglit::stats::lmm::Group;
use seglit::stats::special::{betainc, erfc, ks_uniform, ln_gamma, t_two_sided_p};
use seglit::stats::synth::text_ids;
use seglit::stats::{
    analyze, bh_fdr, chi2_yates, gee_logistic, lmm_random_intercept, ols, paired_t, screen_participants, synth_ballots,
    synth_cohort, AnalysisOptions, ContingencyTable2x2, Flag, GroupSpec, SynthConfig, WorkingCorrelation,
};
use seglit::styler::{apply_scheme, contrast_ratio_hex, validate_scheme, Rgb, StyleScheme, Weight};
use seglit::textmodel::{Document, Language, PosTag, KHMER_CONTENT, UPOS};

fn report(id: &str, pass: bool, detail: impl AsRef<str>) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{id} {verdict} {}", detail.as_ref());
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

const GROUPS: [&str; 3] = ["All", "3-8", "5-8"];

/// Styled/non-styled accuracy (%) per question and grouping, with the
/// per-condition answer counts of each grouping.
const KHMER_ACCURACY: [[(f64, f64); 3]; 4] = [
    [(46.05, 51.16), (45.74, 53.49), (44.19, 54.65)],
    [(53.02, 47.44), (57.36, 51.16), (53.49, 48.84)],
    [(60.93, 60.00), (67.44, 58.14), (65.12, 55.81)],
    [(79.07, 70.70), (81.40, 71.32), (81.40, 66.28)],
];
const KHMER_N: [u64; 3] = [215, 129, 86];

/// Reported χ² and p per question and grouping.
const CHI2_REPORTED: [[(f64, f64); 3]; 4] = [
    [(0.93, 0.33), (1.26, 0.26), (1.49, 0.22)],
    [(1.13, 0.29), (0.77, 0.38), (0.21, 0.65)],
    [(0.01, 0.92), (2.01, 0.16), (1.19, 0.27)],
    [(3.57, 0.06), (3.09, 0.08), (4.33, 0.04)],
];

/// Reported bracketed q-values per question across groupings.
const MCQ_Q_REPORTED: [[f64; 3]; 4] = [
    [0.33, 0.33, 0.33],
    [0.57, 0.57, 0.65],
    [0.92, 0.41, 0.41],
    [0.08, 0.08, 0.08],
];

/// Keyword paired t statistics (df 42) and their bracketed q-values.
const KEYWORD_T: [f64; 3] = [2.23, 2.72, 2.68];
const KEYWORD_Q_REPORTED: [f64; 3] = [0.03, 0.02, 0.02];

fn khmer_table(question: usize, group: usize) -> ContingencyTable2x2 {
    let (s, ns) = KHMER_ACCURACY[question][group];
    ContingencyTable2x2::from_percentages(s, KHMER_N[group], ns, KHMER_N[group])
}

#[test]
fn a1_chi_squared_reproduction() {
    let start = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    let mut misses = Vec::new();
    for q in 0..4 {
        for g in 0..3 {
            let r = chi2_yates(&khmer_table(q, g)).unwrap();
            let p = r.p.unwrap();
            let (chi2_want, p_want) = CHI2_REPORTED[q][g];
            let (dc, dp) = ((r.statistic - chi2_want).abs(), (p - p_want).abs());
            worst = (worst.0.max(dc), worst.1.max(dp));
            if dc > 0.03 || dp > 0.01 {
                misses.push(format!("Q{} {}: {:.3}/{:.3}", q + 1, GROUPS[g], r.statistic, p));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = misses.is_empty() && elapsed < Duration::from_secs(1);
    report(
        "A1",
        pass,
        format!("12 cells, max |Δχ²| {:.4}, max |Δp| {:.4}, {elapsed:?} {misses:?}", worst.0, worst.1),
    );
    assert!(pass);
}

#[test]
fn a2_fdr_reproduction() {
    let start = Instant::now();
    let mut misses = Vec::new();
    for q in 0..4 {
        let p: Vec<f64> = (0..3).map(|g| chi2_yates(&khmer_table(q, g)).unwrap().p.unwrap()).collect();
        let got: Vec<f64> = bh_fdr(&p).unwrap().into_iter().map(round2).collect();
        if got != MCQ_Q_REPORTED[q] {
            misses.push(format!("Q{}: {got:?} vs {:?}", q + 1, MCQ_Q_REPORTED[q]));
        }
    }
    let p: Vec<f64> = KEYWORD_T.iter().map(|&t| t_two_sided_p(t, 42.0)).collect();
    let got: Vec<f64> = bh_fdr(&p).unwrap().into_iter().map(round2).collect();
    if got != KEYWORD_Q_REPORTED {
        misses.push(format!("keywords: {got:?}"));
    }
    let example: Vec<f64> = bh_fdr(&[0.03, 0.01, 0.01]).unwrap().into_iter().map(round2).collect();
    if example != [0.03, 0.02, 0.02] {
        misses.push(format!("example: {example:?}"));
    }
    let elapsed = start.elapsed();
    let pass = misses.is_empty() && elapsed < Duration::from_secs(1);
    report("A2", pass, format!("5 q-value triples, {elapsed:?} {misses:?}"));
    assert!(pass);
}

/// Styled/non-styled accuracy (%) and per-condition counts for the
/// Japanese study, with the reported odds ratios (None = separation).
const JA_CELLS: [[(f64, f64); 3]; 4] = [
    [(73.68, 64.91), (87.88, 71.43), (80.95, 78.26)],
    [(75.44, 70.18), (84.85, 65.71), (85.71, 69.57)],
    [(87.72, 80.70), (90.91, 74.29), (100.00, 73.91)],
    [(71.93, 77.19), (66.67, 80.00), (80.95, 82.61)],
];
const JA_N: [(usize, usize); 3] = [(57, 57), (33, 35), (21, 23)];
const JA_OR: [[Option<f64>; 3]; 4] = [
    [Some(1.51), Some(2.90), Some(1.18)],
    [Some(1.31), Some(2.92), Some(2.63)],
    [Some(1.71), Some(3.46), None],
    [Some(0.76), Some(0.50), Some(0.89)],
];

/// `clusters` participants with identical designs (every participant sees
/// the whole cell), correct answers spread unevenly across them while the
/// per-condition totals stay at the target rates.
fn balanced_clusters(clusters: usize, styled: (usize, usize), plain: (usize, usize)) -> Vec<Cluster> {
    let wobble = |j: usize, (n, k): (usize, usize)| -> usize {
        if k == 0 || k == n {
            k
        } else if j % 2 == 0 {
            k + 1
        } else {
            k - 1
        }
    };
    (0..clusters)
        .map(|j| {
            let (ks, kp) = (wobble(j, styled), wobble(j + 1, plain));
            let mut c: Cluster = Vec::new();
            c.extend((0..styled.0).map(|i| (true, i < ks)));
            c.extend((0..plain.0).map(|i| (false, i < kp)));
            c
        })
        .collect()
}

#[test]
fn a3_gee_point_estimates() {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    let mut separation_flagged = false;
    for q in 0..4 {
        for g in 0..3 {
            let (s_pct, ns_pct) = JA_CELLS[q][g];
            let (ns_n, nn_n) = JA_N[g];
            let ks = (s_pct / 100.0 * ns_n as f64).round() as usize;
            let kn = (ns_pct / 100.0 * nn_n as f64).round() as usize;
            let fit = gee_logistic(&balanced_clusters(4, (ns_n, ks), (nn_n, kn)), WorkingCorrelation::Exchangeable)
                .unwrap();
            let or = fit.result.effect;
            match JA_OR[q][g] {
                Some(want) => {
                    worst = worst.max((or - want).abs());
                    if (or - want).abs() > 0.02 || fit.result.has(Flag::Separation) {
                        misses.push(format!("Q{} {}: {or:.3} vs {want}", q + 1, GROUPS[g]));
                    }
                }
                None => {
                    separation_flagged = fit.result.has(Flag::Separation) && or.is_infinite();
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = misses.is_empty() && separation_flagged && elapsed < Duration::from_secs(5);
    report(
        "A3",
        pass,
        format!("11 finite ORs max |Δ| {worst:.4}, separation flagged: {separation_flagged}, {elapsed:?} {misses:?}"),
    );
    assert!(pass);
}

#[test]
fn a4_t_distribution_and_special_functions() {
    // Differences with sample t exactly 2.23 over 43 participants.
    let raw: Vec<f64> = (0..43).map(|i| ((i * 37 % 43) as f64 - 21.0) / 7.0).collect();
    let mean = raw.iter().sum::<f64>() / 43.0;
    let sd = (raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 42.0).sqrt();
    let shift = 2.23 * sd / 43f64.sqrt();
    let diffs: Vec<f64> = raw.iter().map(|x| x - mean + shift).collect();
    let r = paired_t(&diffs).unwrap();
    let p = r.p.unwrap();
    let tail_ok = (r.statistic - 2.23).abs() < 1e-9 && r.df == 42.0 && (p - 0.031).abs() <= 0.005;

    let grid_err = [
        max_error(&LN_GAMMA, ln_gamma),
        max_error(&ERFC, erfc),
        BETAINC.iter().map(|&(a, b, x, want)| (betainc(a, b, x) - want).abs()).fold(0.0, f64::max),
        T_TWO_SIDED.iter().map(|&(t, df, want)| (t_two_sided_p(t, df) - want).abs()).fold(0.0, f64::max),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let pass = tail_ok && grid_err < 1e-10;
    report("A4", pass, format!("t = {:.4}, p = {p:.5}; special-function grid max error {grid_err:.2e}", r.statistic));
    assert!(pass);
}

fn toy_lexicon() -> Lexicon {
    Lexicon::builder()
        .entry("a", "n", -1.2)
        .entry("b", "v", -1.5)
        .entry("ab", "n", -2.1)
        .entry("bc", "a", -2.0)
        .entry("ca", "1", -2.4)
        .entry("abc", "part", -3.3)
        .transition("n", "v", -0.4)
        .transition("v", "n", -0.6)
        .transition("a", "n", -0.9)
        .transition("n", "a", -1.1)
        .build()
        .unwrap()
}

#[test]
fn a5_segmentation_oracle() {
    let start = Instant::now();
    let lex = toy_lexicon();
    let alphabet = ['a', 'b', 'c'];
    let mut checked = 0usize;
    let mut mismatches = Vec::new();
    for len in 0..=12u32 {
        let total = 3usize.pow(len);
        let bad: Vec<String> = (0..total)
            .into_par_iter()
            .filter_map(|mut code| {
                let text: String = (0..len)
                    .map(|_| {
                        let c = alphabet[code % 3];
                        code /= 3;
                        c
                    })
                    .collect();
                let fast = segment_tag(&text, &lex);
                let slow = segment_tag_bruteforce(&text, &lex).unwrap();
                (fast != slow).then_some(text)
            })
            .collect();
        checked += total;
        mismatches.extend(bad.into_iter().take(5));
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(60);
    report("A5", pass, format!("{checked} strings, mismatches {mismatches:?}, {elapsed:?}"));
    assert!(pass);
}

const KHMER_TAGS: [&str; 7] = ["n", "v", "a", "1", "o", "det", "part"];
const KHMER_POOL: [&str; 6] = ["ខ្ញុំ", "ទៅ", "ផ្សារ", "ស្អាត", "នេះ", "&<ហើយ>"];
const JA_POOL: [&str; 6] = ["猫", "が", "走る", "美しい", "\"東京\"", "。"];

fn fuzz_document(rng: &mut ChaCha8Rng, index: usize) -> Document {
    let language = if index % 2 == 0 { Language::Khmer } else { Language::Japanese };
    let tokens = rng.gen_range(1..=30);
    let tagset = seglit::textmodel::KhmerTagset::default();
    let tagged: Vec<(String, PosTag)> = (0..tokens)
        .map(|_| match language {
            Language::Khmer => {
                let surface = KHMER_POOL[rng.gen_range(0..KHMER_POOL.len())].to_string();
                let tag = PosTag::khmer(KHMER_TAGS[rng.gen_range(0..KHMER_TAGS.len())], &tagset).unwrap();
                (surface, tag)
            }
            Language::Japanese => {
                let surface = JA_POOL[rng.gen_range(0..JA_POOL.len())].to_string();
                (surface, PosTag::ud(UPOS[rng.gen_range(0..UPOS.len())]))
            }
        })
        .collect();
    Document::from_tagged(format!("f{index}"), language, tagged).unwrap()
}

/// Colours of the Japanese scheme by UPOS label; anything unlisted stays
/// in the default black.
fn ja_expected(label: &str) -> (Weight, Rgb) {
    let hex = match label {
        "NOUN" | "PROPN" | "PRON" => "#1976D2",
        "VERB" | "AUX" => "#D32F2F",
        "ADJ" => "#E65100",
        "PART" | "ADP" | "SCONJ" => "#212121",
        "PUNCT" | "SYM" => "#AAAAAA",
        _ => "#000000",
    };
    (Weight::Regular, Rgb::parse(hex).unwrap())
}

#[test]
fn a6_styling_integrity() {
    let start = Instant::now();
    let khmer = StyleScheme::khmer_bold();
    let ja = StyleScheme::ja_color();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for i in 0..1000 {
        let doc = fuzz_document(&mut rng, i);
        let scheme = if doc.language == Language::Khmer { &khmer } else { &ja };
        let runs = apply_scheme(&doc, scheme).unwrap();
        let html = render_html(&doc, &runs, HtmlOptions::default()).unwrap();
        let classes = render_html(&doc, &runs, HtmlOptions { css_classes: true }).unwrap();
        let ansi = render_ansi(&doc, &runs).unwrap();
        let spans = span_records(&doc, &runs).unwrap();
        let text = &doc.source_text;
        if &strip_html(&html) != text || &strip_html(&classes) != text || &strip_ansi(&ansi) != text {
            failures.push(format!("{}: markup", doc.id));
        }
        if &text_from_spans(text, &spans) != text {
            failures.push(format!("{}: spans", doc.id));
        }
        let chars: Vec<char> = text.chars().collect();
        for tok in &doc.tokens {
            let run = runs.iter().find(|r| r.span.start <= tok.span.start && tok.span.end <= r.span.end).unwrap();
            let label = tok.tag.label();
            let (weight, color) = match doc.language {
                Language::Khmer => {
                    let bold = if KHMER_CONTENT.contains(&label) { Weight::Bold } else { Weight::Regular };
                    (bold, Rgb::BLACK)
                }
                Language::Japanese => ja_expected(label),
            };
            if run.style.weight != weight || run.style.color != color {
                let surface: String = chars[tok.span.start..tok.span.end].iter().collect();
                failures.push(format!("{}: `{surface}`/{label}", doc.id));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(30);
    failures.truncate(5);
    report("A6", pass, format!("1000 documents, {elapsed:?} {failures:?}"));
    assert!(pass);
}

#[test]
fn a7_wcag_checker() {
    let ratio = |fg: &str| contrast_ratio_hex(fg, "#FFFFFF").unwrap();
    let black = contrast_ratio_hex("#000000", "#FFFFFF").unwrap();
    let mut ok = black == 21.0;
    ok &= (ratio("#1976D2") - 4.60).abs() <= 0.02;
    ok &= (ratio("#D32F2F") - 4.98).abs() <= 0.02;
    ok &= ratio("#212121") >= 4.5;
    for (hex, lum, cr) in LUMINANCE {
        ok &= (seglit::styler::relative_luminance_hex(hex).unwrap() - lum).abs() < 1e-10;
        ok &= (ratio(hex) - cr).abs() < 1e-10;
    }
    // The scheme validator reports exactly the two low-contrast roles.
    let check = validate_scheme(&StyleScheme::ja_color(), 4.5);
    let mut flagged: Vec<String> = check.rows.iter().filter(|r| !r.pass).map(|r| r.color.to_string()).collect();
    flagged.sort();
    ok &= flagged == ["#AAAAAA", "#E65100"] && !check.all_pass;
    report(
        "A7",
        ok,
        format!(
            "black/white {black}, #1976D2 {:.3}, #D32F2F {:.3}, #212121 {:.3}, #E65100 {:.3}, #AAAAAA {:.3}; flagged {flagged:?}",
            ratio("#1976D2"),
            ratio("#D32F2F"),
            ratio("#212121"),
            ratio("#E65100"),
            ratio("#AAAAAA")
        ),
    );
    assert!(ok);
}

#[test]
fn a8_protocol_properties() {
    let ids = text_ids(10);
    let results: Vec<(bool, Vec<bool>)> = (0..10_000u64)
        .into_par_iter()
        .map(|seed| {
            let a = generate_assignment(&format!("P{seed}"), &ids, seed).unwrap();
            let mut styled = vec![false; ids.len()];
            for item in &a.items {
                let t = ids.iter().position(|id| *id == item.text_id).unwrap();
                styled[t] = item.condition == Condition::S;
            }
            (validate_assignment(&a).is_empty(), styled)
        })
        .collect();
    let valid = results.iter().filter(|r| r.0).count();
    let fractions: Vec<f64> = (0..ids.len())
        .map(|t| results.iter().filter(|r| r.1[t]).count() as f64 / results.len() as f64)
        .collect();
    let worst = fractions.iter().map(|f| (f - 0.5).abs()).fold(0.0, f64::max);

    let ballots = synth_ballots(59, 2, 8);
    let tally = tally_preferences(&ballots, 5.0, 12.0);

    let cohort = synth_cohort(&SynthConfig {
        seed: 8,
        participants: 44,
        short_sessions: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let (kept, _) = screen_participants(&cohort.logs, 30.0);

    let pass = valid == 10_000
        && worst <= 0.02
        && (tally.submitted, tally.counted) == (61, 59)
        && (cohort.logs.len(), kept.len()) == (44, 43);
    report(
        "A8",
        pass,
        format!(
            "{valid}/10000 valid, max |styled fraction − 0.5| {worst:.4}, preference {}→{}, readability {}→{}",
            tally.submitted,
            tally.counted,
            cohort.logs.len(),
            kept.len()
        ),
    );
    assert!(pass);
}

/// Cloze All-texts GEE p-value of the full pipeline on one synthetic cohort.
fn cloze_p(seed: u64, shift: f64) -> f64 {
    let mut cfg = SynthConfig {
        seed,
        participants: 50,
        ..SynthConfig::default()
    };
    cfg.styled_shift[QuestionKind::Cloze.index()] = shift;
    let cohort = synth_cohort(&cfg).unwrap();
    let opts = AnalysisOptions {
        groups: vec![GroupSpec::All],
        ..AnalysisOptions::default()
    };
    let report = analyze(&cohort.logs, &cohort.bank, &opts).unwrap();
    let cell = report.cell(GroupSpec::All, QuestionKind::Cloze).unwrap();
    cell.gee.p.unwrap_or(1.0)
}

#[test]
fn a9_end_to_end_recovery() {
    let start = Instant::now();
    let effect: Vec<f64> = (0..100u64).map(|s| cloze_p(1000 + s, 0.4)).collect();
    let null: Vec<f64> = (0..100u64).map(|s| cloze_p(5000 + s, 0.0)).collect();
    let power = effect.iter().filter(|&&p| p < 0.05).count() as f64 / 100.0;
    let (ks_d, ks_p) = ks_uniform(&null);
    let elapsed = start.elapsed();
    let pass = power >= 0.8 && ks_p > 0.01 && elapsed < Duration::from_secs(120);
    report(
        "A9",
        pass,
        format!("detected in {:.0}% of 100 runs (need ≥ 80%); null KS D = {ks_d:.3}, p = {ks_p:.3}; {elapsed:?}", power * 100.0),
    );
    assert!(pass);
}

fn simulate_groups(seed: u64, groups: usize, sigma_u: f64, sigma_e: f64) -> Vec<Group> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Normal::new(0.0, sigma_u).unwrap();
    let e = Normal::new(0.0, sigma_e).unwrap();
    (0..groups)
        .map(|g| {
            let intercept = 10.0 + u.sample(&mut rng);
            // Unbalanced designs: styled share varies by participant.
            let n = 6 + g % 7;
            (0..n)
                .map(|i| {
                    let styled = i < 1 + (g % (n - 1));
                    (styled, intercept + if styled { 1.5 } else { 0.0 } + e.sample(&mut rng))
                })
                .collect()
        })
        .collect()
}

#[test]
fn a10_lmm_sanity() {
    // No between-participant variance: centre each participant's residuals.
    let mut flat = simulate_groups(1, 43, 0.0, 1.0);
    for g in &mut flat {
        let fitted = |s: bool| 10.0 + if s { 1.5 } else { 0.0 };
        let offset = g.iter().map(|&(s, y)| y - fitted(s)).sum::<f64>() / g.len() as f64;
        for obs in g.iter_mut() {
            obs.1 -= offset;
        }
    }
    let fit = lmm_random_intercept(&flat).unwrap();
    let beta = ols(&flat).unwrap();
    let ols_gap = (fit.intercept - beta[0]).abs().max((fit.effect - beta[1]).abs());

    let fits: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let f = lmm_random_intercept(&simulate_groups(100 + seed, 43, 2.0, 1.0)).unwrap();
            (f.sigma2_u, f.sigma2_e)
        })
        .collect();
    let mean_u = fits.iter().map(|f| f.0).sum::<f64>() / 20.0;
    let mean_e = fits.iter().map(|f| f.1).sum::<f64>() / 20.0;
    let within = fits.iter().filter(|f| (f.0 / 4.0 - 1.0).abs() <= 0.15 && (f.1 - 1.0).abs() <= 0.15).count();
    let rel_u = (mean_u / 4.0 - 1.0).abs();
    let rel_e = (mean_e - 1.0).abs();
    let pass = ols_gap < 1e-6 && rel_u <= 0.15 && rel_e <= 0.15;
    report(
        "A10",
        pass,
        format!(
            "β vs OLS gap {ols_gap:.1e}; mean σ²_u {mean_u:.3} (±{:.1}%), σ²_ε {mean_e:.3} (±{:.1}%); {within}/20 seeds individually within 15%",
            rel_u * 100.0,
            rel_e * 100.0
        ),
    );
    assert!(pass);
}
