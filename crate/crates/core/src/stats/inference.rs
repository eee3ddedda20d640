//! Classical tests: χ² with continuity correction, paired t and
//! Benjamini–Hochberg adjustment.

use std::collections::BTreeSet;

use serde::{Serialize, Serializer};

use super::special::{chi2_sf_1df, t_two_sided_p};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Separation,
    SmallExpectedCount,
}

/// Outcome of one test. `p` is absent when the estimate is not finite
/// (complete separation); `effect` is a difference for χ² and t, an odds
/// ratio for GEE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    #[serde(serialize_with = "finite_or_label")]
    pub statistic: f64,
    pub df: f64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    #[serde(serialize_with = "finite_or_label")]
    pub effect: f64,
    pub flags: BTreeSet<Flag>,
}

impl TestResult {
    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// JSON has no infinities; they go out as the strings `"inf"`, `"-inf"`,
/// `"nan"`.
pub(crate) fn finite_or_label<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Rows are conditions (styled, plain), columns are (correct, incorrect).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable2x2 { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Correct fraction in the first row.
    pub fn row1_rate(&self) -> f64 {
        self.a as f64 / (self.a + self.b) as f64
    }

    pub fn row2_rate(&self) -> f64 {
        self.c as f64 / (self.c + self.d) as f64
    }

    /// Rebuilds counts from row percentages (0–100) and per-row size by
    /// rounding to the nearest integer.
    pub fn from_percentages(row1_pct: f64, row1_n: u64, row2_pct: f64, row2_n: u64) -> Self {
        let a = (row1_pct / 100.0 * row1_n as f64).round() as u64;
        let c = (row2_pct / 100.0 * row2_n as f64).round() as u64;
        ContingencyTable2x2::new(a, row1_n - a, c, row2_n - c)
    }
}

/// Pearson χ² with Yates' continuity correction, one degree of freedom.
pub fn chi2_yates(t: &ContingencyTable2x2) -> Result<TestResult> {
    let n = t.total() as f64;
    let rows = [(t.a + t.b) as f64, (t.c + t.d) as f64];
    let cols = [(t.a + t.c) as f64, (t.b + t.d) as f64];
    if n == 0.0 || rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(Error::Stats(format!("zero marginal in 2x2 table {t:?}")));
    }
    let cross = (t.a as f64 * t.d as f64 - t.b as f64 * t.c as f64).abs();
    let corrected = (cross - n / 2.0).max(0.0);
    let statistic = n * corrected * corrected / (rows[0] * rows[1] * cols[0] * cols[1]);
    let mut flags = BTreeSet::new();
    if rows.iter().any(|r| cols.iter().any(|c| r * c / n < 5.0)) {
        flags.insert(Flag::SmallExpectedCount);
    }
    Ok(TestResult {
        statistic,
        df: 1.0,
        p: Some(chi2_sf_1df(statistic)),
        q: None,
        effect: (t.row1_rate() - t.row2_rate()) * 100.0,
        flags,
    })
}

/// Benjamini–Hochberg step-up adjustment over the whole slice (m = len).
pub fn bh_fdr(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Stats(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p_values[i] * m as f64 / (rank + 1) as f64);
        q[i] = running.min(1.0);
    }
    Ok(q)
}

/// BH over the present entries only; absent p-values stay absent.
pub fn bh_fdr_partial(p_values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<f64> = p_values.iter().flatten().copied().collect();
    let mut adjusted = bh_fdr(&present)?.into_iter();
    Ok(p_values.iter().map(|p| p.and_then(|_| adjusted.next())).collect())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// One-sample t on paired differences; `effect` is the mean difference.
pub fn paired_t(differences: &[f64]) -> Result<TestResult> {
    let n = differences.len();
    if n < 2 {
        return Err(Error::Stats(format!("paired t needs at least 2 pairs, got {n}")));
    }
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(Error::Stats("non-finite difference".into()));
    }
    let m = mean(differences);
    let sd = sample_sd(differences);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::Stats("zero variance in paired differences".into()));
    }
    let t = m * (n as f64).sqrt() / sd;
    let df = (n - 1) as f64;
    Ok(TestResult {
        statistic: t,
        df,
        p: Some(t_two_sided_p(t, df)),
        q: None,
        effect: m,
        flags: BTreeSet::new(),
    })
}

/// Paired t on `(first, second)` pairs, testing `first − second`.
pub fn paired_t_samples(first: &[f64], second: &[f64]) -> Result<TestResult> {
    if first.len() != second.len() {
        return Err(Error::Stats("paired samples differ in length".into()));
    }
    let d: Vec<f64> = first.iter().zip(second).map(|(x, y)| x - y).collect();
    paired_t(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(got: f64, want: f64, tol: f64) {
        assert!((got - want).abs() <= tol, "got {got}, want {want}");
    }

    #[test]
    fn chi2_cloze_all_texts() {
        let r = chi2_yates(&ContingencyTable2x2::new(170, 45, 152, 63)).unwrap();
        close(r.statistic, 3.57, 0.005);
        close(r.p.unwrap(), 0.0588, 0.0005);
        let r = chi2_yates(&ContingencyTable2x2::new(99, 116, 110, 105)).unwrap();
        close(r.statistic, 0.93, 0.005);
        close(r.p.unwrap(), 0.335, 0.001);
    }

    #[test]
    fn chi2_identical_rows() {
        let r = chi2_yates(&ContingencyTable2x2::new(30, 10, 30, 10)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p, Some(1.0));
    }

    #[test]
    fn chi2_zero_margin_is_an_error() {
        assert!(chi2_yates(&ContingencyTable2x2::new(0, 0, 3, 4)).is_err());
        assert!(chi2_yates(&ContingencyTable2x2::new(5, 0, 3, 0)).is_err());
    }

    #[test]
    fn chi2_flags_small_expected_counts() {
        let r = chi2_yates(&ContingencyTable2x2::new(3, 1, 2, 4)).unwrap();
        assert!(r.has(Flag::SmallExpectedCount));
    }

    #[test]
    fn percentage_reconstruction() {
        assert_eq!(
            ContingencyTable2x2::from_percentages(79.07, 215, 70.70, 215),
            ContingencyTable2x2::new(170, 45, 152, 63)
        );
    }

    #[test]
    fn bh_examples() {
        let q = bh_fdr(&[0.03, 0.01, 0.01]).unwrap();
        let rounded: Vec<f64> = q.iter().map(|v| (v * 100.0).round() / 100.0).collect();
        assert_eq!(rounded, vec![0.03, 0.02, 0.02]);
        let q = bh_fdr(&[0.06, 0.08, 0.04]).unwrap();
        for v in q {
            close(v, 0.08, 1e-12);
        }
        assert_eq!(bh_fdr(&[0.2]).unwrap(), vec![0.2]);
        assert!(bh_fdr(&[1.2]).is_err());
    }

    #[test]
    fn bh_partial_skips_missing() {
        let q = bh_fdr_partial(&[Some(0.02), None, Some(0.04)]).unwrap();
        assert_eq!(q, vec![Some(0.04), None, Some(0.04)]);
    }

    #[test]
    fn paired_t_examples() {
        let r = paired_t(&[1.0, 2.0, 3.0]).unwrap();
        close(r.statistic, 12f64.sqrt(), 1e-12);
        close(r.p.unwrap(), 0.0742, 1e-4);
        let r = paired_t(&[0.0, 0.0, 1.5, -1.5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p, Some(1.0));
        assert!(paired_t(&[2.0, 2.0, 2.0]).is_err());
        assert!(paired_t(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn chi2_symmetric_under_row_and_column_swap(a in 1u64..200, b in 1u64..200, c in 1u64..200, d in 1u64..200) {
            let x = chi2_yates(&ContingencyTable2x2::new(a, b, c, d)).unwrap();
            let y = chi2_yates(&ContingencyTable2x2::new(d, c, b, a)).unwrap();
            prop_assert!(x.statistic >= 0.0);
            prop_assert!((x.statistic - y.statistic).abs() <= 1e-9 * x.statistic.max(1.0));
        }

        #[test]
        fn bh_bounds_and_monotonicity(ps in prop::collection::vec(0.0f64..=1.0, 1..20)) {
            let q = bh_fdr(&ps).unwrap();
            let m = ps.len() as f64;
            for (p, q) in ps.iter().zip(&q) {
                prop_assert!(*q >= *p - 1e-15);
                prop_assert!(*q <= (m * p).min(1.0) + 1e-15);
            }
            let mut pairs: Vec<(f64, f64)> = ps.iter().copied().zip(q.iter().copied()).collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            for w in pairs.windows(2) {
                prop_assert!(w[0].1 <= w[1].1 + 1e-15);
            }
        }

        #[test]
        fn bh_single_is_identity(p in 0.0f64..=1.0) {
            prop_assert_eq!(bh_fdr(&[p]).unwrap(), vec![p]);
        }

        #[test]
        fn paired_t_sign_and_shift(
            pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..30),
            shift in -100.0f64..100.0,
        ) {
            let first: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let second: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let d: Vec<f64> = first.iter().zip(&second).map(|(x, y)| x - y).collect();
            prop_assume!(sample_sd(&d) > 1e-6);
            let r = paired_t(&d).unwrap();
            let neg: Vec<f64> = d.iter().map(|v| -v).collect();
            let rn = paired_t(&neg).unwrap();
            prop_assert!((r.statistic + rn.statistic).abs() < 1e-9 * r.statistic.abs().max(1.0));
            let f2: Vec<f64> = first.iter().map(|v| v + shift).collect();
            let s2: Vec<f64> = second.iter().map(|v| v + shift).collect();
            let rs = paired_t_samples(&f2, &s2).unwrap();
            prop_assert!((rs.statistic.abs() - r.statistic.abs()).abs() < 1e-6 * r.statistic.abs().max(1.0));
        }
    }
}
