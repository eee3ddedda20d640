//! Population-averaged logistic regression for clustered binary outcomes:
//! intercept plus a styled-condition indicator, fitted by generalized
//! estimating equations with a robust (sandwich) covariance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::inference::{Flag, TestResult};
use super::special::normal_two_sided_p;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingCorrelation {
    #[default]
    Exchangeable,
    Independence,
}

impl std::str::FromStr for WorkingCorrelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exchangeable" => Ok(WorkingCorrelation::Exchangeable),
            "independence" => Ok(WorkingCorrelation::Independence),
            other => Err(Error::Stats(format!("unknown working correlation `{other}`"))),
        }
    }
}

/// One participant's responses: `(styled, correct)`.
pub type Cluster = Vec<(bool, bool)>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeeFit {
    pub intercept: f64,
    pub log_odds_ratio: f64,
    pub robust_se: f64,
    /// Exchangeable correlation estimate (0 under independence).
    pub alpha: f64,
    pub iterations: usize,
    pub result: TestResult,
}

type Vec2 = [f64; 2];
type Mat2 = [[f64; 2]; 2];

fn inv2(m: &Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mat_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-cluster score contribution `D'V⁻¹(y − μ)` and information
/// `D'V⁻¹D`, with `V = A^½ R A^½` and `R = (1 − α)I + αJ`. The scale
/// parameter cancels in both the update and the sandwich.
fn cluster_terms(cluster: &Cluster, beta: &Vec2, alpha: f64) -> (Vec2, Mat2) {
    let n = cluster.len() as f64;
    // R⁻¹ = (I − kJ) / (1 − α), k = α / (1 − α + nα)
    let k = alpha / (1.0 - alpha + n * alpha);
    let scale = 1.0 / (1.0 - alpha);
    // With u_j = A^½ x_j and e_j = A^{-½}(y − μ)_j:
    // D'V⁻¹D = scale·(Σ u u' − k (Σu)(Σu)'), D'V⁻¹r = scale·(Σ u e − k (Σu)(Σe))
    let mut uu = [[0.0; 2]; 2];
    let mut ue = [0.0; 2];
    let mut su = [0.0; 2];
    let mut se = 0.0;
    for &(styled, correct) in cluster {
        let x = [1.0, if styled { 1.0 } else { 0.0 }];
        let mu = logistic(beta[0] + beta[1] * x[1]);
        let a = (mu * (1.0 - mu)).max(1e-12);
        let sa = a.sqrt();
        let u = [sa * x[0], sa * x[1]];
        let e = ((correct as u8 as f64) - mu) / sa;
        for r in 0..2 {
            for c in 0..2 {
                uu[r][c] += u[r] * u[c];
            }
            ue[r] += u[r] * e;
            su[r] += u[r];
        }
        se += e;
    }
    let mut info = [[0.0; 2]; 2];
    let mut score = [0.0; 2];
    for r in 0..2 {
        for c in 0..2 {
            info[r][c] = scale * (uu[r][c] - k * su[r] * su[c]);
        }
        score[r] = scale * (ue[r] - k * su[r] * se);
    }
    (score, info)
}

/// Moment estimate of the exchangeable correlation from Pearson residuals.
fn estimate_alpha(clusters: &[Cluster], beta: &Vec2) -> f64 {
    let mut ss = 0.0;
    let mut n_obs = 0.0;
    let mut cross = 0.0;
    let mut n_pairs = 0.0;
    let mut max_size = 1usize;
    for cluster in clusters {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &(styled, correct) in cluster {
            let mu = logistic(beta[0] + if styled { beta[1] } else { 0.0 });
            let r = ((correct as u8 as f64) - mu) / (mu * (1.0 - mu)).max(1e-12).sqrt();
            sum += r;
            sum_sq += r * r;
        }
        ss += sum_sq;
        n_obs += cluster.len() as f64;
        // Σ_{j<k} r_j r_k = ((Σr)² − Σr²) / 2
        cross += (sum * sum - sum_sq) / 2.0;
        let n = cluster.len() as f64;
        n_pairs += n * (n - 1.0) / 2.0;
        max_size = max_size.max(cluster.len());
    }
    if n_pairs == 0.0 || ss == 0.0 {
        return 0.0;
    }
    let phi = ss / (n_obs - 2.0).max(1.0);
    let alpha = cross / (n_pairs * phi);
    let lower = if max_size > 1 { -1.0 / (max_size as f64 - 1.0) + 1e-6 } else { 0.0 };
    alpha.clamp(lower, 0.999)
}

/// GEE logistic fit of `correct ~ 1 + styled` clustered by participant.
/// When either condition is all-correct or all-wrong the estimate diverges;
/// the result then carries the `separation` flag, an infinite (or zero) odds
/// ratio and no p-value.
pub fn gee_logistic(clusters: &[Cluster], correlation: WorkingCorrelation) -> Result<GeeFit> {
    let clusters: Vec<&Cluster> = clusters.iter().filter(|c| !c.is_empty()).collect();
    if clusters.len() < 2 {
        return Err(Error::Stats("GEE needs at least 2 participants".into()));
    }
    let mut counts = [[0u64; 2]; 2]; // [styled][correct]
    for c in &clusters {
        for &(styled, correct) in c.iter() {
            counts[styled as usize][correct as usize] += 1;
        }
    }
    let n_styled = counts[1][0] + counts[1][1];
    let n_plain = counts[0][0] + counts[0][1];
    if n_styled == 0 || n_plain == 0 {
        return Err(Error::Stats("GEE needs responses in both conditions".into()));
    }
    let rate_styled = counts[1][1] as f64 / n_styled as f64;
    let rate_plain = counts[0][1] as f64 / n_plain as f64;
    let degenerate = |r: f64| r == 0.0 || r == 1.0;
    if degenerate(rate_styled) || degenerate(rate_plain) {
        let odds_ratio = if (rate_styled == 1.0 && rate_plain < 1.0) || (rate_plain == 0.0 && rate_styled > 0.0) {
            f64::INFINITY
        } else if (rate_styled == 0.0 && rate_plain > 0.0) || (rate_plain == 1.0 && rate_styled < 1.0) {
            0.0
        } else {
            1.0
        };
        return Ok(GeeFit {
            intercept: logit(rate_plain),
            log_odds_ratio: odds_ratio.ln(),
            robust_se: f64::NAN,
            alpha: 0.0,
            iterations: 0,
            result: TestResult {
                statistic: f64::NAN,
                df: 1.0,
                p: None,
                q: None,
                effect: odds_ratio,
                flags: BTreeSet::from([Flag::Separation]),
            },
        });
    }

    let owned: Vec<Cluster> = clusters.iter().map(|c| (*c).clone()).collect();
    // Independence solution in closed form: the marginal log-odds.
    let mut beta = [logit(rate_plain), logit(rate_styled) - logit(rate_plain)];
    let mut alpha = 0.0;
    let mut iterations = 0;
    if correlation == WorkingCorrelation::Exchangeable {
        for iter in 1..=200 {
            iterations = iter;
            alpha = estimate_alpha(&owned, &beta);
            let mut score = [0.0; 2];
            let mut info = [[0.0; 2]; 2];
            for c in &owned {
                let (s, i) = cluster_terms(c, &beta, alpha);
                for r in 0..2 {
                    score[r] += s[r];
                    for k in 0..2 {
                        info[r][k] += i[r][k];
                    }
                }
            }
            let inv = inv2(&info).ok_or_else(|| Error::Stats("singular GEE information matrix".into()))?;
            let step = mat_vec(&inv, &score);
            beta = [beta[0] + step[0], beta[1] + step[1]];
            if step[0].abs().max(step[1].abs()) < 1e-12 {
                break;
            }
        }
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::Convergence("GEE estimate diverged".into()));
        }
        alpha = estimate_alpha(&owned, &beta);
    }

    let mut bread = [[0.0; 2]; 2];
    let mut meat = [[0.0; 2]; 2];
    for c in &owned {
        let (s, i) = cluster_terms(c, &beta, alpha);
        for r in 0..2 {
            for k in 0..2 {
                bread[r][k] += i[r][k];
                meat[r][k] += s[r] * s[k];
            }
        }
    }
    let inv = inv2(&bread).ok_or_else(|| Error::Stats("singular GEE information matrix".into()))?;
    // B⁻¹ M B⁻¹, only the condition entry is needed.
    let mut var = 0.0;
    for r in 0..2 {
        for k in 0..2 {
            var += inv[1][r] * meat[r][k] * inv[k][1];
        }
    }
    let se = var.sqrt();
    let z = beta[1] / se;
    Ok(GeeFit {
        intercept: beta[0],
        log_odds_ratio: beta[1],
        robust_se: se,
        alpha,
        iterations,
        result: TestResult {
            statistic: z,
            df: 1.0,
            p: Some(if se > 0.0 { normal_two_sided_p(z) } else { 1.0 }),
            q: None,
            effect: beta[1].exp(),
            flags: BTreeSet::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `k` clusters, each with `per` styled and `per` plain responses; the
    /// given success totals are dealt round-robin across clusters.
    fn balanced(k: usize, per: usize, styled_correct: usize, plain_correct: usize) -> Vec<Cluster> {
        let mut clusters = vec![Vec::new(); k];
        for (cond, total) in [(true, styled_correct), (false, plain_correct)] {
            for j in 0..k * per {
                clusters[j % k].push((cond, j < total));
            }
        }
        clusters
    }

    #[test]
    fn balanced_estimate_is_marginal_log_odds() {
        let clusters = balanced(19, 3, 43, 40);
        let want = logit(43.0 / 57.0) - logit(40.0 / 57.0);
        for corr in [WorkingCorrelation::Exchangeable, WorkingCorrelation::Independence] {
            let fit = gee_logistic(&clusters, corr).unwrap();
            assert!((fit.log_odds_ratio - want).abs() < 1e-9, "{corr:?}");
            assert!((fit.result.effect - 1.31).abs() < 0.01);
            let p = fit.result.p.unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn equal_rates_give_unit_odds_ratio() {
        let fit = gee_logistic(&balanced(10, 2, 14, 14), WorkingCorrelation::Exchangeable).unwrap();
        assert!((fit.result.effect - 1.0).abs() < 1e-12);
        assert!((fit.result.p.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separation_is_flagged() {
        let fit = gee_logistic(&balanced(7, 3, 21, 17), WorkingCorrelation::Exchangeable).unwrap();
        assert!(fit.result.has(Flag::Separation));
        assert_eq!(fit.result.effect, f64::INFINITY);
        assert_eq!(fit.result.p, None);
        let fit = gee_logistic(&balanced(7, 3, 0, 17), WorkingCorrelation::Exchangeable).unwrap();
        assert_eq!(fit.result.effect, 0.0);
    }

    #[test]
    fn single_condition_or_cluster_is_an_error() {
        assert!(gee_logistic(&[vec![(true, true), (true, false)], vec![(true, true)]], Default::default()).is_err());
        assert!(gee_logistic(&[vec![(true, true), (false, false)]], Default::default()).is_err());
    }

    #[test]
    fn correlated_clusters_estimate_positive_alpha() {
        // Half the participants answer everything right, half mostly wrong.
        let mut clusters = Vec::new();
        for i in 0..20 {
            let good = i % 2 == 0;
            let c: Cluster = (0..10).map(|j| (j % 2 == 0, if good { j != 3 } else { j == 4 || j == 7 })).collect();
            clusters.push(c);
        }
        let fit = gee_logistic(&clusters, WorkingCorrelation::Exchangeable).unwrap();
        assert!(fit.alpha > 0.3, "{}", fit.alpha);
        let ind = gee_logistic(&clusters, WorkingCorrelation::Independence).unwrap();
        assert_eq!(ind.alpha, 0.0);
        assert!((fit.log_odds_ratio - ind.log_odds_ratio).abs() < 1e-9);
    }
}
