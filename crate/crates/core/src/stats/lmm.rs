//! Gaussian linear mixed model with one random intercept per participant:
//! `y = β₀ + β₁·styled + u_participant + ε`.
//!
//! Variance components are fitted by the EM algorithm for REML
//! (Laird, Lange & Stram 1987). Every cluster's covariance is compound
//! symmetric, so inverses and traces have closed forms and each iteration is
//! linear in the number of observations. The fixed effect uses a Wald test
//! with a normal reference distribution (no Satterthwaite correction).

use std::collections::BTreeSet;

use serde::Serialize;

use super::inference::TestResult;
use super::special::normal_two_sided_p;
use crate::error::{Error, Result};

pub const LOGLIK_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 200_000;

/// One participant's observations: `(styled, y)`.
pub type Group = Vec<(bool, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmmFit {
    pub intercept: f64,
    pub effect: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    /// Between-participant variance.
    pub sigma2_u: f64,
    /// Residual variance.
    pub sigma2_e: f64,
    /// Raw difference of condition means (styled − plain).
    pub raw_delta: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub loglik_trace: Vec<f64>,
}

impl LmmFit {
    pub fn reml_loglik(&self) -> Option<f64> {
        self.loglik_trace.last().copied()
    }

    pub fn to_test_result(&self) -> TestResult {
        TestResult {
            statistic: self.z,
            df: f64::INFINITY,
            p: Some(self.p),
            q: None,
            effect: self.effect,
            flags: BTreeSet::new(),
        }
    }
}

/// Per-cluster sufficient statistics.
#[derive(Debug, Clone, Copy)]
struct Suff {
    n: f64,
    sx: f64,
    sy: f64,
    sxy: f64,
    syy: f64,
}

impl Suff {
    fn of(group: &Group) -> Self {
        let mut s = Suff { n: 0.0, sx: 0.0, sy: 0.0, sxy: 0.0, syy: 0.0 };
        for &(styled, y) in group {
            let x = styled as u8 as f64;
            s.n += 1.0;
            s.sx += x;
            s.sy += y;
            s.sxy += x * y;
            s.syy += y * y;
        }
        s
    }

    /// X'X with X = [1, x]; x is binary so Σx² = Σx.
    fn xtx(&self) -> [[f64; 2]; 2] {
        [[self.n, self.sx], [self.sx, self.sx]]
    }

    fn x1(&self) -> [f64; 2] {
        [self.n, self.sx]
    }

    fn xty(&self) -> [f64; 2] {
        [self.sy, self.sxy]
    }

    fn residual_sum(&self, beta: &[f64; 2]) -> f64 {
        self.sy - beta[0] * self.n - beta[1] * self.sx
    }

    fn residual_ss(&self, beta: &[f64; 2]) -> f64 {
        let xty = self.xty();
        let xtx = self.xtx();
        let quad = beta[0] * beta[0] * xtx[0][0] + 2.0 * beta[0] * beta[1] * xtx[0][1] + beta[1] * beta[1] * xtx[1][1];
        (self.syy - 2.0 * (beta[0] * xty[0] + beta[1] * xty[1]) + quad).max(0.0)
    }
}

fn inv2(m: &[[f64; 2]; 2]) -> Option<([[f64; 2]; 2], f64)> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return None;
    }
    Some(([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]], det))
}

fn quad(v: &[f64; 2], m: &[[f64; 2]; 2], w: &[f64; 2]) -> f64 {
    let mut s = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            s += v[r] * m[r][c] * w[c];
        }
    }
    s
}

/// Ordinary least squares `(β₀, β₁)` ignoring the grouping.
pub fn ols(groups: &[Group]) -> Result<[f64; 2]> {
    let mut xtx = [[0.0; 2]; 2];
    let mut xty = [0.0; 2];
    for g in groups {
        let s = Suff::of(g);
        let m = s.xtx();
        for r in 0..2 {
            for c in 0..2 {
                xtx[r][c] += m[r][c];
            }
        }
        xty[0] += s.sy;
        xty[1] += s.sxy;
    }
    let (inv, _) = inv2(&xtx).ok_or_else(|| Error::Stats("degenerate design: condition does not vary".into()))?;
    Ok([inv[0][0] * xty[0] + inv[0][1] * xty[1], inv[1][0] * xty[0] + inv[1][1] * xty[1]])
}

struct Step {
    beta: [f64; 2],
    cov: [[f64; 2]; 2],
    loglik: f64,
    next: (f64, f64),
}

/// GLS estimate, REML log-likelihood and the EM update at `(σu², σ²)`.
fn em_step(suff: &[Suff], su2: f64, se2: f64, n_total: f64) -> Result<Step> {
    let mut info = [[0.0; 2]; 2];
    let mut score = [0.0; 2];
    let mut logdet_v = 0.0;
    for s in suff {
        let w = su2 / (se2 + s.n * su2);
        let xtx = s.xtx();
        let x1 = s.x1();
        let xty = s.xty();
        for r in 0..2 {
            for c in 0..2 {
                info[r][c] += (xtx[r][c] - w * x1[r] * x1[c]) / se2;
            }
            score[r] += (xty[r] - w * x1[r] * s.sy) / se2;
        }
        logdet_v += (s.n - 1.0) * se2.ln() + (se2 + s.n * su2).ln();
    }
    let (cov, det) = inv2(&info).ok_or_else(|| Error::Stats("degenerate design: condition does not vary".into()))?;
    let beta = [
        cov[0][0] * score[0] + cov[0][1] * score[1],
        cov[1][0] * score[0] + cov[1][1] * score[1],
    ];

    let mut rvr = 0.0;
    let mut su_acc = 0.0;
    let mut se_acc = 0.0;
    for s in suff {
        let lam = se2 + s.n * su2;
        let w = su2 / lam;
        let r1 = s.residual_sum(&beta);
        let rr = s.residual_ss(&beta);
        rvr += (rr - w * r1 * r1) / se2;

        let b = su2 * r1 / lam;
        let x1 = s.x1();
        // 1'P1 = 1'V⁻¹1 − (X'V⁻¹1)' C (X'V⁻¹1), with V⁻¹1 = 1/λ
        let xv1 = [x1[0] / lam, x1[1] / lam];
        let one_p_one = s.n / lam - quad(&xv1, &cov, &xv1);
        su_acc += b * b + su2 - su2 * su2 * one_p_one;

        // tr P = tr V⁻¹ − tr(C X'V⁻²X), V⁻² = (I − (2w − n w²) J) / σ⁴
        let tr_vinv = s.n * (1.0 - w) / se2;
        let g = 2.0 * w - s.n * w * w;
        let xtx = s.xtx();
        let mut tr_cxv2x = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                tr_cxv2x += cov[r][c] * (xtx[c][r] - g * x1[c] * x1[r]) / (se2 * se2);
            }
        }
        let tr_p = tr_vinv - tr_cxv2x;
        let eps_ss = (rr - 2.0 * b * r1 + s.n * b * b).max(0.0);
        se_acc += eps_ss + se2 * s.n - se2 * se2 * tr_p;
    }
    let loglik = -0.5 * (logdet_v + det.ln() + rvr) - 0.5 * (n_total - 2.0) * (2.0 * std::f64::consts::PI).ln();
    Ok(Step {
        beta,
        cov,
        loglik,
        next: ((su_acc / suff.len() as f64).max(0.0), (se_acc / n_total).max(1e-300)),
    })
}

/// Fits the random-intercept model. Requires at least two participants
/// with at least two observations each and both conditions present.
pub fn lmm_random_intercept(groups: &[Group]) -> Result<LmmFit> {
    if groups.len() < 2 {
        return Err(Error::Stats("mixed model needs at least 2 participants".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::Stats("mixed model needs at least 2 observations per participant".into()));
    }
    if groups.iter().flatten().any(|(_, y)| !y.is_finite()) {
        return Err(Error::Stats("non-finite observation".into()));
    }
    let suff: Vec<Suff> = groups.iter().map(Suff::of).collect();
    let n_total: f64 = suff.iter().map(|s| s.n).sum();
    let beta_ols = ols(groups)?;

    let (mut sum_s, mut n_s, mut sum_p, mut n_p) = (0.0, 0.0, 0.0, 0.0);
    for &(styled, y) in groups.iter().flatten() {
        if styled {
            sum_s += y;
            n_s += 1.0;
        } else {
            sum_p += y;
            n_p += 1.0;
        }
    }
    let raw_delta = sum_s / n_s - sum_p / n_p;

    let rss: f64 = suff.iter().map(|s| s.residual_ss(&beta_ols)).sum();
    let scale: f64 = suff.iter().map(|s| s.syy).sum::<f64>() / n_total;
    if rss <= 1e-24 * scale.max(1e-300) || rss == 0.0 {
        // Exact fit: no variance left to split.
        return Ok(LmmFit {
            intercept: beta_ols[0],
            effect: beta_ols[1],
            se: 0.0,
            z: 0.0,
            p: 1.0,
            sigma2_u: 0.0,
            sigma2_e: 0.0,
            raw_delta,
            iterations: 0,
            loglik_trace: Vec::new(),
        });
    }

    let start = rss / (n_total - 2.0) / 2.0;
    let (mut su2, mut se2) = (start, start);
    let mut trace: Vec<f64> = Vec::new();
    for iter in 1..=MAX_ITERATIONS {
        let step = em_step(&suff, su2, se2, n_total)?;
        let converged = trace.last().is_some_and(|prev| (step.loglik - prev).abs() < LOGLIK_TOLERANCE);
        trace.push(step.loglik);
        (su2, se2) = step.next;
        if converged {
            let se = step.cov[1][1].sqrt();
            let z = step.beta[1] / se;
            return Ok(LmmFit {
                intercept: step.beta[0],
                effect: step.beta[1],
                se,
                z,
                p: normal_two_sided_p(z),
                sigma2_u: su2,
                sigma2_e: se2,
                raw_delta,
                iterations: iter,
                loglik_trace: trace,
            });
        }
    }
    Err(Error::Convergence(format!(
        "REML EM did not reach a log-likelihood change below {LOGLIK_TOLERANCE} in {MAX_ITERATIONS} iterations"
    )))
}
