//! Brute-force and control-variate estimators of CP and SEL.

use serde::Serialize;

use super::kernel::{denominator_sample, DrawSet, Evaluator, KernelRun};
use super::rng::Purpose;
use super::stats::Moments;
use super::{fold_runs, MCEstimate, Method, SimConfig};
use crate::error::{Error, Result};
use crate::numeric::{norm_quantile, two_sided_critical};
use crate::panel::CovariateSummary;
use crate::theory::{cpk_from_moments, sel_terms_from_moments, theory_moments};

/// Both CP estimators from the same runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpEstimates {
    pub brute: MCEstimate,
    pub control_variate: MCEstimate,
    /// Exact coverage of the known-variance procedure.
    pub cpk: f64,
    /// Per-run variance of the brute summand over that of the CV summand.
    pub efficiency: f64,
}

impl CpEstimates {
    pub fn get(&self, method: Method) -> MCEstimate {
        match method {
            Method::Brute => self.brute,
            Method::ControlVariate => self.control_variate,
        }
    }
}

/// Both estimators of the SEL numerator from the same runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumEstimates {
    pub brute: MCEstimate,
    pub control_variate: MCEstimate,
    pub numk: f64,
    pub efficiency: f64,
}

impl NumEstimates {
    pub fn get(&self, method: Method) -> MCEstimate {
        match method {
            Method::Brute => self.brute,
            Method::ControlVariate => self.control_variate,
        }
    }
}

#[derive(Clone, Copy)]
struct Pair {
    brute: Moments,
    cv: Moments,
}

impl Pair {
    fn new() -> Self {
        Self {
            brute: Moments::new(),
            cv: Moments::new(),
        }
    }

    fn merge(self, other: Self) -> Self {
        Self {
            brute: self.brute.merge(other.brute),
            cv: self.cv.merge(other.cv),
        }
    }
}

fn efficiency(brute: &Moments, cv: &Moments) -> f64 {
    let v = cv.variance();
    if v > 0.0 {
        brute.variance() / v
    } else {
        f64::INFINITY
    }
}

#[inline]
fn cp_summand(gi: f64, gj: f64, h: f64, z: f64, zh: f64) -> f64 {
    let accepted = h.abs() <= zh;
    let covered = if accepted { gi.abs() <= z } else { gj.abs() <= z };
    if covered {
        1.0
    } else {
        0.0
    }
}

/// CP at `(γ, ν)` from stored runs. The CV summand is the brute summand minus
/// the known-variance summand of the same run, plus the exact CPK.
pub fn cp_from_draws(draws: &DrawSet, summary: &CovariateSummary, gamma: f64, nu: f64, cfg: &SimConfig) -> Result<CpEstimates> {
    cfg.validate()?;
    let eval = Evaluator::new(summary, gamma, nu)?;
    let cpk = cpk_from_moments(&theory_moments(summary, gamma, nu)?, cfg.alpha, cfg.alpha_h);
    let z = two_sided_critical(cfg.alpha);
    let zh = two_sided_critical(cfg.alpha_h);
    let runs = draws.runs();
    let acc = fold_runs(
        runs.len(),
        Pair::new,
        |acc, k| {
            let r: KernelRun = eval.evaluate(&runs[k]);
            if !r.valid {
                return;
            }
            let brute = cp_summand(r.g_hat_i, r.g_hat_j, r.h_hat, z, zh);
            let known = cp_summand(r.g_i, r.g_j, r.h, z, zh);
            acc.brute.push(brute);
            acc.cv.push(brute - known + cpk);
        },
        Pair::merge,
    );
    Ok(CpEstimates {
        brute: MCEstimate::from_moments(&acc.brute, runs.len(), Method::Brute, draws.seed())?,
        control_variate: MCEstimate::from_moments(&acc.cv, runs.len(), Method::ControlVariate, draws.seed())?,
        cpk,
        efficiency: efficiency(&acc.brute, &acc.cv),
    })
}

pub fn estimate_cp_both(summary: &CovariateSummary, gamma: f64, nu: f64, cfg: &SimConfig) -> Result<CpEstimates> {
    cfg.validate()?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    cp_from_draws(&draws, summary, gamma, nu, cfg)
}

pub fn estimate_cp(summary: &CovariateSummary, gamma: f64, nu: f64, cfg: &SimConfig, method: Method) -> Result<MCEstimate> {
    Ok(estimate_cp_both(summary, gamma, nu, cfg)?.get(method))
}

/// SEL numerator at `(γ, ν)` from stored runs.
pub fn num_from_draws(draws: &DrawSet, summary: &CovariateSummary, gamma: f64, nu: f64, cfg: &SimConfig) -> Result<NumEstimates> {
    cfg.validate()?;
    let eval = Evaluator::new(summary, gamma, nu)?;
    let numk = sel_terms_from_moments(&theory_moments(summary, gamma, nu)?, cfg.alpha_h).numk;
    let zh = two_sided_critical(cfg.alpha_h);
    let sqrt_w = eval.w().sqrt();
    let runs = draws.runs();
    let acc = fold_runs(
        runs.len(),
        Pair::new,
        |acc, k| {
            let r = eval.evaluate(&runs[k]);
            if !r.valid {
                return;
            }
            let brute = r.sigma_ratio * if r.h_hat.abs() <= zh { r.w_hat.sqrt() } else { 1.0 };
            let known = if r.h.abs() <= zh { sqrt_w } else { 1.0 };
            acc.brute.push(brute);
            acc.cv.push(brute - known + numk);
        },
        Pair::merge,
    );
    Ok(NumEstimates {
        brute: MCEstimate::from_moments(&acc.brute, runs.len(), Method::Brute, draws.seed())?,
        control_variate: MCEstimate::from_moments(&acc.cv, runs.len(), Method::ControlVariate, draws.seed())?,
        numk,
        efficiency: efficiency(&acc.brute, &acc.cv),
    })
}

/// `E(σ̂_ε/σ_ε)` from the independent denominator family of `cfg.m_runs` runs.
pub fn estimate_denominator(summary: &CovariateSummary, cfg: &SimConfig) -> Result<MCEstimate> {
    cfg.validate()?;
    let sample = denominator_sample(summary, cfg.m_runs, cfg.seed);
    let m = fold_runs(
        sample.len(),
        Moments::new,
        |acc, k| {
            if sample[k] > 0.0 {
                acc.push(sample[k]);
            }
        },
        Moments::merge,
    );
    MCEstimate::from_moments(&m, sample.len(), Method::Brute, cfg.seed)
}

/// `z_{1−α/2} / Φ^{-1}((c* + 1)/2)`.
pub fn sel_scale(alpha: f64, c_star: f64) -> Result<f64> {
    if !(c_star > 0.0 && c_star < 1.0) {
        return Err(Error::InvalidArgument(format!("c* must lie in (0, 1), got {c_star}")));
    }
    Ok(two_sided_critical(alpha) / norm_quantile(0.5 * (c_star + 1.0)))
}

/// Combine independent NUM and DENOM estimates; the standard error follows
/// from the delta method for a ratio of independent means.
pub fn sel_from_parts(num: &MCEstimate, denom: &MCEstimate, c_star: f64, alpha: f64) -> Result<MCEstimate> {
    let scale = sel_scale(alpha, c_star)?;
    let ratio = num.value / denom.value;
    let rel2 = (num.std_error / num.value).powi(2) + (denom.std_error / denom.value).powi(2);
    Ok(MCEstimate {
        value: scale * ratio,
        std_error: scale * ratio.abs() * rel2.sqrt(),
        ..*num
    })
}

pub fn estimate_sel(
    summary: &CovariateSummary,
    gamma: f64,
    nu: f64,
    c_star: f64,
    cfg: &SimConfig,
    method: Method,
) -> Result<MCEstimate> {
    sel_scale(cfg.alpha, c_star)?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    let num = num_from_draws(&draws, summary, gamma, nu, cfg)?.get(method);
    let denom = estimate_denominator(summary, cfg)?;
    sel_from_parts(&num, &denom, c_star, cfg.alpha)
}
