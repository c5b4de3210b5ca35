//! The standardized simulation kernel.
//!
//! With `σ_ε = 1`, a run is fully described by its draws `ε†` and `η†`. Each
//! run is reduced once to a handful of sufficient statistics ([`RunStats`]);
//! every `(γ, ν)` is then evaluated from those in constant time, so grids over
//! `γ` and `ν` share common random numbers for free.
//!
//! Within a run:
//! - `W = Σ d_it ε_it` with `d_it = x_it − x̄_i`, and `b̃_W − b = W / SSW`;
//! - `u_i = √ν η_i + ε̄_i`, `B = Σ (x̄_i − x̄) u_i`, and `b̃_B − b = B / SSB + ξ`;
//! - the within residual sum of squares does not involve `ν`;
//! - the between residuals are `e_i + √ν f_i`, where `e` and `f` are the
//!   residuals of `ε̄` and `η` after projecting out `(1, x̄_i)`.

use rayon::prelude::*;
use serde::Serialize;

use super::rng::{fill_normals, run_rng, Purpose, RunDraw};
use super::{SimConfig, CHUNK};
use crate::error::{check_positive, Error, Result};
use crate::panel::CovariateSummary;

/// Per-run sufficient statistics of the standardized draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    /// `Σ d_it ε_it`.
    pub w: f64,
    /// Within residual sum of squares.
    pub rss: f64,
    /// `Σ (x̄_i − x̄) ε̄_i`.
    pub b_eps: f64,
    /// `Σ (x̄_i − x̄) η_i`.
    pub b_eta: f64,
    /// `Σ e_i²`, `Σ e_i f_i`, `Σ f_i²`.
    pub s_ee: f64,
    pub s_ef: f64,
    pub s_ff: f64,
}

/// Everything the kernel reports for one run at one `(γ, ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelRun {
    pub g_hat_i: f64,
    pub g_hat_j: f64,
    pub h_hat: f64,
    pub g_i: f64,
    pub g_j: f64,
    pub h: f64,
    /// `σ̂_ε / σ_ε`.
    pub sigma_ratio: f64,
    pub nu_hat: f64,
    pub w_hat: f64,
    /// `(ν̂ + 1/T) / (ν + 1/T)`.
    pub pivot: f64,
    pub gamma_hat: f64,
    /// False when `σ̂_ε = 0` or `q(ν̂, T) ≤ 0`.
    pub valid: bool,
}

struct Geometry<'a> {
    n_periods: usize,
    within: &'a [f64],
    between: Vec<f64>,
    ssb: f64,
    ssw: f64,
}

impl<'a> Geometry<'a> {
    fn new(summary: &'a CovariateSummary) -> Self {
        Self {
            n_periods: summary.n_periods,
            within: summary.within_deviations(),
            between: summary.between_deviations(),
            ssb: summary.ssb,
            ssw: summary.ssw,
        }
    }

    /// `(W, RSS)` and the unit means of `eps`, written to `eps_bar`.
    fn within(&self, eps: &[f64], eps_bar: &mut [f64]) -> (f64, f64) {
        let t = self.n_periods;
        let mut w = 0.0;
        for (i, bar) in eps_bar.iter_mut().enumerate() {
            let row = &eps[i * t..(i + 1) * t];
            *bar = row.iter().sum::<f64>() / t as f64;
            w += row
                .iter()
                .zip(&self.within[i * t..(i + 1) * t])
                .map(|(e, d)| e * d)
                .sum::<f64>();
        }
        let slope = w / self.ssw;
        let mut rss = 0.0;
        for (i, bar) in eps_bar.iter().enumerate() {
            for (e, d) in eps[i * t..(i + 1) * t].iter().zip(&self.within[i * t..(i + 1) * t]) {
                let r = (e - bar) - slope * d;
                rss += r * r;
            }
        }
        (w, rss)
    }

    /// `B_v` and the projected residual of `v` at unit `i`.
    fn between_coef(&self, v: &[f64]) -> (f64, f64) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let b = self.between.iter().zip(v).map(|(d, x)| d * (x - mean)).sum::<f64>();
        (b, mean)
    }

    fn stats(&self, eps: &[f64], eta: &[f64], eps_bar: &mut [f64]) -> RunStats {
        let (w, rss) = self.within(eps, eps_bar);
        let (b_eps, mean_e) = self.between_coef(eps_bar);
        let (b_eta, mean_f) = self.between_coef(eta);
        let (se, sf) = (b_eps / self.ssb, b_eta / self.ssb);
        let (mut s_ee, mut s_ef, mut s_ff) = (0.0, 0.0, 0.0);
        for ((d, e), f) in self.between.iter().zip(eps_bar.iter()).zip(eta) {
            let re = (e - mean_e) - se * d;
            let rf = (f - mean_f) - sf * d;
            s_ee += re * re;
            s_ef += re * rf;
            s_ff += rf * rf;
        }
        RunStats {
            w,
            rss,
            b_eps,
            b_eta,
            s_ee,
            s_ef,
            s_ff,
        }
    }
}

impl RunStats {
    /// Reduce one run's draws. Intended for checks against data-level fits.
    pub fn from_draw(summary: &CovariateSummary, draw: &RunDraw) -> Result<Self> {
        let (n, t) = (summary.n_units, summary.n_periods);
        if draw.eps.len() != n * t || draw.eta.len() != n {
            return Err(Error::InvalidArgument("draw does not match the covariate dimensions".into()));
        }
        let geom = Geometry::new(summary);
        let mut eps_bar = vec![0.0; n];
        Ok(geom.stats(&draw.eps, &draw.eta, &mut eps_bar))
    }
}

/// Stored sufficient statistics of `M` runs from one seed and purpose.
#[derive(Debug, Clone)]
pub struct DrawSet {
    runs: Vec<RunStats>,
    seed: u64,
    purpose: Purpose,
}

impl DrawSet {
    /// Generate runs `0..m`. Each run uses its own stream, so the result does
    /// not depend on how chunks are scheduled.
    pub fn generate(summary: &CovariateSummary, m: usize, seed: u64, purpose: Purpose) -> Self {
        let geom = Geometry::new(summary);
        let (n, t) = (summary.n_units, summary.n_periods);
        let chunks: Vec<Vec<RunStats>> = (0..m.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut eps = vec![0.0; n * t];
                let mut eta = vec![0.0; n];
                let mut eps_bar = vec![0.0; n];
                (c * CHUNK..((c + 1) * CHUNK).min(m))
                    .map(|k| {
                        let mut rng = run_rng(seed, purpose, k as u64);
                        fill_normals(&mut rng, &mut eps);
                        fill_normals(&mut rng, &mut eta);
                        geom.stats(&eps, &eta, &mut eps_bar)
                    })
                    .collect()
            })
            .collect();
        Self {
            runs: chunks.concat(),
            seed,
            purpose,
        }
    }

    pub fn runs(&self) -> &[RunStats] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn purpose(&self) -> Purpose {
        self.purpose
    }
}

/// Evaluates [`RunStats`] at a fixed `(γ, ν)`.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator {
    n: f64,
    inv_t: f64,
    dof: f64,
    ssb: f64,
    ssw: f64,
    r: f64,
    nu: f64,
    sqrt_nu: f64,
    xi: f64,
    q: f64,
    w: f64,
}

impl Evaluator {
    pub fn new(summary: &CovariateSummary, gamma: f64, nu: f64) -> Result<Self> {
        check_positive("nu", nu)?;
        if !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be finite, got {gamma}")));
        }
        let n = summary.n_units as f64;
        let q = summary.q(nu);
        Ok(Self {
            n,
            inv_t: 1.0 / summary.n_periods as f64,
            dof: n * (summary.n_periods - 1) as f64,
            ssb: summary.ssb,
            ssw: summary.ssw,
            r: summary.ratio_r,
            nu,
            sqrt_nu: nu.sqrt(),
            xi: gamma / n.sqrt(),
            q,
            w: q / (q + summary.ratio_r),
        })
    }

    /// `w = q / (q + r)` at the true `ν`.
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn evaluate(&self, s: &RunStats) -> KernelRun {
        let s2 = s.rss / self.dof;
        let err_w = s.w / self.ssw;
        let err_b = (s.b_eps + self.sqrt_nu * s.b_eta) / self.ssb + self.xi;
        let mean_r2 = (s.s_ee + 2.0 * self.sqrt_nu * s.s_ef + self.nu * s.s_ff) / self.n;
        let q_hat = mean_r2 / s2;
        let valid = s2 > 0.0 && q_hat > 0.0 && q_hat.is_finite();
        let w_hat = q_hat / (q_hat + self.r);
        let var_w_hat = s2 / self.ssw;
        let g_hat_i = (w_hat * err_w + (1.0 - w_hat) * err_b) / (var_w_hat * w_hat).sqrt();
        let g_hat_j = err_w / var_w_hat.sqrt();
        let h_hat = (err_w - err_b) / (var_w_hat + s2 * q_hat / self.ssb).sqrt();
        let var_w = 1.0 / self.ssw;
        let g_i = (self.w * err_w + (1.0 - self.w) * err_b) / (var_w * self.w).sqrt();
        let g_j = err_w / var_w.sqrt();
        let h = (err_w - err_b) / (var_w + self.q / self.ssb).sqrt();
        let sigma_ratio = s2.sqrt();
        KernelRun {
            g_hat_i,
            g_hat_j,
            h_hat,
            g_i,
            g_j,
            h,
            sigma_ratio,
            nu_hat: q_hat - self.inv_t,
            w_hat,
            pivot: q_hat / self.q,
            gamma_hat: (err_b - err_w) * self.n.sqrt() / sigma_ratio,
            valid,
        }
    }
}

/// Kernel outputs of runs `0..cfg.m_runs` at `(γ, ν)`.
pub fn simulate_kernel(summary: &CovariateSummary, gamma: f64, nu: f64, cfg: &SimConfig) -> Result<Vec<KernelRun>> {
    cfg.validate()?;
    let eval = Evaluator::new(summary, gamma, nu)?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    Ok(draws.runs().iter().map(|s| eval.evaluate(s)).collect())
}

/// `σ̂_ε / σ_ε` on `m` runs of the independent denominator family. These runs
/// draw only the errors `ε†`.
pub fn denominator_sample(summary: &CovariateSummary, m: usize, seed: u64) -> Vec<f64> {
    let geom = Geometry::new(summary);
    let (n, t) = (summary.n_units, summary.n_periods);
    let dof = (n * (t - 1)) as f64;
    let chunks: Vec<Vec<f64>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut eps = vec![0.0; n * t];
            let mut eps_bar = vec![0.0; n];
            (c * CHUNK..((c + 1) * CHUNK).min(m))
                .map(|k| {
                    let mut rng = run_rng(seed, Purpose::Denominator, k as u64);
                    fill_normals(&mut rng, &mut eps);
                    let (_, rss) = geom.within(&eps, &mut eps_bar);
                    (rss / dof).sqrt()
                })
                .collect()
        })
        .collect();
    chunks.concat()
}
