//! Monte Carlo estimation of conditional coverage and scaled expected length.
//!
//! Results are a deterministic function of the inputs, the seed and the run
//! count. Runs are grouped into fixed chunks of [`CHUNK`] and per-chunk partial
//! results are merged in chunk order, so the worker count never changes a bit
//! of the output.

pub mod coverage;
pub mod density;
pub mod estimate;
pub mod kernel;
pub mod pivot;
pub mod rng;
pub mod stats;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_open_unit, Error, Result};

pub use coverage::{solve_coverage_quantile, CoverageSample};
pub use density::{density_cp, kde, CpCurve, DensityEstimate, DensityResult, Plugin};
pub use estimate::{
    estimate_cp, estimate_cp_both, estimate_denominator, estimate_sel, CpEstimates, NumEstimates,
};
pub use kernel::{denominator_sample, simulate_kernel, DrawSet, Evaluator, KernelRun, RunStats};
pub use pivot::{nu_confidence_interval, order_index, pivot_quantiles, pivot_sample};
pub use rng::Purpose;
pub use stats::{ks_two_sample, KsResult, Moments};

/// Runs per scheduling chunk.
pub const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Runs per estimate (M).
    pub m_runs: usize,
    pub seed: u64,
    /// `1 − alpha` is the nominal coverage of I and J.
    pub alpha: f64,
    /// Nominal size of the Hausman pretest.
    pub alpha_h: f64,
    /// `1 − alpha_bar` is the coverage of the interval for `ν`.
    pub alpha_bar: f64,
    /// Runs for the pivot order statistics; `p (m_pivot + 1)` must be an
    /// integer for the requested tail probabilities.
    pub m_pivot: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            m_runs: 50_000,
            seed: 1,
            alpha: 0.05,
            alpha_h: 0.05,
            alpha_bar: 0.02,
            m_pivot: 9_999,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_runs == 0 || self.m_pivot == 0 {
            return Err(Error::InvalidArgument("run counts must be positive".into()));
        }
        check_open_unit("alpha", self.alpha)?;
        check_open_unit("alpha_h", self.alpha_h)?;
        check_open_unit("alpha_bar", self.alpha_bar)
    }

    pub fn with_runs(self, m_runs: usize) -> Self {
        Self { m_runs, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Brute,
    ControlVariate,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Brute => "brute",
            Method::ControlVariate => "cv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Runs requested.
    pub m_runs: usize,
    /// Runs excluded because the variance estimates were degenerate.
    pub invalid_runs: usize,
    pub method: Method,
    pub seed: u64,
}

impl MCEstimate {
    pub(crate) fn from_moments(m: &Moments, m_runs: usize, method: Method, seed: u64) -> Result<Self> {
        let valid = m.count() as usize;
        if valid == 0 {
            return Err(Error::NoValidRuns {
                invalid: m_runs,
                total: m_runs,
            });
        }
        Ok(Self {
            value: m.mean(),
            std_error: m.std_error(),
            m_runs,
            invalid_runs: m_runs - valid,
            method,
            seed,
        })
    }

    /// Fraction of runs flagged invalid.
    pub fn invalid_fraction(&self) -> f64 {
        self.invalid_runs as f64 / self.m_runs as f64
    }
}

/// Fold runs `0..m` chunk by chunk in parallel and merge in chunk order.
pub(crate) fn fold_runs<A, I, F, G>(m: usize, init: I, fold: F, merge: G) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize) + Sync,
    G: Fn(A, A) -> A,
{
    let parts: Vec<A> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for k in c * CHUNK..((c + 1) * CHUNK).min(m) {
                fold(&mut acc, k);
            }
            acc
        })
        .collect();
    parts.into_iter().fold(init(), merge)
}
