//! Solve for the `c` at which `J_c(σ̂_ε)` attains a target coverage.

use super::kernel::{DrawSet, Evaluator};
use super::rng::Purpose;
use super::SimConfig;
use crate::error::{Error, Result};
use crate::numeric::norm_quantile;
use crate::panel::CovariateSummary;

/// Largest `c` tried by the solver.
const C_MAX: f64 = 1.0 - 1e-15;
const COVERAGE_TOL: f64 = 1e-6;

/// Sorted `|ĝ_J|` from a fixed set of runs. Coverage of `J_c` is the
/// empirical CDF of `|ĝ_J|` at `Φ^{-1}((c + 1)/2)`, linearly interpolated
/// between order statistics so that it is continuous and non-decreasing in `c`.
#[derive(Debug, Clone)]
pub struct CoverageSample {
    sorted: Vec<f64>,
}

impl CoverageSample {
    pub fn from_abs_values(mut values: Vec<f64>) -> Result<Self> {
        values.retain(|v| v.is_finite());
        if values.is_empty() {
            return Err(Error::InvalidArgument("coverage sample is empty".into()));
        }
        for v in values.iter_mut() {
            *v = v.abs();
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    /// `|ĝ_J|` over the valid runs of `draws`. `ĝ_J` involves neither `γ` nor `ν`.
    pub fn from_draws(summary: &CovariateSummary, draws: &DrawSet) -> Result<Self> {
        let eval = Evaluator::new(summary, 0.0, 1.0)?;
        let values = draws
            .runs()
            .iter()
            .map(|s| eval.evaluate(s))
            .filter(|r| r.sigma_ratio > 0.0)
            .map(|r| r.g_hat_j)
            .collect();
        Self::from_abs_values(values)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Interpolated fraction of the sample at or below `k`.
    pub fn fraction_below(&self, k: f64) -> f64 {
        let n = self.sorted.len();
        if k <= 0.0 {
            return 0.0;
        }
        let j = self.sorted.partition_point(|&v| v < k);
        if j == n {
            return 1.0;
        }
        let (x0, y0) = if j == 0 { (0.0, 0.0) } else { (self.sorted[j - 1], j as f64 / n as f64) };
        let (x1, y1) = (self.sorted[j], (j + 1) as f64 / n as f64);
        if x1 <= x0 {
            return y1;
        }
        y0 + (y1 - y0) * (k - x0) / (x1 - x0)
    }

    /// Coverage of `J_c` on this sample.
    pub fn coverage(&self, c: f64) -> f64 {
        self.fraction_below(norm_quantile(0.5 * (c + 1.0)))
    }

    /// The `c ∈ [0, 1)` whose coverage equals `target`, by bisection.
    /// A zero target gives the zero-width interval, `c = 0`. Values of `c`
    /// below `1/2` are needed when the target is a small confidence
    /// coefficient.
    pub fn solve(&self, target: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::InvalidArgument(format!("target coverage must lie in [0, 1], got {target}")));
        }
        if target <= 0.0 {
            return Ok(0.0);
        }
        let max = self.coverage(C_MAX);
        if max < target - COVERAGE_TOL {
            return Err(Error::UnreachableCoverage { target, max });
        }
        let (mut lo, mut hi) = (0.0, C_MAX);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let cov = self.coverage(mid);
            if (cov - target).abs() <= COVERAGE_TOL {
                break;
            }
            if cov < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

/// Solve for `c` on `cfg.m_runs` runs of the main family.
pub fn solve_coverage_quantile(summary: &CovariateSummary, target: f64, cfg: &SimConfig) -> Result<f64> {
    cfg.validate()?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    CoverageSample::from_draws(summary, &draws)?.solve(target)
}
