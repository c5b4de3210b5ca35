//! Order-statistic quantiles of the pivot `(ν̂ + 1/T)/(ν + 1/T)` and the
//! equi-tailed interval for `ν`.

use super::kernel::{DrawSet, Evaluator};
use super::rng::Purpose;
use super::SimConfig;
use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::inference::Interval;
use crate::panel::CovariateSummary;

/// The 1-based rank `r = p (M + 1)`; errors unless it is an integer in `1..=M`.
pub fn order_index(p: f64, m: usize) -> Result<usize> {
    check_open_unit("p", p)?;
    let index = p * (m as f64 + 1.0);
    let rounded = index.round();
    if (index - rounded).abs() > 1e-9 * index.max(1.0) || rounded < 1.0 || rounded > m as f64 {
        return Err(Error::NonIntegerOrder { p, m, index });
    }
    Ok(rounded as usize)
}

/// `m` pivot observations at `ν`. The pivot's law does not depend on `ν`.
pub fn pivot_sample(summary: &CovariateSummary, nu: f64, m: usize, seed: u64, purpose: Purpose) -> Result<Vec<f64>> {
    let eval = Evaluator::new(summary, 0.0, nu)?;
    let draws = DrawSet::generate(summary, m, seed, purpose);
    Ok(draws.runs().iter().map(|s| eval.evaluate(s).pivot).collect())
}

/// Estimate the pivot quantiles at `probs` from `cfg.m_pivot` runs at `ν = 1`,
/// each by the `p (M + 1)`-th order statistic.
pub fn pivot_quantiles(summary: &CovariateSummary, cfg: &SimConfig, probs: &[f64]) -> Result<Vec<f64>> {
    cfg.validate()?;
    let ranks = probs
        .iter()
        .map(|&p| order_index(p, cfg.m_pivot))
        .collect::<Result<Vec<_>>>()?;
    let mut sample = pivot_sample(summary, 1.0, cfg.m_pivot, cfg.seed, Purpose::Main)?;
    sample.sort_by(f64::total_cmp);
    Ok(ranks.into_iter().map(|r| sample[r - 1]).collect())
}

/// `[(ν̂ + 1/T)/F_hi − 1/T, (ν̂ + 1/T)/F_lo − 1/T]`.
pub fn nu_confidence_interval(nu_hat: f64, n_periods: usize, quantiles: (f64, f64), alpha_bar: f64) -> Result<Interval> {
    check_open_unit("alpha_bar", alpha_bar)?;
    let (f_lo, f_hi) = quantiles;
    check_positive("lower pivot quantile", f_lo)?;
    check_positive("upper pivot quantile", f_hi)?;
    if f_lo > f_hi {
        return Err(Error::InvalidArgument("pivot quantiles must be ordered".into()));
    }
    let inv_t = 1.0 / n_periods as f64;
    let shifted = nu_hat + inv_t;
    Ok(Interval {
        lower: shifted / f_hi - inv_t,
        upper: shifted / f_lo - inv_t,
    })
}
