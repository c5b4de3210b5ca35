//! Grid sweeps and headline summaries: `min_g CP(g, ν)`, the confidence
//! coefficient, and the intervals for `min_g CP(g, ν)` and `min_g SEL(g, ν)`
//! implied by the interval for `ν`.
//!
//! Every function draws one set of main runs and evaluates all grid points
//! from it, so curves are smooth in the parameters. Headline minima search
//! the default `γ` grid and then refine locally around its argmin.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::FitBundle;
use crate::inference::Interval;
use crate::mc::coverage::CoverageSample;
use crate::mc::density::{GAMMA_GRID_MAX_MEAN_H, GAMMA_GRID_POINTS};
use crate::mc::estimate::{cp_from_draws, estimate_denominator, num_from_draws, sel_from_parts};
use crate::mc::{nu_confidence_interval, pivot_quantiles, DrawSet, MCEstimate, Method, Purpose, SimConfig};
use crate::panel::CovariateSummary;

pub use crate::theory::gamma_grid;

pub const DEFAULT_NU_FLOOR: f64 = 1e-4;

/// The default grid: 81 values of `γ ≥ 0` with `|E(h|x)|` spanning `[0, 10]`.
pub fn default_gamma_grid(summary: &CovariateSummary, nu: f64) -> Vec<f64> {
    gamma_grid(summary, nu, GAMMA_GRID_POINTS, GAMMA_GRID_MAX_MEAN_H)
}

/// `10, 10^{1/2}, 1, …` down to `floor`, always including `10·floor` and `floor`.
pub fn nu_sequence(top: f64, floor: f64) -> Vec<f64> {
    let mut seq = Vec::new();
    let mut k = 0;
    loop {
        let v = top * 10f64.powf(-0.5 * k as f64);
        if v <= floor * (1.0 + 1e-9) {
            break;
        }
        seq.push(v);
        k += 1;
    }
    for extra in [10.0 * floor, floor] {
        if extra <= top && !seq.iter().any(|v| (v / extra - 1.0).abs() < 1e-9) {
            seq.push(extra);
        }
    }
    seq.sort_by(|a, b| b.total_cmp(a));
    seq
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMin {
    pub nu: f64,
    pub estimate: MCEstimate,
    pub argmin_gamma: f64,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("gamma grid is empty".into()));
    }
    if grid.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument("gamma grid must hold finite values >= 0".into()));
    }
    Ok(())
}

/// First minimum wins ties.
fn argmin(nu: f64, grid: &[f64], values: Vec<MCEstimate>) -> GridMin {
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if v.value < values[best].value {
            best = j;
        }
    }
    GridMin {
        nu,
        estimate: values[best],
        argmin_gamma: grid[best],
    }
}

/// Points in each local refinement of the coarse minimum.
pub const REFINE_POINTS: usize = 41;

/// Grid search, then a second search on [`REFINE_POINTS`] equally spaced
/// points between the neighbours of the coarse argmin. The refined set
/// contains the coarse argmin, so refinement never raises the minimum.
fn refined_search<F>(nu: f64, grid: &[f64], eval: F) -> Result<GridMin>
where
    F: Fn(f64) -> Result<MCEstimate> + Sync,
{
    let values = grid.par_iter().map(|&g| eval(g)).collect::<Result<Vec<_>>>()?;
    let coarse = argmin(nu, grid, values);
    let j = grid.iter().position(|&g| g == coarse.argmin_gamma).unwrap_or(0);
    let lo = grid[j.saturating_sub(1)];
    let hi = grid[(j + 1).min(grid.len() - 1)];
    if !(hi > lo) {
        return Ok(coarse);
    }
    let local: Vec<f64> = (0..REFINE_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (REFINE_POINTS - 1) as f64)
        .collect();
    let values = local.par_iter().map(|&g| eval(g)).collect::<Result<Vec<_>>>()?;
    let fine = argmin(nu, &local, values);
    Ok(if fine.estimate.value < coarse.estimate.value { fine } else { coarse })
}

/// Smallest CV estimate of `CP(g, ν)` over `grid` from stored runs.
pub fn min_cp_from_draws(draws: &DrawSet, summary: &CovariateSummary, nu: f64, cfg: &SimConfig, grid: &[f64]) -> Result<GridMin> {
    check_grid(grid)?;
    let values = grid
        .par_iter()
        .map(|&g| Ok(cp_from_draws(draws, summary, g, nu, cfg)?.control_variate))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmin(nu, grid, values))
}

/// `min_g CP(g, ν)` over a grid of `g ≥ 0`; CP is even in `g`.
pub fn min_cp_over_gamma(summary: &CovariateSummary, nu: f64, cfg: &SimConfig, grid: &[f64]) -> Result<GridMin> {
    cfg.validate()?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    min_cp_from_draws(&draws, summary, nu, cfg, grid)
}

/// Smallest estimate of `SEL(g, ν)` over `grid`, sharing one denominator.
pub fn min_sel_from_draws(
    draws: &DrawSet,
    denom: &MCEstimate,
    summary: &CovariateSummary,
    nu: f64,
    c_star: f64,
    cfg: &SimConfig,
    grid: &[f64],
) -> Result<GridMin> {
    check_grid(grid)?;
    let values = grid
        .par_iter()
        .map(|&g| {
            let num = num_from_draws(draws, summary, g, nu, cfg)?.control_variate;
            sel_from_parts(&num, denom, c_star, cfg.alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(argmin(nu, grid, values))
}

/// `min_g CP(g, ν)` over the default grid with local refinement.
pub fn min_cp_refined_from_draws(draws: &DrawSet, summary: &CovariateSummary, nu: f64, cfg: &SimConfig) -> Result<GridMin> {
    let grid = default_gamma_grid(summary, nu);
    refined_search(nu, &grid, |g| Ok(cp_from_draws(draws, summary, g, nu, cfg)?.control_variate))
}

/// `min_g SEL(g, ν)` over the default grid with local refinement.
pub fn min_sel_refined_from_draws(
    draws: &DrawSet,
    denom: &MCEstimate,
    summary: &CovariateSummary,
    nu: f64,
    c_star: f64,
    cfg: &SimConfig,
) -> Result<GridMin> {
    let grid = default_gamma_grid(summary, nu);
    refined_search(nu, &grid, |g| {
        let num = num_from_draws(draws, summary, g, nu, cfg)?.control_variate;
        sel_from_parts(&num, denom, c_star, cfg.alpha)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceCoefficient {
    pub value: MCEstimate,
    pub nu_at_min: f64,
    pub argmin_gamma: f64,
    /// The curve still fell between the last two `ν` values.
    pub still_decreasing_at_floor: bool,
    /// Values at `10·floor` and `floor` agree within 3 combined SE.
    pub limit_check_passed: bool,
    /// `min_g CP(g, ν)` along the decreasing `ν` sequence.
    pub path: Vec<GridMin>,
}

pub fn confidence_coefficient_from_draws(
    draws: &DrawSet,
    summary: &CovariateSummary,
    cfg: &SimConfig,
    nu_floor: f64,
) -> Result<ConfidenceCoefficient> {
    if !(nu_floor > 0.0 && nu_floor < 10.0) {
        return Err(Error::InvalidArgument(format!("nu_floor must lie in (0, 10), got {nu_floor}")));
    }
    let path = nu_sequence(10.0, nu_floor)
        .into_iter()
        .map(|nu| min_cp_refined_from_draws(draws, summary, nu, cfg))
        .collect::<Result<Vec<_>>>()?;
    let best = path
        .iter()
        .fold(&path[0], |b, p| if p.estimate.value < b.estimate.value { p } else { b });
    let n = path.len();
    let (prev, last) = (&path[n.saturating_sub(2)], &path[n - 1]);
    let se = (prev.estimate.std_error.powi(2) + last.estimate.std_error.powi(2)).sqrt();
    Ok(ConfidenceCoefficient {
        value: best.estimate,
        nu_at_min: best.nu,
        argmin_gamma: best.argmin_gamma,
        still_decreasing_at_floor: last.estimate.value < prev.estimate.value,
        limit_check_passed: (prev.estimate.value - last.estimate.value).abs() <= 3.0 * se,
        path,
    })
}

/// Infimum of `min_g CP(g, n)` over `n`, approximated on a half-decade
/// sequence from 10 down to `nu_floor`.
pub fn confidence_coefficient(summary: &CovariateSummary, cfg: &SimConfig, nu_floor: f64) -> Result<ConfidenceCoefficient> {
    cfg.validate()?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    confidence_coefficient_from_draws(&draws, summary, cfg, nu_floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuInterval {
    pub nu_hat: f64,
    /// Pivot quantiles at `ᾱ/2` and `1 − ᾱ/2`.
    pub pivot_lo: f64,
    pub pivot_hi: f64,
    pub interval: Interval,
    /// Endpoints at which simulations are run; nonpositive endpoints are
    /// raised to [`DEFAULT_NU_FLOOR`].
    pub eval_lower: f64,
    pub eval_upper: f64,
}

/// The `1 − ᾱ` equi-tailed interval for `ν` from `ν̂` and pivot quantiles.
pub fn nu_interval(summary: &CovariateSummary, nu_hat: f64, cfg: &SimConfig) -> Result<NuInterval> {
    let half = 0.5 * cfg.alpha_bar;
    let q = pivot_quantiles(summary, cfg, &[half, 1.0 - half])?;
    let interval = nu_confidence_interval(nu_hat, summary.n_periods, (q[0], q[1]), cfg.alpha_bar)?;
    Ok(NuInterval {
        nu_hat,
        pivot_lo: q[0],
        pivot_hi: q[1],
        interval,
        eval_lower: interval.lower.max(DEFAULT_NU_FLOOR),
        eval_upper: interval.upper.max(DEFAULT_NU_FLOOR),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinCpInterval {
    pub nu_interval: NuInterval,
    pub interval: Interval,
    pub at_lower: GridMin,
    pub at_upper: GridMin,
    /// The `ν_ℓ` value exceeded the `ν_u` value before ordering.
    pub non_monotone: bool,
    /// Inner `ν` evaluations when a dense search was requested.
    pub inner: Vec<GridMin>,
}

fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|j| (a + (b - a) * j as f64 / (points - 1) as f64).exp())
        .collect()
}

fn min_cp_interval_from_draws(
    draws: &DrawSet,
    summary: &CovariateSummary,
    nu_int: NuInterval,
    cfg: &SimConfig,
    dense: Option<usize>,
) -> Result<MinCpInterval> {
    let at = |nu: f64| min_cp_refined_from_draws(draws, summary, nu, cfg);
    let at_lower = at(nu_int.eval_lower)?;
    let at_upper = at(nu_int.eval_upper)?;
    let non_monotone = at_lower.estimate.value > at_upper.estimate.value;
    let mut interval = Interval::ordered(at_lower.estimate.value, at_upper.estimate.value);
    let mut inner = Vec::new();
    if let Some(points) = dense {
        inner = log_spaced(nu_int.eval_lower, nu_int.eval_upper, points.max(2))
            .into_iter()
            .map(at)
            .collect::<Result<Vec<_>>>()?;
        for p in &inner {
            interval.lower = interval.lower.min(p.estimate.value);
            interval.upper = interval.upper.max(p.estimate.value);
        }
    }
    Ok(MinCpInterval {
        nu_interval: nu_int,
        interval,
        at_lower,
        at_upper,
        non_monotone,
        inner,
    })
}

/// Interval for `min_g CP(g, ν)`: evaluate at the endpoints of the `ν`
/// interval, or on `dense` log-spaced inner points as well.
pub fn ci_for_min_cp(summary: &CovariateSummary, fits: &FitBundle, cfg: &SimConfig, dense: Option<usize>) -> Result<MinCpInterval> {
    ci_for_min_cp_at(summary, fits.components.nu_hat, cfg, dense)
}

/// [`ci_for_min_cp`] from `ν̂` alone.
pub fn ci_for_min_cp_at(summary: &CovariateSummary, nu_hat: f64, cfg: &SimConfig, dense: Option<usize>) -> Result<MinCpInterval> {
    cfg.validate()?;
    let nu_int = nu_interval(summary, nu_hat, cfg)?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    min_cp_interval_from_draws(&draws, summary, nu_int, cfg, dense)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinSelInterval {
    pub cp: MinCpInterval,
    /// `min` of `min_g CP(g, n)` over the `ν` interval.
    pub target_coverage: f64,
    pub c_star: f64,
    pub denominator: MCEstimate,
    pub interval: Interval,
    pub at_lower: GridMin,
    pub at_upper: GridMin,
}

/// Interval for `min_g SEL(g, ν)` with `c*` matched to the smallest
/// `min_g CP` over the `ν` interval.
pub fn ci_for_min_sel(summary: &CovariateSummary, fits: &FitBundle, cfg: &SimConfig) -> Result<MinSelInterval> {
    ci_for_min_sel_at(summary, fits.components.nu_hat, cfg)
}

/// [`ci_for_min_sel`] from `ν̂` alone.
pub fn ci_for_min_sel_at(summary: &CovariateSummary, nu_hat: f64, cfg: &SimConfig) -> Result<MinSelInterval> {
    cfg.validate()?;
    let nu_int = nu_interval(summary, nu_hat, cfg)?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    let cp = min_cp_interval_from_draws(&draws, summary, nu_int, cfg, None)?;
    let target_coverage = cp.interval.lower;
    let c_star = CoverageSample::from_draws(summary, &draws)?.solve(target_coverage)?;
    let denominator = estimate_denominator(summary, cfg)?;
    let at = |nu: f64| min_sel_refined_from_draws(&draws, &denominator, summary, nu, c_star, cfg);
    let at_lower = at(nu_int.eval_lower)?;
    let at_upper = at(nu_int.eval_upper)?;
    Ok(MinSelInterval {
        interval: Interval::ordered(at_lower.estimate.value, at_upper.estimate.value),
        cp,
        target_coverage,
        c_star,
        denominator,
        at_lower,
        at_upper,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfMinSel {
    pub value: MCEstimate,
    pub nu_at_inf: f64,
    pub argmin_gamma: f64,
    pub confidence_coefficient: f64,
    pub c_min: f64,
    pub path: Vec<GridMin>,
}

/// `inf_n min_g SEL(g, n)` under the usual definition, where `c_min` matches
/// the confidence coefficient. `n` runs over half-decades from 1000 down to
/// `nu_floor`.
pub fn inf_min_sel_usual(summary: &CovariateSummary, cfg: &SimConfig, nu_floor: f64) -> Result<InfMinSel> {
    cfg.validate()?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    let cc = confidence_coefficient_from_draws(&draws, summary, cfg, nu_floor)?;
    let c_min = CoverageSample::from_draws(summary, &draws)?.solve(cc.value.value)?;
    let denominator = estimate_denominator(summary, cfg)?;
    let path = nu_sequence(1000.0, nu_floor)
        .into_iter()
        .map(|nu| min_sel_refined_from_draws(&draws, &denominator, summary, nu, c_min, cfg))
        .collect::<Result<Vec<_>>>()?;
    let best = path
        .iter()
        .fold(&path[0], |b, p| if p.estimate.value < b.estimate.value { p } else { b });
    Ok(InfMinSel {
        value: best.estimate,
        nu_at_inf: best.nu,
        argmin_gamma: best.argmin_gamma,
        confidence_coefficient: cc.value.value,
        c_min,
        path: path.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub nu: f64,
    pub min_cp: MCEstimate,
    pub argmin_gamma: f64,
    pub min_sel: Option<MCEstimate>,
}

/// One row per `ν` of `min_g CP(g, ν)` and, given `c*`, of `min_g SEL(g, ν)`.
pub fn sweep_curve(summary: &CovariateSummary, cfg: &SimConfig, nu_grid: &[f64], c_star: Option<f64>) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if nu_grid.is_empty() || nu_grid.windows(2).any(|w| !(w[0] < w[1])) || !(nu_grid[0] > 0.0) {
        return Err(Error::InvalidArgument("nu grid must be positive and strictly ascending".into()));
    }
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    let denominator = match c_star {
        Some(_) => Some(estimate_denominator(summary, cfg)?),
        None => None,
    };
    nu_grid
        .iter()
        .map(|&nu| {
            let cp = min_cp_refined_from_draws(&draws, summary, nu, cfg)?;
            let min_sel = match (c_star, &denominator) {
                (Some(c), Some(d)) => Some(min_sel_refined_from_draws(&draws, d, summary, nu, c, cfg)?.estimate),
                _ => None,
            };
            Ok(SweepRow {
                nu,
                min_cp: cp.estimate,
                argmin_gamma: cp.argmin_gamma,
                min_sel,
            })
        })
        .collect()
}

/// CV estimates of `CP(g, ν)` on `grid`, all from one run set.
pub fn cp_over_gamma(summary: &CovariateSummary, nu: f64, cfg: &SimConfig, grid: &[f64], method: Method) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    grid.par_iter()
        .map(|&g| Ok(cp_from_draws(&draws, summary, g, nu, cfg)?.get(method)))
        .collect()
}

/// Estimates of `SEL(g, ν)` on `grid`, all from one run set and one denominator.
pub fn sel_over_gamma(
    summary: &CovariateSummary,
    nu: f64,
    c_star: f64,
    cfg: &SimConfig,
    grid: &[f64],
    method: Method,
) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    let denominator = estimate_denominator(summary, cfg)?;
    grid.par_iter()
        .map(|&g| {
            let num = num_from_draws(&draws, summary, g, nu, cfg)?.get(method);
            sel_from_parts(&num, &denominator, c_star, cfg.alpha)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary() -> CovariateSummary {
        CovariateSummary::from_moments(20, 4, 8.0, 30.0).unwrap()
    }

    fn cfg() -> SimConfig {
        SimConfig {
            m_runs: 4000,
            seed: 5,
            m_pivot: 999,
            alpha_bar: 0.1,
            ..Default::default()
        }
    }

    #[test]
    fn nu_sequence_shape() {
        let s = nu_sequence(10.0, 1e-4);
        assert_eq!(s.len(), 11);
        assert!((s[0] - 10.0).abs() < 1e-12 && (s[10] - 1e-4).abs() < 1e-16);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        let s = nu_sequence(10.0, 2e-4);
        assert!(s.iter().any(|v| (v - 2e-3).abs() < 1e-15));
        assert_eq!(*s.last().unwrap(), 2e-4);
    }

    #[test]
    fn argmin_tie_rule_picks_first() {
        let e = MCEstimate {
            value: 0.9,
            std_error: 0.01,
            m_runs: 1,
            invalid_runs: 0,
            method: Method::ControlVariate,
            seed: 0,
        };
        let r = argmin(1.0, &[0.0, 1.0, 2.0], vec![e, e, e]);
        assert_eq!(r.argmin_gamma, 0.0);
    }

    #[test]
    fn grid_validation() {
        let s = summary();
        assert!(min_cp_over_gamma(&s, 1.0, &cfg(), &[], ).is_err());
        assert!(min_cp_over_gamma(&s, 1.0, &cfg(), &[-1.0]).is_err());
    }

    #[test]
    fn min_is_dominated_by_endpoints_and_refinement() {
        let s = summary();
        let c = cfg();
        let grid = default_gamma_grid(&s, 2.0);
        let m = min_cp_over_gamma(&s, 2.0, &c, &grid).unwrap();
        let ends = cp_over_gamma(&s, 2.0, &c, &[grid[0], grid[80]], Method::ControlVariate).unwrap();
        assert!(m.estimate.value <= ends[0].value && m.estimate.value <= ends[1].value);
        let coarse: Vec<f64> = grid.iter().step_by(4).copied().collect();
        let mc = min_cp_over_gamma(&s, 2.0, &c, &coarse).unwrap();
        assert!(m.estimate.value <= mc.estimate.value);
        let draws = DrawSet::generate(&s, c.m_runs, c.seed, Purpose::Main);
        let r = min_cp_refined_from_draws(&draws, &s, 2.0, &c).unwrap();
        assert!(r.estimate.value <= m.estimate.value);
    }

    #[test]
    fn sweep_rows_and_validation() {
        let s = summary();
        let rows = sweep_curve(&s, &cfg(), &[0.5], Some(0.9)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].min_cp.std_error > 0.0 && rows[0].min_sel.unwrap().std_error > 0.0);
        assert!(sweep_curve(&s, &cfg(), &[2.0, 1.0], None).is_err());
    }

    #[test]
    fn coefficient_is_below_path() {
        let s = summary();
        let cc = confidence_coefficient(&s, &cfg(), 1e-2).unwrap();
        assert!(cc.path.iter().all(|p| cc.value.value <= p.estimate.value));
        assert!((cc.path.last().unwrap().nu - 1e-2).abs() < 1e-15);
    }
}
