//! Densities of `CP(γ, ν̂)` and `CP(γ̂, ν)` via an interpolated CP curve and a
//! Gaussian kernel density estimate.

use rayon::prelude::*;
use serde::Serialize;

use super::estimate::cp_from_draws;
use super::kernel::{DrawSet, Evaluator};
use super::rng::Purpose;
use super::{Method, SimConfig};
use crate::error::{check_positive, Error, Result};
use crate::panel::CovariateSummary;
use crate::theory::gamma_grid;

pub const KDE_POINTS: usize = 512;
pub const NU_GRID_POINTS: usize = 41;
pub const GAMMA_GRID_POINTS: usize = 81;
/// Largest `|E(h|x)|` covered by the default `γ` grid.
pub const GAMMA_GRID_MAX_MEAN_H: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoidal integral of the density over its grid.
    pub fn mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb `0.9 min(sd, IQR/1.34) n^{-1/5}`, falling back
/// to the sd, then `|x_1|`, then 1 when the spread is zero.
pub fn bandwidth_nrd0(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = if sample.len() > 1 {
        (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if !(lo > 0.0) {
        lo = if sd > 0.0 {
            sd
        } else if sample[0] != 0.0 {
            sample[0].abs()
        } else {
            1.0
        };
    }
    0.9 * lo * n.powf(-0.2)
}

/// Gaussian KDE on 512 equally spaced points spanning the sample range ± 3
/// bandwidths.
pub fn kde(sample: &[f64]) -> Result<DensityEstimate> {
    if sample.is_empty() || sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("density needs a non-empty finite sample".into()));
    }
    let bw = bandwidth_nrd0(sample);
    let (min, max) = sample
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = (min - 3.0 * bw, max + 3.0 * bw);
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_POINTS).map(|j| lo + step * j as f64).collect();
    let norm = 1.0 / (sample.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .par_iter()
        .map(|&g| {
            sample
                .iter()
                .map(|&v| {
                    let u = (g - v) / bw;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok(DensityEstimate {
        grid,
        density,
        bandwidth: bw,
    })
}

/// CP estimates tabulated on an increasing abscissa (`ν` or `γ`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpCurve {
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
}

impl CpCurve {
    pub fn new(abscissa: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if abscissa.is_empty() || abscissa.len() != values.len() {
            return Err(Error::InvalidArgument("CP curve needs matching non-empty columns".into()));
        }
        if abscissa.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("CP curve abscissa must be strictly increasing".into()));
        }
        Ok(Self { abscissa, values })
    }

    /// Linear interpolation; points outside the grid are clamped to its ends
    /// and reported by the flag.
    pub fn interpolate(&self, x: f64) -> (f64, bool) {
        let a = &self.abscissa;
        let last = a.len() - 1;
        if x < a[0] {
            return (self.values[0], true);
        }
        if x > a[last] {
            return (self.values[last], true);
        }
        let j = a.partition_point(|&v| v <= x);
        if j > last {
            return (self.values[last], false);
        }
        let (x0, x1) = (a[j - 1], a[j]);
        let (y0, y1) = (self.values[j - 1], self.values[j]);
        (y0 + (y1 - y0) * (x - x0) / (x1 - x0), false)
    }
}

/// 41 log-spaced `ν` values on `[max(1e-3, ν/4), 4ν]`.
pub fn nu_grid(nu: f64) -> Vec<f64> {
    let lo = (nu / 4.0).max(1e-3).ln();
    let hi = (4.0 * nu).ln();
    (0..NU_GRID_POINTS)
        .map(|j| (lo + (hi - lo) * j as f64 / (NU_GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// CV estimates of `CP(γ, ·)` on [`nu_grid`], all from the same runs.
pub fn cp_curve_over_nu(summary: &CovariateSummary, gamma: f64, nu: f64, cfg: &SimConfig) -> Result<CpCurve> {
    check_positive("nu", nu)?;
    let grid = nu_grid(nu);
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    let values = grid
        .par_iter()
        .map(|&n| Ok(cp_from_draws(&draws, summary, gamma, n, cfg)?.get(Method::ControlVariate).value))
        .collect::<Result<Vec<_>>>()?;
    CpCurve::new(grid, values)
}

/// CV estimates of `CP(·, ν)` on the default nonnegative `γ` grid.
pub fn cp_curve_over_gamma(summary: &CovariateSummary, nu: f64, cfg: &SimConfig) -> Result<CpCurve> {
    check_positive("nu", nu)?;
    let grid = gamma_grid(summary, nu, GAMMA_GRID_POINTS, GAMMA_GRID_MAX_MEAN_H);
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Main);
    let values = grid
        .par_iter()
        .map(|&g| Ok(cp_from_draws(&draws, summary, g, nu, cfg)?.get(Method::ControlVariate).value))
        .collect::<Result<Vec<_>>>()?;
    CpCurve::new(grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Plugin {
    /// `CP(γ, ν̂)` over the sampling distribution of `ν̂`; the curve is over `ν`.
    NuHat,
    /// `CP(γ̂, ν)` over the sampling distribution of `γ̂`; the curve is over
    /// `γ ≥ 0` and is read at `|γ̂|` since CP is even in `γ`.
    GammaHat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityResult {
    pub density: DensityEstimate,
    /// Plug-in values clamped to the ends of the curve.
    pub clamped: usize,
    /// Plug-in values used.
    pub samples: usize,
}

/// Density of CP evaluated at a plug-in estimate, from `cfg.m_runs` runs of
/// the plug-in family.
pub fn density_cp(
    summary: &CovariateSummary,
    gamma: f64,
    nu: f64,
    which: Plugin,
    cfg: &SimConfig,
    curve: &CpCurve,
) -> Result<DensityResult> {
    cfg.validate()?;
    let eval = Evaluator::new(summary, gamma, nu)?;
    let draws = DrawSet::generate(summary, cfg.m_runs, cfg.seed, Purpose::Plugin);
    let mut clamped = 0usize;
    let mut values = Vec::with_capacity(draws.len());
    for s in draws.runs() {
        let run = eval.evaluate(s);
        if !run.valid {
            continue;
        }
        let x = match which {
            Plugin::NuHat => run.nu_hat,
            Plugin::GammaHat => run.gamma_hat.abs(),
        };
        let (v, was_clamped) = curve.interpolate(x);
        clamped += was_clamped as usize;
        values.push(v);
    }
    Ok(DensityResult {
        samples: values.len(),
        density: kde(&values)?,
        clamped,
    })
}
