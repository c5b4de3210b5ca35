//! Closed-form within, between and GLS estimation for the correlated random
//! effects model, plus the variance-component estimators.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::csum;
use crate::panel::{CovariateSummary, PanelData};

/// OLS fit of the demeaned ("fixed effects") model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WithinFit {
    pub b_within: f64,
    /// Residuals `r_it`, row-major N×T.
    pub residuals: Vec<f64>,
    /// `Σ r_it² / (N(T−1))`.
    pub sigma_eps2_hat: f64,
}

/// OLS fit of unit means on `(1, x̄_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetweenFit {
    pub a_between: f64,
    pub b_between: f64,
    /// Residuals `r̃_i`, one per unit.
    pub residuals: Vec<f64>,
}

/// Variance components. `sigma_eta2` is left untruncated and may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceComponents {
    pub sigma_eps2: f64,
    pub sigma_eta2: f64,
    pub nu_hat: f64,
}

impl VarianceComponents {
    /// `max(nu_hat, 0)`, for display only.
    pub fn nu_hat_reported(&self) -> f64 {
        self.nu_hat.max(0.0)
    }
}

/// The GLS slope through the Maddala combination, with its plug-in weights
/// and the conditional variances of the three slope estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlsFit {
    pub b_hat: f64,
    pub w_hat: f64,
    pub q_hat: f64,
    pub gamma_hat: f64,
    pub var_bw_given_x: f64,
    pub var_bb_given_x: f64,
    pub var_bhat_given_x: f64,
}

/// Everything estimated from one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitBundle {
    pub within: WithinFit,
    pub between: BetweenFit,
    pub components: VarianceComponents,
    pub gls: GlsFit,
}

fn response(data: &PanelData) -> Result<&[f64]> {
    data.y().ok_or(Error::MissingResponse)
}

fn check_shape(data: &PanelData, summary: &CovariateSummary) -> Result<()> {
    if data.n_units() != summary.n_units || data.n_periods() != summary.n_periods {
        return Err(Error::InvalidArgument("covariate summary does not belong to this panel".into()));
    }
    Ok(())
}

fn unit_mean(row: &[f64]) -> f64 {
    csum(row.iter().copied()) / row.len() as f64
}

pub fn fit_within(data: &PanelData, summary: &CovariateSummary) -> Result<WithinFit> {
    response(data)?;
    let (n, t) = (data.n_units(), data.n_periods());
    check_shape(data, summary)?;
    let mut dev_x = Vec::with_capacity(n * t);
    let mut dev_y = Vec::with_capacity(n * t);
    for i in 0..n {
        let row = data.x_row(i);
        let mean = unit_mean(row);
        dev_x.extend(row.iter().map(|v| v - mean));
        let row = data.y_row(i).ok_or(Error::MissingResponse)?;
        let mean = unit_mean(row);
        dev_y.extend(row.iter().map(|v| v - mean));
    }
    let b_within = csum(dev_x.iter().zip(&dev_y).map(|(dx, dy)| dx * dy)) / summary.ssw;
    let residuals: Vec<f64> = dev_y
        .iter()
        .zip(&dev_x)
        .map(|(dy, dx)| dy - b_within * dx)
        .collect();
    let sigma_eps2_hat = csum(residuals.iter().map(|r| r * r)) / (n * (t - 1)) as f64;
    Ok(WithinFit {
        b_within,
        residuals,
        sigma_eps2_hat,
    })
}

pub fn fit_between(data: &PanelData, summary: &CovariateSummary) -> Result<BetweenFit> {
    response(data)?;
    check_shape(data, summary)?;
    let n = data.n_units();
    let y_means: Vec<f64> = (0..n)
        .map(|i| data.y_row(i).map(unit_mean).ok_or(Error::MissingResponse))
        .collect::<Result<_>>()?;
    let y_grand = csum(y_means.iter().copied()) / n as f64;
    let x_means: Vec<f64> = (0..n).map(|i| unit_mean(data.x_row(i))).collect();
    let x_grand = csum(x_means.iter().copied()) / n as f64;
    let b_between = csum(
        x_means
            .iter()
            .zip(&y_means)
            .map(|(x, y)| (x - x_grand) * (y - y_grand)),
    ) / summary.ssb;
    let a_between = y_grand - b_between * x_grand;
    let residuals = y_means
        .iter()
        .zip(&x_means)
        .map(|(y, x)| y - a_between - b_between * x)
        .collect();
    Ok(BetweenFit {
        a_between,
        b_between,
        residuals,
    })
}

pub fn estimate_variance_components(
    within: &WithinFit,
    between: &BetweenFit,
    n_periods: usize,
) -> Result<VarianceComponents> {
    let sigma_eps2 = within.sigma_eps2_hat;
    if !(sigma_eps2 > 0.0) {
        return Err(Error::UndefinedNuHat);
    }
    let n = between.residuals.len() as f64;
    let sigma_eta2 = csum(between.residuals.iter().map(|r| r * r)) / n - sigma_eps2 / n_periods as f64;
    Ok(VarianceComponents {
        sigma_eps2,
        sigma_eta2,
        nu_hat: sigma_eta2 / sigma_eps2,
    })
}

pub fn combine_gls(
    within: &WithinFit,
    between: &BetweenFit,
    components: &VarianceComponents,
    summary: &CovariateSummary,
) -> Result<GlsFit> {
    let q_hat = summary.q(components.nu_hat);
    if !(q_hat > 0.0) {
        return Err(Error::NegativeVariance {
            nu_hat: components.nu_hat,
            q: q_hat,
        });
    }
    let w_hat = q_hat / (q_hat + summary.ratio_r);
    let b_hat = w_hat * within.b_within + (1.0 - w_hat) * between.b_between;
    let var_bw_given_x = components.sigma_eps2 / summary.ssw;
    let gamma_hat = (between.b_between - within.b_within) * (summary.n_units as f64).sqrt()
        / components.sigma_eps2.sqrt();
    Ok(GlsFit {
        b_hat,
        w_hat,
        q_hat,
        gamma_hat,
        var_bw_given_x,
        var_bb_given_x: components.sigma_eps2 * q_hat / summary.ssb,
        var_bhat_given_x: var_bw_given_x * w_hat,
    })
}

/// Run every estimator on a dataset with a response.
pub fn fit(data: &PanelData, summary: &CovariateSummary) -> Result<FitBundle> {
    let within = fit_within(data, summary)?;
    let between = fit_between(data, summary)?;
    let components = estimate_variance_components(&within, &between, data.n_periods())?;
    let gls = combine_gls(&within, &between, &components, summary)?;
    Ok(FitBundle {
        within,
        between,
        components,
        gls,
    })
}
