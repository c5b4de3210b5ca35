//! Confidence intervals I, J, J_c for the slope, the Hausman statistic and the
//! two-stage interval K.

use serde::Serialize;

use crate::error::{check_open_unit, Error, Result};
use crate::estimators::{BetweenFit, FitBundle, GlsFit, WithinFit};
use crate::numeric::{norm_quantile, two_sided_critical};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    /// Symmetric interval `center ± half_width`.
    pub fn centered(center: f64, half_width: f64) -> Self {
        Self {
            lower: center - half_width,
            upper: center + half_width,
        }
    }

    /// Interval spanning two points in whichever order they are given.
    pub fn ordered(a: f64, b: f64) -> Self {
        Self {
            lower: a.min(b),
            upper: a.max(b),
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntervalKind {
    /// Centered on the GLS slope, valid under exogeneity.
    I,
    /// Centered on the within slope at the nominal level.
    J,
    /// Within-slope interval with coverage parameter `c ∈ [1/2, 1)`.
    Jc,
}

impl IntervalKind {
    pub fn label(self) -> &'static str {
        match self {
            IntervalKind::I => "I",
            IntervalKind::J => "J",
            IntervalKind::Jc => "Jc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoStageResult {
    pub hausman_stat: f64,
    pub accepted_null: bool,
    pub interval_used: IntervalKind,
    pub interval: Interval,
}

/// `H = (b̃_W − b̃_B)² / (Var(b̃_W|x) + Var(b̃_B|x))` with estimated variances.
pub fn hausman_statistic(gls: &GlsFit, within: &WithinFit, between: &BetweenFit) -> Result<f64> {
    let var_sum = gls.var_bw_given_x + gls.var_bb_given_x;
    if !(var_sum > 0.0) || !var_sum.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Hausman variance sum must be positive, got {var_sum}"
        )));
    }
    let diff = within.b_within - between.b_between;
    Ok(diff * diff / var_sum)
}

/// Build I or J at level `level_or_c ∈ (0, 1)`, or `J_c` with `c = level_or_c ∈ [1/2, 1)`.
pub fn build_interval(kind: IntervalKind, fits: &FitBundle, level_or_c: f64) -> Result<Interval> {
    let quantile = match kind {
        IntervalKind::I | IntervalKind::J => {
            check_open_unit("confidence level", level_or_c)?;
            two_sided_critical(1.0 - level_or_c)
        }
        IntervalKind::Jc => {
            if !(0.5..1.0).contains(&level_or_c) {
                return Err(Error::InvalidArgument(format!(
                    "c must lie in [1/2, 1), got {level_or_c}"
                )));
            }
            norm_quantile(0.5 * (level_or_c + 1.0))
        }
    };
    let (center, variance) = match kind {
        IntervalKind::I => (fits.gls.b_hat, fits.gls.var_bhat_given_x),
        IntervalKind::J | IntervalKind::Jc => (fits.within.b_within, fits.gls.var_bw_given_x),
    };
    Ok(Interval::centered(center, quantile * variance.sqrt()))
}

/// Pretest with the Hausman statistic, then report I on acceptance and J on
/// rejection, both at level `1 − alpha`. Ties resolve to acceptance.
pub fn two_stage(fits: &FitBundle, alpha: f64, alpha_h: f64) -> Result<TwoStageResult> {
    check_open_unit("alpha", alpha)?;
    check_open_unit("alpha_h", alpha_h)?;
    let hausman_stat = hausman_statistic(&fits.gls, &fits.within, &fits.between)?;
    let threshold = two_sided_critical(alpha_h).powi(2);
    let accepted_null = hausman_stat <= threshold;
    let interval_used = if accepted_null {
        IntervalKind::I
    } else {
        IntervalKind::J
    };
    let interval = build_interval(interval_used, fits, 1.0 - alpha)?;
    Ok(TwoStageResult {
        hausman_stat,
        accepted_null,
        interval_used,
        interval,
    })
}
