//! Exact finite-sample theory for the procedure with known `σ_ε` and `ν`.
//!
//! Conditional on x, `(g_I, h)` and `(g_J, h)` are bivariate normal with unit
//! variances. Only the means and correlations depend on `(γ, ν)` and on x, and
//! x enters only through `SSB/N` and `r = SSB/SSW`.

use serde::Serialize;

use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::numeric::{integrate_with_breaks, norm_interval, norm_pdf, two_sided_critical};
use crate::panel::CovariateSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryMoments {
    #[serde(rename = "mean_gI")]
    pub mean_gi: f64,
    #[serde(rename = "mean_gJ")]
    pub mean_gj: f64,
    pub mean_h: f64,
    #[serde(rename = "corr_gJ_h")]
    pub corr_gj_h: f64,
    #[serde(rename = "corr_gI_h")]
    pub corr_gi_h: f64,
    pub w: f64,
    pub q: f64,
    pub ssb_over_n: f64,
}

/// Means and correlations of `(g_I, h)` and `(g_J, h)` given x.
pub fn theory_moments(summary: &CovariateSummary, gamma: f64, nu: f64) -> Result<TheoryMoments> {
    check_positive("nu", nu)?;
    if !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be finite, got {gamma}")));
    }
    let q = summary.q(nu);
    let r = summary.ratio_r;
    let ssb_over_n = summary.ssb / summary.n_units as f64;
    let scale = ssb_over_n.sqrt();
    Ok(TheoryMoments {
        mean_gi: gamma * scale * (r / (q * (q + r))).sqrt(),
        mean_gj: 0.0,
        mean_h: -gamma * scale / (r + q).sqrt(),
        corr_gj_h: (r / (r + q)).sqrt(),
        corr_gi_h: 0.0,
        w: q / (q + r),
        q,
        ssb_over_n,
    })
}

/// The `γ` at which `E(h|x) = mean_h`; inverse of the mean formula above.
pub fn gamma_for_mean_h(summary: &CovariateSummary, nu: f64, mean_h: f64) -> f64 {
    let ssb_over_n = summary.ssb / summary.n_units as f64;
    -mean_h * (summary.ratio_r + summary.q(nu)).sqrt() / ssb_over_n.sqrt()
}

/// `points` values of `γ ≥ 0`, equally spaced in `|E(h|x)|` from 0 to `max_mean_h`.
pub fn gamma_grid(summary: &CovariateSummary, nu: f64, points: usize, max_mean_h: f64) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..points)
            .map(|j| gamma_for_mean_h(summary, nu, -max_mean_h * j as f64 / (points - 1) as f64))
            .collect(),
    }
}

/// Closed rectangle `[a1, b1] × [a2, b2]`; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Rect {
    /// `[−s1, s1] × [−s2, s2]`.
    pub fn symmetric(s1: f64, s2: f64) -> Self {
        Self {
            a1: -s1,
            b1: s1,
            a2: -s2,
            b2: s2,
        }
    }
}

const TRUNCATION: f64 = 8.5;
const BVN_TOL: f64 = 1e-11;
const DEGENERATE_RHO: f64 = 1.0 - 1e-12;

/// `P(a1 ≤ X ≤ b1, a2 ≤ Y ≤ b2)` for unit-variance bivariate normal `(X, Y)`
/// with means `(mu1, mu2)` and correlation `rho`.
pub fn bvn_rect(mu1: f64, mu2: f64, rho: f64, rect: Rect) -> Result<f64> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    if !(rect.a1 <= rect.b1 && rect.a2 <= rect.b2) {
        return Err(Error::InvalidArgument("rectangle bounds must satisfy a <= b".into()));
    }
    if !(mu1.is_finite() && mu2.is_finite()) {
        return Err(Error::InvalidArgument("means must be finite".into()));
    }
    // Work with standardized X − mu1 and Y − mu2.
    let (a1, b1) = (rect.a1 - mu1, rect.b1 - mu1);
    let (a2, b2) = (rect.a2 - mu2, rect.b2 - mu2);

    if rho.abs() >= DEGENERATE_RHO {
        // Y − mu2 = ±(X − mu1)
        let (lo, hi) = if rho > 0.0 { (a2, b2) } else { (-b2, -a2) };
        return Ok(norm_interval(a1.max(lo), b1.min(hi)).clamp(0.0, 1.0));
    }

    let lo = a1.max(-TRUNCATION);
    let hi = b1.min(TRUNCATION);
    if lo >= hi {
        return Ok(0.0);
    }
    let s = (1.0 - rho * rho).sqrt();
    let integrand = |u: f64| norm_pdf(u) * norm_interval((a2 - rho * u) / s, (b2 - rho * u) / s);
    let mut breaks = vec![0.0];
    if rho != 0.0 {
        breaks.extend([a2 / rho, b2 / rho]);
    }
    let p = integrate_with_breaks(&integrand, lo, hi, &breaks, BVN_TOL);
    Ok(p.clamp(0.0, 1.0))
}

/// Exact conditional coverage of `K(σ_ε, ν)`:
/// `(1 − α) + P(|g_I| ≤ z, |h| ≤ z_H) − P(|g_J| ≤ z, |h| ≤ z_H)`.
pub fn cpk_exact(summary: &CovariateSummary, gamma: f64, nu: f64, alpha: f64, alpha_h: f64) -> Result<f64> {
    check_open_unit("alpha", alpha)?;
    check_open_unit("alpha_h", alpha_h)?;
    let m = theory_moments(summary, gamma, nu)?;
    Ok(cpk_from_moments(&m, alpha, alpha_h))
}

pub(crate) fn cpk_from_moments(m: &TheoryMoments, alpha: f64, alpha_h: f64) -> f64 {
    let z = two_sided_critical(alpha);
    let zh = two_sided_critical(alpha_h);
    let p_gi = norm_interval(-z - m.mean_gi, z - m.mean_gi);
    let p_b = norm_interval(-zh - m.mean_h, zh - m.mean_h);
    let p_gj = bvn_rect(m.mean_gj, m.mean_h, m.corr_gj_h, Rect::symmetric(z, zh))
        .expect("moments are valid by construction");
    ((1.0 - alpha) + p_gi * p_b - p_gj).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelKnownTerms {
    /// `P(|h| ≤ z_H | x)`.
    pub prob_b: f64,
    /// `1 + (w^{1/2} − 1) P(|h| ≤ z_H | x)`.
    pub numk: f64,
}

pub fn sel_known_terms(summary: &CovariateSummary, gamma: f64, nu: f64, alpha_h: f64) -> Result<SelKnownTerms> {
    check_open_unit("alpha_h", alpha_h)?;
    let m = theory_moments(summary, gamma, nu)?;
    Ok(sel_terms_from_moments(&m, alpha_h))
}

pub(crate) fn sel_terms_from_moments(m: &TheoryMoments, alpha_h: f64) -> SelKnownTerms {
    let zh = two_sided_critical(alpha_h);
    let prob_b = norm_interval(-zh - m.mean_h, zh - m.mean_h);
    SelKnownTerms {
        prob_b,
        numk: 1.0 + (m.w.sqrt() - 1.0) * prob_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{integrate, norm_cdf};
    use crate::panel::{summarize, PanelData};
    use proptest::prelude::*;

    const Z975: f64 = 1.959_963_984_540_054;

    fn tiny() -> CovariateSummary {
        let d = PanelData::from_nested(&[vec![0.0, 1.0], vec![1.0, 3.0]], None).unwrap();
        summarize(&d).unwrap()
    }

    /// Integrate the bivariate density directly over the rectangle.
    fn bvn_2d_oracle(mu1: f64, mu2: f64, rho: f64, r: Rect) -> f64 {
        let det = 1.0 - rho * rho;
        let density = |x: f64, y: f64| {
            let (u, v) = (x - mu1, y - mu2);
            (-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * det)).exp()
                / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        let inner = |x: f64| integrate(&|y: f64| density(x, y), r.a2, r.b2, 1e-13);
        integrate(&inner, r.a1, r.b1, 1e-12)
    }

    #[test]
    fn moments_examples() {
        let s = tiny();
        let m = theory_moments(&s, 0.0, 1.0).unwrap();
        assert_eq!((m.mean_gi, m.mean_h), (0.0, 0.0));
        assert!((m.corr_gj_h - (0.45f64 / 1.95).sqrt()).abs() < 1e-15);
        assert!((m.corr_gj_h - 0.480_384).abs() < 1e-6);
        let m = theory_moments(&s, 1.0, 1.0).unwrap();
        assert!((m.mean_h + 0.75 * (1.0f64 / 1.95).sqrt()).abs() < 1e-15);
        assert!((m.mean_h + 0.537_086).abs() < 1e-6);
        let big = theory_moments(&s, 1.0, 1e12).unwrap();
        assert!(big.corr_gj_h < 1e-6 && (1.0 - big.w) < 1e-12);
        assert!(theory_moments(&s, 1.0, 0.0).is_err());
    }

    #[test]
    fn gamma_for_mean_h_inverts_the_mean() {
        let s = tiny();
        let g = gamma_for_mean_h(&s, 2.0, -8.0);
        let m = theory_moments(&s, g, 2.0).unwrap();
        assert!((m.mean_h + 8.0).abs() < 1e-12);
    }

    #[test]
    fn bvn_independent_and_degenerate() {
        let r = Rect::symmetric(Z975, Z975);
        assert!((bvn_rect(0.0, 0.0, 0.0, r).unwrap() - 0.9025).abs() < 1e-12);
        assert!((bvn_rect(0.0, 0.0, 1.0, r).unwrap() - 0.95).abs() < 1e-12);
        assert!((bvn_rect(0.0, 0.0, -1.0, r).unwrap() - 0.95).abs() < 1e-12);
        assert!(bvn_rect(0.0, 0.0, 1.1, r).is_err());
        let bad = Rect { a1: 1.0, b1: 0.0, a2: 0.0, b2: 1.0 };
        assert!(bvn_rect(0.0, 0.0, 0.0, bad).is_err());
    }

    #[test]
    fn bvn_matches_two_dimensional_quadrature() {
        let cases = [
            (0.0, 0.0, 0.5, Rect::symmetric(1.0, 1.0)),
            (0.3, -1.2, 0.8, Rect::symmetric(Z975, Z975)),
            (0.0, -2.5, 0.48, Rect { a1: -1.0, b1: 2.0, a2: -3.0, b2: 0.5 }),
            (1.0, 0.5, -0.7, Rect { a1: -0.5, b1: 1.5, a2: -2.0, b2: 1.0 }),
            (0.0, 0.0, 0.999, Rect::symmetric(1.0, 1.0)),
        ];
        for (mu1, mu2, rho, r) in cases {
            let got = bvn_rect(mu1, mu2, rho, r).unwrap();
            let want = bvn_2d_oracle(mu1, mu2, rho, r);
            assert!((got - want).abs() < 1e-8, "{mu1} {mu2} {rho}: {got} vs {want}");
        }
    }

    #[test]
    fn bvn_infinite_bounds_reduce_to_marginals() {
        let r = Rect { a1: f64::NEG_INFINITY, b1: 0.7, a2: f64::NEG_INFINITY, b2: f64::INFINITY };
        assert!((bvn_rect(0.2, 0.0, 0.6, r).unwrap() - norm_cdf(0.5)).abs() < 1e-11);
    }

    #[test]
    fn cpk_limits_and_evenness() {
        let s = tiny();
        let g = gamma_for_mean_h(&s, 1.0, -10.0);
        let c = cpk_exact(&s, g, 1.0, 0.05, 0.05).unwrap();
        assert!((c - 0.95).abs() < 1e-10);
        for g in [0.3, 1.0, 2.5, 7.0] {
            let a = cpk_exact(&s, g, 1.0, 0.05, 0.05).unwrap();
            let b = cpk_exact(&s, -g, 1.0, 0.05, 0.05).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sel_terms_examples() {
        let s = tiny();
        let t = sel_known_terms(&s, 0.0, 1.0, 0.05).unwrap();
        assert!((t.prob_b - 0.95).abs() < 1e-14);
        let t = sel_known_terms(&s, 1.0, 1.0, 0.05).unwrap();
        let mh = -0.75 * (1.0f64 / 1.95).sqrt();
        let oracle = integrate(&norm_pdf, -Z975 - mh, Z975 - mh, 1e-14);
        assert!((t.prob_b - oracle).abs() < 1e-12);
        let m = TheoryMoments { w: 1.0, ..theory_moments(&s, 1.0, 1.0).unwrap() };
        assert_eq!(sel_terms_from_moments(&m, 0.05).numk, 1.0);
    }

    proptest! {
        #[test]
        fn bvn_monotone_and_bounded(
            mu1 in -3.0..3.0f64, mu2 in -3.0..3.0f64, rho in -0.99..0.99f64,
            a in 0.1..2.0f64, b in 0.1..2.0f64, grow in 0.0..1.5f64,
        ) {
            let small = bvn_rect(mu1, mu2, rho, Rect::symmetric(a, b)).unwrap();
            let large = bvn_rect(mu1, mu2, rho, Rect::symmetric(a + grow, b + grow)).unwrap();
            prop_assert!((0.0..=1.0).contains(&small));
            prop_assert!(large >= small - 1e-11);
        }

        #[test]
        fn cpk_is_a_probability_and_even(g in 0.0..20.0f64, nu in 0.01..20.0f64) {
            let s = tiny();
            let a = cpk_exact(&s, g, nu, 0.05, 0.05).unwrap();
            let b = cpk_exact(&s, -g, nu, 0.05, 0.05).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
