//! Sampling densities of the coverage evaluated at the plug-in estimates of
//! the variance ratio and of the endogeneity parameter.

use hpl::mc::density::{cp_curve_over_gamma, cp_curve_over_nu};
use hpl::mc::{density_cp, Plugin, SimConfig};
use hpl::panel::CovariateSummary;

fn main() -> hpl::Result<()> {
    let summary = CovariateSummary::from_moments(300, 4, 60.0, 200.0)?;
    let cfg = SimConfig {
        m_runs: 5_000,
        ..Default::default()
    };
    let (gamma, nu) = (3.0, 2.0);
    let by_nu = density_cp(&summary, gamma, nu, Plugin::NuHat, &cfg, &cp_curve_over_nu(&summary, gamma, nu, &cfg)?)?;
    let by_gamma = density_cp(&summary, gamma, nu, Plugin::GammaHat, &cfg, &cp_curve_over_gamma(&summary, nu, &cfg)?)?;
    for (label, r) in [("nu_hat", &by_nu), ("gamma_hat", &by_gamma)] {
        let d = &r.density;
        let (mode, _) = d.grid.iter().zip(&d.density).fold((0.0, f64::MIN), |b, (x, y)| if *y > b.1 { (*x, *y) } else { b });
        println!(
            "{label:>9}: bandwidth {:.5}, mode at CP = {mode:.4}, mass {:.4}, {} samples ({} clamped)",
            d.bandwidth,
            d.mass(),
            r.samples,
            r.clamped
        );
    }
    Ok(())
}
