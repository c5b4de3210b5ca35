//! Scaled expected length of the two-stage interval, with the comparison
//! interval calibrated to the minimum coverage over g.

use hpl::analysis::{default_gamma_grid, min_cp_over_gamma};
use hpl::mc::{estimate_sel, solve_coverage_quantile, Method, SimConfig};
use hpl::panel::CovariateSummary;

fn main() -> hpl::Result<()> {
    let summary = CovariateSummary::from_moments(20, 4, 6.0, 25.0)?;
    let cfg = SimConfig {
        m_runs: 20_000,
        ..Default::default()
    };
    let nu = 1.0;
    let grid = default_gamma_grid(&summary, nu);
    let min = min_cp_over_gamma(&summary, nu, &cfg, &grid)?;
    let c_star = solve_coverage_quantile(&summary, min.estimate.value, &cfg)?;
    println!("min CP = {:.4} at gamma = {:.3}; c* = {c_star:.4}", min.estimate.value, min.argmin_gamma);
    for &gamma in grid.iter().step_by(10) {
        let s = estimate_sel(&summary, gamma, nu, c_star, &cfg, Method::ControlVariate)?;
        println!("gamma = {gamma:>8.3}: SEL = {:.4} ± {:.4}", s.value, s.std_error);
    }
    Ok(())
}
