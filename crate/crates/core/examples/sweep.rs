//! Minimum coverage and minimum SEL over g as the variance ratio shrinks.

use hpl::analysis::sweep_curve;
use hpl::mc::SimConfig;
use hpl::panel::CovariateSummary;

fn main() -> hpl::Result<()> {
    let summary = CovariateSummary::from_moments(20, 4, 6.0, 25.0)?;
    let cfg = SimConfig {
        m_runs: 10_000,
        ..Default::default()
    };
    let grid = [1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0, 10.0];
    println!("{:>8} {:>8} {:>8} {:>8}", "nu", "min CP", "argmin", "min SEL");
    for row in sweep_curve(&summary, &cfg, &grid, Some(0.9))? {
        let sel = row.min_sel.map_or(f64::NAN, |s| s.value);
        println!("{:>8.3} {:>8.4} {:>8.3} {:>8.4}", row.nu, row.min_cp.value, row.argmin_gamma, sel);
    }
    Ok(())
}
