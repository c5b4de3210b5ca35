//! Confidence interval for the variance ratio from the simulated pivot.

use hpl::analysis::nu_interval;
use hpl::mc::SimConfig;
use hpl::panel::CovariateSummary;

fn main() -> hpl::Result<()> {
    let summary = CovariateSummary::from_moments(40, 5, 10.0, 60.0)?;
    for alpha_bar in [0.02, 0.10] {
        let cfg = SimConfig {
            alpha_bar,
            ..Default::default()
        };
        let r = nu_interval(&summary, 1.3, &cfg)?;
        println!(
            "level {:.2}: pivot quantiles ({:.4}, {:.4}) -> nu in [{:.4}, {:.4}]",
            1.0 - alpha_bar,
            r.pivot_lo,
            r.pivot_hi,
            r.interval.lower,
            r.interval.upper
        );
    }
    Ok(())
}
