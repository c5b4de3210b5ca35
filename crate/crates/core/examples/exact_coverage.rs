//! Exact coverage of the known-variance two-stage procedure as the
//! endogeneity parameter moves the pretest away from its null.

use hpl::panel::CovariateSummary;
use hpl::theory::{cpk_exact, gamma_for_mean_h, theory_moments};

fn main() -> hpl::Result<()> {
    let summary = CovariateSummary::from_moments(50, 4, 12.0, 40.0)?;
    let nu = 1.0;
    println!("{:>8} {:>9} {:>9} {:>9}", "|E(h)|", "gamma", "corr", "CPK");
    for mean_h in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0] {
        let gamma = gamma_for_mean_h(&summary, nu, -mean_h);
        let m = theory_moments(&summary, gamma, nu)?;
        let cpk = cpk_exact(&summary, gamma, nu, 0.05, 0.05)?;
        println!("{mean_h:>8.1} {gamma:>9.4} {:>9.4} {cpk:>9.5}", m.corr_gj_h);
    }
    Ok(())
}
