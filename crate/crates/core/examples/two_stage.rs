//! Hausman pretest followed by the interval it selects.

use hpl::estimators::fit;
use hpl::inference::{build_interval, two_stage, IntervalKind};
use hpl::panel::{summarize, PanelData};

fn panel(xi: f64) -> hpl::Result<PanelData> {
    let x: Vec<Vec<f64>> = (0..30)
        .map(|i| (0..4).map(|t| ((i * 7 + t * 3) % 11) as f64 * 0.3 + 0.1 * i as f64).collect())
        .collect();
    let y: Vec<Vec<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mean = row.iter().sum::<f64>() / 4.0;
            let eta = ((i * 5) % 7) as f64 * 0.2 - 0.6;
            row.iter()
                .enumerate()
                .map(|(t, v)| 1.0 + v + xi * mean + eta + ((i * 3 + t * 5) % 9) as f64 * 0.1 - 0.4)
                .collect()
        })
        .collect();
    PanelData::from_nested(&x, Some(&y))
}

fn main() -> hpl::Result<()> {
    for xi in [0.0, 1.5] {
        let data = panel(xi)?;
        let f = fit(&data, &summarize(&data)?)?;
        let r = two_stage(&f, 0.05, 0.05)?;
        let i = build_interval(IntervalKind::I, &f, 0.95)?;
        let j = build_interval(IntervalKind::J, &f, 0.95)?;
        println!("xi = {xi}: H = {:.3}, accepted = {}", r.hausman_stat, r.accepted_null);
        println!("  I = [{:.4}, {:.4}], J = [{:.4}, {:.4}]", i.lower, i.upper, j.lower, j.upper);
        println!("  reported ({}) = [{:.4}, {:.4}]", r.interval_used.label(), r.interval.lower, r.interval.upper);
    }
    Ok(())
}
