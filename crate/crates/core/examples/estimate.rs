//! Fit the within, between and GLS estimators to a small panel.

use hpl::estimators::fit;
use hpl::panel::{summarize, PanelData};

fn main() -> hpl::Result<()> {
    // Six units over three periods; y depends on x and on the unit mean of x.
    let x = vec![
        vec![1.0, 2.0, 1.5],
        vec![3.0, 2.5, 4.0],
        vec![0.5, 1.0, 0.0],
        vec![2.0, 3.5, 3.0],
        vec![4.5, 4.0, 5.0],
        vec![1.0, 0.5, 2.0],
    ];
    let noise = [0.3, -0.2, 0.1, -0.4, 0.2, 0.0, 0.5, -0.1, -0.3, 0.1, 0.4, -0.2, -0.5, 0.3, 0.2, 0.1, -0.1, 0.0];
    let y: Vec<Vec<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            let effect = 0.4 * (i as f64 - 2.5);
            row.iter().enumerate().map(|(t, v)| 1.0 + 2.0 * v + 0.5 * mean + effect + noise[3 * i + t]).collect()
        })
        .collect();

    let data = PanelData::from_nested(&x, Some(&y))?;
    let summary = summarize(&data)?;
    let f = fit(&data, &summary)?;
    println!("SSB = {:.4}, SSW = {:.4}, r = {:.4}", summary.ssb, summary.ssw, summary.ratio_r);
    println!("b_within  = {:.4}", f.within.b_within);
    println!("b_between = {:.4}", f.between.b_between);
    println!("b_gls     = {:.4} (w_hat = {:.4})", f.gls.b_hat, f.gls.w_hat);
    println!(
        "sigma_eps2 = {:.4}, sigma_eta2 = {:.4}, nu_hat = {:.4}, gamma_hat = {:.4}",
        f.components.sigma_eps2, f.components.sigma_eta2, f.components.nu_hat, f.gls.gamma_hat
    );
    Ok(())
}
