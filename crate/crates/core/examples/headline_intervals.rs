//! Headline summaries for a long-format panel CSV.
//!
//! ```text
//! cargo run --release --example headline_intervals -- data/airfare.csv id year concen lfare
//! ```

use std::env;

use hpl::analysis::{ci_for_min_sel, confidence_coefficient, inf_min_sel_usual, DEFAULT_NU_FLOOR};
use hpl::estimators::fit;
use hpl::mc::SimConfig;
use hpl::panel::{load_panel_path, summarize, ColumnMap};

fn main() -> hpl::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    if args.len() != 5 {
        eprintln!("usage: headline_intervals <csv> <id> <time> <x> <y>");
        std::process::exit(2);
    }
    let columns = ColumnMap {
        id: args[1].clone(),
        time: args[2].clone(),
        x: args[3].clone(),
        y: Some(args[4].clone()),
    };
    let data = load_panel_path(&args[0], &columns)?;
    let summary = summarize(&data)?;
    let fits = fit(&data, &summary)?;
    let cfg = SimConfig::default();
    println!("N = {}, T = {}, r = {:.5}", summary.n_units, summary.n_periods, summary.ratio_r);
    println!("nu_hat = {:.4}", fits.components.nu_hat);

    let sel = ci_for_min_sel(&summary, &fits, &cfg)?;
    let nu = sel.cp.nu_interval;
    println!("nu interval = [{:.4}, {:.4}]", nu.interval.lower, nu.interval.upper);
    println!("min_g CP interval = [{:.4}, {:.4}]", sel.cp.interval.lower, sel.cp.interval.upper);
    println!("c* = {:.5}", sel.c_star);
    println!("min_g SEL interval = [{:.4}, {:.4}]", sel.interval.lower, sel.interval.upper);

    let cc = confidence_coefficient(&summary, &cfg, DEFAULT_NU_FLOOR)?;
    println!("confidence coefficient = {:.4} (se {:.4}) at nu = {:.1e}", cc.value.value, cc.value.std_error, cc.nu_at_min);

    let inf = inf_min_sel_usual(&summary, &cfg, DEFAULT_NU_FLOOR)?;
    println!("inf_n min_g SEL = {:.4} (se {:.4}) at nu = {:.1e}, c_min = {:.4}", inf.value.value, inf.value.std_error, inf.nu_at_inf, inf.c_min);
    Ok(())
}
