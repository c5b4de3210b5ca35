//! Command-line front end.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on data or numeric
//! errors; the latter print `{"error": {"kind", "message"}}` to stderr.
//! `HPL_THREADS` sets the worker count and never changes any output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis::{
    ci_for_min_cp_at, ci_for_min_sel_at, confidence_coefficient, cp_over_gamma, default_gamma_grid,
    inf_min_sel_usual, nu_interval, sel_over_gamma, sweep_curve, GridMin, DEFAULT_NU_FLOOR,
};
use crate::error::Error;
use crate::estimators::{fit, FitBundle};
use crate::inference::two_stage;
use crate::mc::density::{cp_curve_over_gamma, cp_curve_over_nu};
use crate::mc::estimate::{estimate_cp_both, estimate_denominator, num_from_draws, sel_from_parts};
use crate::mc::{density_cp, DrawSet, MCEstimate, Method, Plugin, Purpose, SimConfig};
use crate::panel::{load_panel_path, summarize, ColumnMap, CovariateSummary, PanelData, SummaryFile};
use crate::theory::{cpk_exact, theory_moments};

#[derive(Debug, Parser)]
#[command(name = "hpl", version, about = "Conditional coverage and expected length of the Hausman-pretest interval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the covariate summary (N, T, SSB, SSW, r, unit means) as JSON
    /// at full precision.
    Summarize {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Within, between and combined slope estimates with variance components.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Hausman pretest followed by the selected interval.
    TwoStage {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha_h: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exact coverage of the known-variance two-stage interval.
    Cpk {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha_h: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Simulated coverage at one `γ`, or over the default `γ` grid.
    Cp {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long)]
        nu: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Simulated scaled expected length at one `γ`, or over the default grid.
    Sel {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        c_star: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Equi-tailed interval for `ν` from the pivot.
    NuCi {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Use this `ν̂` instead of fitting the data.
        #[arg(long, allow_hyphen_values = true)]
        nu_hat: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Density of CP at a plug-in estimate of `ν` or `γ`.
    Density {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long)]
        nu: f64,
        #[arg(long, value_enum, default_value_t = PluginArg::NuHat)]
        plugin: PluginArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// `min_g CP(g, ν)` (and optionally `min_g SEL`) over a `ν` grid.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Explicit ascending grid, comma separated.
        #[arg(long, value_delimiter = ',')]
        nu_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-3)]
        nu_min: f64,
        #[arg(long, default_value_t = 100.0)]
        nu_max: f64,
        #[arg(long, default_value_t = 21)]
        nu_points: usize,
        #[arg(long)]
        c_star: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Infimum over `g` and `n` of `CP(g, n)`.
    Confcoef {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = DEFAULT_NU_FLOOR)]
        nu_floor: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Interval for `min_g CP(g, ν)`.
    MinCpCi {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, allow_hyphen_values = true)]
        nu_hat: Option<f64>,
        /// Also evaluate this many log-spaced inner points of the `ν` interval.
        #[arg(long)]
        dense: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Interval for `min_g SEL(g, ν)` and the matching `c*`.
    MinSelCi {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, allow_hyphen_values = true)]
        nu_hat: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// `inf_n min_g SEL(g, n)` with `c` matched to the confidence coefficient.
    InfSel {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = DEFAULT_NU_FLOOR)]
        nu_floor: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Long-format panel CSV.
    #[arg(long, conflicts_with = "summary")]
    pub data: Option<PathBuf>,
    /// Covariate summary JSON written by `summarize`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "x")]
    pub x_col: String,
    #[arg(long, default_value = "y")]
    pub y_col: String,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Simulation runs M.
    #[arg(long, default_value_t = 50_000)]
    pub m: usize,
    /// Pivot sample size; `p(M+1)` must be an integer for each quantile.
    #[arg(long, default_value_t = 9_999)]
    pub m_pivot: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_h: f64,
    #[arg(long, default_value_t = 0.02)]
    pub alpha_bar: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Cv)]
    pub method: MethodArg,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            m_runs: self.m,
            seed: self.seed,
            alpha: self.alpha,
            alpha_h: self.alpha_h,
            alpha_bar: self.alpha_bar,
            m_pivot: self.m_pivot,
        }
    }

    fn method(&self) -> Method {
        match self.method {
            MethodArg::Brute => Method::Brute,
            MethodArg::Cv => Method::ControlVariate,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Significant digits of printed floats.
    #[arg(long, default_value_t = 6)]
    pub precision: usize,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Brute,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PluginArg {
    NuHat,
    GammaHat,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Format `v` with `digits` significant digits in the style of C's `%g`.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn round_json(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let r: f64 = format_sig(x, digits).parse().unwrap_or(x);
            *v = serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(a) => a.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(o) => o.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

enum Cell {
    Num(f64),
    Text(String),
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn render(&self, digits: usize) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format_sig(*v, digits),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

struct Emitted {
    json: Value,
    table: Option<Table>,
    default: Format,
    /// Skip rounding; for artifacts that are read back.
    exact: bool,
}

impl Emitted {
    fn json(json: Value) -> Self {
        Self {
            json,
            table: None,
            default: Format::Json,
            exact: false,
        }
    }

    fn both(json: Value, table: Table, default: Format) -> Self {
        Self {
            json,
            table: Some(table),
            default,
            exact: false,
        }
    }
}

fn write_output(out: &OutputArgs, emitted: Emitted) -> CliResult<()> {
    let text = match out.format.unwrap_or(emitted.default) {
        Format::Csv => match emitted.table {
            Some(t) => t.render(out.precision),
            None => return Err(Failure::Usage("this subcommand has no CSV form; use --format json".into())),
        },
        Format::Json => {
            let mut v = emitted.json;
            if !emitted.exact {
                round_json(&mut v, out.precision);
            }
            let mut s = serde_json::to_string_pretty(&v).map_err(Error::from)?;
            s.push('\n');
            s
        }
    };
    match &out.output {
        Some(path) => fs::write(path, text).map_err(Error::from)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(Error::from)?;
            stdout.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

struct Loaded {
    summary: CovariateSummary,
    data: Option<PanelData>,
}

fn load(input: &InputArgs, need_y: bool) -> CliResult<Loaded> {
    match (&input.data, &input.summary) {
        (Some(path), _) => {
            let columns = ColumnMap {
                id: input.id_col.clone(),
                time: input.time_col.clone(),
                x: input.x_col.clone(),
                y: need_y.then(|| input.y_col.clone()),
            };
            let data = load_panel_path(path, &columns)?;
            Ok(Loaded {
                summary: summarize(&data)?,
                data: Some(data),
            })
        }
        (None, Some(path)) => {
            if need_y {
                return Err(Failure::Usage("this subcommand needs raw data: pass --data".into()));
            }
            Ok(Loaded {
                summary: CovariateSummary::read_json(path)?,
                data: None,
            })
        }
        (None, None) => Err(Failure::Usage("no input: pass --data <csv> or --summary <json>".into())),
    }
}

fn load_fits(input: &InputArgs) -> CliResult<(CovariateSummary, FitBundle)> {
    let loaded = load(input, true)?;
    let data = loaded.data.expect("raw data loaded");
    let fits = fit(&data, &loaded.summary)?;
    Ok((loaded.summary, fits))
}

/// `ν̂` from `--nu-hat`, or from fitting `--data` with its response.
fn load_nu_hat(input: &InputArgs, nu_hat: Option<f64>) -> CliResult<(CovariateSummary, f64)> {
    match nu_hat {
        Some(v) => Ok((load(input, false)?.summary, v)),
        None if input.data.is_some() => {
            let (summary, fits) = load_fits(input)?;
            Ok((summary, fits.components.nu_hat))
        }
        None => Err(Failure::Usage("nu_hat is needed: pass --data with a response column or --nu-hat".into())),
    }
}

fn estimate_json(e: &MCEstimate) -> Value {
    json!({
        "estimate": e.value,
        "std_error": e.std_error,
        "method": e.method.label(),
        "m_runs": e.m_runs,
        "invalid_runs": e.invalid_runs,
        "seed": e.seed,
    })
}

fn grid_min_json(g: &GridMin) -> Value {
    json!({
        "nu": g.nu,
        "value": g.estimate.value,
        "std_error": g.estimate.std_error,
        "argmin_gamma": g.argmin_gamma,
    })
}

fn curve_table(gammas: &[f64], nu: f64, estimates: &[MCEstimate]) -> Table {
    Table {
        header: vec!["gamma", "nu", "estimate", "std_error", "method"],
        rows: gammas
            .iter()
            .zip(estimates)
            .map(|(&g, e)| {
                vec![
                    Cell::Num(g),
                    Cell::Num(nu),
                    Cell::Num(e.value),
                    Cell::Num(e.std_error),
                    Cell::Text(e.method.label().into()),
                ]
            })
            .collect(),
    }
}

fn curve_json(gammas: &[f64], nu: f64, estimates: &[MCEstimate]) -> Value {
    Value::Array(
        gammas
            .iter()
            .zip(estimates)
            .map(|(&g, e)| {
                let mut v = estimate_json(e);
                v["gamma"] = json!(g);
                v["nu"] = json!(nu);
                v
            })
            .collect(),
    )
}

fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|j| (a + (b - a) * j as f64 / (points - 1) as f64).exp())
        .collect()
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Summarize { input, out } => {
            let summary = load(&input, false)?.summary;
            let file = SummaryFile::from(&summary);
            let json = serde_json::to_value(file).map_err(Error::from)?;
            write_output(&out, Emitted { exact: true, ..Emitted::json(json) })
        }
        Command::Estimate { input, out } => {
            let (_, f) = load_fits(&input)?;
            let json = json!({
                "b_within": f.within.b_within,
                "b_between": f.between.b_between,
                "b_gls": f.gls.b_hat,
                "w_hat": f.gls.w_hat,
                "sigma_eps2": f.components.sigma_eps2,
                "sigma_eta2": f.components.sigma_eta2,
                "nu_hat": f.components.nu_hat,
                "gamma_hat": f.gls.gamma_hat,
            });
            write_output(&out, Emitted::json(json))
        }
        Command::TwoStage { input, alpha, alpha_h, out } => {
            let (_, f) = load_fits(&input)?;
            let r = two_stage(&f, alpha, alpha_h)?;
            let json = json!({
                "hausman_stat": r.hausman_stat,
                "accepted": r.accepted_null,
                "interval": {"lower": r.interval.lower, "upper": r.interval.upper},
                "used": r.interval_used.label(),
            });
            write_output(&out, Emitted::json(json))
        }
        Command::Cpk { input, gamma, nu, alpha, alpha_h, out } => {
            let summary = load(&input, false)?.summary;
            let m = theory_moments(&summary, gamma, nu)?;
            let json = json!({
                "cpk": cpk_exact(&summary, gamma, nu, alpha, alpha_h)?,
                "mean_gI": m.mean_gi,
                "mean_h": m.mean_h,
                "corr_gJ_h": m.corr_gj_h,
                "w": m.w,
            });
            write_output(&out, Emitted::json(json))
        }
        Command::Cp { input, sim, gamma, nu, out } => {
            let summary = load(&input, false)?.summary;
            let cfg = sim.config();
            match gamma {
                Some(g) => {
                    let both = estimate_cp_both(&summary, g, nu, &cfg)?;
                    let e = both.get(sim.method());
                    let mut json = estimate_json(&e);
                    json["gamma"] = json!(g);
                    json["nu"] = json!(nu);
                    json["cpk"] = json!(both.cpk);
                    json["efficiency"] = json!(both.efficiency);
                    write_output(&out, Emitted::both(json, curve_table(&[g], nu, &[e]), Format::Json))
                }
                None => {
                    let grid = default_gamma_grid(&summary, nu);
                    let est = cp_over_gamma(&summary, nu, &cfg, &grid, sim.method())?;
                    let emitted = Emitted::both(curve_json(&grid, nu, &est), curve_table(&grid, nu, &est), Format::Csv);
                    write_output(&out, emitted)
                }
            }
        }
        Command::Sel { input, sim, gamma, nu, c_star, out } => {
            let summary = load(&input, false)?.summary;
            let cfg = sim.config();
            match gamma {
                Some(g) => {
                    cfg.validate()?;
                    let draws = DrawSet::generate(&summary, cfg.m_runs, cfg.seed, Purpose::Main);
                    let num = num_from_draws(&draws, &summary, g, nu, &cfg)?;
                    let denom = estimate_denominator(&summary, &cfg)?;
                    let e = sel_from_parts(&num.get(sim.method()), &denom, c_star, cfg.alpha)?;
                    let mut json = estimate_json(&e);
                    json["gamma"] = json!(g);
                    json["nu"] = json!(nu);
                    json["c_star"] = json!(c_star);
                    json["num_efficiency"] = json!(num.efficiency);
                    write_output(&out, Emitted::both(json, curve_table(&[g], nu, &[e]), Format::Json))
                }
                None => {
                    let grid = default_gamma_grid(&summary, nu);
                    let est = sel_over_gamma(&summary, nu, c_star, &cfg, &grid, sim.method())?;
                    let emitted = Emitted::both(curve_json(&grid, nu, &est), curve_table(&grid, nu, &est), Format::Csv);
                    write_output(&out, emitted)
                }
            }
        }
        Command::NuCi { input, sim, nu_hat, out } => {
            let (summary, nu_hat) = load_nu_hat(&input, nu_hat)?;
            let cfg = sim.config();
            cfg.validate()?;
            let n = nu_interval(&summary, nu_hat, &cfg)?;
            let json = json!({
                "nu_hat": n.nu_hat,
                "lower": n.interval.lower,
                "upper": n.interval.upper,
                "pivot_lo": n.pivot_lo,
                "pivot_hi": n.pivot_hi,
                "alpha_bar": cfg.alpha_bar,
                "m_pivot": cfg.m_pivot,
            });
            write_output(&out, Emitted::json(json))
        }
        Command::Density { input, sim, gamma, nu, plugin, out } => {
            let summary = load(&input, false)?.summary;
            let cfg = sim.config();
            cfg.validate()?;
            let (which, curve) = match plugin {
                PluginArg::NuHat => (Plugin::NuHat, cp_curve_over_nu(&summary, gamma, nu, &cfg)?),
                PluginArg::GammaHat => (Plugin::GammaHat, cp_curve_over_gamma(&summary, nu, &cfg)?),
            };
            let r = density_cp(&summary, gamma, nu, which, &cfg, &curve)?;
            let json = json!({
                "gamma": gamma,
                "nu": nu,
                "plugin": which,
                "bandwidth": r.density.bandwidth,
                "samples": r.samples,
                "clamped": r.clamped,
                "grid": r.density.grid,
                "density": r.density.density,
            });
            let table = Table {
                header: vec!["cp", "density"],
                rows: r
                    .density
                    .grid
                    .iter()
                    .zip(&r.density.density)
                    .map(|(&x, &d)| vec![Cell::Num(x), Cell::Num(d)])
                    .collect(),
            };
            if r.clamped > 0 {
                eprintln!("warning: {} of {} plug-in values fell outside the CP curve and were clamped", r.clamped, r.samples);
            }
            write_output(&out, Emitted::both(json, table, Format::Csv))
        }
        Command::Sweep { input, sim, nu_grid, nu_min, nu_max, nu_points, c_star, out } => {
            let summary = load(&input, false)?.summary;
            let cfg = sim.config();
            let grid = match nu_grid {
                Some(g) => g,
                None => {
                    if !(nu_min > 0.0 && nu_max > nu_min) || nu_points == 0 {
                        return Err(Failure::Usage("need 0 < --nu-min < --nu-max and --nu-points >= 1".into()));
                    }
                    log_spaced(nu_min, nu_max, nu_points)
                }
            };
            let rows = sweep_curve(&summary, &cfg, &grid, c_star)?;
            let mut header = vec!["nu", "min_cp", "min_cp_se", "argmin_gamma"];
            if c_star.is_some() {
                header.extend(["min_sel", "min_sel_se"]);
            }
            let table = Table {
                header,
                rows: rows
                    .iter()
                    .map(|r| {
                        let mut row = vec![
                            Cell::Num(r.nu),
                            Cell::Num(r.min_cp.value),
                            Cell::Num(r.min_cp.std_error),
                            Cell::Num(r.argmin_gamma),
                        ];
                        if let Some(s) = r.min_sel {
                            row.extend([Cell::Num(s.value), Cell::Num(s.std_error)]);
                        }
                        row
                    })
                    .collect(),
            };
            let json = Value::Array(
                rows.iter()
                    .map(|r| {
                        let mut v = json!({
                            "nu": r.nu,
                            "min_cp": r.min_cp.value,
                            "min_cp_se": r.min_cp.std_error,
                            "argmin_gamma": r.argmin_gamma,
                        });
                        if let Some(s) = r.min_sel {
                            v["min_sel"] = json!(s.value);
                            v["min_sel_se"] = json!(s.std_error);
                        }
                        v
                    })
                    .collect(),
            );
            write_output(&out, Emitted::both(json, table, Format::Csv))
        }
        Command::Confcoef { input, sim, nu_floor, out } => {
            let summary = load(&input, false)?.summary;
            let cc = confidence_coefficient(&summary, &sim.config(), nu_floor)?;
            if !cc.limit_check_passed {
                eprintln!("warning: the last two values of the nu sequence differ by more than 3 standard errors");
            }
            let json = json!({
                "confidence_coefficient": cc.value.value,
                "std_error": cc.value.std_error,
                "nu_at_min": cc.nu_at_min,
                "argmin_gamma": cc.argmin_gamma,
                "still_decreasing_at_floor": cc.still_decreasing_at_floor,
                "limit_check_passed": cc.limit_check_passed,
                "path": cc.path.iter().map(grid_min_json).collect::<Vec<_>>(),
            });
            let table = Table {
                header: vec!["nu", "min_cp", "min_cp_se", "argmin_gamma"],
                rows: cc
                    .path
                    .iter()
                    .map(|p| {
                        vec![
                            Cell::Num(p.nu),
                            Cell::Num(p.estimate.value),
                            Cell::Num(p.estimate.std_error),
                            Cell::Num(p.argmin_gamma),
                        ]
                    })
                    .collect(),
            };
            write_output(&out, Emitted::both(json, table, Format::Json))
        }
        Command::MinCpCi { input, sim, nu_hat, dense, out } => {
            let (summary, nu_hat) = load_nu_hat(&input, nu_hat)?;
            let r = ci_for_min_cp_at(&summary, nu_hat, &sim.config(), dense)?;
            let json = json!({
                "lower": r.interval.lower,
                "upper": r.interval.upper,
                "nu_hat": nu_hat,
                "nu_lower": r.nu_interval.interval.lower,
                "nu_upper": r.nu_interval.interval.upper,
                "at_nu_lower": grid_min_json(&r.at_lower),
                "at_nu_upper": grid_min_json(&r.at_upper),
                "non_monotone": r.non_monotone,
                "inner": r.inner.iter().map(grid_min_json).collect::<Vec<_>>(),
            });
            write_output(&out, Emitted::json(json))
        }
        Command::MinSelCi { input, sim, nu_hat, out } => {
            let (summary, nu_hat) = load_nu_hat(&input, nu_hat)?;
            let r = ci_for_min_sel_at(&summary, nu_hat, &sim.config())?;
            let json = json!({
                "lower": r.interval.lower,
                "upper": r.interval.upper,
                "c_star": r.c_star,
                "target_coverage": r.target_coverage,
                "min_cp_lower": r.cp.interval.lower,
                "min_cp_upper": r.cp.interval.upper,
                "nu_hat": nu_hat,
                "nu_lower": r.cp.nu_interval.interval.lower,
                "nu_upper": r.cp.nu_interval.interval.upper,
                "at_nu_lower": grid_min_json(&r.at_lower),
                "at_nu_upper": grid_min_json(&r.at_upper),
            });
            write_output(&out, Emitted::json(json))
        }
        Command::InfSel { input, sim, nu_floor, out } => {
            let summary = load(&input, false)?.summary;
            let r = inf_min_sel_usual(&summary, &sim.config(), nu_floor)?;
            let json = json!({
                "inf_min_sel": r.value.value,
                "std_error": r.value.std_error,
                "nu_at_inf": r.nu_at_inf,
                "argmin_gamma": r.argmin_gamma,
                "c_min": r.c_min,
                "confidence_coefficient": r.confidence_coefficient,
                "path": r.path.iter().map(grid_min_json).collect::<Vec<_>>(),
            });
            write_output(&out, Emitted::json(json))
        }
    }
}

fn report(kind: &str, message: &str) {
    let v = json!({"error": {"kind": kind, "message": message}});
    eprintln!("{v}");
}

fn thread_pool() -> std::result::Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("HPL_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("HPL_THREADS must be a positive integer, got `{v}`"))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

/// Parse `args` (including the program name), run, and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            report("usage", &msg);
            return 2;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            report("usage", &msg);
            2
        }
        Err(Failure::Data(e)) => {
            report(e.kind(), &e.to_string());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.123456789, 6), "0.123457");
        assert_eq!(format_sig(12.7775, 6), "12.7775");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(format_sig(1e-7, 6), "1e-7");
        assert_eq!(format_sig(0.95, 6), "0.95");
        assert_eq!(format_sig(-2.0, 3), "-2");
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(999999.7, 6), "1e6");
    }

    #[test]
    fn json_rounding_touches_only_floats() {
        let mut v = json!({"a": 0.123456789, "b": 7, "c": [1.0000004]});
        round_json(&mut v, 6);
        assert_eq!(v.to_string(), r#"{"a":0.123457,"b":7,"c":[1.0]}"#);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["hpl", "sweep"]), 2);
        assert_eq!(run(["hpl", "no-such-command"]), 2);
        assert_eq!(run(["hpl", "cp", "--nu", "1", "--bogus"]), 2);
    }

    #[test]
    fn data_errors_exit_one() {
        assert_eq!(run(["hpl", "estimate", "--data", "/nonexistent/panel.csv"]), 1);
    }
}
