//! `predbs` command line: pricing, simulation, volatility estimation,
//! calibration and surface workflows.
//!
//! Summaries go to standard output in the selected format; bulk data goes to
//! the `--out` file. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::calibration::{build_surface, implied_excess_predictability, surface_diff, Clamp};
use crate::data_io::{self, fmt_f64};
use crate::error::Error;
use crate::pricing::{price, OptionRight, PricingInputs};
use crate::sde_sim::{simulate_stratonovich_alpha, PathSimConfig};
use crate::volatility::{
    fit_ar_garch, garch_forecast_vol, historical_vol, realized_vol, variance_risk_premium,
    variance_risk_premium_from_sigma, vix_to_sigma, ReturnSeries, VolEstimate, VolMethod,
};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "predbs", version, about = "Option pricing with excess predictability")]
pub struct Cli {
    /// Output file for the command's data.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Summary format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form call or put price.
    Price(PriceArgs),
    /// Simulate Stratonovich-α GBM paths and report the mean log-drift.
    Simulate(SimulateArgs),
    /// Estimate volatility from a return series or a VIX quote.
    Vol(VolArgs),
    /// Variance risk premium: VIX² less realized variance.
    Vrp(VrpArgs),
    /// Implied excess predictability of a single call quote.
    Calibrate(CalibrateArgs),
    /// Implied excess predictability surface of an option chain.
    Surface(SurfaceArgs),
    /// Pointwise difference of two surfaces (other − base).
    DiffSurface(DiffArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PriceArgs {
    #[arg(long)]
    pub spot: f64,
    #[arg(long)]
    pub strike: f64,
    /// Time to maturity in years.
    #[arg(long)]
    pub tau: f64,
    /// Continuously compounded risk-free rate.
    #[arg(long)]
    pub rate: f64,
    /// Annualized volatility.
    #[arg(long)]
    pub sigma: f64,
    /// Excess predictability in [-1, 1].
    #[arg(long, value_parser = parse_p)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = Right::Call)]
    pub right: Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Right {
    Call,
    Put,
}

impl From<Right> for OptionRight {
    fn from(r: Right) -> Self {
        match r {
            Right::Call => OptionRight::Call,
            Right::Put => OptionRight::Put,
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, value_parser = parse_unit_interval)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 252)]
    pub steps: usize,
    /// Horizon in years.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 100.0)]
    pub s0: f64,
}

#[derive(Debug, Args)]
pub struct VolSource {
    /// Return series CSV (`date,log_return` or `date,close`).
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// VIX level, or a `date,vix_close` CSV.
    #[arg(long)]
    pub vix: Option<String>,
    /// Trading days for historical and realized estimates.
    #[arg(long, default_value_t = 252)]
    pub window: usize,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct VolArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub source: VolSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Vix,
    Historical,
    Realized,
    Garch,
}

impl From<MethodArg> for VolMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Vix => VolMethod::Vix,
            MethodArg::Historical => VolMethod::Historical,
            MethodArg::Realized => VolMethod::Realized,
            MethodArg::Garch => VolMethod::Garch,
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct VrpArgs {
    /// VIX level, or a `date,vix_close` CSV (the row on the last return date is used).
    #[arg(long)]
    pub vix: String,
    /// Return series CSV for the realized leg.
    #[arg(long, conflicts_with = "realized_sigma", required_unless_present = "realized_sigma")]
    pub returns: Option<PathBuf>,
    /// Annualized realized volatility, instead of a return series.
    #[arg(long)]
    pub realized_sigma: Option<f64>,
    /// Trading days in the realized window.
    #[arg(long, default_value_t = 21)]
    pub window: usize,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct CalibrateArgs {
    /// Observed call price (mid).
    #[arg(long)]
    pub market_price: f64,
    #[arg(long)]
    pub spot: f64,
    #[arg(long)]
    pub strike: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SurfaceArgs {
    /// Option chain CSV.
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub spot: f64,
    #[arg(long)]
    pub rate: f64,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub source: VolSource,
    /// Quote date to use when the chain holds several.
    #[arg(long)]
    pub quote_date: Option<NaiveDate>,
    #[arg(long, default_value = "SPY")]
    pub symbol: String,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct DiffArgs {
    /// Reference surface CSV (its metadata JSON must sit alongside).
    #[arg(long)]
    pub base: PathBuf,
    /// Surface CSV compared against the base.
    #[arg(long)]
    pub other: PathBuf,
}

fn parse_p(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(-1.0..=1.0).contains(&p) {
        return Err(format!("p must lie in [-1, 1], got {p}"));
    }
    Ok(p)
}

fn parse_unit_interval(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(0.0..=1.0).contains(&a) {
        return Err(format!("alpha must lie in [0, 1], got {a}"));
    }
    Ok(a)
}

/// Failure of a subcommand after argument parsing.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// Ordered key/value summary rendered as a table, one CSV row or a JSON object.
#[derive(Debug, Default)]
struct Report {
    fields: Vec<(&'static str, Value)>,
}

impl Report {
    fn put(&mut self, key: &'static str, value: impl Into<Value>) -> &mut Self {
        self.fields.push((key, value.into()));
        self
    }

    fn num(&mut self, key: &'static str, x: f64) -> &mut Self {
        // JSON has no infinities; keep them readable as strings
        let v = if x.is_finite() { json!(x) } else { json!(x.to_string()) };
        self.put(key, v)
    }

    fn render(&self, format: Format) -> String {
        let plain = |v: &Value| match v {
            Value::String(s) => s.clone(),
            Value::Number(n) => match n.as_f64() {
                Some(x) if n.is_f64() => fmt_f64(x),
                _ => n.to_string(),
            },
            other => other.to_string(),
        };
        match format {
            Format::Table => {
                let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                let mut out = String::new();
                for (k, v) in &self.fields {
                    let shown = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    let _ = writeln!(out, "{k:<width$}  {shown}");
                }
                out
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let _ = w.write_record(self.fields.iter().map(|(k, _)| *k));
                let _ = w.write_record(self.fields.iter().map(|(_, v)| plain(v)));
                String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
            }
            Format::Json => {
                let mut out = String::from("{\n");
                for (i, (k, v)) in self.fields.iter().enumerate() {
                    let sep = if i + 1 < self.fields.len() { "," } else { "" };
                    let _ = writeln!(out, "  {}: {}{sep}", json!(k), v);
                }
                out.push_str("}\n");
                out
            }
        }
    }
}

/// Parse `args` and run the command, writing to the given streams.
/// Returns the process exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, stderr) {
        Ok(report) => {
            let _ = stdout.write_all(report.render(cli.format).as_bytes());
            0
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

fn execute(cli: &Cli, warn: &mut dyn Write) -> CmdResult<Report> {
    let mut report = match &cli.command {
        Command::Price(a) => cmd_price(a, cli)?,
        Command::Simulate(a) => cmd_simulate(a, cli)?,
        Command::Vol(a) => cmd_vol(a, cli)?,
        Command::Vrp(a) => cmd_vrp(a, cli)?,
        Command::Calibrate(a) => cmd_calibrate(a, cli)?,
        Command::Surface(a) => cmd_surface(a, cli, warn)?,
        Command::DiffSurface(a) => cmd_diff_surface(a, cli, warn)?,
    };
    report.put("seed", cli.seed);
    Ok(report)
}

fn write_out(path: &Path, contents: &str) -> CmdResult<()> {
    std::fs::write(path, contents).map_err(|e| Failure::Domain(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))
}

fn require_out<'a>(cli: &'a Cli, what: &str) -> CmdResult<&'a Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Failure::Usage(format!("--out is required to write the {what}")))
}

/// Write the summary itself to `--out` when given.
fn mirror_report(cli: &Cli, report: Report) -> CmdResult<Report> {
    if let Some(out) = &cli.out {
        let mut copy = Report { fields: report.fields.clone() };
        copy.put("seed", cli.seed);
        write_out(out, &copy.render(cli.format))?;
    }
    Ok(report)
}

fn cmd_price(a: &PriceArgs, cli: &Cli) -> CmdResult<Report> {
    let inputs = PricingInputs::new(a.spot, a.strike, a.tau, a.rate, a.sigma, a.p)?;
    let r = price(&inputs, a.right.into())?;
    let mut report = Report::default();
    report
        .put("right", format!("{:?}", r.right).to_lowercase())
        .num("price", r.price)
        .num("d_plus", r.d_plus)
        .num("d_minus", r.d_minus)
        .num("dividend_yield", r.dividend_yield);
    mirror_report(cli, report)
}

fn cmd_simulate(a: &SimulateArgs, cli: &Cli) -> CmdResult<Report> {
    let cfg = PathSimConfig {
        mu: a.mu,
        sigma: a.sigma,
        alpha: a.alpha,
        s0: a.s0,
        horizon: a.horizon,
        steps: a.steps,
        paths: a.paths,
        seed: cli.seed,
        keep_paths: false,
    };
    let batch = simulate_stratonovich_alpha(&cfg)?;
    let (drift, se) = batch.mean_log_drift();
    let theory = cfg.effective_drift() - 0.5 * cfg.sigma * cfg.sigma;
    if let Some(out) = &cli.out {
        let mut csv = String::from("path,terminal,log_return\n");
        for (i, (s, lr)) in batch.terminal.iter().zip(batch.log_returns()).enumerate() {
            let _ = writeln!(csv, "{i},{},{}", fmt_f64(*s), fmt_f64(lr));
        }
        write_out(out, &csv)?;
    }
    let mut report = Report::default();
    report
        .num("alpha", a.alpha)
        .num("mu", a.mu)
        .num("sigma", a.sigma)
        .put("paths", a.paths)
        .put("steps", a.steps)
        .num("horizon", a.horizon)
        .num("mean_log_drift", drift)
        .num("std_error", se)
        .num("theoretical_drift", theory)
        .num("z_score", if se > 0.0 { (drift - theory) / se } else { 0.0 });
    Ok(report)
}

/// A VIX argument: a plain level, or a CSV from which the row on `as_of`
/// (or the last row) is taken.
fn resolve_vix(arg: &str, as_of: Option<NaiveDate>) -> CmdResult<(f64, Option<NaiveDate>)> {
    if let Ok(v) = arg.trim().parse::<f64>() {
        return Ok((v, None));
    }
    let rows = data_io::read_vix_series(Path::new(arg))?;
    let row = match as_of {
        Some(d) => rows.iter().find(|(date, _)| *date == d).ok_or_else(|| {
            Failure::Domain(Error::DataQuality(format!("{arg} has no VIX close for {d}")))
        })?,
        None => rows.last().expect("parser refuses empty VIX files"),
    };
    Ok((row.1, Some(row.0)))
}

fn estimate_vol(method: VolMethod, src: &VolSource, as_of: Option<NaiveDate>) -> CmdResult<VolEstimate> {
    if method == VolMethod::Vix {
        let arg = src
            .vix
            .as_deref()
            .ok_or_else(|| Failure::Usage("--vix is required for the vix method".into()))?;
        let (level, date) = resolve_vix(arg, as_of)?;
        let mut est = vix_to_sigma(level)?;
        est.as_of = date.or(as_of);
        return Ok(est);
    }
    let path = src
        .returns
        .as_deref()
        .ok_or_else(|| Failure::Usage(format!("--returns is required for the {method} method")))?;
    let series = data_io::read_return_series(path)?;
    Ok(match method {
        VolMethod::Historical => historical_vol(&series, src.window)?,
        VolMethod::Realized => realized_vol(&series, src.window)?,
        VolMethod::Garch => garch_forecast_vol(&fit_ar_garch(&series)?, &series)?,
        VolMethod::Vix => unreachable!("handled above"),
    })
}

fn vol_report(est: &VolEstimate) -> Report {
    let mut report = Report::default();
    report
        .put("method", est.method.as_str())
        .num("sigma_annual", est.sigma_annual)
        .num("sigma_daily", est.sigma_daily)
        .put("window", est.window)
        .put("as_of", est.as_of.map_or(String::new(), |d| d.to_string()));
    report
}

fn cmd_vol(a: &VolArgs, cli: &Cli) -> CmdResult<Report> {
    let est = estimate_vol(a.method.into(), &a.source, None)?;
    mirror_report(cli, vol_report(&est))
}

fn cmd_vrp(a: &VrpArgs, cli: &Cli) -> CmdResult<Report> {
    let result = match (&a.returns, a.realized_sigma) {
        (Some(path), _) => {
            let series: ReturnSeries = data_io::read_return_series(path)?;
            let vix = match a.vix.trim().parse::<f64>() {
                Ok(v) => v,
                Err(_) => resolve_vix(&a.vix, Some(series.last_date()))?.0,
            };
            variance_risk_premium(vix, &series, a.window)?
        }
        (None, Some(sigma)) => {
            let (vix, _) = resolve_vix(&a.vix, None)?;
            variance_risk_premium_from_sigma(vix, sigma)?
        }
        (None, None) => return Err(Failure::Usage("give --returns or --realized-sigma".into())),
    };
    let mut report = Report::default();
    report
        .num("implied_variance", result.implied_variance)
        .num("realized_variance", result.realized_variance)
        .num("vrp", result.vrp);
    mirror_report(cli, report)
}

fn cmd_calibrate(a: &CalibrateArgs, cli: &Cli) -> CmdResult<Report> {
    let pt = implied_excess_predictability(a.market_price, a.spot, a.strike, a.tau, a.rate, a.sigma)?;
    let mut report = Report::default();
    report
        .num("p", pt.p)
        .put("clamped", pt.clamped.as_str())
        .num("moneyness", pt.moneyness)
        .num("tau_years", pt.tau)
        .num("market_price", pt.market_price)
        .num("model_price", pt.model_price)
        .num("residual", pt.residual);
    mirror_report(cli, report)
}

fn cmd_surface(a: &SurfaceArgs, cli: &Cli, warn: &mut dyn Write) -> CmdResult<Report> {
    let out = require_out(cli, "surface")?.to_path_buf();
    let file = data_io::read_option_chain(&a.chain)?;
    for d in &file.diagnostics {
        let _ = writeln!(warn, "warning: {}: line {}: {}", a.chain.display(), d.line, d.message);
    }
    let chain = match a.quote_date {
        Some(date) => file.chain_for(&a.symbol, a.spot, date)?,
        None => file.single_chain(&a.symbol, a.spot)?,
    };
    let vol = estimate_vol(a.method.into(), &a.source, Some(chain.quote_date))?;
    let surface = build_surface(&chain, a.spot, a.rate, &vol)?;
    for d in &surface.diagnostics {
        let _ = writeln!(warn, "warning: quote {} K={}: {}", d.expiry, d.strike, d.reason);
    }
    data_io::write_surface(&out, &surface)?;

    let mut maturities: Vec<u64> = surface.points.iter().map(|p| p.tau.to_bits()).collect();
    maturities.sort_unstable();
    maturities.dedup();
    let (lo, hi) = surface.p_range().unwrap_or((f64::NAN, f64::NAN));
    let mut report = Report::default();
    report
        .put("method", surface.method.as_str())
        .num("sigma", surface.sigma)
        .put("as_of", surface.as_of.to_string())
        .put("points", surface.points.len())
        .put("maturities", maturities.len())
        .put("clamped_minus_one", surface.count_clamped(Clamp::AtMinusOne))
        .put("clamped_plus_one", surface.count_clamped(Clamp::AtPlusOne))
        .put("skipped_rows", file.diagnostics.len())
        .put("skipped_quotes", surface.diagnostics.len())
        .num("p_min", lo)
        .num("p_max", hi)
        .put("output", out.display().to_string());
    Ok(report)
}

fn cmd_diff_surface(a: &DiffArgs, cli: &Cli, warn: &mut dyn Write) -> CmdResult<Report> {
    let out = require_out(cli, "diff")?.to_path_buf();
    let (base, w1) = data_io::read_surface(&a.base)?;
    let (other, w2) = data_io::read_surface(&a.other)?;
    for w in w1.iter().chain(&w2) {
        let _ = writeln!(warn, "warning: {w}");
    }
    let diff = surface_diff(&base, &other)?;
    data_io::write_diff(&out, &diff)?;
    let max_abs = diff.points.iter().map(|p| p.dp.abs()).fold(0.0, f64::max);
    let mut report = Report::default();
    report
        .put("diff", diff.label())
        .put("points", diff.points.len())
        .num("max_abs_dp", max_abs)
        .put("output", out.display().to_string());
    Ok(report)
}
