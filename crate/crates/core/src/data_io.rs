//! File formats: option chains, return and VIX series, Brownian fixture paths,
//! calibrated surfaces and surface diffs.
//!
//! All inputs are UTF-8 CSV with a header row; `\r\n` line endings are
//! accepted. Columns are located by header name, so column order is free and
//! unknown columns are ignored. Floating-point output uses 17 significant
//! digits, which round-trips every binary64 value exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationPoint, Clamp, PredictabilitySurface, QuoteDiagnostic, SurfaceDiff};
use crate::error::{Error, Result};
use crate::pricing::OptionRight;
use crate::sde_sim::BrownianPath;
use crate::volatility::{ReturnSeries, VolMethod};

/// Chain files with more than this share of bad rows are refused outright.
pub const MAX_REJECTED_FRACTION: f64 = 0.5;

pub const CHAIN_HEADER: [&str; 6] = ["quote_date", "expiry", "strike", "right", "bid", "ask"];
pub const SURFACE_HEADER: [&str; 7] = [
    "moneyness",
    "tau_years",
    "p",
    "clamped",
    "market_price",
    "model_price",
    "residual",
];
pub const DIFF_HEADER: [&str; 3] = ["moneyness", "tau_years", "dp"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub quote_date: NaiveDate,
    pub expiry: NaiveDate,
    pub strike: f64,
    pub right: OptionRight,
    pub bid: f64,
    pub ask: f64,
}

impl OptionQuote {
    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    pub fn validate(&self) -> Result<()> {
        if self.expiry < self.quote_date {
            return Err(Error::invalid(format!(
                "expiry {} precedes quote date {}",
                self.expiry, self.quote_date
            )));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid(format!("strike must be > 0, got {}", self.strike)));
        }
        if !(self.bid >= 0.0 && self.bid.is_finite()) {
            return Err(Error::invalid(format!("bid must be >= 0, got {}", self.bid)));
        }
        if !(self.ask >= self.bid && self.ask.is_finite()) {
            return Err(Error::invalid(format!("bid {} > ask {}", self.bid, self.ask)));
        }
        Ok(())
    }
}

/// Quotes on one underlying from a single quote date. Individual quotes are
/// not screened here; surface construction reports unusable ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub quote_date: NaiveDate,
    pub symbol: String,
    pub spot: f64,
    pub quotes: Vec<OptionQuote>,
}

impl OptionChain {
    pub fn new(symbol: impl Into<String>, spot: f64, quote_date: NaiveDate, quotes: Vec<OptionQuote>) -> Result<Self> {
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(Error::invalid(format!("spot must be finite and > 0, got {spot}")));
        }
        if let Some(q) = quotes.iter().find(|q| q.quote_date != quote_date) {
            return Err(Error::invalid(format!(
                "quote dated {} in a chain for {quote_date}",
                q.quote_date
            )));
        }
        Ok(Self {
            quote_date,
            symbol: symbol.into(),
            spot,
            quotes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DayCount {
    Act365,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Continuously compounded, per year.
    pub risk_free_rate: f64,
    pub day_count: DayCount,
    pub vol_method: VolMethod,
}

impl MarketConfig {
    pub fn new(risk_free_rate: f64, vol_method: VolMethod) -> Result<Self> {
        if !risk_free_rate.is_finite() {
            return Err(Error::invalid("risk-free rate must be finite"));
        }
        Ok(Self {
            risk_free_rate,
            day_count: DayCount::Act365,
            vol_method,
        })
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    pub line: u64,
    pub message: String,
}

/// Every valid quote in a chain file plus the rows that were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFile {
    pub quotes: Vec<OptionQuote>,
    pub diagnostics: Vec<RowDiagnostic>,
}

impl ChainFile {
    pub fn quote_dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = self.quotes.iter().map(|q| q.quote_date).collect();
        dates.sort();
        dates.dedup();
        dates
    }

    pub fn chain_for(&self, symbol: &str, spot: f64, quote_date: NaiveDate) -> Result<OptionChain> {
        let quotes = self
            .quotes
            .iter()
            .filter(|q| q.quote_date == quote_date)
            .copied()
            .collect();
        OptionChain::new(symbol, spot, quote_date, quotes)
    }

    /// The chain when the file holds exactly one quote date.
    pub fn single_chain(&self, symbol: &str, spot: f64) -> Result<OptionChain> {
        match self.quote_dates().as_slice() {
            [] => Err(Error::DataQuality("chain file has no valid quotes".into())),
            [date] => self.chain_for(symbol, spot, *date),
            many => Err(Error::invalid(format!(
                "chain file holds {} quote dates ({}); pick one",
                many.len(),
                many.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}

/// 1-based line of a byte offset; counts `\n` so `\r\n` files number like `\n` files.
fn line_of(input: &[u8], byte: u64) -> u64 {
    let mut end = (byte as usize).min(input.len());
    // a record after `\r\n` is reported as starting on the `\n`
    while end < input.len() && matches!(input[end], b'\r' | b'\n') {
        end += 1;
    }
    input[..end].iter().filter(|&&b| b == b'\n').count() as u64 + 1
}

/// Header-indexed CSV rows, one `Result` per data row.
struct Table {
    columns: HashMap<String, usize>,
    names: Vec<String>,
    rows: Vec<(u64, std::result::Result<Vec<String>, String>)>,
}

impl Table {
    fn parse(input: &[u8], required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut records = reader.byte_records();
        let header = match records.next() {
            Some(Ok(h)) => h,
            Some(Err(e)) => return Err(Error::parse(1, format!("unreadable header: {e}"))),
            None => return Err(Error::parse(1, format!("missing header (expected {})", required.join(",")))),
        };
        let names: Vec<String> = header
            .iter()
            .map(|f| String::from_utf8_lossy(f).trim_start_matches('\u{feff}').trim().to_ascii_lowercase())
            .collect();
        let columns: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .rev()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let missing: Vec<&str> = required.iter().copied().filter(|r| !columns.contains_key(*r)).collect();
        if !missing.is_empty() {
            return Err(Error::parse(
                1,
                format!("missing header column(s) {} (expected {})", missing.join(","), required.join(",")),
            ));
        }

        let mut rows = Vec::new();
        for rec in records {
            match rec {
                Ok(r) => {
                    let line = r.position().map_or(0, |p| line_of(input, p.byte()));
                    if r.iter().all(|f| f.is_empty()) {
                        continue;
                    }
                    let fields: std::result::Result<Vec<String>, String> = r
                        .iter()
                        .map(|f| {
                            std::str::from_utf8(f)
                                .map(str::to_owned)
                                .map_err(|_| "field is not valid UTF-8".to_string())
                        })
                        .collect();
                    rows.push((line, fields));
                }
                Err(e) => {
                    let line = e.position().map_or(0, |p| line_of(input, p.byte()));
                    return Err(Error::parse(line, e.to_string()));
                }
            }
        }
        Ok(Self { columns, names, rows })
    }

    fn unknown_columns(&self, known: &[&str]) -> Vec<String> {
        self.names
            .iter()
            .filter(|n| !known.contains(&n.as_str()))
            .cloned()
            .collect()
    }

    fn field<'a>(&self, row: &'a [String], name: &str) -> std::result::Result<&'a str, String> {
        let idx = self.columns[name];
        row.get(idx)
            .map(String::as_str)
            .ok_or_else(|| format!("missing field '{name}'"))
    }
}

fn parse_date(s: &str, what: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("{what} '{s}' is not an ISO-8601 date"))
}

fn parse_number(s: &str, what: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("{what} '{s}' is not a finite number")),
    }
}

fn parse_right(s: &str) -> std::result::Result<OptionRight, String> {
    match s.to_ascii_lowercase().as_str() {
        "call" | "c" => Ok(OptionRight::Call),
        "put" | "p" => Ok(OptionRight::Put),
        _ => Err(format!("right '{s}' is neither call nor put")),
    }
}

/// Parse `quote_date,expiry,strike,right,bid,ask` rows. Bad rows are skipped
/// with a diagnostic; the file is refused if more than half are bad.
pub fn parse_option_chain(input: &[u8]) -> Result<ChainFile> {
    let table = Table::parse(input, &CHAIN_HEADER)?;
    let mut quotes = Vec::new();
    let mut diagnostics = Vec::new();
    let total = table.rows.len();
    for (line, row) in &table.rows {
        let parsed = row.as_ref().map_err(Clone::clone).and_then(|row| {
            let q = OptionQuote {
                quote_date: parse_date(table.field(row, "quote_date")?, "quote_date")?,
                expiry: parse_date(table.field(row, "expiry")?, "expiry")?,
                strike: parse_number(table.field(row, "strike")?, "strike")?,
                right: parse_right(table.field(row, "right")?)?,
                bid: parse_number(table.field(row, "bid")?, "bid")?,
                ask: parse_number(table.field(row, "ask")?, "ask")?,
            };
            q.validate().map_err(|e| e.to_string())?;
            Ok(q)
        });
        match parsed {
            Ok(q) => quotes.push(q),
            Err(message) => diagnostics.push(RowDiagnostic { line: *line, message }),
        }
    }
    if total > 0 && diagnostics.len() as f64 > MAX_REJECTED_FRACTION * total as f64 {
        return Err(Error::DataQuality(format!(
            "{} of {total} chain rows rejected (first at line {}: {})",
            diagnostics.len(),
            diagnostics[0].line,
            diagnostics[0].message
        )));
    }
    Ok(ChainFile { quotes, diagnostics })
}

/// `date,log_return` or `date,close` (closes become log-returns).
pub fn parse_return_series(input: &[u8]) -> Result<ReturnSeries> {
    let table = Table::parse(input, &["date"])?;
    let mode = if table.columns.contains_key("log_return") {
        "log_return"
    } else if table.columns.contains_key("close") {
        "close"
    } else {
        return Err(Error::parse(1, "expected a 'log_return' or 'close' column"));
    };
    let mut dates = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let row = row.as_ref().map_err(|m| Error::parse(*line, m.clone()))?;
        let date = parse_date(table.field(row, "date").map_err(|m| Error::parse(*line, m))?, "date")
            .map_err(|m| Error::parse(*line, m))?;
        let v = parse_number(table.field(row, mode).map_err(|m| Error::parse(*line, m))?, mode)
            .map_err(|m| Error::parse(*line, m))?;
        if mode == "close" && v <= 0.0 {
            return Err(Error::parse(*line, format!("close must be > 0, got {v}")));
        }
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::parse(*line, format!("date {date} does not follow {prev}")));
            }
        }
        dates.push(date);
        values.push(v);
    }
    if mode == "close" {
        ReturnSeries::from_closes(dates, &values)
    } else {
        ReturnSeries::new(dates, values)
    }
}

/// `date,vix_close` rows in ascending date order.
pub fn parse_vix_series(input: &[u8]) -> Result<Vec<(NaiveDate, f64)>> {
    let table = Table::parse(input, &["date", "vix_close"])?;
    let mut out: Vec<(NaiveDate, f64)> = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let row = row.as_ref().map_err(|m| Error::parse(*line, m.clone()))?;
        let get = |name: &str| table.field(row, name).map_err(|m| Error::parse(*line, m));
        let date = parse_date(get("date")?, "date").map_err(|m| Error::parse(*line, m))?;
        let vix = parse_number(get("vix_close")?, "vix_close").map_err(|m| Error::parse(*line, m))?;
        if vix < 0.0 {
            return Err(Error::parse(*line, format!("VIX close must be >= 0, got {vix}")));
        }
        if let Some((prev, _)) = out.last() {
            if date <= *prev {
                return Err(Error::parse(*line, format!("date {date} does not follow {prev}")));
            }
        }
        out.push((date, vix));
    }
    if out.is_empty() {
        return Err(Error::DataQuality("VIX file has no rows".into()));
    }
    Ok(out)
}

/// Format with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn brownian_path_to_csv(path: &BrownianPath) -> String {
    let mut out = String::from("t,B\n");
    for (t, b) in path.times().iter().zip(path.values()) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*b));
    }
    out
}

pub fn parse_brownian_path(input: &[u8]) -> Result<BrownianPath> {
    let table = Table::parse(input, &["t", "b"])?;
    let mut times = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let row = row.as_ref().map_err(|m| Error::parse(*line, m.clone()))?;
        let get = |name: &str| {
            table
                .field(row, name)
                .and_then(|s| parse_number(s, name))
                .map_err(|m| Error::parse(*line, m))
        };
        times.push(get("t")?);
        values.push(get("b")?);
    }
    BrownianPath::new(times, values)
}

pub fn surface_points_to_csv(points: &[CalibrationPoint]) -> String {
    let mut out = SURFACE_HEADER.join(",");
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(p.moneyness),
            fmt_f64(p.tau),
            fmt_f64(p.p),
            p.clamped,
            fmt_f64(p.market_price),
            fmt_f64(p.model_price),
            fmt_f64(p.residual)
        );
    }
    out
}

/// Surface rows plus warnings for ignored columns.
pub fn parse_surface_points(input: &[u8]) -> Result<(Vec<CalibrationPoint>, Vec<String>)> {
    let table = Table::parse(input, &SURFACE_HEADER)?;
    let warnings = table
        .unknown_columns(&SURFACE_HEADER)
        .into_iter()
        .map(|c| format!("ignoring unknown column '{c}'"))
        .collect();
    let mut points = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let row = row.as_ref().map_err(|m| Error::parse(*line, m.clone()))?;
        let num = |name: &str| {
            table
                .field(row, name)
                .and_then(|s| parse_number(s, name))
                .map_err(|m| Error::parse(*line, m))
        };
        let clamped = table
            .field(row, "clamped")
            .map_err(|m| Error::parse(*line, m))?
            .parse::<Clamp>()
            .map_err(|e| Error::parse(*line, e.to_string()))?;
        points.push(CalibrationPoint {
            moneyness: num("moneyness")?,
            tau: num("tau_years")?,
            p: num("p")?,
            clamped,
            market_price: num("market_price")?,
            model_price: num("model_price")?,
            residual: num("residual")?,
        });
    }
    Ok((points, warnings))
}

/// Surface metadata kept next to the point CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMeta {
    pub method: VolMethod,
    pub sigma: f64,
    pub as_of: NaiveDate,
    pub spot: f64,
    pub rate: f64,
    pub points: usize,
    #[serde(default)]
    pub diagnostics: Vec<QuoteDiagnostic>,
}

impl SurfaceMeta {
    pub fn of(surface: &PredictabilitySurface) -> Self {
        Self {
            method: surface.method,
            sigma: surface.sigma,
            as_of: surface.as_of,
            spot: surface.spot,
            rate: surface.rate,
            points: surface.points.len(),
            diagnostics: surface.diagnostics.clone(),
        }
    }
}

/// `surface.csv` → `surface.json`.
pub fn metadata_path(csv_path: &Path) -> Result<PathBuf> {
    if csv_path.extension().is_some_and(|e| e == "json") {
        return Err(Error::invalid(format!(
            "{}: surface data path must not end in .json",
            csv_path.display()
        )));
    }
    Ok(csv_path.with_extension("json"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn surface_meta_to_json(surface: &PredictabilitySurface) -> String {
    let mut s = serde_json::to_string_pretty(&SurfaceMeta::of(surface)).expect("metadata serializes");
    s.push('\n');
    s
}

/// Write the point CSV at `path` and its metadata JSON alongside.
pub fn write_surface(path: &Path, surface: &PredictabilitySurface) -> Result<()> {
    let meta_path = metadata_path(path)?;
    write_file(path, &surface_points_to_csv(&surface.points))?;
    write_file(&meta_path, &surface_meta_to_json(surface))
}

/// Read a surface written by [`write_surface`]; returns warnings for ignored columns.
pub fn read_surface(path: &Path) -> Result<(PredictabilitySurface, Vec<String>)> {
    let meta_path = metadata_path(path)?;
    let (points, warnings) = parse_surface_points(&read_file(path)?)?;
    let meta_bytes = read_file(&meta_path)?;
    let meta: SurfaceMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::parse(e.line() as u64, format!("{}: {e}", meta_path.display())))?;
    if meta.points != points.len() {
        return Err(Error::DataQuality(format!(
            "{} lists {} points but {} has {}",
            meta_path.display(),
            meta.points,
            path.display(),
            points.len()
        )));
    }
    Ok((
        PredictabilitySurface {
            method: meta.method,
            sigma: meta.sigma,
            as_of: meta.as_of,
            spot: meta.spot,
            rate: meta.rate,
            points,
            diagnostics: meta.diagnostics,
        },
        warnings,
    ))
}

pub fn diff_to_csv(diff: &SurfaceDiff) -> String {
    let mut out = DIFF_HEADER.join(",");
    out.push('\n');
    for p in &diff.points {
        let _ = writeln!(out, "{},{},{}", fmt_f64(p.moneyness), fmt_f64(p.tau), fmt_f64(p.dp));
    }
    out
}

pub fn write_diff(path: &Path, diff: &SurfaceDiff) -> Result<()> {
    write_file(path, &diff_to_csv(diff))
}

pub fn read_option_chain(path: &Path) -> Result<ChainFile> {
    parse_option_chain(&read_file(path)?)
}

pub fn read_return_series(path: &Path) -> Result<ReturnSeries> {
    parse_return_series(&read_file(path)?)
}

pub fn read_vix_series(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    parse_vix_series(&read_file(path)?)
}

pub fn write_brownian_path(path: &Path, b: &BrownianPath) -> Result<()> {
    write_file(path, &brownian_path_to_csv(b))
}

pub fn read_brownian_path(path: &Path) -> Result<BrownianPath> {
    parse_brownian_path(&read_file(path)?)
}
