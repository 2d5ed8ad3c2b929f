//! Daily-return volatility estimators and the variance risk premium.
//!
//! Every estimate carries both a per-day and an annualized figure, related by
//! the calendar-day factor √365 (the same convention used to turn a VIX quote
//! into a daily volatility).

mod garch;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

pub use garch::{
    fit_ar_garch, fit_ar_garch_detailed, garch_forecast_vol, simulate_ar_garch, GarchFit,
    GarchParams, GarchSimulation,
};

pub const DAYS_PER_YEAR: f64 = 365.0;

pub fn sqrt_days_per_year() -> f64 {
    DAYS_PER_YEAR.sqrt()
}

/// Daily log-returns `R = ln(S(t+Δt)/S(t))`, each dated by its closing day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, returns: Vec<f64>) -> Result<Self> {
        if dates.len() != returns.len() {
            return Err(Error::invalid(format!(
                "{} dates but {} returns",
                dates.len(),
                returns.len()
            )));
        }
        if returns.is_empty() {
            return Err(Error::invalid("return series is empty"));
        }
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::invalid(format!("return {i} is not finite")));
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "dates not strictly ascending: {} then {}",
                dates[i],
                dates[i + 1]
            )));
        }
        Ok(Self { dates, returns })
    }

    /// Log-returns of consecutive closes; the first close only anchors the series.
    pub fn from_closes(dates: Vec<NaiveDate>, closes: &[f64]) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::invalid("dates and closes differ in length"));
        }
        if closes.len() < 2 {
            return Err(Error::invalid("need at least two closes to form a return"));
        }
        if let Some(i) = closes.iter().position(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid(format!("close {i} is not a positive number")));
        }
        let returns = closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        Self::new(dates[1..].to_vec(), returns)
    }

    /// Undated convenience constructor; assigns consecutive calendar days.
    pub fn from_returns(returns: Vec<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = start.iter_days().take(returns.len()).collect();
        Self::new(dates, returns)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn last_date(&self) -> NaiveDate {
        self.dates[self.dates.len() - 1]
    }

    fn window(&self, window: usize) -> Result<&[f64]> {
        if window < 2 {
            return Err(Error::invalid(format!("window must be >= 2, got {window}")));
        }
        if window > self.len() {
            return Err(Error::invalid(format!(
                "window {window} exceeds series length {}",
                self.len()
            )));
        }
        Ok(&self.returns[self.len() - window..])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolMethod {
    Vix,
    Historical,
    Realized,
    Garch,
}

impl VolMethod {
    pub const ALL: [VolMethod; 4] = [
        VolMethod::Vix,
        VolMethod::Historical,
        VolMethod::Realized,
        VolMethod::Garch,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VolMethod::Vix => "vix",
            VolMethod::Historical => "historical",
            VolMethod::Realized => "realized",
            VolMethod::Garch => "garch",
        }
    }
}

impl fmt::Display for VolMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VolMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vix" => Ok(VolMethod::Vix),
            "historical" => Ok(VolMethod::Historical),
            "realized" => Ok(VolMethod::Realized),
            "garch" => Ok(VolMethod::Garch),
            other => Err(Error::invalid(format!(
                "unknown volatility method '{other}' (expected vix, historical, realized or garch)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolEstimate {
    pub method: VolMethod,
    pub sigma_annual: f64,
    pub sigma_daily: f64,
    /// Trading days used; 0 for a VIX quote.
    pub window: usize,
    pub as_of: Option<NaiveDate>,
}

impl VolEstimate {
    pub fn from_daily(method: VolMethod, sigma_daily: f64, window: usize, as_of: Option<NaiveDate>) -> Self {
        Self {
            method,
            sigma_annual: sigma_daily * sqrt_days_per_year(),
            sigma_daily,
            window,
            as_of,
        }
    }
}

/// Mean-subtracted sample standard deviation (divisor n−1) of the last
/// `window` returns.
pub fn historical_vol(series: &ReturnSeries, window: usize) -> Result<VolEstimate> {
    let r = series.window(window)?;
    let n = r.len() as f64;
    let mean = pairwise_sum(r) / n;
    let dev: Vec<f64> = r.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    Ok(VolEstimate::from_daily(
        VolMethod::Historical,
        var.sqrt(),
        window,
        Some(series.last_date()),
    ))
}

/// Mean of squared daily returns over the window (no mean subtraction).
pub fn realized_variance_daily(series: &ReturnSeries, window: usize) -> Result<f64> {
    let r = series.window(window)?;
    let sq: Vec<f64> = r.iter().map(|x| x * x).collect();
    Ok(pairwise_sum(&sq) / r.len() as f64)
}

/// Root mean square of the last `window` returns.
pub fn realized_vol(series: &ReturnSeries, window: usize) -> Result<VolEstimate> {
    let var = realized_variance_daily(series, window)?;
    Ok(VolEstimate::from_daily(
        VolMethod::Realized,
        var.sqrt(),
        window,
        Some(series.last_date()),
    ))
}

/// VIX is quoted in annualized percentage points: σ_annual = VIX/100,
/// σ_daily = σ_annual/√365.
pub fn vix_to_sigma(vix_quote: f64) -> Result<VolEstimate> {
    check_vix(vix_quote)?;
    let sigma_annual = vix_quote / 100.0;
    Ok(VolEstimate {
        method: VolMethod::Vix,
        sigma_annual,
        sigma_daily: sigma_annual / sqrt_days_per_year(),
        window: 0,
        as_of: None,
    })
}

fn check_vix(vix_quote: f64) -> Result<()> {
    if !(vix_quote >= 0.0 && vix_quote.is_finite()) {
        return Err(Error::invalid(format!("VIX quote must be finite and >= 0, got {vix_quote}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VrpResult {
    /// (VIX/100)², annualized.
    pub implied_variance: f64,
    /// Annualized realized variance.
    pub realized_variance: f64,
    pub vrp: f64,
}

impl VrpResult {
    pub fn from_variances(implied_variance: f64, realized_variance: f64) -> Self {
        Self {
            implied_variance,
            realized_variance,
            vrp: implied_variance - realized_variance,
        }
    }
}

/// Implied variance from VIX² less annualized realized variance of the last
/// `window` returns.
pub fn variance_risk_premium(vix_quote: f64, series: &ReturnSeries, window: usize) -> Result<VrpResult> {
    check_vix(vix_quote)?;
    let realized = realized_variance_daily(series, window)? * DAYS_PER_YEAR;
    let implied = vix_quote / 100.0;
    Ok(VrpResult::from_variances(implied * implied, realized))
}

/// Same premium when the realized leg is already an annualized volatility.
pub fn variance_risk_premium_from_sigma(vix_quote: f64, realized_sigma_annual: f64) -> Result<VrpResult> {
    check_vix(vix_quote)?;
    if !(realized_sigma_annual >= 0.0 && realized_sigma_annual.is_finite()) {
        return Err(Error::invalid("realized volatility must be finite and >= 0"));
    }
    let implied = vix_quote / 100.0;
    Ok(VrpResult::from_variances(
        implied * implied,
        realized_sigma_annual * realized_sigma_annual,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(r: Vec<f64>) -> ReturnSeries {
        ReturnSeries::from_returns(r).unwrap()
    }

    fn assert_annualization(e: &VolEstimate) {
        if e.sigma_daily > 0.0 {
            let ratio = e.sigma_annual / e.sigma_daily;
            assert!((ratio - 365f64.sqrt()).abs() <= 4.0 * f64::EPSILON * ratio);
        } else {
            assert_eq!(e.sigma_annual, 0.0);
        }
    }

    #[test]
    fn constant_returns_have_zero_historical_vol() {
        let e = historical_vol(&series(vec![0.003; 50]), 50).unwrap();
        assert!(e.sigma_daily < 1e-17);
        assert_eq!(e.method, VolMethod::Historical);
    }

    #[test]
    fn alternating_returns_historical_vol() {
        // sample stdev of n alternating ±x is x·sqrt(n/(n−1))
        let x = 0.01;
        let n = 10_000;
        let r: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { x } else { -x }).collect();
        let e = historical_vol(&series(r), n).unwrap();
        let expected = x * (n as f64 / (n as f64 - 1.0)).sqrt();
        assert!((e.sigma_daily - expected).abs() < 1e-15);
        assert_annualization(&e);
    }

    #[test]
    fn historical_vol_uses_trailing_window() {
        let mut r = vec![0.5, -0.5, 0.5];
        r.extend(vec![0.001; 20]);
        let e = historical_vol(&series(r), 20).unwrap();
        assert!(e.sigma_daily < 1e-15);
        assert_eq!(e.window, 20);
    }

    #[test]
    fn historical_vol_sampling_accuracy() {
        // chi-squared: P(|s/σ − 1| > 15%) at n = 252 is ~1e-4
        let s = 0.012;
        let normal = Normal::new(0.0, s).unwrap();
        let mut misses = 0;
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r: Vec<f64> = (0..252).map(|_| normal.sample(&mut rng)).collect();
            let e = historical_vol(&series(r), 252).unwrap();
            if ((e.sigma_daily - s) / s).abs() > 0.15 {
                misses += 1;
            }
        }
        assert!(misses <= 2, "{misses} of 200 outside 15%");
    }

    #[test]
    fn realized_vol_formula() {
        assert_eq!(realized_vol(&series(vec![0.0; 10]), 10).unwrap().sigma_daily, 0.0);
        let mut r = vec![0.0; 9];
        r.push(0.03);
        let e = realized_vol(&series(r.clone()), 10).unwrap();
        assert!((e.sigma_daily - (0.03f64 * 0.03 / 10.0).sqrt()).abs() < 1e-17);
        assert_annualization(&e);
        // realized² × window = Σ R²
        let var = realized_variance_daily(&series(r), 10).unwrap();
        assert_eq!(var * 10.0, 0.03 * 0.03);
    }

    #[test]
    fn realized_and_historical_differ_by_mean_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0005, 0.01).unwrap();
        let r: Vec<f64> = (0..500).map(|_| normal.sample(&mut rng)).collect();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let s = series(r);
        let h = historical_vol(&s, 500).unwrap().sigma_daily;
        let rv = realized_vol(&s, 500).unwrap().sigma_daily;
        // mean(R²) = (n−1)/n·s² + mean²
        let identity = (n - 1.0) / n * h * h + mean * mean;
        assert!((rv * rv - identity).abs() < 1e-16);
    }

    #[test]
    fn window_errors() {
        let s = series(vec![0.01, 0.02, 0.03]);
        assert!(historical_vol(&s, 1).is_err());
        assert!(realized_vol(&s, 4).is_err());
        assert!(realized_vol(&s, 3).is_ok());
    }

    #[test]
    fn vix_conversion() {
        let zero = vix_to_sigma(0.0).unwrap();
        assert_eq!((zero.sigma_annual, zero.sigma_daily), (0.0, 0.0));
        let e = vix_to_sigma(36.5).unwrap();
        assert!((e.sigma_annual - 0.365).abs() < 1e-16);
        assert!((e.sigma_daily - 0.019_104_973_174_542_8).abs() < 1e-15);
        assert_annualization(&e);
        assert!((vix_to_sigma(19.20).unwrap().sigma_annual - 0.192).abs() < 1e-16);
        assert!(vix_to_sigma(-1.0).is_err());
    }

    #[test]
    fn vrp_arithmetic() {
        let v = VrpResult::from_variances(0.04, 0.04);
        assert_eq!(v.vrp, 0.0);
        let s = series(vec![0.01, -0.02, 0.015, 0.0]);
        let zero = variance_risk_premium(0.0, &s, 4).unwrap();
        assert_eq!(zero.vrp, -zero.realized_variance);
        let expected_rv = (0.0001 + 0.0004 + 0.000225) / 4.0 * 365.0;
        assert!((zero.realized_variance - expected_rv).abs() < 1e-15);
        let v = variance_risk_premium_from_sigma(25.0, 0.15).unwrap();
        assert_eq!(v.implied_variance, 0.0625);
        assert_eq!(v.vrp, 0.04);
    }

    #[test]
    fn vol_method_parsing() {
        for m in VolMethod::ALL {
            assert_eq!(m.as_str().parse::<VolMethod>().unwrap(), m);
        }
        assert!("ewma".parse::<VolMethod>().is_err());
    }

    #[test]
    fn return_series_validation() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        assert!(ReturnSeries::new(vec![d("2015-01-02"), d("2015-01-02")], vec![0.0, 0.0]).is_err());
        assert!(ReturnSeries::new(vec![d("2015-01-02")], vec![f64::NAN]).is_err());
        let s = ReturnSeries::from_closes(vec![d("2015-01-02"), d("2015-01-05")], &[100.0, 105.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.returns()[0] - 0.048_790_164_169_432).abs() < 1e-15);
        assert_eq!(s.dates()[0], d("2015-01-05"));
        assert!(ReturnSeries::from_closes(vec![d("2015-01-02"), d("2015-01-05")], &[100.0, 0.0]).is_err());
    }
}
