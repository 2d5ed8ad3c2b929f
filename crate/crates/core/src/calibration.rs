//! Implied excess predictability: the `p` that reprices a market call.
//!
//! The call price is continuous and strictly decreasing in `p`, so on
//! `[-1, 1]` the root is unique when it exists. Quotes richer than the `p = −1`
//! price or cheaper than the `p = +1` price are pinned to the boundary and
//! flagged instead of failing.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{OptionChain, OptionQuote};
use crate::error::{Error, Result};
use crate::pricing::{call_price, OptionRight, PricingInputs};
use crate::volatility::{VolEstimate, VolMethod};

/// Root-finder stops once the bracket on `p` is this narrow.
pub const P_TOLERANCE: f64 = 1e-10;
/// Converged points reprice the market to within this fraction of spot.
pub const PRICE_TOLERANCE_REL_SPOT: f64 = 1e-9;

const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clamp {
    None,
    AtMinusOne,
    AtPlusOne,
}

impl Clamp {
    pub fn as_str(&self) -> &'static str {
        match self {
            Clamp::None => "none",
            Clamp::AtMinusOne => "at_minus_one",
            Clamp::AtPlusOne => "at_plus_one",
        }
    }
}

impl fmt::Display for Clamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Clamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Clamp::None),
            "at_minus_one" => Ok(Clamp::AtMinusOne),
            "at_plus_one" => Ok(Clamp::AtPlusOne),
            other => Err(Error::invalid(format!("unknown clamp flag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    /// Spot over strike.
    pub moneyness: f64,
    pub tau: f64,
    pub p: f64,
    pub clamped: Clamp,
    pub market_price: f64,
    pub model_price: f64,
    /// model_price − market_price.
    pub residual: f64,
}

/// Solve `call_price(p) = market_price` for `p ∈ [-1, 1]`.
pub fn implied_excess_predictability(
    market_price: f64,
    spot: f64,
    strike: f64,
    tau: f64,
    rate: f64,
    sigma: f64,
) -> Result<CalibrationPoint> {
    if !(market_price > 0.0 && market_price.is_finite()) {
        return Err(Error::invalid(format!("market price must be finite and > 0, got {market_price}")));
    }
    let base = PricingInputs::new(spot, strike, tau, rate, sigma, 0.0)?;
    if sigma == 0.0 || tau == 0.0 {
        return Err(Error::invalid(
            "call price does not depend on p when sigma or tau is zero",
        ));
    }
    let price_at = |p: f64| -> Result<f64> { Ok(call_price(&base.with_p(p))?.price) };
    let point = |p: f64, clamped: Clamp, model: f64| CalibrationPoint {
        moneyness: spot / strike,
        tau,
        p,
        clamped,
        market_price,
        model_price: model,
        residual: model - market_price,
    };

    let var_tau = sigma * sigma * tau;
    let upper_bound = spot * var_tau.exp();
    let lower_bound = (spot * (-var_tau).exp() - strike * (-rate * tau).exp()).max(0.0);
    if market_price >= upper_bound || market_price < lower_bound {
        return Err(Error::QuoteRejected(format!(
            "market price {market_price} outside static bounds [{lower_bound}, {upper_bound}) for every p in [-1, 1]"
        )));
    }

    let c_high = price_at(-1.0)?;
    let c_low = price_at(1.0)?;
    if market_price > c_high {
        return Ok(point(-1.0, Clamp::AtMinusOne, c_high));
    }
    if market_price < c_low {
        return Ok(point(1.0, Clamp::AtPlusOne, c_low));
    }

    let f = |p: f64| -> Result<f64> { Ok(price_at(p)? - market_price) };
    let p = brent(f, -1.0, 1.0, c_high - market_price, c_low - market_price, P_TOLERANCE)?;
    let model = price_at(p)?;
    let tol = PRICE_TOLERANCE_REL_SPOT * spot;
    if (model - market_price).abs() > tol {
        return Err(Error::invalid(format!(
            "root finder stalled: residual {} exceeds {tol}",
            model - market_price
        )));
    }
    Ok(point(p, Clamp::None, model))
}

/// Brent's method on a sign-changing bracket `[a, b]` with known end values.
fn brent(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITERATIONS {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic / secant step
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::invalid("Brent iteration limit reached"))
}

/// Why a quote did not produce a surface point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteDiagnostic {
    pub expiry: NaiveDate,
    pub strike: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictabilitySurface {
    pub method: VolMethod,
    /// Annualized volatility fed to the pricer.
    pub sigma: f64,
    pub as_of: NaiveDate,
    pub spot: f64,
    pub rate: f64,
    /// Ordered by (expiry, strike) of the source quotes.
    pub points: Vec<CalibrationPoint>,
    #[serde(default)]
    pub diagnostics: Vec<QuoteDiagnostic>,
}

impl PredictabilitySurface {
    pub fn count_clamped(&self, clamp: Clamp) -> usize {
        self.points.iter().filter(|p| p.clamped == clamp).count()
    }

    pub fn p_range(&self) -> Option<(f64, f64)> {
        self.points.iter().map(|pt| pt.p).fold(None, |acc, p| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
        })
    }
}

/// ACT/365 year fraction between quote and expiry dates.
pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / 365.0
}

fn quote_point(q: &OptionQuote, spot: f64, rate: f64, sigma: f64) -> std::result::Result<CalibrationPoint, String> {
    if q.right != OptionRight::Call {
        return Err("not a call".into());
    }
    if q.bid == 0.0 && q.ask == 0.0 {
        return Err("no market (bid = ask = 0)".into());
    }
    if q.ask < q.bid {
        return Err("crossed market (ask < bid)".into());
    }
    let tau = year_fraction(q.quote_date, q.expiry);
    if tau <= 0.0 {
        return Err("expires on the quote date".into());
    }
    implied_excess_predictability(q.mid(), spot, q.strike, tau, rate, sigma).map_err(|e| e.to_string())
}

/// Calibrate one point per call quote at its bid/ask midpoint.
pub fn build_surface(chain: &OptionChain, spot: f64, rate: f64, vol: &VolEstimate) -> Result<PredictabilitySurface> {
    if chain.quotes.is_empty() {
        return Err(Error::invalid("option chain is empty"));
    }
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(Error::invalid(format!("spot must be finite and > 0, got {spot}")));
    }
    if !rate.is_finite() {
        return Err(Error::invalid("rate must be finite"));
    }
    let sigma = vol.sigma_annual;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("volatility must be finite and > 0, got {sigma}")));
    }

    let mut order: Vec<&OptionQuote> = chain.quotes.iter().collect();
    order.sort_by(|a, b| a.expiry.cmp(&b.expiry).then(a.strike.total_cmp(&b.strike)));

    let results: Vec<std::result::Result<CalibrationPoint, String>> = order
        .par_iter()
        .map(|q| quote_point(q, spot, rate, sigma))
        .collect();

    let mut seen = HashSet::new();
    let mut points = Vec::new();
    let mut diagnostics = Vec::new();
    for (q, res) in order.iter().zip(results) {
        let diag = |reason: String| QuoteDiagnostic {
            expiry: q.expiry,
            strike: q.strike,
            reason,
        };
        match res {
            Ok(pt) => {
                if seen.insert((pt.moneyness.to_bits(), pt.tau.to_bits())) {
                    points.push(pt);
                } else {
                    diagnostics.push(diag("duplicate (expiry, strike)".into()));
                }
            }
            Err(reason) => diagnostics.push(diag(reason)),
        }
    }

    Ok(PredictabilitySurface {
        method: vol.method,
        sigma,
        as_of: chain.quote_date,
        spot,
        rate,
        points,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffPoint {
    pub moneyness: f64,
    pub tau: f64,
    /// p_other − p_base.
    pub dp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDiff {
    pub base_method: VolMethod,
    pub other_method: VolMethod,
    pub points: Vec<DiffPoint>,
}

impl SurfaceDiff {
    /// e.g. `vix-realized`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.other_method, self.base_method)
    }
}

/// Pointwise `p_other − p_base` over the grid points both surfaces share.
pub fn surface_diff(base: &PredictabilitySurface, other: &PredictabilitySurface) -> Result<SurfaceDiff> {
    if base.spot.to_bits() != other.spot.to_bits()
        || base.rate.to_bits() != other.rate.to_bits()
        || base.as_of != other.as_of
    {
        return Err(Error::invalid(format!(
            "surfaces disagree on market state: spot {} vs {}, rate {} vs {}, as_of {} vs {}",
            base.spot, other.spot, base.rate, other.rate, base.as_of, other.as_of
        )));
    }
    let key = |p: &CalibrationPoint| (p.moneyness.to_bits(), p.tau.to_bits());
    let other_p: std::collections::HashMap<_, f64> = other.points.iter().map(|p| (key(p), p.p)).collect();
    let points: Vec<DiffPoint> = base
        .points
        .iter()
        .filter_map(|b| {
            other_p.get(&key(b)).map(|po| DiffPoint {
                moneyness: b.moneyness,
                tau: b.tau,
                dp: po - b.p,
            })
        })
        .collect();
    if points.is_empty() {
        return Err(Error::invalid("surfaces share no (moneyness, tau) grid points"));
    }
    Ok(SurfaceDiff {
        base_method: base.method,
        other_method: other.method,
        points,
    })
}
