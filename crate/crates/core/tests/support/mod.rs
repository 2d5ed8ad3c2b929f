//! Oracles shared by the integration and acceptance tests. Nothing here calls
//! into the pricer except the synthetic-market generators, which only need it
//! to manufacture quotes.

#![allow(dead_code)]

use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use predbs::pricing::{call_price, PricingInputs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite 20-point Gauss-Legendre over `panels` equal pieces of [a, b].
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let mut panel = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            panel += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * panel;
    }
    total
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF by quadrature of the density.
pub fn normal_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        integrate(normal_pdf, -40.0, x.max(-40.0), 400)
    } else {
        1.0 - integrate(normal_pdf, -40.0, -x, 400)
    }
}

/// Discounted expectation of the call payoff when
/// `ln S(τ) ~ N(ln S + (r − q − σ²/2)τ, σ²τ)`, by quadrature over the
/// standard normal driver.
pub fn lognormal_call(spot: f64, strike: f64, tau: f64, rate: f64, q: f64, sigma: f64) -> f64 {
    let s = sigma * tau.sqrt();
    let m = (rate - q - 0.5 * sigma * sigma) * tau;
    let z_star = ((strike / spot).ln() - m) / s;
    let lo = z_star.max(-40.0);
    let hi = 40.0_f64.max(lo + 1.0);
    let panels = ((hi - lo) / 0.25).ceil() as usize;
    let payoff = |z: f64| (spot * (m + s * z).exp() - strike).max(0.0) * normal_pdf(z);
    (-rate * tau).exp() * integrate(payoff, lo, hi, panels)
}

/// Excess predictability profile used by the synthetic markets:
/// `clamp(5(m − 0.95), −1, 1)`.
pub fn p_star(moneyness: f64) -> f64 {
    (5.0 * (moneyness - 0.95)).clamp(-1.0, 1.0)
}

pub struct SyntheticMarket {
    pub spot: f64,
    pub rate: f64,
    pub sigma: f64,
    pub quote_date: NaiveDate,
    pub expiry_days: Vec<u64>,
    pub moneyness: Vec<f64>,
}

pub struct SyntheticQuote {
    pub expiry: NaiveDate,
    pub strike: f64,
    pub tau: f64,
    pub p: f64,
    pub price: f64,
}

impl SyntheticMarket {
    /// Calls priced at `p_star(S/K)`, quoted with bid = ask = model price.
    pub fn quotes(&self, p_of: impl Fn(f64) -> f64) -> Vec<SyntheticQuote> {
        let mut out = Vec::new();
        for &days in &self.expiry_days {
            let expiry = self.quote_date.checked_add_days(Days::new(days)).unwrap();
            let tau = days as f64 / 365.0;
            for &m in &self.moneyness {
                let strike = self.spot / m;
                let p = p_of(self.spot / strike);
                let inputs = PricingInputs::new(self.spot, strike, tau, self.rate, self.sigma, p).unwrap();
                let price = call_price(&inputs).unwrap().price;
                out.push(SyntheticQuote { expiry, strike, tau, p, price });
            }
        }
        out
    }

    pub fn chain_csv(&self, quotes: &[SyntheticQuote]) -> String {
        let mut csv = String::from("quote_date,expiry,strike,right,bid,ask\n");
        for q in quotes {
            let _ = writeln!(
                csv,
                "{},{},{:.16e},call,{:.16e},{:.16e}",
                self.quote_date, q.expiry, q.strike, q.price, q.price
            );
        }
        csv
    }
}

/// The market used by the surface-shape checks: moneyness 0.60 to 1.30 in
/// steps of 0.01 and four maturities out to mid-June.
pub fn paper_like_market() -> SyntheticMarket {
    SyntheticMarket {
        spot: 206.38,
        rate: 0.0212,
        sigma: 0.20,
        quote_date: NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(),
        expiry_days: vec![35, 77, 112, 169],
        moneyness: (0..=70).map(|i| 0.60 + 0.01 * i as f64).collect(),
    }
}
