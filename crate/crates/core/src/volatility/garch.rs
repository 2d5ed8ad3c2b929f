//! AR(1)-GARCH(1,1) with standardized Student-t innovations.
//!
//! ```text
//! R_t  = μ0 + φ·R_{t−1} + ε_t,   ε_t = σ_t·z_t,   z_t ~ t_ν scaled to unit variance
//! σ²_t = ω + α1·ε²_{t−1} + β1·σ²_{t−1}
//! ```
//!
//! Parameters are fitted by maximum likelihood with a Nelder-Mead simplex run
//! from several starting points in an unconstrained reparameterization that
//! keeps ω > 0, α1, β1 ≥ 0, α1 + β1 < 1, |φ| < 1 and ν > 2.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use chrono::NaiveDate;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ReturnSeries, VolEstimate, VolMethod};
use crate::error::{Error, Result};
use crate::sde_sim::path_rng;

pub const MIN_FIT_LENGTH: usize = 250;

const MAX_ITERS: u64 = 4000;
const MAX_ROUNDS: usize = 4;
const SD_TOLERANCE: f64 = 1e-9;
/// Rounds stop once a restart improves the log-likelihood by less than this.
const ROUND_IMPROVEMENT: f64 = 1e-7;
const PENALTY: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    /// AR(1) coefficient φ.
    pub phi: f64,
    /// Constant μ0 of the mean equation.
    pub mu0: f64,
    pub omega: f64,
    pub alpha1: f64,
    pub beta1: f64,
    /// Student-t degrees of freedom.
    pub nu: f64,
    /// Log-likelihood at these parameters on the fitted series (NaN if unfitted).
    pub log_likelihood: f64,
}

impl GarchParams {
    pub fn new(phi: f64, mu0: f64, omega: f64, alpha1: f64, beta1: f64, nu: f64) -> Result<Self> {
        let p = Self {
            phi,
            mu0,
            omega,
            alpha1,
            beta1,
            nu,
            log_likelihood: f64::NAN,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.phi, self.mu0, self.omega, self.alpha1, self.beta1, self.nu];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("GARCH parameters must be finite"));
        }
        if self.omega <= 0.0 {
            return Err(Error::invalid(format!("omega must be > 0, got {}", self.omega)));
        }
        if self.alpha1 < 0.0 || self.beta1 < 0.0 {
            return Err(Error::invalid("alpha1 and beta1 must be >= 0"));
        }
        if self.alpha1 + self.beta1 >= 1.0 {
            return Err(Error::invalid(format!(
                "alpha1 + beta1 = {} violates covariance stationarity",
                self.alpha1 + self.beta1
            )));
        }
        if self.nu <= 2.0 {
            return Err(Error::invalid(format!("nu must be > 2, got {}", self.nu)));
        }
        Ok(())
    }

    pub fn persistence(&self) -> f64 {
        self.alpha1 + self.beta1
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }
}

/// Fit diagnostics: every start's initial and final log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub start_log_likelihoods: Vec<f64>,
    pub final_log_likelihoods: Vec<f64>,
    pub best_start: usize,
}

fn sample_variance(r: &[f64]) -> f64 {
    // deviations from the first value keep a constant series at exactly zero
    let n = r.len() as f64;
    let d: Vec<f64> = r.iter().map(|x| x - r[0]).collect();
    let mean = d.iter().sum::<f64>() / n;
    d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Conditional log-likelihood and the one-step-ahead variance.
///
/// The first return only seeds the AR lag; the variance recursion starts from
/// the model's unconditional variance, which keeps ω tied to the data scale
/// even where the GARCH lag is unidentified.
fn filter(p: &GarchParams, r: &[f64]) -> (f64, f64) {
    let nu = p.nu;
    let log_const = libm::lgamma(0.5 * (nu + 1.0))
        - libm::lgamma(0.5 * nu)
        - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
    let mut h = p.unconditional_variance();
    let mut ll = 0.0;
    let mut eps = 0.0;
    for t in 1..r.len() {
        if t > 1 {
            h = p.omega + p.alpha1 * eps * eps + p.beta1 * h;
        }
        eps = r[t] - p.mu0 - p.phi * r[t - 1];
        ll += log_const - 0.5 * h.ln() - 0.5 * (nu + 1.0) * (eps * eps / ((nu - 2.0) * h)).ln_1p();
    }
    let h_next = p.omega + p.alpha1 * eps * eps + p.beta1 * h;
    (ll, h_next)
}

/// Maps between constrained parameters and the simplex's unconstrained space.
#[derive(Debug, Clone, Copy)]
struct Transform {
    scale: f64,
    var: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl Transform {
    fn decode(&self, x: &[f64]) -> GarchParams {
        let persistence = logistic(x[3]);
        let share = logistic(x[4]);
        GarchParams {
            mu0: self.scale * x[0],
            phi: x[1].tanh(),
            omega: self.var * x[2].exp(),
            alpha1: persistence * share,
            beta1: persistence * (1.0 - share),
            nu: 2.0 + x[5].exp(),
            log_likelihood: f64::NAN,
        }
    }

    fn encode(&self, p: &GarchParams) -> Vec<f64> {
        let persistence = p.alpha1 + p.beta1;
        vec![
            p.mu0 / self.scale,
            p.phi.atanh(),
            (p.omega / self.var).ln(),
            logit(persistence),
            logit(p.alpha1 / persistence),
            (p.nu - 2.0).ln(),
        ]
    }
}

struct NegLogLik<'a> {
    returns: &'a [f64],
    transform: Transform,
}

impl NegLogLik<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        let p = self.transform.decode(x);
        if p.validate().is_err() {
            return PENALTY;
        }
        let (ll, _) = filter(&p, self.returns);
        if ll.is_finite() {
            -ll
        } else {
            PENALTY
        }
    }
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(x))
    }
}

fn simplex_around(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    simplex
}

struct StartOutcome {
    initial_ll: f64,
    best_x: Vec<f64>,
    best_ll: f64,
    converged: bool,
}

fn run_start(obj: &NegLogLik<'_>, x0: Vec<f64>) -> StartOutcome {
    let initial_ll = -obj.eval(&x0);
    let mut best_x = x0;
    let mut best_ll = initial_ll;
    let mut converged = false;
    let mut step = 0.5;
    for _ in 0..MAX_ROUNDS {
        let solver = match NelderMead::new(simplex_around(&best_x, step)).with_sd_tolerance(SD_TOLERANCE) {
            Ok(s) => s,
            Err(_) => break,
        };
        let problem = NegLogLik {
            returns: obj.returns,
            transform: obj.transform,
        };
        let Ok(res) = Executor::new(problem, solver)
            .configure(|s| s.max_iters(MAX_ITERS))
            .run()
        else {
            break;
        };
        let state = res.state();
        let round_converged = matches!(
            state.get_termination_status(),
            TerminationStatus::Terminated(TerminationReason::SolverConverged)
        );
        let Some(x) = state.get_best_param().cloned() else {
            break;
        };
        let ll = -state.get_best_cost();
        let improvement = ll - best_ll;
        if ll > best_ll {
            best_ll = ll;
            best_x = x;
        }
        if round_converged && improvement < ROUND_IMPROVEMENT {
            converged = true;
            break;
        }
        step = 0.1;
    }
    StartOutcome {
        initial_ll,
        best_x,
        best_ll,
        converged,
    }
}

fn starting_points(r: &[f64], var: f64) -> Vec<GarchParams> {
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    [(0.05, 0.90, 8.0), (0.10, 0.85, 5.0), (0.03, 0.95, 12.0), (0.15, 0.60, 30.0)]
        .iter()
        .map(|&(alpha1, beta1, nu)| GarchParams {
            phi: 0.0,
            mu0: mean,
            omega: var * (1.0 - alpha1 - beta1),
            alpha1,
            beta1,
            nu,
            log_likelihood: f64::NAN,
        })
        .collect()
}

/// Maximum-likelihood AR(1)-GARCH(1,1)-t fit with diagnostics.
pub fn fit_ar_garch_detailed(series: &ReturnSeries) -> Result<GarchFit> {
    let r = series.returns();
    if r.len() < MIN_FIT_LENGTH {
        return Err(Error::invalid(format!(
            "GARCH fit needs at least {MIN_FIT_LENGTH} returns, got {}",
            r.len()
        )));
    }
    let var = sample_variance(r);
    if var.is_nan() || var <= 0.0 || !var.is_finite() {
        return Err(Error::Estimation {
            message: "series has zero variance; likelihood is degenerate".into(),
            best: None,
        });
    }
    let transform = Transform {
        scale: var.sqrt(),
        var,
    };
    let obj = NegLogLik {
        returns: r,
        transform,
    };
    let starts: Vec<Vec<f64>> = starting_points(r, var)
        .iter()
        .map(|p| transform.encode(p))
        .collect();
    let outcomes: Vec<StartOutcome> = starts.into_par_iter().map(|x0| run_start(&obj, x0)).collect();

    let finalize = |o: &StartOutcome| {
        let mut p = transform.decode(&o.best_x);
        p.log_likelihood = o.best_ll;
        p
    };

    // highest likelihood wins; ties keep the lowest start index
    let mut best: Option<usize> = None;
    let mut best_any: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if !o.best_ll.is_finite() {
            continue;
        }
        if best_any.is_none_or(|b| o.best_ll > outcomes[b].best_ll) {
            best_any = Some(i);
        }
        if o.converged
            && finalize(o).validate().is_ok()
            && best.is_none_or(|b| o.best_ll > outcomes[b].best_ll)
        {
            best = Some(i);
        }
    }

    match best {
        Some(i) => Ok(GarchFit {
            params: finalize(&outcomes[i]),
            start_log_likelihoods: outcomes.iter().map(|o| o.initial_ll).collect(),
            final_log_likelihoods: outcomes.iter().map(|o| o.best_ll).collect(),
            best_start: i,
        }),
        None => Err(Error::Estimation {
            message: format!("no start converged to a stationary optimum after {MAX_ROUNDS} rounds"),
            best: best_any.map(|i| Box::new(finalize(&outcomes[i]))),
        }),
    }
}

pub fn fit_ar_garch(series: &ReturnSeries) -> Result<GarchParams> {
    fit_ar_garch_detailed(series).map(|f| f.params)
}

/// One-step-ahead conditional volatility σ_{T+1} after filtering the series.
pub fn garch_forecast_vol(params: &GarchParams, series: &ReturnSeries) -> Result<VolEstimate> {
    params.validate()?;
    let r = series.returns();
    if r.len() < 2 {
        return Err(Error::invalid("GARCH forecast needs at least two returns"));
    }
    let (_, h_next) = filter(params, r);
    Ok(VolEstimate::from_daily(
        VolMethod::Garch,
        h_next.sqrt(),
        r.len(),
        Some(series.last_date()),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchSimulation {
    pub series: ReturnSeries,
    /// True conditional volatility of the next, unobserved return.
    pub next_sigma: f64,
}

/// Simulate `n` returns after a 1000-step burn-in started at the
/// unconditional moments.
pub fn simulate_ar_garch(params: &GarchParams, n: usize, seed: u64) -> Result<GarchSimulation> {
    params.validate()?;
    if params.phi.abs() >= 1.0 {
        return Err(Error::invalid("simulation needs |phi| < 1"));
    }
    if n < 2 {
        return Err(Error::invalid("simulate at least two returns"));
    }
    const BURN_IN: usize = 1000;
    let mut rng = path_rng(seed, 0);
    let scale = ((params.nu - 2.0) / params.nu).sqrt();
    let student = StudentT::new(params.nu).map_err(|e| Error::invalid(e.to_string()))?;
    let mut h = params.unconditional_variance();
    let mut prev = params.mu0 / (1.0 - params.phi);
    let mut eps = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..(BURN_IN + n) {
        if t > 0 {
            h = params.omega + params.alpha1 * eps * eps + params.beta1 * h;
        }
        let z: f64 = if params.nu.is_finite() {
            scale * student.sample(&mut rng)
        } else {
            StandardNormal.sample(&mut rng)
        };
        eps = h.sqrt() * z;
        let r = params.mu0 + params.phi * prev + eps;
        prev = r;
        if t >= BURN_IN {
            out.push(r);
        }
    }
    let next_h = params.omega + params.alpha1 * eps * eps + params.beta1 * h;
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let dates = start.iter_days().take(n).collect();
    Ok(GarchSimulation {
        series: ReturnSeries::new(dates, out)?,
        next_sigma: next_h.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> GarchParams {
        GarchParams::new(0.0, 0.0, 1e-6, 0.08, 0.9, 6.0).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(GarchParams::new(0.0, 0.0, 1e-6, 0.5, 0.5, 6.0).is_err());
        assert!(GarchParams::new(0.0, 0.0, 0.0, 0.1, 0.5, 6.0).is_err());
        assert!(GarchParams::new(0.0, 0.0, 1e-6, 0.1, 0.5, 2.0).is_err());
        assert!(GarchParams::new(0.0, 0.0, 1e-6, -0.1, 0.5, 6.0).is_err());
    }

    #[test]
    fn transform_round_trips() {
        let t = Transform { scale: 0.01, var: 1e-4 };
        let p = GarchParams::new(0.1, 0.0003, 2e-6, 0.07, 0.91, 7.0).unwrap();
        let q = t.decode(&t.encode(&p));
        for (a, b) in [
            (p.phi, q.phi),
            (p.mu0, q.mu0),
            (p.omega, q.omega),
            (p.alpha1, q.alpha1),
            (p.beta1, q.beta1),
            (p.nu, q.nu),
        ] {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn constant_variance_forecast_is_sqrt_omega() {
        let p = GarchParams::new(0.0, 0.0, 4e-4, 0.0, 0.0, 8.0).unwrap();
        let s = ReturnSeries::from_returns(vec![0.01, -0.03, 0.02, 0.05]).unwrap();
        let f = garch_forecast_vol(&p, &s).unwrap();
        assert!((f.sigma_daily - 0.02).abs() < 1e-15);
        assert_eq!(f.method, VolMethod::Garch);
    }

    #[test]
    fn shock_lifts_forecast_above_unconditional_level() {
        let p = truth();
        let mut r = vec![0.0; 300];
        r.push(0.08);
        let s = ReturnSeries::from_returns(r).unwrap();
        let f = garch_forecast_vol(&p, &s).unwrap();
        assert!(f.sigma_daily > p.unconditional_variance().sqrt());
    }

    #[test]
    fn forecast_rejects_invalid_params() {
        let mut p = truth();
        p.beta1 = 0.95;
        let s = ReturnSeries::from_returns(vec![0.01; 10]).unwrap();
        assert!(garch_forecast_vol(&p, &s).is_err());
    }

    #[test]
    fn forecast_tracks_simulated_truth() {
        // filtered with the true parameters, the forecast should sit on the
        // simulator's σ_{T+1} once the start-up variance has washed out
        let p = truth();
        let mut rel = 0.0;
        for seed in 0..100 {
            let sim = simulate_ar_garch(&p, 1000, seed).unwrap();
            let f = garch_forecast_vol(&p, &sim.series).unwrap();
            rel += (f.sigma_daily / sim.next_sigma - 1.0).abs();
        }
        assert!(rel / 100.0 < 0.20, "mean relative error {}", rel / 100.0);
    }

    #[test]
    fn constant_series_is_an_estimation_error() {
        let s = ReturnSeries::from_returns(vec![0.001; 300]).unwrap();
        assert!(matches!(fit_ar_garch(&s), Err(Error::Estimation { .. })));
    }

    #[test]
    fn short_series_rejected() {
        let s = ReturnSeries::from_returns(vec![0.001; 100]).unwrap();
        assert!(matches!(fit_ar_garch(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn fit_never_worse_than_its_starts() {
        let sim = simulate_ar_garch(&truth(), 2000, 77).unwrap();
        let fit = fit_ar_garch_detailed(&sim.series).unwrap();
        let best = fit.params.log_likelihood;
        for ll in &fit.start_log_likelihoods {
            assert!(best >= *ll);
        }
        assert!(fit.params.validate().is_ok());
        let (ll, _) = filter(&fit.params, sim.series.returns());
        assert!((ll - best).abs() < 1e-6 * best.abs());
    }

    #[test]
    fn near_gaussian_iid_data() {
        // no volatility clustering: the ARCH loading stays near zero and the
        // implied unconditional variance matches the sample variance. The
        // GARCH lag is unidentified here, so persistence is not checked.
        let p = GarchParams::new(0.0, 0.0, 1e-4, 0.0, 0.0, 200.0).unwrap();
        let sim = simulate_ar_garch(&p, 3000, 5).unwrap();
        let fit = fit_ar_garch(&sim.series).unwrap();
        assert!(fit.alpha1 < 0.05, "alpha1 {}", fit.alpha1);
        let sv = sample_variance(sim.series.returns());
        let uv = fit.unconditional_variance();
        assert!(((uv - sv) / sv).abs() < 0.15, "unconditional {uv} sample {sv}");
        let f = garch_forecast_vol(&fit, &sim.series).unwrap().sigma_daily;
        assert!(((f * f - sv) / sv).abs() < 0.15, "forecast variance {} sample {sv}", f * f);
    }
}
