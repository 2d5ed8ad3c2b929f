//! Stratonovich α-integrals on Brownian grids and log-exact simulation of the
//! Itô / Stratonovich-α geometric Brownian motions.
//!
//! The α-integral evaluates the integrand at the offset point
//! `t_j(1−α) + α·t_{j+1}` of every grid cell; `α = 0` is the Itô sum and
//! `α = ½` the classical Stratonovich midpoint sum. A Stratonovich-α GBM
//! `dS = μS dt + σS ∘^(α) dB` is simulated as the equivalent Itô GBM with
//! drift `μ + ασ²`.
//!
//! Every path draws from its own ChaCha stream keyed by the master seed, so
//! path `i` is the same whatever the thread count.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::mean_and_std_error;
use crate::pricing::check_predictability;

/// Relative tolerance on grid spacing when a path is built from external data.
const GRID_TOL: f64 = 1e-9;

pub(crate) fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Brownian motion sampled on a uniform grid `0 = t_0 < … < t_k = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid(format!(
                "times ({}) and values ({}) differ in length",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::invalid("a Brownian path needs at least two grid points"));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("Brownian path contains non-finite values"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid(format!("grid must start at 0, got {}", times[0])));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid(format!("B(0) must be 0, got {}", values[0])));
        }
        let steps = times.len() - 1;
        let horizon = times[steps];
        if horizon <= 0.0 {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        let dt = horizon / steps as f64;
        for (j, pair) in times.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::invalid(format!("grid not strictly increasing at index {}", j + 1)));
            }
            if ((pair[1] - pair[0]) - dt).abs() > GRID_TOL * horizon {
                return Err(Error::invalid(format!("grid spacing not uniform at index {}", j + 1)));
            }
        }
        Ok(Self { times, values })
    }

    /// `steps` i.i.d. Normal(0, Δt) increments from a seeded generator.
    pub fn generate(horizon: f64, steps: usize, seed: u64) -> Result<Self> {
        Self::generate_stream(horizon, steps, seed, 0)
    }

    /// As [`BrownianPath::generate`], drawing from substream `stream` of `seed`;
    /// distinct streams give independent paths.
    pub fn generate_stream(horizon: f64, steps: usize, seed: u64, stream: u64) -> Result<Self> {
        check_grid(horizon, steps)?;
        let mut rng = path_rng(seed, stream);
        let sqrt_dt = (horizon / steps as f64).sqrt();
        let increments = (0..steps).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sqrt_dt * z
        });
        Ok(Self::from_increments_unchecked(horizon, steps, increments))
    }

    pub fn from_increments(horizon: f64, increments: &[f64]) -> Result<Self> {
        check_grid(horizon, increments.len())?;
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite Brownian increment"));
        }
        Ok(Self::from_increments_unchecked(
            horizon,
            increments.len(),
            increments.iter().copied(),
        ))
    }

    fn from_increments_unchecked(
        horizon: f64,
        steps: usize,
        increments: impl Iterator<Item = f64>,
    ) -> Self {
        let times = grid(horizon, steps);
        let mut values = Vec::with_capacity(steps + 1);
        values.push(0.0);
        let mut b = 0.0;
        for db in increments {
            b += db;
            values.push(b);
        }
        Self { times, values }
    }

    /// Keep every `stride`-th node. `stride` must divide the step count.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.steps().is_multiple_of(stride) {
            return Err(Error::invalid(format!(
                "stride {stride} does not divide {} steps",
                self.steps()
            )));
        }
        let steps = self.steps() / stride;
        let values = self.values.iter().step_by(stride).copied().collect();
        Ok(Self {
            times: grid(self.horizon(), steps),
            values,
        })
    }

    /// B(t) by linear interpolation between nodes; exact at grid nodes.
    pub fn value_at(&self, t: f64) -> f64 {
        let steps = self.steps();
        let x = (t / self.horizon() * steps as f64).clamp(0.0, steps as f64);
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 {
            return self.values[nearest as usize];
        }
        let j = (x.floor() as usize).min(steps - 1);
        let w = x - j as f64;
        (1.0 - w) * self.values[j] + w * self.values[j + 1]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.steps()]
    }

    pub fn dt(&self) -> f64 {
        self.horizon() / self.steps() as f64
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.steps()]
    }
}

fn check_grid(horizon: f64, steps: usize) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be finite and > 0, got {horizon}")));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    Ok(())
}

fn grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|j| if j == steps { horizon } else { horizon * j as f64 / steps as f64 })
        .collect()
}

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Integrand θ sampled on a Brownian grid, with a rule for evaluating it
/// between nodes.
#[derive(Clone)]
pub struct IntegrandPath {
    values: Vec<f64>,
    exact: Option<TimeFn>,
}

impl std::fmt::Debug for IntegrandPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrandPath")
            .field("values", &self.values)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl IntegrandPath {
    /// Grid values only; off-grid points use linear interpolation.
    pub fn from_grid(values: Vec<f64>) -> Self {
        Self {
            values,
            exact: None,
        }
    }

    pub fn constant(c: f64, path: &BrownianPath) -> Self {
        Self::from_fn(path, move |_| c)
    }

    /// θ(t) = f(t), evaluated exactly at every offset point.
    pub fn from_fn(path: &BrownianPath, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let values = path.times().iter().map(|&t| f(t)).collect();
        Self {
            values,
            exact: Some(Arc::new(f)),
        }
    }

    /// θ = B on the path's own grid, linearly interpolated between nodes.
    pub fn brownian(path: &BrownianPath) -> Self {
        Self::from_grid(path.values().to_vec())
    }

    /// θ = B read from a finer path that contains the offset points.
    pub fn brownian_from_fine(coarse: &BrownianPath, fine: Arc<BrownianPath>) -> Self {
        Self::from_fn(coarse, move |t| fine.value_at(t))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn at_offset(&self, times: &[f64], j: usize, alpha: f64) -> f64 {
        match &self.exact {
            Some(f) => f(times[j] * (1.0 - alpha) + alpha * times[j + 1]),
            None => (1.0 - alpha) * self.values[j] + alpha * self.values[j + 1],
        }
    }
}

/// `Σ θ(t_j(1−α) + α t_{j+1})·(B(t_{j+1}) − B(t_j))`.
pub fn stratonovich_alpha_integral(
    theta: &IntegrandPath,
    b: &BrownianPath,
    alpha: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if theta.values.len() != b.values.len() {
        return Err(Error::invalid(format!(
            "integrand has {} nodes but the Brownian path has {}",
            theta.values.len(),
            b.values.len()
        )));
    }
    let times = b.times();
    let values = b.values();
    Ok((0..b.steps())
        .map(|j| theta.at_offset(times, j, alpha) * (values[j + 1] - values[j]))
        .sum())
}

/// Left-point (Itô) sum.
pub fn ito_integral(theta: &IntegrandPath, b: &BrownianPath) -> Result<f64> {
    stratonovich_alpha_integral(theta, b, 0.0)
}

/// Midpoint (Stratonovich ½) sum.
pub fn stratonovich_half_integral(theta: &IntegrandPath, b: &BrownianPath) -> Result<f64> {
    stratonovich_alpha_integral(theta, b, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSimConfig {
    /// Drift per year.
    pub mu: f64,
    /// Volatility per sqrt-year.
    pub sigma: f64,
    /// Stratonovich parameter in [0, 1].
    pub alpha: f64,
    pub s0: f64,
    /// Horizon T in years.
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    /// Store every path, not just terminal values.
    pub keep_paths: bool,
}

impl PathSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid(format!("s0 must be finite and > 0, got {}", self.s0)));
        }
        check_grid(self.horizon, self.steps)?;
        if self.paths == 0 {
            return Err(Error::invalid("paths must be >= 1"));
        }
        Ok(())
    }

    /// Itô drift of the equivalent SDE, `μ + ασ²`.
    pub fn effective_drift(&self) -> f64 {
        self.mu + self.alpha * self.sigma * self.sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBatch {
    pub config: PathSimConfig,
    pub terminal: Vec<f64>,
    /// One row per path, `steps + 1` prices each, when `keep_paths` was set.
    pub paths: Option<Vec<Vec<f64>>>,
}

impl PathBatch {
    pub fn log_returns(&self) -> Vec<f64> {
        let s0 = self.config.s0;
        self.terminal.iter().map(|s| (s / s0).ln()).collect()
    }

    /// Mean of `ln(S(T)/S0)` and its standard error.
    pub fn mean_log_return(&self) -> (f64, f64) {
        mean_and_std_error(&self.log_returns())
    }

    /// Mean log-return per year and its standard error.
    pub fn mean_log_drift(&self) -> (f64, f64) {
        let (m, se) = self.mean_log_return();
        (m / self.config.horizon, se / self.config.horizon)
    }
}

/// Itô GBM `dS = μS dt + σS dB` (α is ignored).
pub fn simulate_ito_gbm(cfg: &PathSimConfig) -> Result<PathBatch> {
    cfg.validate()?;
    Ok(simulate_log_exact(cfg, cfg.mu))
}

/// Stratonovich-α GBM, simulated as the Itô GBM with drift `μ + ασ²`.
pub fn simulate_stratonovich_alpha(cfg: &PathSimConfig) -> Result<PathBatch> {
    cfg.validate()?;
    Ok(simulate_log_exact(cfg, cfg.effective_drift()))
}

fn simulate_log_exact(cfg: &PathSimConfig, drift: f64) -> PathBatch {
    let nu = drift - 0.5 * cfg.sigma * cfg.sigma;
    let times = grid(cfg.horizon, cfg.steps);
    let sqrt_dt = (cfg.horizon / cfg.steps as f64).sqrt();

    let simulated: Vec<(f64, Option<Vec<f64>>)> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i as u64);
            let mut b = 0.0;
            let mut path = cfg.keep_paths.then(|| {
                let mut v = Vec::with_capacity(cfg.steps + 1);
                v.push(cfg.s0);
                v
            });
            for t in &times[1..] {
                let z: f64 = StandardNormal.sample(&mut rng);
                b += sqrt_dt * z;
                if let Some(p) = path.as_mut() {
                    p.push(cfg.s0 * (nu * t + cfg.sigma * b).exp());
                }
            }
            let terminal = cfg.s0 * (nu * cfg.horizon + cfg.sigma * b).exp();
            (terminal, path)
        })
        .collect();

    let (terminal, paths): (Vec<f64>, Vec<Option<Vec<f64>>>) = simulated.into_iter().unzip();
    PathBatch {
        config: *cfg,
        terminal,
        paths: if cfg.keep_paths {
            Some(paths.into_iter().flatten().collect())
        } else {
            None
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    pub paths: usize,
}

/// Discounted mean call payoff with `S(T)` drawn under the risk-neutral
/// drift `r − pσ²`.
#[allow(clippy::too_many_arguments)]
pub fn mc_risk_neutral_call(
    s0: f64,
    strike: f64,
    tau: f64,
    rate: f64,
    sigma: f64,
    p: f64,
    paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if ![s0, strike, tau, rate, sigma, p].iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("Monte Carlo inputs must be finite"));
    }
    if s0 <= 0.0 || strike <= 0.0 {
        return Err(Error::invalid("spot and strike must be > 0"));
    }
    if tau <= 0.0 {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    if sigma < 0.0 {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    check_predictability(p)?;
    let cfg = PathSimConfig {
        mu: rate - p * sigma * sigma,
        sigma,
        alpha: 0.0,
        s0,
        horizon: tau,
        steps: 1,
        paths,
        seed,
        keep_paths: false,
    };
    let batch = simulate_ito_gbm(&cfg)?;
    let discount = (-rate * tau).exp();
    let payoffs: Vec<f64> = batch
        .terminal
        .iter()
        .map(|s| discount * (s - strike).max(0.0))
        .collect();
    let (price, std_error) = mean_and_std_error(&payoffs);
    Ok(McEstimate {
        price,
        std_error,
        paths,
    })
}
