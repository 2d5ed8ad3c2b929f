//! Option pricing under a predictability-adjusted Black-Scholes model.
//!
//! A predictability parameter `p` in `[-1, 1]` acts as a continuous dividend
//! yield `p * sigma^2` on the underlying. The crate prices options under that
//! model, simulates the stochastic integrals behind it, estimates volatility
//! from market data and backs out the implied `p` from option quotes.

pub mod calibration;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod numeric;
pub mod pricing;
pub mod sde_sim;
pub mod volatility;

pub use error::{Error, Result};
pub use pricing::{OptionRight, PricingInputs};
