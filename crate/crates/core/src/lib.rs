//! Penalized model selection for ARMA and GARCH processes under Gaussian quasi-likelihood,
//! with minimal-penalty calibration and a Monte Carlo harness.

pub mod calibrate;
pub mod criteria;
pub mod error;
pub mod fit;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod par;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{ModelConfig, ModelSpec, ParamVector};
