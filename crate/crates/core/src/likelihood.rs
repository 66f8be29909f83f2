//! Truncated conditional mean/variance filters and the Gaussian quasi-log-likelihood
//!
//! `L_n(theta) = -1/2 sum_t q_t(theta)` with `q_t = (X_t - f_t)^2 / H_t + log H_t`, where the
//! unobserved past is replaced by zeros (observations and ARMA residuals) and the pre-sample
//! GARCH variance by `a_0` (or the unconditional variance, see [`GarchInit`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{require_admissible, GarchInit, ModelConfig, ModelSpec, ParamView};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterOutput {
    pub f_hat: Vec<f64>,
    pub h_hat: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub fn filter(spec: &ModelSpec, theta: &[f64], x: &[f64], cfg: &ModelConfig) -> Result<FilterOutput> {
    require_admissible(spec, theta, cfg)?;
    if x.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    let n = x.len();
    let mut f_hat = vec![0.0; n];
    let mut h_hat = vec![0.0; n];
    match spec.view(theta, cfg.known_variance) {
        ParamView::Arma { ar, ma, sigma2 } => {
            let mut e = vec![0.0; n];
            arma_residuals(ar, ma, x, &mut e);
            for t in 0..n {
                f_hat[t] = x[t] - e[t];
            }
            h_hat.fill(sigma2.max(cfg.h_floor));
        }
        ParamView::Garch { omega, arch, garch } => {
            garch_variances(omega, arch, garch, x, cfg, &mut h_hat);
        }
    }
    let residuals = x
        .iter()
        .zip(&f_hat)
        .zip(&h_hat)
        .map(|((x, f), h)| (x - f) / h.sqrt())
        .collect();
    Ok(FilterOutput { f_hat, h_hat, residuals })
}

/// Per-observation contrasts `q_t`.
pub fn contributions(spec: &ModelSpec, theta: &[f64], x: &[f64], cfg: &ModelConfig) -> Result<Vec<f64>> {
    require_admissible(spec, theta, cfg)?;
    if x.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    let mut q = vec![0.0; x.len()];
    let mut scratch = Vec::new();
    contributions_unchecked(spec, theta, x, cfg, &mut q, &mut scratch);
    Ok(q)
}

pub fn quasi_log_likelihood(spec: &ModelSpec, theta: &[f64], x: &[f64], cfg: &ModelConfig) -> Result<f64> {
    let q = contributions(spec, theta, x, cfg)?;
    if let Some(t) = q.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { t: t + 1 });
    }
    Ok(-0.5 * q.iter().sum::<f64>())
}

/// ARMA residuals `e_t = x_t - f_t` with zero pre-sample values.
pub(crate) fn arma_residuals(ar: &[f64], ma: &[f64], x: &[f64], e: &mut [f64]) {
    for t in 0..x.len() {
        let mut f = 0.0;
        for (i, phi) in ar.iter().enumerate().take(t) {
            f += phi * x[t - 1 - i];
        }
        for (j, psi) in ma.iter().enumerate().take(t) {
            f += psi * e[t - 1 - j];
        }
        e[t] = x[t] - f;
    }
}

pub(crate) fn presample_variance(omega: f64, arch: &[f64], garch: &[f64], init: GarchInit) -> f64 {
    match init {
        GarchInit::Intercept => omega,
        GarchInit::Unconditional => {
            let persistence: f64 = arch.iter().chain(garch).sum();
            if persistence < 1.0 {
                omega / (1.0 - persistence)
            } else {
                omega
            }
        }
    }
}

pub(crate) fn garch_variances(omega: f64, arch: &[f64], garch: &[f64], x: &[f64], cfg: &ModelConfig, h: &mut [f64]) {
    let h0 = presample_variance(omega, arch, garch, cfg.garch_init);
    for t in 0..x.len() {
        let mut v = omega;
        for (i, a) in arch.iter().enumerate().take(t) {
            let lag = x[t - 1 - i];
            v += a * lag * lag;
        }
        for (j, b) in garch.iter().enumerate() {
            v += b * if j < t { h[t - 1 - j] } else { h0 };
        }
        h[t] = v.max(cfg.h_floor);
    }
}

/// Fills `q` with the contrasts at `theta` without checking admissibility.
///
/// Used by the optimizer on projected points and by finite differences that step
/// slightly outside the admissible set.
pub(crate) fn contributions_unchecked(
    spec: &ModelSpec,
    theta: &[f64],
    x: &[f64],
    cfg: &ModelConfig,
    q: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    scratch.resize(x.len(), 0.0);
    match spec.view(theta, cfg.known_variance) {
        ParamView::Arma { ar, ma, sigma2 } => {
            arma_residuals(ar, ma, x, scratch);
            let s2 = sigma2.max(cfg.h_floor);
            let log_s2 = s2.ln();
            for (qt, e) in q.iter_mut().zip(scratch.iter()) {
                *qt = e * e / s2 + log_s2;
            }
        }
        ParamView::Garch { omega, arch, garch } => {
            garch_variances(omega, arch, garch, x, cfg, scratch);
            for ((qt, h), xt) in q.iter_mut().zip(scratch.iter()).zip(x) {
                *qt = xt * xt / h + h.ln();
            }
        }
    }
}
