#![allow(dead_code)]

use rand::Rng;
use tsselect::model::{GarchInit, ModelConfig, ModelSpec};

/// Power-series coefficients of `1 / (1 + c_1 L + ... + c_k L^k)` up to `L^(n-1)`.
fn inverse_series(c: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    out[0] = 1.0;
    for k in 1..n {
        let mut s = 0.0;
        for (j, cj) in c.iter().enumerate() {
            if j < k {
                s -= cj * out[k - 1 - j];
            }
        }
        out[k] = s;
    }
    out
}

fn convolve_prefix(kernel: &[f64], v: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|t| (0..=t).map(|k| kernel[k] * v[t - k]).sum())
        .collect()
}

/// Gaussian quasi-log-likelihood recomputed through truncated power series instead of the
/// filter recursions. The padded history is materialized explicitly and every term is summed
/// from scratch.
pub fn oracle_likelihood(spec: &ModelSpec, theta: &[f64], x: &[f64], cfg: &ModelConfig) -> f64 {
    let n = x.len();
    // x_padded[k + pad] holds x_{k+1}; indices below `pad` are the zero past
    let pad = spec.max_lag();
    let mut xp = vec![0.0; n + pad];
    xp[pad..].copy_from_slice(x);
    let mut q = vec![0.0; n];
    match *spec {
        ModelSpec::Arma { ar, ma } => {
            let phi = &theta[..ar];
            let psi = &theta[ar..ar + ma];
            let sigma2 = if cfg.known_variance { 1.0 } else { theta[ar + ma] };
            // v = (1 - phi(L)) x on the padded history, then e = v / (1 + psi(L))
            let v: Vec<f64> = (0..n)
                .map(|t| {
                    let mut s = xp[t + pad];
                    for (i, p) in phi.iter().enumerate() {
                        s -= p * xp[t + pad - 1 - i];
                    }
                    s
                })
                .collect();
            let e = convolve_prefix(&inverse_series(psi, n), &v);
            for t in 0..n {
                q[t] = e[t] * e[t] / sigma2 + sigma2.ln();
            }
        }
        ModelSpec::Garch { garch, arch } => {
            let omega = theta[0];
            let a = &theta[1..1 + arch];
            let b = &theta[1 + arch..1 + arch + garch];
            let persistence: f64 = a.iter().sum::<f64>() + b.iter().sum::<f64>();
            let h0 = match cfg.garch_init {
                GarchInit::Intercept => omega,
                GarchInit::Unconditional if persistence < 1.0 => omega / (1.0 - persistence),
                GarchInit::Unconditional => omega,
            };
            // u_t collects the intercept, the ARCH terms and the pre-sample variances;
            // H = u / (1 - b(L)) on the observed range
            let u: Vec<f64> = (0..n)
                .map(|t| {
                    let mut s = omega;
                    for (i, ai) in a.iter().enumerate() {
                        let lag = xp[t + pad - 1 - i];
                        s += ai * lag * lag;
                    }
                    for (j, bj) in b.iter().enumerate() {
                        if j >= t {
                            s += bj * h0;
                        }
                    }
                    s
                })
                .collect();
            let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
            let h = convolve_prefix(&inverse_series(&neg_b, n), &u);
            for t in 0..n {
                q[t] = x[t] * x[t] / h[t] + h[t].ln();
            }
        }
    }
    let mut total = 0.0;
    for v in &q {
        total += v;
    }
    -0.5 * total
}

/// Coefficients with non-negative entries whose sum is a random fraction of `radius`.
fn simplex_point<R: Rng>(rng: &mut R, k: usize, radius: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let s: f64 = w.iter().sum();
    let total = radius * rng.random::<f64>();
    w.iter().map(|v| v / s * total).collect()
}

pub fn random_spec<R: Rng>(rng: &mut R, max_order: usize) -> ModelSpec {
    if rng.random_bool(0.5) {
        ModelSpec::arma(rng.random_range(0..=max_order), rng.random_range(0..=max_order))
    } else {
        ModelSpec::garch(rng.random_range(0..=max_order), rng.random_range(1..=max_order))
    }
}

/// A random point of the admissible set of `spec` under `cfg`.
pub fn random_theta<R: Rng>(rng: &mut R, spec: &ModelSpec, cfg: &ModelConfig) -> Vec<f64> {
    let r = cfg.radius() * 0.999;
    match *spec {
        ModelSpec::Arma { ar, ma } => {
            let mut th: Vec<f64> = simplex_point(rng, ar + ma, r)
                .into_iter()
                .map(|v| if rng.random_bool(0.5) { v } else { -v })
                .collect();
            if !cfg.known_variance {
                th.push(rng.random_range(0.05..4.0));
            }
            th
        }
        ModelSpec::Garch { garch, arch } => {
            let mut th = vec![rng.random_range(0.1..2.0)];
            th.extend(simplex_point(rng, arch + garch, r));
            th
        }
    }
}

pub fn random_series<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let scale = rng.random_range(0.1..3.0);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(-1.0..1.0);
            let heavy = if rng.random_bool(0.05) { 4.0 } else { 1.0 };
            scale * heavy * u * 1.7
        })
        .collect()
}
