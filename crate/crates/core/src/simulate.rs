//! Noise generation and trajectory simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{require_admissible, ModelConfig, ModelSpec, ParamView};

pub const DEFAULT_BURN_IN: usize = 500;

/// The generator used everywhere a seed appears.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-variance innovation distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Student-t scaled by `sqrt((dof-2)/dof)`.
    Student { dof: u32 },
}

impl NoiseKind {
    /// Fourth moment of the standardized law, infinite when `dof <= 4`.
    pub fn fourth_moment(&self) -> f64 {
        match *self {
            NoiseKind::Gaussian => 3.0,
            NoiseKind::Student { dof } if dof > 4 => {
                let v = f64::from(dof);
                3.0 * (v - 2.0) / (v - 4.0)
            }
            NoiseKind::Student { .. } => f64::INFINITY,
        }
    }

    pub fn label(&self) -> String {
        match self {
            NoiseKind::Gaussian => "gaussian".into(),
            NoiseKind::Student { dof } => format!("student{dof}"),
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            _ => s
                .strip_prefix("student")
                .and_then(|d| d.parse().ok())
                .map(|dof| NoiseKind::Student { dof })
                .ok_or_else(|| Error::invalid(format!("unknown noise {s:?}; use gaussian or studentN"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Gaussian, seed }
    }

    pub fn student(dof: u32, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Student { dof }, seed }
    }
}

pub fn gen_noise(spec: &NoiseSpec, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("noise length must be at least 1"));
    }
    let mut rng = rng_from_seed(spec.seed);
    draw_noise(spec.kind, n, &mut rng)
}

pub fn draw_noise<R: Rng + ?Sized>(kind: NoiseKind, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    match kind {
        NoiseKind::Gaussian => Ok((0..n).map(|_| StandardNormal.sample(rng)).collect()),
        NoiseKind::Student { dof } => {
            if dof <= 2 {
                return Err(Error::invalid(format!(
                    "Student noise needs dof > 2 for a finite variance, got {dof}"
                )));
            }
            let v = f64::from(dof);
            let t = StudentT::new(v).map_err(|e| Error::invalid(e.to_string()))?;
            let scale = ((v - 2.0) / v).sqrt();
            Ok((0..n).map(|_| scale * t.sample(rng)).collect())
        }
    }
}

/// Simulates `n` observations after discarding `burn_in`, with noise drawn from `noise`.
pub fn simulate_process(
    spec: &ModelSpec,
    theta: &[f64],
    noise: &NoiseSpec,
    n: usize,
    burn_in: usize,
    cfg: &ModelConfig,
) -> Result<Vec<f64>> {
    require_admissible(spec, theta, cfg)?;
    let xi = gen_noise(noise, n + burn_in)?;
    simulate_with_innovations(spec, theta, &xi, burn_in, cfg)
}

/// Runs the recursion from a zero past on the given innovations and drops the first `burn_in` values.
pub fn simulate_with_innovations(
    spec: &ModelSpec,
    theta: &[f64],
    xi: &[f64],
    burn_in: usize,
    cfg: &ModelConfig,
) -> Result<Vec<f64>> {
    require_admissible(spec, theta, cfg)?;
    if xi.len() <= burn_in {
        return Err(Error::invalid("need more innovations than burn-in samples"));
    }
    let total = xi.len();
    let mut x = vec![0.0; total];
    match spec.view(theta, cfg.known_variance) {
        ParamView::Arma { ar, ma, sigma2 } => {
            let sigma = sigma2.sqrt();
            let mut e = vec![0.0; total];
            for t in 0..total {
                e[t] = sigma * xi[t];
                let mut v = e[t];
                for (i, phi) in ar.iter().enumerate().take(t) {
                    v += phi * x[t - 1 - i];
                }
                for (j, psi) in ma.iter().enumerate().take(t) {
                    v += psi * e[t - 1 - j];
                }
                x[t] = v;
            }
        }
        ParamView::Garch { omega, arch, garch } => {
            let mut h = vec![0.0; total];
            for t in 0..total {
                let mut v = omega;
                for (i, a) in arch.iter().enumerate().take(t) {
                    let lag = x[t - 1 - i];
                    v += a * lag * lag;
                }
                for (j, b) in garch.iter().enumerate() {
                    v += b * if j < t { h[t - 1 - j] } else { omega };
                }
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Internal(format!(
                        "conditional variance {v} at step {t} of {spec}"
                    )));
                }
                h[t] = v;
                x[t] = v.sqrt() * xi[t];
            }
        }
    }
    x.drain(..burn_in);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        (m, v)
    }

    #[test]
    fn noise_moments() {
        let (m, v) = mean_var(&gen_noise(&NoiseSpec::gaussian(1), 100_000).unwrap());
        assert!(m.abs() < 0.02);
        assert!((0.98..=1.02).contains(&v), "{v}");
        let (_, v) = mean_var(&gen_noise(&NoiseSpec::student(5, 2), 100_000).unwrap());
        assert!((0.95..=1.05).contains(&v), "{v}");
    }

    #[test]
    fn noise_is_reproducible() {
        let a = gen_noise(&NoiseSpec::student(5, 9), 50).unwrap();
        assert_eq!(a, gen_noise(&NoiseSpec::student(5, 9), 50).unwrap());
        assert_ne!(a, gen_noise(&NoiseSpec::student(5, 10), 50).unwrap());
    }

    #[test]
    fn bad_noise() {
        assert!(gen_noise(&NoiseSpec::student(2, 0), 10).is_err());
        assert!(gen_noise(&NoiseSpec::gaussian(0), 0).is_err());
    }

    #[test]
    fn zero_noise_gives_zero_series() {
        let cfg = ModelConfig::default();
        let x = simulate_with_innovations(&ModelSpec::arma(0, 0), &[4.0], &[0.0; 20], 5, &cfg).unwrap();
        assert_eq!(x, vec![0.0; 15]);
    }

    #[test]
    fn constant_variance_garch_scales_noise() {
        let cfg = ModelConfig::default();
        let xi = gen_noise(&NoiseSpec::gaussian(3), 100).unwrap();
        let x = simulate_with_innovations(&ModelSpec::garch(0, 1), &[0.25, 0.0], &xi, 0, &cfg).unwrap();
        for (a, b) in x.iter().zip(&xi) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn ar2_lag_one_autocorrelation() {
        let cfg = ModelConfig::default();
        let x = simulate_process(
            &ModelSpec::arma(2, 0),
            &[0.5, 0.2, 1.0],
            &NoiseSpec::gaussian(11),
            100_000,
            DEFAULT_BURN_IN,
            &cfg,
        )
        .unwrap();
        let (m, v) = mean_var(&x);
        let c1 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / x.len() as f64;
        assert!((c1 / v - 0.625).abs() < 0.02, "{}", c1 / v);
    }

    #[test]
    fn rejects_inadmissible_parameters() {
        let cfg = ModelConfig::default();
        let r = simulate_process(&ModelSpec::garch(1, 1), &[0.1, 0.6, 0.5], &NoiseSpec::gaussian(0), 10, 0, &cfg);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn halves_agree_for_presets() {
        let cfg = ModelConfig::default();
        // the ARCH(2) half-sample variance ratio has a standard deviation near 4% at this length
        let presets: [(ModelSpec, Vec<f64>, f64); 3] = [
            (ModelSpec::arma(2, 0), vec![0.5, 0.2, 1.0], 0.05),
            (ModelSpec::arch(2), vec![0.2, 0.4, 0.2], 0.15),
            (ModelSpec::arma(6, 0), vec![0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 1.0], 0.05),
        ];
        for (i, (spec, theta, var_tol)) in presets.iter().enumerate() {
            let x = simulate_process(spec, theta, &NoiseSpec::gaussian(100 + i as u64), 100_000, 500, &cfg).unwrap();
            let (m1, v1) = mean_var(&x[..50_000]);
            let (m2, v2) = mean_var(&x[50_000..]);
            let sd = v1.sqrt();
            assert!((m1 - m2).abs() < 0.05 * sd, "{spec}: means {m1} {m2}");
            assert!((v1 / v2 - 1.0).abs() < *var_tol, "{spec}: variances {v1} {v2}");
        }
    }

    #[test]
    fn burn_in_length_does_not_shift_moments() {
        let cfg = ModelConfig::default();
        let spec = ModelSpec::arch(2);
        let theta = [0.2, 0.4, 0.2];
        let tail = gen_noise(&NoiseSpec::gaussian(77), 50_000).unwrap();
        let mut short = gen_noise(&NoiseSpec::gaussian(5), 500).unwrap();
        short.extend_from_slice(&tail);
        let mut long = gen_noise(&NoiseSpec::gaussian(6), 1000).unwrap();
        long.extend_from_slice(&tail);
        let a = simulate_with_innovations(&spec, &theta, &short, 500, &cfg).unwrap();
        let b = simulate_with_innovations(&spec, &theta, &long, 1000, &cfg).unwrap();
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        assert!((ma - mb).abs() < 0.01);
        assert!((va / vb - 1.0).abs() < 0.02);
    }
}
