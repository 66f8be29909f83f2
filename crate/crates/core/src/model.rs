//! Candidate models, their parameter layouts and admissible parameter sets.
//!
//! Two families are supported:
//!
//! * `ARMA(p,q)`: `X_t = sum_i phi_i X_{t-i} + sum_j psi_j e_{t-j} + e_t` with
//!   `e_t = sigma * xi_t`. Parameters are laid out as `(phi_1..phi_p, psi_1..psi_q, sigma^2)`.
//! * `GARCH(p,q)`: `X_t = sqrt(H_t) xi_t`, `H_t = a_0 + sum_{i<=q} a_i X_{t-i}^2 + sum_{j<=p} b_j H_{t-j}`.
//!   Orders follow Bollerslev: `p` counts lagged variances, `q` counts lagged squares, so
//!   `ARCH(q)` is `GARCH(0,q)`. Parameters are laid out as `(a_0, a_1..a_q, b_1..b_p)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Arma,
    Garch,
}

/// A candidate model. The string form `ARMA(p,q)` / `GARCH(p,q)` is canonical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelSpec {
    Arma { ar: usize, ma: usize },
    Garch { garch: usize, arch: usize },
}

impl ModelSpec {
    pub fn arma(p: usize, q: usize) -> Self {
        ModelSpec::Arma { ar: p, ma: q }
    }

    pub fn ar(p: usize) -> Self {
        ModelSpec::Arma { ar: p, ma: 0 }
    }

    pub fn garch(p: usize, q: usize) -> Self {
        ModelSpec::Garch { garch: p, arch: q }
    }

    pub fn arch(q: usize) -> Self {
        ModelSpec::Garch { garch: 0, arch: q }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Arma { .. } => Family::Arma,
            ModelSpec::Garch { .. } => Family::Garch,
        }
    }

    /// Orders in the order they are written, `(p, q)`.
    pub fn orders(&self) -> (usize, usize) {
        match *self {
            ModelSpec::Arma { ar, ma } => (ar, ma),
            ModelSpec::Garch { garch, arch } => (garch, arch),
        }
    }

    /// Largest lag used by the conditional mean / variance recursions.
    pub fn max_lag(&self) -> usize {
        let (a, b) = self.orders();
        a.max(b)
    }

    /// Parameter count with the innovation variance of ARMA models estimated.
    pub fn dimension(&self) -> usize {
        let (a, b) = self.orders();
        a + b + 1
    }

    /// Number of mean-type and variance-type coordinates `(D^1, D^2)`.
    pub fn split_dimension(&self, known_variance: bool) -> (usize, usize) {
        match *self {
            ModelSpec::Arma { ar, ma } => (ar + ma, usize::from(!known_variance)),
            ModelSpec::Garch { garch, arch } => (0, garch + arch + 1),
        }
    }

    pub fn view<'a>(&self, theta: &'a [f64], known_variance: bool) -> ParamView<'a> {
        match *self {
            ModelSpec::Arma { ar, ma } => ParamView::Arma {
                ar: &theta[..ar],
                ma: &theta[ar..ar + ma],
                sigma2: if known_variance { 1.0 } else { theta[ar + ma] },
            },
            ModelSpec::Garch { garch, arch } => ParamView::Garch {
                omega: theta[0],
                arch: &theta[1..1 + arch],
                garch: &theta[1 + arch..1 + arch + garch],
            },
        }
    }

    fn sort_key(&self) -> (Family, usize, usize) {
        let (a, b) = self.orders();
        (self.family(), a, b)
    }
}

impl Ord for ModelSpec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for ModelSpec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModelSpec::Arma { ar, ma } => write!(f, "ARMA({ar},{ma})"),
            ModelSpec::Garch { garch, arch } => write!(f, "GARCH({garch},{arch})"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse model spec {s:?}; expected ARMA(p,q) or GARCH(p,q)"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let parse = |v: &str| -> Result<usize> {
            if v.is_empty() || !v.bytes().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            v.parse().map_err(|_| bad())
        };
        let (a, b) = (parse(a)?, parse(b)?);
        match name {
            "ARMA" => Ok(ModelSpec::arma(a, b)),
            "GARCH" => Ok(ModelSpec::garch(a, b)),
            _ => Err(bad()),
        }
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ParamView<'a> {
    Arma {
        ar: &'a [f64],
        ma: &'a [f64],
        sigma2: f64,
    },
    Garch {
        omega: f64,
        arch: &'a [f64],
        garch: &'a [f64],
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl From<&[f64]> for ParamVector {
    fn from(v: &[f64]) -> Self {
        ParamVector(v.to_vec())
    }
}

/// How the pre-sample conditional variance of a GARCH recursion is set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GarchInit {
    #[default]
    Intercept,
    Unconditional,
}

/// Settings shared by the constraint set, the filters and the fitter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Margin below one for the l1 contraction condition.
    pub eps_stat: f64,
    /// Lower bound on conditional variances (`sigma^2`, `a_0`, `H_t`).
    pub h_floor: f64,
    /// ARMA innovation variance fixed at one and dropped from the parameter vector.
    pub known_variance: bool,
    pub garch_init: GarchInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            eps_stat: 1e-3,
            h_floor: 1e-6,
            known_variance: false,
            garch_init: GarchInit::Intercept,
        }
    }
}

impl ModelConfig {
    pub fn dimension(&self, spec: &ModelSpec) -> usize {
        let (d1, d2) = spec.split_dimension(self.known_variance);
        d1 + d2
    }

    /// The same config with `h_floor` expressed in units of the mean square of `x`.
    pub fn scaled_to(&self, x: &[f64]) -> ModelConfig {
        let ms = mean_square(x);
        let scale = if ms.is_finite() && ms > 0.0 { ms } else { 1.0 };
        ModelConfig {
            h_floor: self.h_floor * scale,
            ..*self
        }
    }

    /// Radius of the l1 ball holding the recursion coefficients.
    pub fn radius(&self) -> f64 {
        1.0 - self.eps_stat
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// All `ARMA(p,q)` with `p<=max_p, q<=max_q`, then all `GARCH(p',q')` with
/// `p'<=max_p_garch, 1<=q'<=max_q_garch`, in lexicographic order.
pub fn enumerate_family(max_p: usize, max_q: usize, max_p_garch: usize, max_q_garch: usize) -> Vec<ModelSpec> {
    let mut out = Vec::with_capacity((max_p + 1) * (max_q + 1) + (max_p_garch + 1) * max_q_garch);
    for p in 0..=max_p {
        for q in 0..=max_q {
            out.push(ModelSpec::arma(p, q));
        }
    }
    for p in 0..=max_p_garch {
        for q in 1..=max_q_garch {
            out.push(ModelSpec::garch(p, q));
        }
    }
    out
}

pub fn dimension(spec: &ModelSpec) -> usize {
    spec.dimension()
}

/// Same family and every order of `inner` at most the matching order of `outer`.
pub fn is_nested(inner: &ModelSpec, outer: &ModelSpec) -> bool {
    if inner.family() != outer.family() {
        return false;
    }
    let (a1, b1) = inner.orders();
    let (a2, b2) = outer.orders();
    a1 <= a2 && b1 <= b2
}

fn check_len(spec: &ModelSpec, theta: &[f64], cfg: &ModelConfig) -> Result<()> {
    let d = cfg.dimension(spec);
    if theta.len() != d {
        return Err(Error::invalid(format!(
            "{spec} expects {d} parameters, got {}",
            theta.len()
        )));
    }
    Ok(())
}

pub fn constraint_check(spec: &ModelSpec, theta: &[f64], cfg: &ModelConfig) -> Result<bool> {
    check_len(spec, theta, cfg)?;
    if theta.iter().any(|v| !v.is_finite()) {
        return Ok(false);
    }
    let r = cfg.radius();
    Ok(match spec.view(theta, cfg.known_variance) {
        ParamView::Arma { ar, ma, sigma2 } => {
            let l1: f64 = ar.iter().chain(ma).map(|v| v.abs()).sum();
            l1 <= r && sigma2 >= cfg.h_floor
        }
        ParamView::Garch { omega, arch, garch } => {
            let nonneg = arch.iter().chain(garch).all(|&v| v >= 0.0);
            let sum: f64 = arch.iter().chain(garch).sum();
            omega >= cfg.h_floor && nonneg && sum <= r
        }
    })
}

pub(crate) fn require_admissible(spec: &ModelSpec, theta: &[f64], cfg: &ModelConfig) -> Result<()> {
    if constraint_check(spec, theta, cfg)? {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "parameters {theta:?} are outside the admissible set of {spec}"
        )))
    }
}

/// Maps a parameter vector of `inner` into the layout of `outer`, padding new lags with zeros.
pub fn embed(inner: &ModelSpec, theta: &[f64], outer: &ModelSpec, cfg: &ModelConfig) -> Result<ParamVector> {
    check_len(inner, theta, cfg)?;
    if !is_nested(inner, outer) {
        return Err(Error::invalid(format!("{inner} is not nested in {outer}")));
    }
    let pad = |src: &[f64], len: usize, out: &mut Vec<f64>| {
        out.extend_from_slice(src);
        out.extend(std::iter::repeat_n(0.0, len - src.len()));
    };
    let mut out = Vec::with_capacity(cfg.dimension(outer));
    match (inner.view(theta, cfg.known_variance), *outer) {
        (ParamView::Arma { ar, ma, sigma2 }, ModelSpec::Arma { ar: p, ma: q }) => {
            pad(ar, p, &mut out);
            pad(ma, q, &mut out);
            if !cfg.known_variance {
                out.push(sigma2);
            }
        }
        (ParamView::Garch { omega, arch, garch }, ModelSpec::Garch { garch: p, arch: q }) => {
            out.push(omega);
            pad(arch, q, &mut out);
            pad(garch, p, &mut out);
        }
        _ => unreachable!("nesting implies same family"),
    }
    Ok(ParamVector(out))
}
