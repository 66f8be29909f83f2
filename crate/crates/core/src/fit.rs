//! Gaussian QMLE over the admissible parameter set, and the `F`/`G` matrices behind
//! sandwich standard errors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{arma_residuals, contributions_unchecked, filter, garch_variances, quasi_log_likelihood};
use crate::model::{embed, is_nested, mean_square, ModelConfig, ModelSpec, ParamVector};
use crate::optimize::NelderMead;
use crate::par;
use crate::simulate::rng_from_seed;

/// Relative finite-difference step, `eps^(1/3)`.
pub fn fd_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Coordinates closer than this to an inequality bound count as on the boundary.
const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub multistarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Estimate `F`, `G` and standard errors after the optimum is found.
    pub covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            multistarts: 5,
            max_iters: 2000,
            tol: 1e-8,
            seed: 0,
            covariance: true,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.multistarts == 0 {
            return Err(Error::invalid("multistarts must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub theta: ParamVector,
    pub loglik: f64,
    pub converged: bool,
    pub at_boundary: bool,
    pub n_evals: usize,
    pub n_obs: usize,
    pub dim: usize,
    pub residuals: Vec<f64>,
    pub f_matrix: Option<DMatrix<f64>>,
    pub g_matrix: Option<DMatrix<f64>>,
    pub std_errors: Option<Vec<f64>>,
    /// Effective config, with `h_floor` rescaled to the data.
    pub config: ModelConfig,
}

/// JSON form of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub spec: ModelSpec,
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub at_boundary: bool,
    pub n_obs: usize,
    pub dim: usize,
    pub n_evals: usize,
    pub std_errors: Option<Vec<f64>>,
}

impl FittedModel {
    /// A fit known only through its maximized quasi-likelihood, e.g. loaded from a report.
    pub fn from_loglik(spec: ModelSpec, dim: usize, loglik: f64, n_obs: usize) -> Self {
        FittedModel {
            spec,
            theta: ParamVector(vec![0.0; dim]),
            loglik,
            converged: true,
            at_boundary: false,
            n_evals: 0,
            n_obs,
            dim,
            residuals: Vec::new(),
            f_matrix: None,
            g_matrix: None,
            std_errors: None,
            config: ModelConfig::default(),
        }
    }

    pub fn report(&self) -> FitReport {
        FitReport {
            spec: self.spec,
            theta: self.theta.0.clone(),
            loglik: self.loglik,
            converged: self.converged,
            at_boundary: self.at_boundary,
            n_obs: self.n_obs,
            dim: self.dim,
            n_evals: self.n_evals,
            std_errors: self.std_errors.clone(),
        }
    }
}

/// The optimization problem in internal coordinates `z`.
///
/// ARMA: `z` holds the recursion coefficients and `sigma^2` is profiled out in closed form.
/// GARCH: `z = (a_0 / s, a, b)` with `s` the mean square of the data.
struct Problem<'a> {
    spec: ModelSpec,
    x: &'a [f64],
    cfg: ModelConfig,
    scale: f64,
    radius: f64,
}

impl<'a> Problem<'a> {
    fn new(spec: ModelSpec, x: &'a [f64], cfg: &ModelConfig) -> Self {
        let scaled = cfg.scaled_to(x);
        let ms = mean_square(x);
        Problem {
            spec,
            x,
            cfg: scaled,
            scale: if ms > 0.0 { ms } else { 1.0 },
            // stay a hair inside so rounding never leaves the admissible set
            radius: cfg.radius() * (1.0 - 1e-12),
        }
    }

    fn nz(&self) -> usize {
        match self.spec {
            ModelSpec::Arma { ar, ma } => ar + ma,
            ModelSpec::Garch { garch, arch } => 1 + garch + arch,
        }
    }

    fn project(&self, z: &[f64]) -> Vec<f64> {
        let mut p = z.to_vec();
        match self.spec {
            ModelSpec::Arma { .. } => project_l1_ball(&mut p, self.radius),
            ModelSpec::Garch { .. } => {
                p[0] = p[0].max(self.cfg.h_floor / self.scale);
                project_capped_simplex(&mut p[1..], self.radius);
            }
        }
        p
    }

    fn arma_profile(&self, e: &[f64]) -> (f64, f64) {
        let s = mean_square(e);
        if self.cfg.known_variance {
            (1.0, 0.5 * s)
        } else {
            let s2 = s.max(self.cfg.h_floor);
            (s2, 0.5 * (s / s2 + s2.ln()))
        }
    }

    /// `-L_n / n` at an admissible `z`.
    fn nll(&self, z: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.resize(self.x.len(), 0.0);
        match self.spec {
            ModelSpec::Arma { ar, .. } => {
                arma_residuals(&z[..ar], &z[ar..], self.x, buf);
                self.arma_profile(buf).1
            }
            ModelSpec::Garch { arch, .. } => {
                let omega = z[0] * self.scale;
                garch_variances(omega, &z[1..1 + arch], &z[1 + arch..], self.x, &self.cfg, buf);
                let s: f64 = buf.iter().zip(self.x).map(|(h, x)| x * x / h + h.ln()).sum();
                0.5 * s / self.x.len() as f64
            }
        }
    }

    fn objective(&self, z: &[f64], buf: &mut Vec<f64>) -> f64 {
        let p = self.project(z);
        let dist2: f64 = z.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
        self.nll(&p, buf) + dist2
    }

    fn theta_of(&self, z: &[f64]) -> ParamVector {
        let p = self.project(z);
        match self.spec {
            ModelSpec::Arma { ar, .. } => {
                let mut theta = p.clone();
                if !self.cfg.known_variance {
                    let mut e = vec![0.0; self.x.len()];
                    arma_residuals(&p[..ar], &p[ar..], self.x, &mut e);
                    theta.push(self.arma_profile(&e).0);
                }
                ParamVector(theta)
            }
            ModelSpec::Garch { .. } => {
                let mut theta = p;
                theta[0] *= self.scale;
                ParamVector(theta)
            }
        }
    }

    fn z_of(&self, theta: &[f64]) -> Vec<f64> {
        match self.spec {
            ModelSpec::Arma { ar, ma } => theta[..ar + ma].to_vec(),
            ModelSpec::Garch { .. } => {
                let mut z = theta.to_vec();
                z[0] /= self.scale;
                z
            }
        }
    }

    fn steps(&self, z: &[f64]) -> Vec<f64> {
        match self.spec {
            ModelSpec::Arma { .. } => vec![0.1; z.len()],
            ModelSpec::Garch { .. } => {
                let mut s = vec![0.05; z.len()];
                s[0] = 0.25 * z[0].max(0.05);
                s
            }
        }
    }

    fn heuristic_start(&self) -> Vec<f64> {
        match self.spec {
            ModelSpec::Arma { ar, ma } => {
                let mut z = least_squares_ar(self.x, ar);
                z.extend(std::iter::repeat_n(0.0, ma));
                self.project(&z)
            }
            ModelSpec::Garch { garch, arch } => {
                let mut z = vec![0.1 * variance(self.x) / self.scale];
                z.extend(std::iter::repeat_n(0.05, arch));
                z.extend(std::iter::repeat_n(0.8 / garch.max(1) as f64, garch));
                self.project(&z)
            }
        }
    }

    fn random_start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.nz();
        match self.spec {
            ModelSpec::Arma { .. } => {
                let mut z: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let l1: f64 = z.iter().map(|v| v.abs()).sum();
                let target = rng.random_range(0.0..0.9) * self.radius;
                if l1 > 0.0 {
                    z.iter_mut().for_each(|v| *v *= target / l1);
                }
                z
            }
            ModelSpec::Garch { .. } => {
                let mut z = vec![rng.random_range(0.05..1.0) * variance(self.x).max(self.cfg.h_floor) / self.scale];
                let w: Vec<f64> = (1..k).map(|_| rng.random_range(0.0..1.0)).collect();
                let total: f64 = w.iter().sum();
                let target = rng.random_range(0.1..0.95) * self.radius;
                z.extend(w.iter().map(|v| if total > 0.0 { v * target / total } else { 0.0 }));
                self.project(&z)
            }
        }
    }

    fn on_boundary(&self, z: &[f64]) -> bool {
        match self.spec {
            ModelSpec::Arma { .. } => {
                let l1: f64 = z.iter().map(|v| v.abs()).sum();
                l1 >= self.radius - BOUNDARY_TOL
            }
            ModelSpec::Garch { .. } => {
                let floor = self.cfg.h_floor / self.scale;
                let sum: f64 = z[1..].iter().sum();
                z[0] <= floor * (1.0 + BOUNDARY_TOL) || z[1..].iter().any(|&v| v <= BOUNDARY_TOL) || sum >= self.radius - BOUNDARY_TOL
            }
        }
    }
}

pub(crate) fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
}

/// Euclidean projection onto `{z : |z|_1 <= r}`.
fn project_l1_ball(z: &mut [f64], r: f64) {
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    if l1 <= r {
        return;
    }
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let tau = simplex_threshold(&mut mags, r);
    for v in z.iter_mut() {
        *v = v.signum() * (v.abs() - tau).max(0.0);
    }
}

/// Euclidean projection onto `{z >= 0, sum z <= r}`.
fn project_capped_simplex(z: &mut [f64], r: f64) {
    for v in z.iter_mut() {
        *v = v.max(0.0);
    }
    let sum: f64 = z.iter().sum();
    if sum <= r {
        return;
    }
    let mut vals = z.to_vec();
    let tau = simplex_threshold(&mut vals, r);
    for v in z.iter_mut() {
        *v = (*v - tau).max(0.0);
    }
}

/// Threshold `tau` such that `sum max(v - tau, 0) = r` for non-negative `v` summing above `r`.
fn simplex_threshold(v: &mut [f64], r: f64) -> f64 {
    v.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &u) in v.iter().enumerate() {
        cum += u;
        let t = (cum - r) / (i + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    tau
}

/// Least-squares AR(p) coefficients on the zero-padded regression.
pub fn least_squares_ar(x: &[f64], p: usize) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let lag = |t: usize, i: usize| if t > i { x[t - 1 - i] } else { 0.0 };
    for t in 0..x.len() {
        for i in 0..p {
            let li = lag(t, i);
            if li == 0.0 {
                continue;
            }
            xty[i] += li * x[t];
            for j in i..p {
                xtx[(i, j)] += li * lag(t, j);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    match xtx.cholesky() {
        Some(ch) => ch.solve(&xty).iter().copied().collect(),
        None => vec![0.0; p],
    }
}

fn start_seed(seed: u64, spec: &ModelSpec) -> u64 {
    let (a, b) = spec.orders();
    let fam = match spec.family() {
        crate::model::Family::Arma => 1u64,
        crate::model::Family::Garch => 2u64,
    };
    seed ^ (fam << 56 | (a as u64) << 28 | b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn fit(spec: &ModelSpec, x: &[f64], opts: &FitOptions, cfg: &ModelConfig) -> Result<FittedModel> {
    fit_with_starts(spec, x, opts, cfg, &[])
}

/// Like [`fit`], with additional starting parameter vectors (in `spec`'s layout).
pub fn fit_with_starts(
    spec: &ModelSpec,
    x: &[f64],
    opts: &FitOptions,
    cfg: &ModelConfig,
    extra_starts: &[ParamVector],
) -> Result<FittedModel> {
    opts.validate()?;
    let dim = cfg.dimension(spec);
    if x.len() < dim + 10 {
        return Err(Error::invalid(format!(
            "{spec} needs at least {} observations, got {}",
            dim + 10,
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let problem = Problem::new(*spec, x, cfg);
    let mut rng = rng_from_seed(start_seed(opts.seed, spec));
    let mut starts = vec![problem.heuristic_start()];
    for s in extra_starts {
        if s.len() != dim {
            return Err(Error::invalid(format!("start of length {} for {spec}", s.len())));
        }
        starts.push(problem.project(&problem.z_of(s)));
    }
    for _ in 1..opts.multistarts {
        starts.push(problem.random_start(&mut rng));
    }

    let nm = NelderMead {
        max_iters: opts.max_iters,
        ftol: opts.tol,
        ..Default::default()
    };
    let mut buf = Vec::with_capacity(x.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut n_evals = 0;
    let mut converged = false;
    for z0 in &starts {
        let (z, fz) = if z0.is_empty() {
            n_evals += 1;
            (Vec::new(), problem.objective(z0, &mut buf))
        } else {
            let m = nm.minimize(|z| problem.objective(z, &mut buf), z0, &problem.steps(z0));
            n_evals += m.evals;
            converged |= m.converged;
            (m.x, m.fx)
        };
        if z0.is_empty() {
            converged = true;
        }
        if fz.is_finite() && best.as_ref().is_none_or(|(_, f)| fz < *f) {
            best = Some((z, fz));
        }
    }
    let (z, _) = best.ok_or_else(|| Error::FitFailure {
        spec: spec.to_string(),
        reason: "every start produced a non-finite objective".into(),
    })?;
    let z = problem.project(&z);
    let theta = problem.theta_of(&z);
    let eff = problem.cfg;
    let loglik = quasi_log_likelihood(spec, &theta, x, &eff)?;
    let at_boundary = !z.is_empty() && problem.on_boundary(&z);
    let residuals = filter(spec, &theta, x, &eff)?.residuals;

    let (mut f_matrix, mut g_matrix, mut std_errors) = (None, None, None);
    if opts.covariance && dim > 0 {
        if let Ok((f, g)) = estimate_fg(spec, &theta, x, &eff) {
            if !at_boundary {
                std_errors = sandwich_std_errors(&f, &g, x.len()).ok().flatten();
            }
            f_matrix = Some(f);
            g_matrix = Some(g);
        }
    }
    Ok(FittedModel {
        spec: *spec,
        theta,
        loglik,
        converged,
        at_boundary,
        n_evals,
        n_obs: x.len(),
        dim,
        residuals,
        f_matrix,
        g_matrix,
        std_errors,
        config: eff,
    })
}

/// Fits every candidate, warm-starting each model from the best already-fitted models nested in it.
///
/// Candidates are processed by total order so that all nested models are available first; within
/// one level the fits run concurrently.
pub fn fit_family(specs: &[ModelSpec], x: &[f64], opts: &FitOptions, cfg: &ModelConfig) -> Vec<Result<FittedModel>> {
    let mut results: Vec<Option<Result<FittedModel>>> = (0..specs.len()).map(|_| None).collect();
    let level = |m: &ModelSpec| {
        let (a, b) = m.orders();
        a + b
    };
    let max_level = specs.iter().map(level).max().unwrap_or(0);
    for lv in 0..=max_level {
        let idx: Vec<usize> = (0..specs.len()).filter(|&i| level(&specs[i]) == lv).collect();
        let done = &results;
        let fitted = par::map(&idx, |&i| {
            let spec = &specs[i];
            let mut nested: Vec<&FittedModel> = done
                .iter()
                .flatten()
                .filter_map(|r| r.as_ref().ok())
                .filter(|f| f.spec != *spec && is_nested(&f.spec, spec))
                .collect();
            nested.sort_by(|a, b| b.loglik.total_cmp(&a.loglik));
            let starts: Vec<ParamVector> = nested
                .iter()
                .take(2)
                .filter_map(|f| embed(&f.spec, &f.theta, spec, cfg).ok())
                .collect();
            fit_with_starts(spec, x, opts, cfg, &starts)
        });
        for (i, r) in idx.into_iter().zip(fitted) {
            results[i] = Some(r);
        }
    }
    results.into_iter().map(|r| r.expect("every level visited")).collect()
}

/// Per-coordinate finite-difference steps: relative to `max(typical, |theta_i|)`, where the
/// typical size is the data mean square for variance levels and one for recursion coefficients.
fn fd_steps(spec: &ModelSpec, theta: &[f64], x: &[f64], cfg: &ModelConfig) -> Vec<f64> {
    let ms = mean_square(x).max(cfg.h_floor);
    let h = fd_step();
    theta
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let level = match spec {
                ModelSpec::Arma { .. } => !cfg.known_variance && i + 1 == theta.len(),
                ModelSpec::Garch { .. } => i == 0,
            };
            let typical = if level { ms } else { 1.0 };
            h * typical.max(v.abs())
        })
        .collect()
}

/// `F = (1/n) sum_t Hess q_t` and `G = (1/n) sum_t grad q_t grad q_t'` by central differences.
pub fn estimate_fg(spec: &ModelSpec, theta: &[f64], x: &[f64], cfg: &ModelConfig) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    crate::model::require_admissible(spec, theta, cfg)?;
    let n = x.len();
    let d = theta.len();
    let steps = fd_steps(spec, theta, x, cfg);
    let mut scratch = Vec::new();
    let mut eval = |th: &[f64]| {
        let mut q = vec![0.0; n];
        contributions_unchecked(spec, th, x, cfg, &mut q, &mut scratch);
        q
    };
    let shifted = |moves: &[(usize, f64)]| {
        let mut th = theta.to_vec();
        for &(i, s) in moves {
            th[i] += s * steps[i];
        }
        th
    };

    let q0 = eval(theta);
    let plus: Vec<Vec<f64>> = (0..d).map(|i| eval(&shifted(&[(i, 1.0)]))).collect();
    let minus: Vec<Vec<f64>> = (0..d).map(|i| eval(&shifted(&[(i, -1.0)]))).collect();

    let grads: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..n).map(|t| (plus[i][t] - minus[i][t]) / (2.0 * steps[i])).collect())
        .collect();
    let nf = n as f64;
    let mut g = DMatrix::<f64>::zeros(d, d);
    let mut f = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = (0..n).map(|t| grads[i][t] * grads[j][t]).sum::<f64>() / nf;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        let hi = steps[i];
        f[(i, i)] = (0..n).map(|t| plus[i][t] - 2.0 * q0[t] + minus[i][t]).sum::<f64>() / (hi * hi * nf);
        for j in i + 1..d {
            let pp = eval(&shifted(&[(i, 1.0), (j, 1.0)]));
            let pm = eval(&shifted(&[(i, 1.0), (j, -1.0)]));
            let mp = eval(&shifted(&[(i, -1.0), (j, 1.0)]));
            let mm = eval(&shifted(&[(i, -1.0), (j, -1.0)]));
            let v = (0..n).map(|t| pp[t] - pm[t] - mp[t] + mm[t]).sum::<f64>() / (4.0 * hi * steps[j] * nf);
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    check_finite(&f, "F")?;
    check_finite(&g, "G")?;
    Ok((f, g))
}

fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(Error::Numeric { row: i, col: j, what });
            }
        }
    }
    Ok(())
}

/// Condition number above which `F` is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

fn checked_inverse(f: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    check_finite(f, "F")?;
    if f.nrows() != f.ncols() {
        return Err(Error::invalid("F must be square"));
    }
    let sv = f.clone().singular_values();
    let (hi, lo) = sv.iter().fold((0.0f64, f64::INFINITY), |(h, l), &s| (h.max(s), l.min(s)));
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Ok(None);
    }
    Ok(f.clone().try_inverse())
}

/// `sqrt(diag(F^-1 G F^-1) / n)`, or `None` when `F` is numerically singular.
pub fn sandwich_std_errors(f: &DMatrix<f64>, g: &DMatrix<f64>, n: usize) -> Result<Option<Vec<f64>>> {
    check_finite(g, "G")?;
    if g.shape() != f.shape() {
        return Err(Error::invalid("F and G shapes differ"));
    }
    let Some(finv) = checked_inverse(f)? else {
        return Ok(None);
    };
    let cov = &finv * g * &finv;
    let se: Vec<f64> = cov.diagonal().iter().map(|v| (v / n as f64).sqrt()).collect();
    Ok(se.iter().all(|v| v.is_finite()).then_some(se))
}

/// `G F^-1`, which for the classical models is close to `2 I` on mean coordinates and
/// `(mu_4 - 1) I` on variance coordinates.
pub fn sigma_block_check(f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(g, "G")?;
    let finv = checked_inverse(f)?.ok_or(Error::Numeric {
        row: 0,
        col: 0,
        what: "F is numerically singular",
    })?;
    Ok(g * finv)
}
