//! Replicated selection experiments: simulate, fit a candidate family, select under several
//! penalties and tabulate Wrong/True/Overfitted frequencies.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, default_grid};
use crate::criteria::{c_min_constant, classify, estimate_mu4, largest_model, select, Classification, ParamTypes, PenaltySpec, MIN_HQ_N};
use crate::error::{Error, Result};
use crate::fit::{fit_family, FitOptions, FittedModel};
use crate::model::{enumerate_family, require_admissible, ModelConfig, ModelSpec, ParamVector};
use crate::par;
use crate::simulate::{simulate_process, NoiseKind, NoiseSpec, DEFAULT_BURN_IN};

/// A data-generating process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dgp {
    pub name: String,
    pub spec: ModelSpec,
    pub theta: ParamVector,
}

/// The three reference processes: an AR(2), an ARCH(2) and an AR(6) with equal coefficients.
pub fn dgp_presets() -> Vec<Dgp> {
    let mk = |name: &str, spec, theta: Vec<f64>| Dgp { name: name.into(), spec, theta: ParamVector(theta) };
    vec![
        mk("I", ModelSpec::arma(2, 0), vec![0.5, 0.2, 1.0]),
        mk("II", ModelSpec::arch(2), vec![0.2, 0.4, 0.2]),
        mk("III", ModelSpec::arma(6, 0), vec![0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 1.0]),
    ]
}

pub fn dgp_preset(name: &str) -> Result<Dgp> {
    dgp_presets()
        .into_iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::invalid(format!("unknown preset {name:?}; use I, II or III")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Candidates {
    Bounds {
        max_p: usize,
        max_q: usize,
        max_p_garch: usize,
        max_q_garch: usize,
    },
    Explicit { specs: Vec<ModelSpec> },
}

impl Candidates {
    /// The 66-model mixed family of ARMA(p,q), p,q <= 5 and GARCH with orders up to 5.
    pub fn mixed() -> Self {
        Candidates::Bounds { max_p: 5, max_q: 5, max_p_garch: 5, max_q_garch: 5 }
    }

    /// AR(1), ..., AR(max_p).
    pub fn autoregressions(max_p: usize) -> Self {
        Candidates::Explicit { specs: (1..=max_p).map(ModelSpec::ar).collect() }
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        match self {
            Candidates::Bounds { max_p, max_q, max_p_garch, max_q_garch } => {
                enumerate_family(*max_p, *max_q, *max_p_garch, *max_q_garch)
            }
            Candidates::Explicit { specs } => specs.clone(),
        }
    }
}

/// How each tabulated penalty is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyRule {
    /// Generalized HQ with `c = multiplier * c_min`, `c_min` from the fourth-moment formula.
    CMin { multiplier: f64 },
    /// Generalized HQ at the dimension-jump constant times `multiplier`.
    Jump { multiplier: f64 },
    Hq { c: f64 },
    Bic,
    Aic,
}

impl PenaltyRule {
    pub fn label(&self) -> String {
        match self {
            PenaltyRule::CMin { multiplier } if *multiplier == 1.0 => "c_min".into(),
            PenaltyRule::CMin { multiplier } => format!("{multiplier}c_min"),
            PenaltyRule::Jump { multiplier } => format!("jump({multiplier})"),
            PenaltyRule::Hq { c } => format!("hq({c})"),
            PenaltyRule::Bic => "bic".into(),
            PenaltyRule::Aic => "aic".into(),
        }
    }
}

impl std::str::FromStr for PenaltyRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::invalid(format!("bad number in penalty {s:?}")));
        match s {
            "bic" => return Ok(PenaltyRule::Bic),
            "aic" => return Ok(PenaltyRule::Aic),
            "c_min" | "cmin" => return Ok(PenaltyRule::CMin { multiplier: 1.0 }),
            "jump" => return Ok(PenaltyRule::Jump { multiplier: 2.0 }),
            _ => {}
        }
        if let Some(m) = s.strip_suffix("c_min").or_else(|| s.strip_suffix("cmin")) {
            return Ok(PenaltyRule::CMin { multiplier: num(m)? });
        }
        if let Some(c) = s.strip_prefix("hq(").and_then(|r| r.strip_suffix(')')) {
            return Ok(PenaltyRule::Hq { c: num(c)? });
        }
        if let Some(m) = s.strip_prefix("jump(").and_then(|r| r.strip_suffix(')')) {
            return Ok(PenaltyRule::Jump { multiplier: num(m)? });
        }
        Err(Error::invalid(format!(
            "unknown penalty {s:?}; use bic, aic, c_min, 2c_min, hq(C) or jump(M)"
        )))
    }
}

/// Source of the fourth moment entering `c_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mu4Rule {
    Known { mu4: f64 },
    /// Standardized residuals of the largest candidate in the DGP's family.
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: Dgp,
    pub noise: NoiseKind,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub candidates: Candidates,
    pub penalties: Vec<PenaltyRule>,
    pub mu4: Mu4Rule,
    pub base_seed: u64,
    pub burn_in: usize,
    pub fit: FitOptions,
    pub model: ModelConfig,
    /// Thread cap; 0 uses the default pool.
    pub workers: usize,
    pub keep_log: bool,
}

impl ExperimentConfig {
    /// Preset process with its usual candidate family, penalties `c_min`, `2 c_min` and BIC,
    /// the exact Gaussian fourth moment for Gaussian noise and the residual estimate otherwise.
    pub fn preset(name: &str, noise: NoiseKind, n_values: Vec<usize>, replications: usize, base_seed: u64) -> Result<Self> {
        let dgp = dgp_preset(name)?;
        let candidates = if dgp.name == "III" { Candidates::autoregressions(15) } else { Candidates::mixed() };
        let mu4 = match noise {
            NoiseKind::Gaussian => Mu4Rule::Known { mu4: 3.0 },
            NoiseKind::Student { .. } => Mu4Rule::Estimated,
        };
        Ok(ExperimentConfig {
            dgp,
            noise,
            n_values,
            replications,
            candidates,
            penalties: vec![
                PenaltyRule::CMin { multiplier: 1.0 },
                PenaltyRule::CMin { multiplier: 2.0 },
                PenaltyRule::Bic,
            ],
            mu4,
            base_seed,
            burn_in: DEFAULT_BURN_IN,
            fit: FitOptions { multistarts: 1, covariance: false, ..Default::default() },
            model: ModelConfig::default(),
            workers: 0,
            keep_log: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.n_values.is_empty() {
            return Err(Error::invalid("no sample sizes given"));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < MIN_HQ_N) {
            return Err(Error::invalid(format!("sample size {n} is below {MIN_HQ_N}")));
        }
        if self.penalties.is_empty() {
            return Err(Error::invalid("no penalties given"));
        }
        if self.candidates.specs().is_empty() {
            return Err(Error::invalid("empty candidate family"));
        }
        if let Mu4Rule::Known { mu4 } = self.mu4 {
            if !(mu4 > 1.0 && mu4.is_finite()) {
                return Err(Error::invalid(format!("fourth moment must exceed 1, got {mu4}")));
            }
        }
        for p in &self.penalties {
            let bad = match *p {
                PenaltyRule::CMin { multiplier: v } | PenaltyRule::Jump { multiplier: v } | PenaltyRule::Hq { c: v } => {
                    !(v > 0.0 && v.is_finite())
                }
                _ => false,
            };
            if bad {
                return Err(Error::invalid(format!("penalty {} needs a positive constant", p.label())));
            }
        }
        require_admissible(&self.dgp.spec, &self.dgp.theta, &self.model)
    }
}

/// Outcome of one replication at one sample size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub mu4_hat: Option<f64>,
    pub c_min: Option<f64>,
    /// One entry per penalty, `None` when that penalty could not be evaluated.
    pub selected: Vec<Option<ModelSpec>>,
    pub classes: Vec<Classification>,
    pub failed_fits: usize,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub penalty: String,
    pub wrong: usize,
    pub true_: usize,
    pub overfitted: usize,
    pub replications: usize,
    /// Replications counted as Wrong because the selection could not be carried out.
    pub failures: usize,
}

impl Cell {
    pub fn pct(&self, c: Classification) -> f64 {
        let k = match c {
            Classification::Wrong => self.wrong,
            Classification::True => self.true_,
            Classification::Overfitted => self.overfitted,
        };
        100.0 * k as f64 / self.replications as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub log: Option<Vec<ReplicationRecord>>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn cell(&self, n: usize, rule: &PenaltyRule) -> Option<&Cell> {
        let label = rule.label();
        self.cells.iter().find(|c| c.n == n && c.penalty == label)
    }

    /// Rows `n,penalty,W,T,O,replications,failures` with percentages.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "penalty", "W", "T", "O", "replications", "failures"])?;
        for c in &self.cells {
            out.write_record([
                c.n.to_string(),
                c.penalty.clone(),
                format!("{:.1}", c.pct(Classification::Wrong)),
                format!("{:.1}", c.pct(Classification::True)),
                format!("{:.1}", c.pct(Classification::Overfitted)),
                c.replications.to_string(),
                c.failures.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "process {} ({}), noise {}, {} replications, {:.1}s\n",
            self.config.dgp.name,
            self.config.dgp.spec,
            self.config.noise.label(),
            self.config.replications,
            self.wall_time_secs
        );
        s.push_str(&format!("{:>6} {:<12} {:>7} {:>7} {:>7}\n", "n", "penalty", "W%", "T%", "O%"));
        for c in &self.cells {
            s.push_str(&format!(
                "{:>6} {:<12} {:>7.1} {:>7.1} {:>7.1}{}\n",
                c.n,
                c.penalty,
                c.pct(Classification::Wrong),
                c.pct(Classification::True),
                c.pct(Classification::Overfitted),
                if c.failures > 0 { format!("  ({} failed)", c.failures) } else { String::new() }
            ));
        }
        s
    }
}

fn failed_record(n: usize, r: usize, seed: u64, k: usize, failed_fits: usize, msg: String) -> ReplicationRecord {
    ReplicationRecord {
        n,
        replication: r,
        seed,
        mu4_hat: None,
        c_min: None,
        selected: vec![None; k],
        classes: vec![Classification::Wrong; k],
        failed_fits,
        diagnostic: Some(msg),
    }
}

/// Fourth moment for `c_min`: known, or from the largest fitted model in the DGP's family.
fn mu4_for(cfg: &ExperimentConfig, fits: &[FittedModel]) -> Result<f64> {
    match cfg.mu4 {
        Mu4Rule::Known { mu4 } => Ok(mu4),
        Mu4Rule::Estimated => {
            let specs: Vec<ModelSpec> = fits.iter().map(|f| f.spec).collect();
            let family = cfg.dgp.spec.family();
            let big = largest_model(&specs, family)
                .ok_or_else(|| Error::invalid(format!("no fitted {family:?} candidate for the fourth moment")))?;
            let fit = fits.iter().find(|f| f.spec == big).expect("largest model comes from the fits");
            estimate_mu4(&fit.residuals)
        }
    }
}

fn run_one(cfg: &ExperimentConfig, specs: &[ModelSpec], n: usize, r: usize) -> ReplicationRecord {
    let seed = cfg.base_seed.wrapping_add(r as u64);
    let k = cfg.penalties.len();
    let x = match simulate_process(&cfg.dgp.spec, &cfg.dgp.theta, &NoiseSpec { kind: cfg.noise, seed }, n, cfg.burn_in, &cfg.model) {
        Ok(x) => x,
        Err(e) => return failed_record(n, r, seed, k, 0, format!("simulation: {e}")),
    };
    let opts = FitOptions { seed, ..cfg.fit };
    let results = fit_family(specs, &x, &opts, &cfg.model);
    let mut errors = Vec::new();
    let mut fits = Vec::new();
    for res in results {
        match res {
            Ok(f) => fits.push(f),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let failed_fits = errors.len();
    if fits.is_empty() {
        return failed_record(n, r, seed, k, failed_fits, format!("every fit failed: {}", errors.join("; ")));
    }
    let mut diagnostic: Vec<String> = errors;

    let types = ParamTypes::of_family(cfg.dgp.spec.family(), cfg.model.known_variance);
    let mu4 = mu4_for(cfg, &fits);
    let c_min = mu4.as_ref().ok().and_then(|&m| c_min_constant(types, m).ok());
    if let Err(e) = &mu4 {
        diagnostic.push(format!("fourth moment: {e}"));
    }

    let mut selected = Vec::with_capacity(k);
    for rule in &cfg.penalties {
        let pick = match *rule {
            PenaltyRule::CMin { multiplier } => match c_min {
                Some(c) => select(&fits, &PenaltySpec::hq(multiplier * c), n).map(|s| s.selected),
                None => Err(Error::Calibration("c_min unavailable".into())),
            },
            PenaltyRule::Jump { multiplier } => calibrate(&fits, n, &default_grid(), multiplier)
                .map(|p| p.final_model.expect("calibrated path has a final model")),
            PenaltyRule::Hq { c } => select(&fits, &PenaltySpec::hq(c), n).map(|s| s.selected),
            PenaltyRule::Bic => select(&fits, &PenaltySpec::Bic, n).map(|s| s.selected),
            PenaltyRule::Aic => select(&fits, &PenaltySpec::Aic, n).map(|s| s.selected),
        };
        match pick {
            Ok(m) => selected.push(Some(m)),
            Err(e) => {
                diagnostic.push(format!("{}: {e}", rule.label()));
                selected.push(None);
            }
        }
    }
    let classes = selected
        .iter()
        .map(|m| m.map_or(Classification::Wrong, |m| classify(&cfg.dgp.spec, &m)))
        .collect();
    ReplicationRecord {
        n,
        replication: r,
        seed,
        mu4_hat: mu4.ok(),
        c_min,
        selected,
        classes,
        failed_fits,
        diagnostic: if diagnostic.is_empty() { None } else { Some(diagnostic.join("; ")) },
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let specs = cfg.candidates.specs();
    let start = Instant::now();
    let records: Vec<ReplicationRecord> = par::with_workers(cfg.workers, || {
        cfg.n_values
            .iter()
            .flat_map(|&n| par::map_range(cfg.replications, |r| run_one(cfg, &specs, n, r)))
            .collect()
    });
    let wall_time_secs = start.elapsed().as_secs_f64();

    let mut cells = Vec::new();
    for &n in &cfg.n_values {
        for (j, rule) in cfg.penalties.iter().enumerate() {
            let mut cell = Cell {
                n,
                penalty: rule.label(),
                wrong: 0,
                true_: 0,
                overfitted: 0,
                replications: 0,
                failures: 0,
            };
            for rec in records.iter().filter(|r| r.n == n) {
                cell.replications += 1;
                match rec.classes[j] {
                    Classification::Wrong => cell.wrong += 1,
                    Classification::True => cell.true_ += 1,
                    Classification::Overfitted => cell.overfitted += 1,
                }
                if rec.selected[j].is_none() {
                    cell.failures += 1;
                }
            }
            cells.push(cell);
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        cells,
        log: cfg.keep_log.then_some(records),
        wall_time_secs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str, candidates: Candidates) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(name, NoiseKind::Gaussian, vec![200], 6, 42).unwrap();
        cfg.candidates = candidates;
        cfg.keep_log = true;
        cfg
    }

    #[test]
    fn presets() {
        let i = dgp_preset("I").unwrap();
        assert_eq!(i.spec, ModelSpec::arma(2, 0));
        assert_eq!(i.theta.0, vec![0.5, 0.2, 1.0]);
        let ii = dgp_preset("ii").unwrap();
        assert_eq!(ii.spec, ModelSpec::arch(2));
        assert_eq!(ii.theta.0, vec![0.2, 0.4, 0.2]);
        let iii = dgp_preset("III").unwrap();
        assert_eq!(iii.spec, ModelSpec::arma(6, 0));
        assert!(iii.theta.0[..6].iter().all(|&v| v == 0.1));
        assert!(dgp_preset("IV").is_err());
    }

    #[test]
    fn single_true_candidate_is_always_true() {
        let cfg = small("I", Candidates::Explicit { specs: vec![ModelSpec::arma(2, 0)] });
        let rep = run_experiment(&cfg).unwrap();
        for c in &rep.cells {
            assert_eq!(c.true_, 6, "{c:?}");
        }
    }

    #[test]
    fn counts_add_up_and_rerun_is_identical() {
        let cfg = small("I", Candidates::Bounds { max_p: 2, max_q: 1, max_p_garch: 0, max_q_garch: 1 });
        let a = run_experiment(&cfg).unwrap();
        for c in &a.cells {
            assert_eq!(c.wrong + c.true_ + c.overfitted, c.replications);
            let total: f64 = [Classification::Wrong, Classification::True, Classification::Overfitted]
                .iter()
                .map(|k| c.pct(*k))
                .sum();
            assert!((total - 100.0).abs() < 1e-9);
        }
        let b = run_experiment(&ExperimentConfig { workers: 1, ..cfg }).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small("I", Candidates::autoregressions(3));
        cfg.replications = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small("I", Candidates::autoregressions(3));
        cfg.n_values = vec![10];
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small("I", Candidates::autoregressions(3));
        cfg.penalties = vec![PenaltyRule::Hq { c: -1.0 }];
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn estimated_mu4_uses_true_family() {
        let mut cfg = small("II", Candidates::Bounds { max_p: 1, max_q: 0, max_p_garch: 1, max_q_garch: 2 });
        cfg.mu4 = Mu4Rule::Estimated;
        cfg.replications = 2;
        let rep = run_experiment(&cfg).unwrap();
        for rec in rep.log.unwrap() {
            let m = rec.mu4_hat.unwrap();
            assert!(m > 1.5 && m < 6.0, "{m}");
            assert!((rec.c_min.unwrap() - (m - 1.0) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_rule_parsing() {
        let p: PenaltyRule = "2c_min".parse().unwrap();
        assert_eq!(p, PenaltyRule::CMin { multiplier: 2.0 });
        assert_eq!("c_min".parse::<PenaltyRule>().unwrap(), PenaltyRule::CMin { multiplier: 1.0 });
        assert_eq!("hq(0.7)".parse::<PenaltyRule>().unwrap(), PenaltyRule::Hq { c: 0.7 });
        assert_eq!("jump(2)".parse::<PenaltyRule>().unwrap(), PenaltyRule::Jump { multiplier: 2.0 });
        assert_eq!("bic".parse::<PenaltyRule>().unwrap(), PenaltyRule::Bic);
        assert!("foo".parse::<PenaltyRule>().is_err());
        for r in [PenaltyRule::CMin { multiplier: 2.0 }, PenaltyRule::Hq { c: 0.7 }, PenaltyRule::Bic] {
            assert_eq!(r.label().parse::<PenaltyRule>().unwrap(), r);
        }
    }
}
