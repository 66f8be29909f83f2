//! Penalties, minimal penalty constants and penalized selection over a fitted family.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FittedModel;
use crate::model::{is_nested, Family, ModelSpec};

/// Complexity penalty added to `-2 L_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    /// `2 c D log log n`
    GeneralizedHq { c: f64 },
    /// `D log n`
    Bic,
    /// `2 D`
    Aic,
}

impl PenaltySpec {
    pub fn hq(c: f64) -> Self {
        PenaltySpec::GeneralizedHq { c }
    }

    pub fn label(&self) -> String {
        match self {
            PenaltySpec::GeneralizedHq { c } => format!("hq(c={c})"),
            PenaltySpec::Bic => "bic".into(),
            PenaltySpec::Aic => "aic".into(),
        }
    }
}

impl std::str::FromStr for PenaltySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bic" => Ok(PenaltySpec::Bic),
            "aic" => Ok(PenaltySpec::Aic),
            t => t
                .strip_prefix("hq(")
                .and_then(|r| r.strip_suffix(')'))
                .or_else(|| t.strip_prefix("hq:"))
                .and_then(|c| c.parse().ok())
                .map(PenaltySpec::hq)
                .ok_or_else(|| Error::invalid(format!("unknown penalty {s:?}; use bic, aic or hq(C)"))),
        }
    }
}

/// Smallest sample size accepted by the generalized HQ penalty.
pub const MIN_HQ_N: usize = 16;

pub fn penalty_value(p: &PenaltySpec, n: usize, dim: usize) -> Result<f64> {
    let d = dim as f64;
    match *p {
        PenaltySpec::GeneralizedHq { c } => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("HQ constant must be positive, got {c}")));
            }
            if n < MIN_HQ_N {
                return Err(Error::invalid(format!(
                    "generalized HQ penalty needs n >= {MIN_HQ_N}, got {n}"
                )));
            }
            Ok(2.0 * c * d * log_log(n))
        }
        PenaltySpec::Bic => {
            if n < 2 {
                return Err(Error::invalid("BIC needs n >= 2"));
            }
            Ok(d * (n as f64).ln())
        }
        PenaltySpec::Aic => Ok(2.0 * d),
    }
}

pub fn log_log(n: usize) -> f64 {
    (n as f64).ln().ln()
}

/// Empirical fourth moment of standardized residuals.
pub fn estimate_mu4(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::invalid("no residuals"));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite residual"));
    }
    Ok(residuals.iter().map(|v| v.powi(4)).sum::<f64>() / residuals.len() as f64)
}

/// Which coordinate types a family carries: conditional-mean coefficients and/or
/// conditional-variance parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamTypes {
    pub has_mean_params: bool,
    pub has_variance_params: bool,
}

impl ParamTypes {
    pub fn of_family(family: Family, known_variance: bool) -> Self {
        match family {
            Family::Arma => ParamTypes {
                has_mean_params: true,
                has_variance_params: !known_variance,
            },
            Family::Garch => ParamTypes {
                has_mean_params: false,
                has_variance_params: true,
            },
        }
    }
}

fn check_mu4(mu4: f64) -> Result<()> {
    if mu4 > 1.0 && mu4.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("fourth moment must exceed 1, got {mu4}")))
    }
}

/// `max(alpha_1/4, alpha_2/4)` over the coordinate types present, with `alpha_1 = 2` for mean
/// coordinates and `alpha_2 = mu_4 - 1` for variance coordinates.
pub fn c_min_constant(types: ParamTypes, mu4: f64) -> Result<f64> {
    check_mu4(mu4)?;
    let mut c: Option<f64> = None;
    if types.has_mean_params {
        c = Some(0.5);
    }
    if types.has_variance_params {
        let v = (mu4 - 1.0) / 4.0;
        c = Some(c.map_or(v, |m| m.max(v)));
    }
    c.ok_or_else(|| Error::invalid("a family needs at least one coordinate type"))
}

/// `(alpha_1 D^1 + alpha_2 D^2) / 4` for a single model.
pub fn c_min_model_term(spec: &ModelSpec, mu4: f64, known_variance: bool) -> Result<f64> {
    check_mu4(mu4)?;
    let (d1, d2) = spec.split_dimension(known_variance);
    Ok(0.5 * d1 as f64 + (mu4 - 1.0) / 4.0 * d2 as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub spec: ModelSpec,
    pub dim: usize,
    pub loglik: f64,
    pub penalty: f64,
    pub criterion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub penalty: PenaltySpec,
    pub n: usize,
    pub table: Vec<CriterionRow>,
    pub selected: ModelSpec,
    pub selected_index: usize,
    pub c_used: Option<f64>,
    pub mu4_hat: Option<f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Index of the smallest value; exact ties go to the smaller dimension, then the earlier entry.
pub(crate) fn argmin_with_ties<I>(rows: I) -> Option<usize>
where
    I: IntoIterator<Item = (f64, usize)>,
{
    let mut best: Option<(usize, f64, usize)> = None;
    for (i, (v, d)) in rows.into_iter().enumerate() {
        let better = match best {
            None => true,
            Some((_, bv, bd)) => v < bv || (v == bv && d < bd),
        };
        if better {
            best = Some((i, v, d));
        }
    }
    best.map(|(i, _, _)| i)
}

fn check_fits(fits: &[FittedModel], n: usize) -> Result<()> {
    if fits.is_empty() {
        return Err(Error::invalid("no fitted models to select from"));
    }
    if let Some(f) = fits.iter().find(|f| f.n_obs != n) {
        return Err(Error::invalid(format!(
            "{} was fitted on {} observations, expected {n}",
            f.spec, f.n_obs
        )));
    }
    Ok(())
}

pub fn select(fits: &[FittedModel], p: &PenaltySpec, n: usize) -> Result<SelectionResult> {
    check_fits(fits, n)?;
    let table = fits
        .iter()
        .map(|f| {
            let penalty = penalty_value(p, n, f.dim)?;
            Ok(CriterionRow {
                spec: f.spec,
                dim: f.dim,
                loglik: f.loglik,
                penalty,
                criterion: -2.0 * f.loglik + penalty,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let idx = argmin_with_ties(table.iter().map(|r| (r.criterion, r.dim))).expect("non-empty");
    Ok(SelectionResult {
        penalty: *p,
        n,
        selected: table[idx].spec,
        selected_index: idx,
        table,
        c_used: match p {
            PenaltySpec::GeneralizedHq { c } => Some(*c),
            _ => None,
        },
        mu4_hat: None,
        notes: Vec::new(),
    })
}

impl SelectionResult {
    pub fn with_mu4(mut self, mu4: f64) -> Self {
        self.mu4_hat = Some(mu4);
        if mu4 > 4.5 {
            self.notes.push(format!(
                "heavy-tailed residuals (mu4_hat = {mu4:.3}): the fourth-moment estimate is unstable without a finite eighth moment"
            ));
        }
        self
    }

    /// Aligned plain-text rendering of the criterion table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "penalty: {}  n: {}", self.penalty.label(), self.n);
        if let Some(mu4) = self.mu4_hat {
            let _ = writeln!(s, "mu4_hat: {mu4:.4}");
        }
        let _ = writeln!(s, "{:<12} {:>4} {:>16} {:>12} {:>16}", "model", "D", "loglik", "penalty", "criterion");
        for (i, r) in self.table.iter().enumerate() {
            let mark = if i == self.selected_index { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:<12} {:>4} {:>16.4} {:>12.4} {:>16.4}{mark}",
                r.spec.to_string(),
                r.dim,
                r.loglik,
                r.penalty,
                r.criterion
            );
        }
        let _ = writeln!(s, "selected: {}", self.selected);
        for note in &self.notes {
            let _ = writeln!(s, "note: {note}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Wrong,
    True,
    Overfitted,
}

pub fn classify(true_spec: &ModelSpec, selected: &ModelSpec) -> Classification {
    if true_spec == selected {
        Classification::True
    } else if is_nested(true_spec, selected) {
        Classification::Overfitted
    } else {
        Classification::Wrong
    }
}

/// The candidate of `family` with the most parameters (last in enumeration order on ties).
pub fn largest_model(specs: &[ModelSpec], family: Family) -> Option<ModelSpec> {
    specs
        .iter()
        .filter(|m| m.family() == family)
        .max_by(|a, b| a.dimension().cmp(&b.dimension()).then(a.cmp(b)))
        .copied()
}
