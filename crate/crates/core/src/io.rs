//! CSV ingestion, log returns, autocorrelations, the returns analysis and JSON envelopes.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, default_grid, JumpPath};
use crate::criteria::{c_min_constant, estimate_mu4, largest_model, select, ParamTypes, PenaltySpec, SelectionResult};
use crate::error::{Error, Result};
use crate::fit::{fit_family, FitOptions, FitReport, FittedModel};
use crate::model::{enumerate_family, Family, ModelConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Prices with optional timestamps, all prices strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub timestamps: Option<Vec<String>>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(prices: Vec<f64>, timestamps: Option<Vec<String>>) -> Result<Self> {
        if let Some((i, p)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::invalid(format!("price {p} at position {} is not positive", i + 1)));
        }
        if timestamps.as_ref().is_some_and(|t| t.len() != prices.len()) {
            return Err(Error::invalid("timestamps and prices differ in length"));
        }
        Ok(PriceSeries { timestamps, prices })
    }

    pub fn returns(&self) -> Result<Vec<f64>> {
        log_returns(&self.prices)
    }
}

fn input_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Input { path: path.display().to_string(), msg: msg.into() }
}

/// Reads one header-named column (or the only column when `column` is `None`) as finite numbers,
/// plus an optional text column.
pub fn read_columns<R: Read>(rdr: R, path: &Path, column: Option<&str>, text_column: Option<&str>) -> Result<(Vec<f64>, Option<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
    let headers = rdr.headers().map_err(|e| input_err(path, e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| input_err(path, format!("no column {name:?}; header is {:?}", headers.iter().collect::<Vec<_>>())))
    };
    let col = match column {
        Some(name) => find(name)?,
        None if headers.len() == 1 => 0,
        None => {
            return Err(input_err(path, format!("{} columns; choose one with --column", headers.len())));
        }
    };
    let tcol = text_column.map(find).transpose()?;
    let mut values = Vec::new();
    let mut texts = tcol.map(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| input_err(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = rec.get(col).ok_or_else(|| input_err(path, format!("line {line}: missing field")))?;
        let v: f64 = cell
            .parse()
            .map_err(|_| input_err(path, format!("line {line}: {cell:?} is not a number")))?;
        if !v.is_finite() {
            return Err(input_err(path, format!("line {line}: non-finite value {cell:?}")));
        }
        values.push(v);
        if let (Some(t), Some(ts)) = (tcol, texts.as_mut()) {
            ts.push(rec.get(t).unwrap_or_default().to_string());
        }
    }
    if values.is_empty() {
        return Err(input_err(path, "no data rows"));
    }
    Ok((values, texts))
}

/// A plain numeric series from a CSV file.
pub fn load_csv(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let f = File::open(path).map_err(|e| input_err(path, e.to_string()))?;
    Ok(read_columns(f, path, column, None)?.0)
}

pub fn load_prices(path: &Path, column: Option<&str>, time_column: Option<&str>) -> Result<PriceSeries> {
    let f = File::open(path).map_err(|e| input_err(path, e.to_string()))?;
    let (prices, ts) = read_columns(f, path, column, time_column)?;
    PriceSeries::new(prices, ts).map_err(|e| input_err(path, e.to_string()))
}

/// One-column CSV with header `x`; values are written in shortest round-trip form.
pub fn write_series_csv<W: Write>(w: W, x: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x"])?;
    for v in x {
        out.write_record([v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `r_t = log(P_{t+1} / P_t)`.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::invalid("need at least two prices"));
    }
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::invalid(format!("non-positive price {p}")));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Sample autocorrelations at lags `0..=max_lag`.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= max_lag {
        return Err(Error::invalid(format!("series of length {n} is too short for lag {max_lag}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = d.iter().map(|v| v * v).sum();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(denom > 0.0) || scale <= 1e-14 * mean.abs() {
        return Err(Error::Degenerate("constant series has no autocorrelation".into()));
    }
    Ok((0..=max_lag)
        .map(|k| if k == 0 { 1.0 } else { d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / denom })
        .collect())
}

/// How the generalized HQ constant of the returns analysis is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisMode {
    /// `multiplier * c_min` with `c_min` from the residual fourth moment.
    Formula { multiplier: f64 },
    /// `multiplier * c_hat_min` from the dimension jump.
    Jump { multiplier: f64 },
}

impl Default for AnalysisMode {
    fn default() -> Self {
        AnalysisMode::Formula { multiplier: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyBounds {
    pub max_p: usize,
    pub max_q: usize,
    pub max_p_garch: usize,
    pub max_q_garch: usize,
}

impl Default for FamilyBounds {
    fn default() -> Self {
        FamilyBounds { max_p: 5, max_q: 5, max_p_garch: 5, max_q_garch: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub n: usize,
    pub mode: AnalysisMode,
    pub bic: SelectionResult,
    pub hq: SelectionResult,
    /// Fourth-moment based `c_min`.
    pub c_min: f64,
    pub mu4_hat: f64,
    pub mu4_source: String,
    /// Dimension-jump path, when a jump exists on the default grid.
    pub jump: Option<JumpPath>,
    pub acf_returns: Option<Vec<f64>>,
    pub acf_squared: Option<Vec<f64>>,
    pub fits: Vec<FitReport>,
    pub warnings: Vec<String>,
}

pub const ANALYSIS_MIN_N: usize = 200;

/// Fits the bounded mixed family to `x` and selects under BIC and calibrated generalized HQ.
pub fn analyze_returns(x: &[f64], bounds: FamilyBounds, mode: AnalysisMode, opts: &FitOptions, cfg: &ModelConfig) -> Result<Analysis> {
    let n = x.len();
    let mut warnings = Vec::new();
    if n < ANALYSIS_MIN_N {
        warnings.push(format!("only {n} observations; at least {ANALYSIS_MIN_N} are recommended"));
    }
    let specs = enumerate_family(bounds.max_p, bounds.max_q, bounds.max_p_garch, bounds.max_q_garch);
    let mut fits: Vec<FittedModel> = Vec::new();
    for r in fit_family(&specs, x, opts, cfg) {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => warnings.push(format!("fit failed: {e}")),
        }
    }
    if fits.is_empty() {
        return Err(Error::FitFailure { spec: "every candidate".into(), reason: warnings.join("; ") });
    }

    let fitted: Vec<_> = fits.iter().map(|f| f.spec).collect();
    let big = largest_model(&fitted, Family::Garch)
        .or_else(|| largest_model(&fitted, Family::Arma))
        .expect("non-empty fits");
    let big_fit = fits.iter().find(|f| f.spec == big).expect("from fits");
    let mu4 = estimate_mu4(&big_fit.residuals)?;
    let has_arma = fitted.iter().any(|m| m.family() == Family::Arma);
    let types = ParamTypes {
        has_mean_params: has_arma,
        has_variance_params: !(cfg.known_variance && fitted.iter().all(|m| m.family() == Family::Arma)),
    };
    let c_min = c_min_constant(types, mu4)?;

    let jump = match calibrate(&fits, n, &default_grid(), match mode {
        AnalysisMode::Jump { multiplier } => multiplier,
        AnalysisMode::Formula { .. } => 2.0,
    }) {
        Ok(p) => Some(p),
        Err(e) => {
            warnings.push(format!("dimension jump: {e}"));
            None
        }
    };
    let c = match mode {
        AnalysisMode::Formula { multiplier } => multiplier * c_min,
        AnalysisMode::Jump { .. } => jump
            .as_ref()
            .and_then(|p| p.c_final)
            .ok_or_else(|| Error::Calibration("no dimension jump on the default grid".into()))?,
    };
    let bic = select(&fits, &PenaltySpec::Bic, n)?;
    let mut hq = select(&fits, &PenaltySpec::hq(c), n)?.with_mu4(mu4);
    hq.notes.push(format!("fourth moment from the residuals of {big}"));

    let lag = 20.min(n.saturating_sub(1));
    let acf_returns = acf(x, lag).map_err(|e| warnings.push(format!("returns acf: {e}"))).ok();
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let acf_squared = acf(&sq, lag).map_err(|e| warnings.push(format!("squared returns acf: {e}"))).ok();

    Ok(Analysis {
        n,
        mode,
        bic,
        hq,
        c_min,
        mu4_hat: mu4,
        mu4_source: big.to_string(),
        jump,
        acf_returns,
        acf_squared,
        fits: fits.iter().map(FittedModel::report).collect(),
        warnings,
    })
}

impl Analysis {
    pub fn to_text(&self) -> String {
        let mut s = format!("n: {}\n", self.n);
        s.push_str(&format!("mu4_hat: {:.4} (from {})\n", self.mu4_hat, self.mu4_source));
        s.push_str(&format!("c_min: {:.4}\n", self.c_min));
        s.push_str(&format!("BIC selects: {}\n", self.bic.selected));
        s.push_str(&format!(
            "HQ (c = {:.4}) selects: {}\n",
            self.hq.c_used.unwrap_or(f64::NAN),
            self.hq.selected
        ));
        if let Some(p) = &self.jump {
            if let (Some(c), Some(m)) = (p.c_hat_min, p.final_model) {
                s.push_str(&format!("dimension jump: c_hat_min = {c:.4}, selects {m}\n"));
            }
        }
        for (name, a) in [("returns", &self.acf_returns), ("squared returns", &self.acf_squared)] {
            if let Some(a) = a {
                let head: Vec<String> = a.iter().skip(1).take(5).map(|v| format!("{v:.3}")).collect();
                s.push_str(&format!("acf of {name}, lags 1-5: {}\n", head.join(" ")));
            }
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

/// Top-level JSON object carrying a schema version and a result kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    pub result: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, result: T) -> Self {
        Envelope { schema_version: SCHEMA_VERSION, kind: kind.into(), result }
    }
}

pub fn to_json<T: Serialize>(kind: &str, result: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Envelope::new(kind, result))?)
}

pub fn from_json<T: for<'de> Deserialize<'de>>(s: &str) -> Result<Envelope<T>> {
    let env: Envelope<T> = serde_json::from_str(s)?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "schema version {} is not supported (expected {SCHEMA_VERSION})",
            env.schema_version
        )));
    }
    Ok(env)
}
