//! Dimension-jump calibration of the generalized HQ constant.
//!
//! For each `c` on a grid the selected model minimizes `-L_n(m) + c D_m log log n`. The
//! minimal constant is read off where the selected dimension falls the most, and the final
//! model is selected again at `multiplier * c_hat_min`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::criteria::{argmin_with_ties, log_log, MIN_HQ_N};
use crate::error::{Error, Result};
use crate::fit::FittedModel;
use crate::model::ModelSpec;

pub const DEFAULT_MULTIPLIER: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    pub n: usize,
    pub grid: Vec<f64>,
    pub selected_dims: Vec<usize>,
    pub selected_specs: Vec<ModelSpec>,
    /// Filled in by [`dimension_jump`].
    pub c_hat_min: Option<f64>,
    pub c_final: Option<f64>,
    pub final_model: Option<ModelSpec>,
    pub multiplier: f64,
}

/// `n_points` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n_points < 2 {
        return Err(Error::invalid(format!(
            "grid needs 0 < lo < hi and at least 2 points, got [{lo}, {hi}] with {n_points}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n_points - 1) as f64;
    let mut g: Vec<f64> = (0..n_points).map(|i| (a + step * i as f64).exp()).collect();
    g[0] = lo;
    g[n_points - 1] = hi;
    Ok(g)
}

pub fn default_grid() -> Vec<f64> {
    log_grid(0.01, 20.0, 60).expect("valid default grid")
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    if grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::invalid("grid values must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok(())
}

fn check_fits(fits: &[FittedModel], n: usize) -> Result<()> {
    if fits.is_empty() {
        return Err(Error::invalid("no fitted models"));
    }
    if n < MIN_HQ_N {
        return Err(Error::invalid(format!("calibration needs n >= {MIN_HQ_N}, got {n}")));
    }
    if let Some(f) = fits.iter().find(|f| !f.loglik.is_finite()) {
        return Err(Error::invalid(format!("{} has a non-finite likelihood", f.spec)));
    }
    Ok(())
}

/// Index of the model minimizing `-L + c D log log n`.
fn select_at(fits: &[FittedModel], n: usize, c: f64) -> usize {
    let lln = log_log(n);
    argmin_with_ties(fits.iter().map(|f| (-f.loglik + c * f.dim as f64 * lln, f.dim))).expect("non-empty fits")
}

/// The model selected at `c` under the path criterion.
pub fn select_at_c(fits: &[FittedModel], n: usize, c: f64) -> Result<ModelSpec> {
    check_fits(fits, n)?;
    check_grid(&[c])?;
    Ok(fits[select_at(fits, n, c)].spec)
}

pub fn selection_path(fits: &[FittedModel], n: usize, grid: &[f64]) -> Result<JumpPath> {
    check_grid(grid)?;
    check_fits(fits, n)?;
    let idx: Vec<usize> = grid.iter().map(|&c| select_at(fits, n, c)).collect();
    let selected_dims: Vec<usize> = idx.iter().map(|&i| fits[i].dim).collect();
    if selected_dims.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Internal("selected dimension increased along the grid".into()));
    }
    Ok(JumpPath {
        n,
        grid: grid.to_vec(),
        selected_dims,
        selected_specs: idx.iter().map(|&i| fits[i].spec).collect(),
        c_hat_min: None,
        c_final: None,
        final_model: None,
        multiplier: DEFAULT_MULTIPLIER,
    })
}

/// Grid point at the right end of the largest drop in dimension; ties go to the smallest `c`.
pub fn locate_jump(grid: &[f64], dims: &[usize]) -> Result<f64> {
    if grid.len() != dims.len() {
        return Err(Error::invalid("grid and dimension path differ in length"));
    }
    if grid.len() < 2 {
        return Err(Error::invalid("dimension jump needs at least 2 grid points"));
    }
    let mut best: Option<(usize, usize)> = None;
    for i in 1..dims.len() {
        let drop = dims[i - 1].saturating_sub(dims[i]);
        if drop > 0 && best.is_none_or(|(_, d)| drop > d) {
            best = Some((i, drop));
        }
    }
    best.map(|(i, _)| grid[i]).ok_or_else(|| {
        Error::Calibration(format!(
            "selected dimension is constant at {} over [{}, {}]; widen the grid",
            dims[0],
            grid[0],
            grid[grid.len() - 1]
        ))
    })
}

/// Completes `path` with `c_hat_min`, `c_final = multiplier * c_hat_min` and the model selected there.
pub fn dimension_jump(fits: &[FittedModel], mut path: JumpPath, multiplier: f64) -> Result<JumpPath> {
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::invalid(format!("multiplier must be positive, got {multiplier}")));
    }
    let c_hat = locate_jump(&path.grid, &path.selected_dims)?;
    let c_final = multiplier * c_hat;
    path.final_model = Some(select_at_c(fits, path.n, c_final)?);
    path.c_hat_min = Some(c_hat);
    path.c_final = Some(c_final);
    path.multiplier = multiplier;
    Ok(path)
}

/// Path plus jump in one call.
pub fn calibrate(fits: &[FittedModel], n: usize, grid: &[f64], multiplier: f64) -> Result<JumpPath> {
    let path = selection_path(fits, n, grid)?;
    dimension_jump(fits, path, multiplier)
}

impl JumpPath {
    /// Rows `c,spec,dim`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["c", "spec", "dim"])?;
        for ((c, s), d) in self.grid.iter().zip(&self.selected_specs).zip(&self.selected_dims) {
            out.write_record([c.to_string(), s.to_string(), d.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match (self.c_hat_min, self.c_final, self.final_model) {
            (Some(c), Some(cf), Some(m)) => {
                s.push_str(&format!("c_hat_min: {c:.6}\n"));
                s.push_str(&format!("c_final ({}x): {cf:.6}\n", self.multiplier));
                s.push_str(&format!("final_model: {m}\n"));
            }
            _ => s.push_str("no jump located\n"),
        }
        s
    }
}
