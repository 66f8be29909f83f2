use std::process::Command;

use proptest::prelude::*;
use serde_json::Value;

use tsselect::calibrate::{default_grid, selection_path, JumpPath};
use tsselect::criteria::{select, PenaltySpec, SelectionResult};
use tsselect::fit::{fit, FitOptions, FitReport, FittedModel};
use tsselect::io::{acf, analyze_returns, from_json, load_csv, to_json, write_series_csv, Analysis, AnalysisMode, FamilyBounds};
use tsselect::model::{Family, ModelConfig, ModelSpec};
use tsselect::simulate::{gen_noise, simulate_process, NoiseSpec, DEFAULT_BURN_IN};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsselect"))
}

#[test]
fn simulated_csv_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let x = simulate_process(&ModelSpec::arch(2), &[0.2, 0.4, 0.2], &NoiseSpec::student(5, 4), 300, 100, &ModelConfig::default()).unwrap();
    write_series_csv(std::fs::File::create(&path).unwrap(), &x).unwrap();
    assert_eq!(load_csv(&path, Some("x")).unwrap(), x);
}

#[test]
fn cli_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let out = bin()
        .args(["--seed", "9", "simulate", "--preset", "I", "--n", "250", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: 9"));
    let expected = simulate_process(&ModelSpec::arma(2, 0), &[0.5, 0.2, 1.0], &NoiseSpec::gaussian(9), 250, DEFAULT_BURN_IN, &ModelConfig::default()).unwrap();
    assert_eq!(load_csv(&path, None).unwrap(), expected);

    let fit_out = bin()
        .args(["--output", "json", "fit", "--model", "ARMA(2,0)", "--input"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(fit_out.status.success());
    let v: Value = serde_json::from_slice(&fit_out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["result"]["spec"], "ARMA(2,0)");
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "p\n1\nNaN\n").unwrap();
    let out = bin().args(["acf", "--input"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let missing = bin().args(["acf", "--input", "/nonexistent/x.csv"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    // a single candidate gives a flat path, which is a calibration failure
    let good = dir.path().join("good.csv");
    write_series_csv(std::fs::File::create(&good).unwrap(), &gen_noise(&NoiseSpec::gaussian(1), 200).unwrap()).unwrap();
    let flat = bin()
        .args(["calibrate", "--max-p", "0", "--max-q", "0", "--max-p-garch", "0", "--max-q-garch", "0", "--input"])
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(flat.status.code(), Some(3), "{}", String::from_utf8_lossy(&flat.stderr));

    let usage = bin().args(["simulate", "--n", "abc"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn cli_mc_csv() {
    let out = bin()
        .args(["--output", "csv", "mc", "--preset", "III", "--n", "60", "--reps", "3", "--penalties", "c_min,bic"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,penalty,W,T,O,replications,failures"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn white_noise_acf_within_bartlett_band() {
    let x = gen_noise(&NoiseSpec::gaussian(31), 10_000).unwrap();
    let r = acf(&x, 20).unwrap();
    let band = 3.0 / 100.0;
    assert_eq!(r[0], 1.0);
    for (k, v) in r.iter().enumerate().skip(1) {
        assert!(v.abs() < band, "lag {k}: {v}");
    }
}

#[test]
fn squared_garch_returns_are_autocorrelated() {
    let x = simulate_process(&ModelSpec::garch(1, 1), &[0.05, 0.1, 0.85], &NoiseSpec::gaussian(8), 5000, DEFAULT_BURN_IN, &ModelConfig::default()).unwrap();
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let r = acf(&sq, 5).unwrap();
    assert!(r[1] > 2.0 / (5000f64).sqrt(), "{}", r[1]);
}

#[test]
fn ar1_series_selects_arma_under_both_criteria() {
    let x = simulate_process(&ModelSpec::ar(1), &[0.6, 1.0], &NoiseSpec::gaussian(12), 1000, DEFAULT_BURN_IN, &ModelConfig::default()).unwrap();
    let bounds = FamilyBounds { max_p: 2, max_q: 2, max_p_garch: 1, max_q_garch: 2 };
    let opts = FitOptions { multistarts: 2, covariance: false, ..Default::default() };
    let a = analyze_returns(&x, bounds, AnalysisMode::default(), &opts, &ModelConfig::default()).unwrap();
    assert_eq!(a.bic.selected.family(), Family::Arma);
    assert_eq!(a.hq.selected.family(), Family::Arma);
    assert!(a.warnings.is_empty(), "{:?}", a.warnings);
    let back: Analysis = from_json(&to_json("analysis", &a).unwrap()).unwrap().result;
    assert_eq!(back, a);
}

#[test]
fn short_series_warns() {
    let x = gen_noise(&NoiseSpec::gaussian(2), 120).unwrap();
    let bounds = FamilyBounds { max_p: 1, max_q: 0, max_p_garch: 0, max_q_garch: 1 };
    let opts = FitOptions { multistarts: 1, covariance: false, ..Default::default() };
    let a = analyze_returns(&x, bounds, AnalysisMode::default(), &opts, &ModelConfig::default()).unwrap();
    assert!(a.warnings.iter().any(|w| w.contains("120 observations")));
}

#[test]
fn fit_report_round_trip() {
    let x = gen_noise(&NoiseSpec::gaussian(5), 300).unwrap();
    let f = fit(&ModelSpec::garch(1, 1), &x, &FitOptions::default(), &ModelConfig::default()).unwrap();
    let r = f.report();
    let back: FitReport = from_json(&to_json("fit", &r).unwrap()).unwrap().result;
    assert_eq!(back, r);
}

fn arb_rows() -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::vec((0usize..4, 0usize..4, -1e4f64..0.0), 1..12)
}

fn fake_fits(rows: &[(usize, usize, f64)], n: usize) -> Vec<FittedModel> {
    rows.iter()
        .map(|&(p, q, ll)| {
            let spec = ModelSpec::arma(p, q);
            FittedModel::from_loglik(spec, spec.dimension(), ll, n)
        })
        .collect()
}

proptest! {
    #[test]
    fn acf_is_affine_invariant(x in prop::collection::vec(-10.0f64..10.0, 30..80), a in 0.1f64..5.0, neg in any::<bool>(), b in -100.0f64..100.0) {
        prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
        let a = if neg { -a } else { a };
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (rx, ry) = (acf(&x, 5).unwrap(), acf(&y, 5).unwrap());
        for (u, v) in rx.iter().zip(&ry) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn selection_json_round_trip(rows in arb_rows(), c in 0.01f64..5.0, bic in any::<bool>()) {
        let fits = fake_fits(&rows, 500);
        let p = if bic { PenaltySpec::Bic } else { PenaltySpec::hq(c) };
        let s = select(&fits, &p, 500).unwrap().with_mu4(5.0);
        let back: SelectionResult = from_json(&to_json("selection", &s).unwrap()).unwrap().result;
        prop_assert_eq!(back, s);
    }

    #[test]
    fn jump_path_json_round_trip(rows in arb_rows()) {
        let fits = fake_fits(&rows, 800);
        let p = selection_path(&fits, 800, &default_grid()).unwrap();
        let back: JumpPath = from_json(&to_json("jump_path", &p).unwrap()).unwrap().result;
        prop_assert_eq!(back, p);
    }
}
