use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsselect::calibrate::{calibrate, log_grid};
use tsselect::criteria::{select, PenaltySpec};
use tsselect::error::{Error, Result};
use tsselect::fit::{fit, fit_family, FitOptions, FittedModel};
use tsselect::io::{acf, analyze_returns, load_csv, load_prices, read_columns, to_json, write_series_csv, AnalysisMode, FamilyBounds};
use tsselect::model::{enumerate_family, ModelConfig, ModelSpec};
use tsselect::montecarlo::{dgp_preset, run_experiment, ExperimentConfig, PenaltyRule};
use tsselect::par;
use tsselect::simulate::{simulate_process, NoiseKind, NoiseSpec, DEFAULT_BURN_IN};

#[derive(Parser)]
#[command(name = "tsselect", version, about = "Penalized ARMA/GARCH model selection")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    output: Option<Format>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a process and write the series as CSV.
    Simulate {
        /// Model such as "ARMA(2,0)" or "GARCH(1,1)".
        #[arg(long, conflicts_with = "preset", requires = "theta")]
        model: Option<ModelSpec>,
        /// Comma-separated parameters in the model's layout.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        /// I, II or III.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long, default_value = "gaussian")]
        noise: NoiseKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one model to a series.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        model: ModelSpec,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Fit a family and select under one penalty.
    Select {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
        /// bic, aic or hq(C)
        #[arg(long, default_value = "bic")]
        penalty: PenaltySpec,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Dimension-jump calibration over a fitted family.
    Calibrate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, default_value_t = 2.0)]
        multiplier: f64,
        #[arg(long, default_value_t = 0.01)]
        grid_min: f64,
        #[arg(long, default_value_t = 20.0)]
        grid_max: f64,
        #[arg(long, default_value_t = 60)]
        grid_points: usize,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Monte Carlo selection experiment on a preset process.
    Mc {
        #[arg(long)]
        preset: String,
        #[arg(long, value_delimiter = ',', default_value = "100,500,1000,2000")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value = "gaussian")]
        noise: NoiseKind,
        /// Comma-separated: c_min, 2c_min, hq(C), jump(M), bic, aic.
        #[arg(long, value_delimiter = ',')]
        penalties: Option<Vec<PenaltyRule>>,
        #[arg(long, default_value_t = 1)]
        multistarts: usize,
        /// Keep per-replication records in JSON output.
        #[arg(long)]
        keep_log: bool,
    },
    /// Returns analysis: BIC and calibrated HQ over the mixed family, plus autocorrelations.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        /// Treat the column as returns rather than prices.
        #[arg(long)]
        returns: bool,
        #[arg(long)]
        time_column: Option<String>,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, value_enum, default_value = "formula")]
        mode: Mode,
        #[arg(long, default_value_t = 2.0)]
        multiplier: f64,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Sample autocorrelations.
    Acf {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        /// Autocorrelations of the squared series.
        #[arg(long)]
        squared: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Formula,
    Jump,
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with a header row, or "-" for stdin.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 5)]
    max_p: usize,
    #[arg(long, default_value_t = 5)]
    max_q: usize,
    #[arg(long, default_value_t = 5)]
    max_p_garch: usize,
    #[arg(long, default_value_t = 5)]
    max_q_garch: usize,
}

impl BoundsArgs {
    fn bounds(&self) -> FamilyBounds {
        FamilyBounds { max_p: self.max_p, max_q: self.max_q, max_p_garch: self.max_p_garch, max_q_garch: self.max_q_garch }
    }

    fn specs(&self) -> Vec<ModelSpec> {
        enumerate_family(self.max_p, self.max_q, self.max_p_garch, self.max_q_garch)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, default_value_t = 5)]
    multistarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Fix the ARMA innovation variance at one.
    #[arg(long)]
    known_variance: bool,
}

impl FitArgs {
    fn options(&self, seed: u64, covariance: bool) -> FitOptions {
        FitOptions { multistarts: self.multistarts, max_iters: self.max_iters, seed, covariance, ..Default::default() }
    }

    fn config(&self) -> ModelConfig {
        ModelConfig { known_variance: self.known_variance, ..Default::default() }
    }
}

fn read_series(input: &InputArgs) -> Result<Vec<f64>> {
    if input.input == Path::new("-") {
        Ok(read_columns(io::stdin().lock(), Path::new("<stdin>"), input.column.as_deref(), None)?.0)
    } else {
        load_csv(&input.input, input.column.as_deref())
    }
}

fn fit_all(specs: &[ModelSpec], x: &[f64], opts: &FitOptions, cfg: &ModelConfig) -> Result<Vec<FittedModel>> {
    let mut fits = Vec::new();
    for r in fit_family(specs, x, opts, cfg) {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => eprintln!("warning: {e}"),
        }
    }
    if fits.is_empty() {
        return Err(Error::FitFailure { spec: "every candidate".into(), reason: "no model could be fitted".into() });
    }
    Ok(fits)
}

fn unsupported(cmd: &str, f: Format) -> Error {
    let name = match f {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Text => "text",
    };
    Error::InvalidArgument(format!("{cmd} has no {name} output"))
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.cmd {
        Command::Simulate { model, theta, preset, n, burn_in, noise, out: path } => {
            let (spec, theta) = match (model, preset) {
                (Some(m), None) => (m, theta.unwrap_or_default()),
                (None, Some(p)) => {
                    let d = dgp_preset(&p)?;
                    (d.spec, theta.unwrap_or(d.theta.0))
                }
                _ => return Err(Error::InvalidArgument("give either --model with --theta, or --preset".into())),
            };
            let x = simulate_process(&spec, &theta, &NoiseSpec { kind: noise, seed }, n, burn_in, &ModelConfig::default())?;
            eprintln!("seed: {seed}");
            let fmt = cli.output.unwrap_or(Format::Csv);
            let body = match fmt {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_series_csv(&mut buf, &x)?;
                    buf
                }
                Format::Json => to_json("series", &x)?.into_bytes(),
                Format::Text => return Err(unsupported("simulate", fmt)),
            };
            match path {
                Some(p) => std::fs::write(p, body)?,
                None => out.write_all(&body)?,
            }
        }
        Command::Fit { input, model, fit: fa } => {
            let x = read_series(&input)?;
            let f = par::with_workers(cli.workers, || fit(&model, &x, &fa.options(seed, true), &fa.config()))?;
            let report = f.report();
            match cli.output.unwrap_or(Format::Text) {
                Format::Json => writeln!(out, "{}", to_json("fit", &report)?)?,
                Format::Text => {
                    writeln!(out, "model: {}", report.spec)?;
                    writeln!(out, "loglik: {:.6}", report.loglik)?;
                    for (i, t) in report.theta.iter().enumerate() {
                        let se = report.std_errors.as_ref().map_or(String::from("-"), |s| format!("{:.6}", s[i]));
                        writeln!(out, "theta[{i}]: {t:.6}  se: {se}")?;
                    }
                    writeln!(out, "converged: {}  at_boundary: {}", report.converged, report.at_boundary)?;
                }
                f => return Err(unsupported("fit", f)),
            }
        }
        Command::Select { input, bounds, penalty, fit: fa } => {
            let x = read_series(&input)?;
            let fits = par::with_workers(cli.workers, || fit_all(&bounds.specs(), &x, &fa.options(seed, false), &fa.config()))?;
            let res = select(&fits, &penalty, x.len())?;
            match cli.output.unwrap_or(Format::Text) {
                Format::Json => writeln!(out, "{}", to_json("selection", &res)?)?,
                Format::Text => write!(out, "{}", res.to_text())?,
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    w.write_record(["spec", "dim", "loglik", "penalty", "criterion", "selected"])?;
                    for (i, r) in res.table.iter().enumerate() {
                        w.write_record([
                            r.spec.to_string(),
                            r.dim.to_string(),
                            r.loglik.to_string(),
                            r.penalty.to_string(),
                            r.criterion.to_string(),
                            (i == res.selected_index).to_string(),
                        ])?;
                    }
                    w.flush()?;
                }
            }
        }
        Command::Calibrate { input, bounds, multiplier, grid_min, grid_max, grid_points, fit: fa } => {
            let x = read_series(&input)?;
            let grid = log_grid(grid_min, grid_max, grid_points)?;
            let fits = par::with_workers(cli.workers, || fit_all(&bounds.specs(), &x, &fa.options(seed, false), &fa.config()))?;
            let path = calibrate(&fits, x.len(), &grid, multiplier)?;
            match cli.output.unwrap_or(Format::Text) {
                Format::Json => writeln!(out, "{}", to_json("jump_path", &path)?)?,
                Format::Csv => path.write_csv(&mut out)?,
                Format::Text => write!(out, "{}", path.to_text())?,
            }
        }
        Command::Mc { preset, n, reps, noise, penalties, multistarts, keep_log } => {
            let mut cfg = ExperimentConfig::preset(&preset, noise, n, reps, seed)?;
            if let Some(p) = penalties {
                cfg.penalties = p;
            }
            cfg.fit.multistarts = multistarts;
            cfg.workers = cli.workers;
            cfg.keep_log = keep_log;
            let rep = run_experiment(&cfg)?;
            match cli.output.unwrap_or(Format::Text) {
                Format::Json => writeln!(out, "{}", to_json("experiment", &rep)?)?,
                Format::Csv => rep.write_csv(&mut out)?,
                Format::Text => write!(out, "{}", rep.to_text())?,
            }
        }
        Command::Analyze { input, returns, time_column, bounds, mode, multiplier, fit: fa } => {
            let x = if returns {
                read_series(&input)?
            } else if input.input == Path::new("-") {
                return Err(Error::InvalidArgument("price input must be a file".into()));
            } else {
                load_prices(&input.input, input.column.as_deref(), time_column.as_deref())?.returns()?
            };
            let mode = match mode {
                Mode::Formula => AnalysisMode::Formula { multiplier },
                Mode::Jump => AnalysisMode::Jump { multiplier },
            };
            let a = par::with_workers(cli.workers, || analyze_returns(&x, bounds.bounds(), mode, &fa.options(seed, false), &fa.config()))?;
            for w in &a.warnings {
                eprintln!("warning: {w}");
            }
            match cli.output.unwrap_or(Format::Text) {
                Format::Json => writeln!(out, "{}", to_json("analysis", &a)?)?,
                Format::Text => write!(out, "{}", a.to_text())?,
                f => return Err(unsupported("analyze", f)),
            }
        }
        Command::Acf { input, max_lag, squared } => {
            let mut x = read_series(&input)?;
            if squared {
                x.iter_mut().for_each(|v| *v *= *v);
            }
            let r = acf(&x, max_lag)?;
            match cli.output.unwrap_or(Format::Csv) {
                Format::Json => writeln!(out, "{}", to_json("acf", &r)?)?,
                Format::Csv | Format::Text => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    w.write_record(["lag", "acf"])?;
                    for (k, v) in r.iter().enumerate() {
                        w.write_record([k.to_string(), v.to_string()])?;
                    }
                    w.flush()?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
