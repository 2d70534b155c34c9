//! Command-line interface: simulation, estimation, replication studies,
//! asymptotics, return densities and the full data-analysis pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

// NaN-robust range checks use negated comparisons so bad values fail closed
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bnsvol::{
    analyze, density_x, estimate, mc_study, read_path_csv, sandwich_theoretical, simulate_gamma_ou,
    simulate_ig_ou, write_analysis_outputs, write_path_csv, AnalysisOptions, CumulantEvaluator,
    GridConstants, IgOuParams, McStudyConfig, ModelParams, RngStream, StationaryLaw,
};

mod config;
use config::ConfigFile;

#[derive(Debug, Parser)]
#[command(
    name = "bnsvol",
    version,
    about = "Volume-driven stochastic volatility toolkit"
)]
struct Cli {
    /// Observation spacing in years (overrides --trading-days)
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Trading days per year (sets delta = 1/days)
    #[arg(long, global = true)]
    trading_days: Option<u32>,
    /// Base RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo work (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory (subcommand-dependent; stdout by default)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat TOML config file supplying defaults for any long flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Law {
    Gamma,
    Ig,
}

#[derive(Debug, Args)]
struct ThetaArgs {
    #[arg(long, allow_negative_numbers = true)]
    nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a path and write it as CSV (`i,x,tau[,z,u,y,s]`)
    Simulate {
        #[command(flatten)]
        theta: ThetaArgs,
        /// Number of observations
        #[arg(long)]
        n: Option<usize>,
        /// Stationary law of the volume process
        #[arg(long, value_enum)]
        law: Option<Law>,
        /// IG law shape parameter (with --law ig)
        #[arg(long)]
        ig_delta: Option<f64>,
        /// IG law rate parameter (with --law ig)
        #[arg(long)]
        ig_gamma: Option<f64>,
        /// Sub-steps per interval for the IG scheme
        #[arg(long)]
        mesh: Option<usize>,
        /// Include the latent z,u,y,s columns
        #[arg(long)]
        with_latent: bool,
    },
    /// Estimate parameters from a path CSV; writes an estimate report as JSON
    Estimate {
        /// Path CSV produced by `simulate` (header i,x,tau[,...])
        input: PathBuf,
    },
    /// Replication study: simulate + estimate m times; JSON report (+ CSV table)
    McStudy {
        #[command(flatten)]
        theta: ThetaArgs,
        /// Observations per replication
        #[arg(long)]
        n: Option<usize>,
        /// Number of replications
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Asymptotic covariance at a parameter vector (nested Monte Carlo)
    Asymptotics {
        #[command(flatten)]
        theta: ThetaArgs,
        /// Outer draws of the stationary volume
        #[arg(long)]
        n_outer: Option<usize>,
        /// Conditional draws per outer draw
        #[arg(long)]
        n_inner: Option<usize>,
    },
    /// Return density curve as CSV (x,pdf,log_pdf)
    Density {
        #[command(flatten)]
        theta: ThetaArgs,
        #[arg(long, allow_negative_numbers = true)]
        x_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        x_max: Option<f64>,
        /// Number of grid points
        #[arg(long)]
        points: Option<usize>,
        /// Per-point absolute quadrature tolerance
        #[arg(long)]
        quad_tol: Option<f64>,
    },
    /// Full pipeline on a market CSV (date,close,volume): report + series
    Analyze {
        input: PathBuf,
        /// Divisor applied to raw volumes
        #[arg(long)]
        volume_unit: Option<f64>,
        /// Ljung-Box lag count for squared residuals
        #[arg(long)]
        lags: Option<usize>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<bnsvol::Error> for CliError {
    fn from(e: bnsvol::Error) -> Self {
        match e {
            bnsvol::Error::Parameter(m) => CliError::Usage(m),
            bnsvol::Error::Domain(m) | bnsvol::Error::Data(m) => CliError::Data(m),
            bnsvol::Error::Numerical(m) => CliError::Numerical(m),
            bnsvol::Error::Io(e) => CliError::Data(e.to_string()),
            bnsvol::Error::Csv(e) => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(out: &Option<PathBuf>, contents: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, contents)?;
        }
        None => std::io::stdout().write_all(contents)?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(format!("serialize: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;

    let trading_days = cfg
        .resolve("trading_days", cli.trading_days)?
        .unwrap_or(250);
    if trading_days == 0 {
        return Err(CliError::Usage("trading-days must be >= 1".into()));
    }
    let delta = cfg
        .resolve("delta", cli.delta)?
        .unwrap_or(1.0 / trading_days as f64);
    let seed = cfg.resolve("seed", cli.seed)?.unwrap_or(0);
    let out = cli.out.clone().or(cfg.path("out")?);

    if let Some(threads) = cfg.resolve("threads", cli.threads)? {
        if threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        }
    }

    let theta_from = |t: &ThetaArgs| -> Result<ModelParams, CliError> {
        ModelParams::new(
            cfg.resolve("nu", t.nu)?.ok_or_else(|| miss("nu"))?,
            cfg.resolve("alpha", t.alpha)?
                .ok_or_else(|| miss("alpha"))?,
            cfg.resolve("lambda", t.lambda)?
                .ok_or_else(|| miss("lambda"))?,
            cfg.resolve("mu", t.mu)?.ok_or_else(|| miss("mu"))?,
            cfg.resolve("beta", t.beta)?.ok_or_else(|| miss("beta"))?,
            cfg.resolve("sigma", t.sigma)?
                .ok_or_else(|| miss("sigma"))?,
            cfg.resolve("rho", t.rho)?.ok_or_else(|| miss("rho"))?,
        )
        .map_err(Into::into)
    };

    match &cli.command {
        Command::Simulate {
            theta,
            n,
            law,
            ig_delta,
            ig_gamma,
            mesh,
            with_latent,
        } => {
            let n = cfg.resolve("n", *n)?.ok_or_else(|| miss("n"))?;
            let stream = RngStream::new(seed, 0);
            let law = resolve_law(&cfg, *law)?.unwrap_or(Law::Gamma);
            let sample = match law {
                Law::Gamma => {
                    let p = theta_from(theta)?;
                    simulate_gamma_ou(&p, n, delta, &stream, *with_latent)?
                }
                Law::Ig => {
                    let d = cfg
                        .resolve("ig_delta", *ig_delta)?
                        .ok_or_else(|| miss("ig-delta"))?;
                    let g = cfg
                        .resolve("ig_gamma", *ig_gamma)?
                        .ok_or_else(|| miss("ig-gamma"))?;
                    let ig = IgOuParams::new(
                        StationaryLaw::ig_ou(d, g)?,
                        cfg.resolve("lambda", theta.lambda)?
                            .ok_or_else(|| miss("lambda"))?,
                        cfg.resolve("mu", theta.mu)?.ok_or_else(|| miss("mu"))?,
                        cfg.resolve("beta", theta.beta)?
                            .ok_or_else(|| miss("beta"))?,
                        cfg.resolve("sigma", theta.sigma)?
                            .ok_or_else(|| miss("sigma"))?,
                        cfg.resolve("rho", theta.rho)?.ok_or_else(|| miss("rho"))?,
                    )?;
                    let mesh = cfg.resolve("mesh", *mesh)?.unwrap_or(64);
                    simulate_ig_ou(&ig, n, delta, &stream, mesh, *with_latent)?
                }
            };
            let mut buf = Vec::new();
            write_path_csv(&sample, &mut buf)?;
            emit(&out, &buf)
        }
        Command::Estimate { input } => {
            let file = fs::File::open(input)
                .map_err(|e| CliError::Data(format!("cannot open {}: {e}", input.display())))?;
            let sample = read_path_csv(file, delta)?;
            let report = estimate(&sample.x, &sample.tau, delta)?;
            emit(&out, &to_json(&report)?)
        }
        Command::McStudy { theta, n, reps } => {
            let config = McStudyConfig {
                theta0: theta_from(theta)?,
                n: cfg.resolve("n", *n)?.ok_or_else(|| miss("n"))?,
                m: cfg.resolve("reps", *reps)?.ok_or_else(|| miss("reps"))?,
                seed,
                delta,
            };
            let report = mc_study(&config)?;
            match &out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("report.json"), to_json(&report)?)?;
                    let mut csv = Vec::new();
                    report.write_replications_csv(&mut csv)?;
                    fs::write(dir.join("replications.csv"), csv)?;
                    Ok(())
                }
                None => emit(&None, &to_json(&report)?),
            }
        }
        Command::Asymptotics {
            theta,
            n_outer,
            n_inner,
        } => {
            let p = theta_from(theta)?;
            let grid = GridConstants::new(p.lambda, delta)?;
            let n_outer = cfg.resolve("n_outer", *n_outer)?.unwrap_or(2000);
            let n_inner = cfg.resolve("n_inner", *n_inner)?.unwrap_or(2000);
            let report =
                sandwich_theoretical(&p, &grid, n_outer, n_inner, &RngStream::new(seed, 0))?;
            emit(&out, &to_json(&report)?)
        }
        Command::Density {
            theta,
            x_min,
            x_max,
            points,
            quad_tol,
        } => {
            let p = theta_from(theta)?;
            let ev = CumulantEvaluator::gamma_ou(&p, delta)?;
            let (mean, var) = ev.return_mean_var()?;
            let sd = var.sqrt();
            let x_min = cfg.resolve("x_min", *x_min)?.unwrap_or(mean - 8.0 * sd);
            let x_max = cfg.resolve("x_max", *x_max)?.unwrap_or(mean + 8.0 * sd);
            if !(x_max > x_min) {
                return Err(CliError::Usage(format!(
                    "x-max ({x_max}) must exceed x-min ({x_min})"
                )));
            }
            let points = cfg.resolve("points", *points)?.unwrap_or(201).max(2);
            let quad_tol = cfg.resolve("quad_tol", *quad_tol)?.unwrap_or(1e-8);
            let grid: Vec<f64> = (0..points)
                .map(|i| x_min + (x_max - x_min) * i as f64 / (points - 1) as f64)
                .collect();
            let curve = density_x(&grid, &p, delta, quad_tol)?;
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            emit(&out, &buf)
        }
        Command::Analyze {
            input,
            volume_unit,
            lags,
        } => {
            let unit = cfg
                .resolve("volume_unit", *volume_unit)?
                .unwrap_or(bnsvol::DEFAULT_VOLUME_UNIT);
            let dataset = bnsvol::load_csv(input, unit)?;
            if dataset.n_returns() < 100 {
                eprintln!(
                    "warning: only {} observations; estimates will be noisy",
                    dataset.n_returns()
                );
            }
            let options = AnalysisOptions {
                lb_lags: cfg.resolve("lags", *lags)?.unwrap_or(35),
                ..Default::default()
            };
            let report = analyze(&dataset.returns(), &dataset.tau(), delta, &options)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("analysis_out"));
            write_analysis_outputs(&report, &dir)?;
            let mut summary = String::new();
            summary.push_str(&format!(
                "n = {}, valid = {}\n",
                report.n, report.estimate.valid
            ));
            if report.estimate.valid {
                for (name, v) in bnsvol::PARAM_NAMES.iter().zip(report.estimate.theta()) {
                    summary.push_str(&format!("{name:8} {v:.6}\n"));
                }
                if let Some(u) = &report.unconditional {
                    summary.push_str(&format!(
                        "E[X] {:.4e}  Std[X] {:.4e}  E[V] {:.4e}  Std[V] {:.4e}\n",
                        u.mean_x, u.std_x, u.mean_v, u.std_v
                    ));
                }
                if let Some(t) = &report.ljung_box_squared_residuals {
                    summary.push_str(&format!(
                        "Ljung-Box(eps^2, {} lags): Q = {:.3}, p = {:.4}\n",
                        t.lags_or_n, t.statistic, t.p_value
                    ));
                }
                if let Some(t) = &report.ks_residuals {
                    summary.push_str(&format!(
                        "KS(eps): D = {:.4}, p = {:.4}\n",
                        t.statistic, t.p_value
                    ));
                }
            } else {
                summary.push_str(&format!(
                    "estimation failed: {:?}\n",
                    report.estimate.failure_reason
                ));
            }
            summary.push_str(&format!("outputs written to {}\n", dir.display()));
            print!("{summary}");
            Ok(())
        }
    }
}

fn miss(flag: &str) -> CliError {
    CliError::Usage(format!("missing required value --{flag} (flag or config)"))
}

fn resolve_law(cfg: &ConfigFile, flag: Option<Law>) -> Result<Option<Law>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg.string("law")? {
        None => Ok(None),
        Some(s) => match s.as_str() {
            "gamma" => Ok(Some(Law::Gamma)),
            "ig" => Ok(Some(Law::Ig)),
            other => Err(CliError::Usage(format!(
                "config key law must be gamma or ig, got {other}"
            ))),
        },
    }
}
