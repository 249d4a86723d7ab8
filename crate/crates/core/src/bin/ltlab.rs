use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use brownian_lt::experiments::config::{parse_f64_list, parse_key_values, parse_u_grid};
use brownian_lt::experiments::report::{
    write_cross_validation_csv, write_report_files, write_scaling_csv, write_small_lt_csv, write_small_lt_paths_csv,
    write_text_summary,
};
use brownian_lt::experiments::{
    cross_validate, increment_scaling, run_clt, run_correction_diagnostic, run_functional, run_lln,
    small_lt_diagnostic, EstimatorKind, ExperimentConfig, ExperimentReport,
};
use brownian_lt::functionals::parse_function_spec;
use brownian_lt::gaussian_theory::{theory_table, write_theory_csv, TheoryEngine};
use brownian_lt::{LabError, Result};

const KNOWN_KEYS: [&str; 16] = [
    "cells-per-h",
    "function",
    "h",
    "paths",
    "steps",
    "seed",
    "estimator",
    "normalize",
    "t",
    "q",
    "x0",
    "eps",
    "out",
    "workers",
    "u-grid",
    "master-seed",
];

#[derive(Parser)]
#[command(name = "ltlab", version, about = "Monte Carlo and quadrature lab for local-time increment statistics")]
struct Cli {
    /// key = value file mirroring the flags; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads (1 = sequential).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limit-quantity table over a grid of u.
    Theory(TheoryArgs),
    /// Law of large numbers across h.
    Lln(RunArgs),
    /// Studentized central limit statistic.
    Clt(RunArgs),
    /// Functional residual at the given t levels.
    Functional(FunctionalArgs),
    /// Monomial statistic with the R_{q,h} standardization.
    Correction(CorrectionArgs),
    /// Small-local-time frequency at a level x0.
    Diagnose(DiagnoseArgs),
    /// Piecewise-linear vs kernel estimator on the same paths.
    Crossval(RunArgs),
    /// RMS of L^h - L^0 against h.
    Scaling(RunArgs),
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    function: Option<String>,
    /// a:b:n
    #[arg(long)]
    u_grid: Option<String>,
    /// CSV file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    function: Option<String>,
    /// Comma-separated increment widths.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    /// Steps per path (default: schedule by h).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// pl | kernel
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    normalize: bool,
    /// Grid cells per smallest h.
    #[arg(long)]
    cells_per_h: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FunctionalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated t levels.
    #[arg(long)]
    t: Option<String>,
}

#[derive(Args)]
struct CorrectionArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    q: Option<usize>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    x0: Option<f64>,
    /// Comma-separated thresholds.
    #[arg(long)]
    eps: Option<String>,
}

/// Flag values layered over the config file.
struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => parse_key_values(&fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        if let Some(key) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(LabError::Configuration(format!("unknown key {key:?} in config file")));
        }
        Ok(Self { file })
    }

    fn text(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.file.get(key).cloned())
    }

    fn parsed<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| LabError::Configuration(format!("bad value {v:?} for {key}"))),
            None => Ok(None),
        }
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.parsed::<bool>(None, key)?.unwrap_or(false))
    }

    fn experiment(&self, args: RunArgs, workers: Option<usize>) -> Result<ExperimentConfig> {
        let defaults = ExperimentConfig::default();
        let seed = match self.parsed(args.seed, "seed")? {
            Some(s) => Some(s),
            None => self.parsed(None, "master-seed")?,
        };
        Ok(ExperimentConfig {
            n_steps: self.parsed(args.steps, "steps")?,
            path_count: self.parsed(args.paths, "paths")?.unwrap_or(defaults.path_count),
            master_seed: seed.unwrap_or(defaults.master_seed),
            h_list: match self.text(args.h, "h") {
                Some(h) => parse_f64_list(&h)?,
                None => defaults.h_list,
            },
            function_spec: self.text(args.function, "function").unwrap_or(defaults.function_spec),
            estimator: match self.text(args.estimator, "estimator") {
                Some(e) => e.parse::<EstimatorKind>()?,
                None => defaults.estimator,
            },
            normalize: self.flag(args.normalize, "normalize")?,
            t_levels: Vec::new(),
            cells_per_h: self.parsed(args.cells_per_h, "cells-per-h")?.unwrap_or(defaults.cells_per_h),
            output_path: self.parsed(args.out, "out")?,
            workers: self.parsed(workers, "workers")?,
        })
    }
}

fn emit(report: &ExperimentReport) -> Result<ExitCode> {
    if let Some(dir) = &report.config.output_path {
        write_report_files(report, dir)?;
    }
    write_text_summary(report, io::stdout().lock())?;
    if report.has_degenerate_group() {
        eprintln!("error: at least one (h, t) group has no non-degenerate paths");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let settings = Settings::load(cli.config.as_deref())?;
    let workers = cli.workers;
    match cli.command {
        Command::Theory(args) => {
            let f = parse_function_spec(&settings.text(args.function, "function").unwrap_or_else(|| "mono:2".into()))?;
            let us = parse_u_grid(&settings.text(args.u_grid, "u-grid").unwrap_or_else(|| "0:2:21".into()))?;
            let rows = theory_table(TheoryEngine::shared(), &f, &us)?;
            match settings.parsed::<PathBuf>(args.out, "out")? {
                Some(path) => write_theory_csv(&rows, fs::File::create(path)?)?,
                None => write_theory_csv(&rows, io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Lln(args) => emit(&run_lln(&settings.experiment(args, workers)?)?),
        Command::Clt(args) => emit(&run_clt(&settings.experiment(args, workers)?)?),
        Command::Functional(args) => {
            let mut config = settings.experiment(args.run, workers)?;
            config.t_levels = parse_f64_list(&settings.text(args.t, "t").unwrap_or_else(|| "0.5".into()))?;
            emit(&run_functional(&config)?)
        }
        Command::Correction(args) => {
            let config = settings.experiment(args.run, workers)?;
            let q = settings.parsed(args.q, "q")?.unwrap_or(2);
            emit(&run_correction_diagnostic(&config, q)?)
        }
        Command::Diagnose(args) => {
            let config = settings.experiment(args.run, workers)?;
            let x0 = settings.parsed(args.x0, "x0")?.unwrap_or(0.3);
            let eps = parse_f64_list(&settings.text(args.eps, "eps").unwrap_or_else(|| "0.1,0.05".into()))?;
            let report = small_lt_diagnostic(&config, x0, &eps)?;
            if let Some(dir) = &config.output_path {
                fs::create_dir_all(dir)?;
                write_small_lt_csv(&report, fs::File::create(dir.join("small_lt.csv"))?)?;
                write_small_lt_paths_csv(&report, fs::File::create(dir.join("small_lt_paths.csv"))?)?;
            }
            write_small_lt_csv(&report, io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Crossval(args) => {
            let config = settings.experiment(args, workers)?;
            let rows = cross_validate(&config)?;
            if let Some(dir) = &config.output_path {
                fs::create_dir_all(dir)?;
                write_cross_validation_csv(&rows, fs::File::create(dir.join("crossval.csv"))?)?;
            }
            write_cross_validation_csv(&rows, io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Scaling(args) => {
            let h_given = settings.text(args.h.clone(), "h").is_some();
            let mut config = settings.experiment(args, workers)?;
            if !h_given {
                config.h_list = vec![0.02, 0.05, 0.1, 0.2];
            }
            let report = increment_scaling(&config)?;
            if let Some(dir) = &config.output_path {
                fs::create_dir_all(dir)?;
                write_scaling_csv(&report, fs::File::create(dir.join("scaling.csv"))?)?;
            }
            write_scaling_csv(&report, io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => {
            let _ = io::stdout().flush();
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
