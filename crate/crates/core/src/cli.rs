//! The `boldcal` command line.
//!
//! Exit codes: 0 success (possibly with warnings), 1 usage error, 2 data
//! error, 3 numerical failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::assessment::{assess, DEFAULT_BINS, DEFAULT_PRIOR};
use crate::boldness::{evaluate_grid, refine_grid_with, select_boldness, GridSpec, RefineOptions, DEFAULT_GRID_SIZE};
use crate::error::{CalibError, Result};
use crate::estimation::fit_mle;
use crate::io::{read_predictions, write_contour_csv, write_study_csv, LineplotTable, RecalibrationRow, ReportDocument};
use crate::llo::{llo_adjust, PredictionSet};
use crate::simulation::{
    run_mc_study, ForecasterKind, ForecasterSpec, McStudyConfig, DESIGN_NOISE_LEVELS, DESIGN_REPLICATES,
    DESIGN_SAMPLE_SIZES,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BOLDCAL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "boldcal", version, about = "Calibration assessment and boldness-recalibration for probability forecasts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior probability of calibration, LRT and scores (JSON to stdout, table to stderr)
    Assess(AssessArgs),
    /// MLE and boldness-recalibration at one or more calibration levels
    Recalibrate(RecalibrateArgs),
    /// Posterior/spread grid over (delta, gamma) as CSV
    Contour(ContourArgs),
    /// Seeded Monte Carlo study of the forecaster archetypes as CSV
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Number of equal-width bins for BSC and ECE
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Prior probability that the predictions are calibrated
    #[arg(long, default_value_t = DEFAULT_PRIOR)]
    pub prior: f64,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    /// Input CSV with columns x,y[,label]
    pub input: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid points per axis
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub k: usize,
    /// Delta range as LO,HI (log-spaced)
    #[arg(long, value_parser = parse_range, requires = "gamma_range", allow_hyphen_values = true)]
    pub delta_range: Option<(f64, f64)>,
    /// Gamma range as LO,HI (linearly spaced)
    #[arg(long, value_parser = parse_range, requires = "delta_range", allow_hyphen_values = true)]
    pub gamma_range: Option<(f64, f64)>,
    /// Centre the grid on the MLE and widen it until the high-posterior region is covered
    #[arg(long, conflicts_with_all = ["delta_range", "gamma_range"])]
    pub auto: bool,
}

#[derive(Debug, Args)]
pub struct RecalibrateArgs {
    /// Input CSV with columns x,y[,label]
    pub input: PathBuf,
    /// Calibration level for boldness-recalibration; repeatable
    #[arg(long = "t", value_name = "LEVEL")]
    pub levels: Vec<f64>,
    /// Report only the MLE recalibration when no levels are given
    #[arg(long)]
    pub mle: bool,
    /// Write per-prediction original and recalibrated values here
    #[arg(long, value_name = "PATH")]
    pub lineplot: Option<PathBuf>,
    /// Also write the JSON report to this file
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    /// Input CSV with columns x,y[,label]
    pub input: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output CSV (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Sample sizes; comma separated or repeated
    #[arg(long = "n", value_delimiter = ',', default_values_t = DESIGN_SAMPLE_SIZES.to_vec())]
    pub n_values: Vec<usize>,
    /// Monte Carlo replicates per sample size
    #[arg(long, default_value_t = DESIGN_REPLICATES)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise levels on the log-odds scale; comma separated or repeated
    #[arg(long = "sigma", value_delimiter = ',', default_values_t = DESIGN_NOISE_LEVELS.to_vec())]
    pub sigmas: Vec<f64>,
    /// Forecaster types: well_calibrated (wc), hedger, boaster, biased
    #[arg(long, value_delimiter = ',', value_parser = parse_kind,
          default_values = ["well_calibrated", "hedger", "boaster", "biased"])]
    pub types: Vec<ForecasterKind>,
    /// Output CSV (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(lo)?, parse(hi)?))
}

fn parse_kind(s: &str) -> std::result::Result<ForecasterKind, String> {
    s.parse().map_err(|e: CalibError| e.to_string())
}

fn exit_code(err: &CalibError) -> i32 {
    match err {
        CalibError::InvalidParameter(_) | CalibError::NonInvertible { .. } => EXIT_USAGE,
        CalibError::NonConvergence { .. } | CalibError::Inconsistent(_) => EXIT_NUMERICAL,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_NUMERICAL,
    }
}

/// Configure the global worker pool from `BOLDCAL_THREADS`, if set.
pub fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got '{raw}'"))?;
    // a pool may already exist when embedded in tests; that is not an error
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(stderr, "error: {msg}");
        return EXIT_USAGE;
    }
    let outcome = match cli.command {
        Command::Assess(args) => cmd_assess(&args, stdout, stderr),
        Command::Recalibrate(args) => cmd_recalibrate(&args, stdout, stderr),
        Command::Contour(args) => cmd_contour(&args, stdout),
        Command::Simulate(args) => cmd_simulate(&args, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn output(path: &Option<PathBuf>, stdout: &mut dyn Write, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = BufWriter::new(File::create(p)?);
            write(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => write(stdout),
    }
}

fn check_scoring(args: &ScoringArgs) -> Result<()> {
    if args.bins == 0 {
        return Err(CalibError::InvalidParameter("--bins must be at least 1".into()));
    }
    if !(args.prior > 0.0 && args.prior < 1.0) {
        return Err(CalibError::InvalidParameter(format!("--prior must lie in (0, 1), got {}", args.prior)));
    }
    Ok(())
}

fn base_report(data: &PredictionSet, scoring: &ScoringArgs) -> Result<ReportDocument> {
    let report = assess(data, scoring.prior, scoring.bins)?;
    let mut doc = ReportDocument::new(data, &report, scoring.prior);
    if report.degenerate {
        doc.warnings
            .push("all outcomes belong to one class; the MLE diverges and AUC is undefined".into());
    }
    Ok(doc)
}

pub fn cmd_assess(args: &AssessArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    check_scoring(&args.scoring)?;
    let data = read_predictions(&args.input)?;
    let doc = base_report(&data, &args.scoring)?;
    writeln!(stdout, "{}", doc.to_json())?;
    write!(stderr, "{}", doc.render_table())?;
    Ok(())
}

fn grid_spec(data: &PredictionSet, grid: &GridArgs, warnings: &mut Vec<String>) -> Result<GridSpec> {
    if grid.k < 2 {
        return Err(CalibError::InvalidParameter("--k must be at least 2".into()));
    }
    if !data.has_both_classes() {
        return Err(CalibError::InvalidData(
            "all outcomes belong to one class; the posterior surface is degenerate".into(),
        ));
    }
    match (grid.delta_range, grid.gamma_range) {
        (Some(d), Some(g)) if !grid.auto => GridSpec::from_ranges(d, g, grid.k),
        _ => {
            let mle = fit_mle(data)?;
            let spec = refine_grid_with(
                data,
                &mle,
                &RefineOptions {
                    k: grid.k,
                    ..RefineOptions::default()
                },
            )?;
            if spec.partial_coverage {
                warnings.push("grid expansion cap reached; the high-posterior region may extend past the grid".into());
            }
            Ok(spec)
        }
    }
}

pub fn cmd_recalibrate(args: &RecalibrateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    check_scoring(&args.scoring)?;
    if args.levels.is_empty() && !args.mle {
        return Err(CalibError::InvalidParameter("give at least one --t LEVEL or --mle".into()));
    }
    if let Some(t) = args.levels.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(CalibError::InvalidParameter(format!("--t must lie in (0, 1), got {t}")));
    }
    let data = read_predictions(&args.input)?;
    if !data.has_both_classes() {
        return Err(CalibError::InvalidData(
            "all outcomes belong to one class; recalibration is undefined".into(),
        ));
    }
    let mut doc = base_report(&data, &args.scoring)?;

    let mle = fit_mle(&data)?;
    let mle_adjusted = llo_adjust(data.x(), &mle.params)?;
    let at_mle = evaluate_grid(&data, &GridSpec::new(vec![mle.params.delta], vec![mle.params.gamma])?)?;
    doc.recalibrations
        .push(RecalibrationRow::from_mle(&mle, &mle_adjusted, at_mle.cells[0].posterior));

    let mut levels = Vec::new();
    if !args.levels.is_empty() {
        let spec = grid_spec(&data, &args.grid, &mut doc.warnings)?;
        let grid = evaluate_grid(&data, &spec)?;
        for &t in &args.levels {
            let result = select_boldness(&data, &grid, t)?;
            if !result.feasible {
                doc.warnings.push(format!(
                    "no grid cell reaches posterior {t}; reporting the highest-posterior cell ({:.4})",
                    result.achieved_posterior
                ));
            }
            doc.recalibrations.push(RecalibrationRow::from_boldness(&result));
            levels.push(result);
        }
    }

    if let Some(path) = &args.lineplot {
        LineplotTable::new(&data, mle_adjusted, &levels).write(BufWriter::new(File::create(path)?))?;
    }
    let json = doc.to_json();
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{json}\n"))?;
    }
    writeln!(stdout, "{json}")?;
    write!(stderr, "{}", doc.render_table())?;
    Ok(())
}

pub fn cmd_contour(args: &ContourArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = read_predictions(&args.input)?;
    let mut warnings = Vec::new();
    let spec = grid_spec(&data, &args.grid, &mut warnings)?;
    let grid = evaluate_grid(&data, &spec)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    output(&args.out, stdout, |w| write_contour_csv(w, &grid))
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let forecasters = args
        .types
        .iter()
        .flat_map(|&kind| args.sigmas.iter().map(move |&sigma| ForecasterSpec::archetype(kind, sigma)))
        .collect::<Result<Vec<_>>>()?;
    let config = McStudyConfig {
        n_values: args.n_values.clone(),
        replicates: args.reps,
        seed: args.seed,
        forecasters,
    };
    let table = run_mc_study(&config)?;
    output(&args.out, stdout, |w| write_study_csv(w, &table))
}
