//! Command-line front end for the range-spread detection experiments:
//! threshold calibration, Pd-vs-SNR curves, CFAR checks, five-detector
//! comparisons, and standalone runs of the brute-force oracles.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_file_config, resolve, snr_points, FlagOverrides, RunConfig};
use rsd_core::montecarlo::{
    calibrate_thresholds, cfar_check_all, estimate_pd_curves, pd_rows, write_pd_csv, PdCurve,
    ThresholdRecord,
};
use rsd_core::oracle::{run_alpha_suite, run_nu_suite};
use rsd_core::scenario::CovarianceModel;
use rsd_core::{Error, Result};

/// Environment variable capping the Monte Carlo worker count.
const THREADS_ENV: &str = "RSD_MAX_THREADS";

#[derive(Parser)]
#[command(
    name = "rsd",
    about = "Robust GLRT detection of range-spread radar targets: Monte Carlo \
             calibration, detection curves, CFAR checks, and verification oracles",
    version
)]
struct Cli {
    /// JSON config file; file values override built-in defaults, flags
    /// override the file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate detection thresholds at the target false-alarm rate and
    /// write them as JSON.
    Calibrate(CommonArgs),
    /// Estimate Pd-vs-SNR curves against calibrated thresholds and write
    /// them as CSV.
    PdCurve(CommonArgs),
    /// Verify that a threshold holds its false-alarm rate under a different
    /// covariance.
    CfarCheck(CfarArgs),
    /// Run all five detectors on common random numbers and summarize their
    /// ordering.
    Compare(CommonArgs),
    /// Run the brute-force verification suites and write JSON-lines reports.
    VerifyOracles(OracleArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Samples per range cell.
    #[arg(long)]
    n: Option<usize>,
    /// Primary (cells-under-test) count.
    #[arg(long)]
    kp: Option<usize>,
    /// Secondary (training) cell count.
    #[arg(long)]
    ks: Option<usize>,
    /// Clutter spectral spread.
    #[arg(long = "sigma-f")]
    sigma_f: Option<f64>,
    /// Nominal normalized Doppler.
    #[arg(long)]
    fd: Option<f64>,
    /// Mismatch offset (actual Doppler is fd + delta/N).
    #[arg(long)]
    delta: Option<f64>,
    /// Epsilon for the parametric detector in the default detector set.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Target false-alarm probability.
    #[arg(long)]
    pfa: Option<f64>,
    /// H0 trials for calibration.
    #[arg(long = "trials-h0")]
    trials_h0: Option<usize>,
    /// H1 trials per SNR point.
    #[arg(long = "trials-h1")]
    trials_h1: Option<usize>,
    /// SNR grid as start:stop:step in dB.
    #[arg(long)]
    snr: Option<String>,
    /// Master seed for all RNG substreams.
    #[arg(long)]
    seed: Option<u64>,
    /// Output artifact path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Threshold JSON produced by `calibrate`.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Detector selection (repeatable): glrt, parametric:<eps>, glrt-h,
    /// gamf, gasd.
    #[arg(long = "detector")]
    detectors: Vec<String>,
}

#[derive(Args)]
struct CfarArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Covariance model for the check scenario: identity or clutter.
    #[arg(long = "alt-covariance", default_value = "identity")]
    alt_covariance: String,
    /// Clutter spread for the check scenario (with --alt-covariance clutter).
    #[arg(long = "alt-sigma-f")]
    alt_sigma_f: Option<f64>,
    /// Noise level for the check scenario (with --alt-covariance clutter).
    #[arg(long = "alt-noise-db")]
    alt_noise_db: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    /// Seeded instances per suite.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Base seed for instance generation.
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON-lines path.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> FlagOverrides {
        FlagOverrides {
            n: self.n,
            kp: self.kp,
            ks: self.ks,
            sigma_f: self.sigma_f,
            fd: self.fd,
            delta: self.delta,
            epsilon: self.epsilon,
            pfa: self.pfa,
            trials_h0: self.trials_h0,
            trials_h1: self.trials_h1,
            snr: self.snr.clone(),
            seed: self.seed,
            out: self.out.clone(),
            thresholds: self.thresholds.clone(),
            detectors: self.detectors.clone(),
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var(THREADS_ENV) {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::InvalidComparison(_) => 2,
        Error::StaleThreshold(_) => 3,
        Error::OracleFailure(_) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = load_file_config(cli.config.as_ref())?;
    match cli.command {
        Command::Calibrate(args) => {
            let cfg = resolve(file, &args.overrides())?;
            cmd_calibrate(&cfg)
        }
        Command::PdCurve(args) => {
            let cfg = resolve(file, &args.overrides())?;
            cmd_pd_curve(&cfg)
        }
        Command::Compare(args) => {
            let cfg = resolve(file, &args.overrides())?;
            cmd_compare(&cfg)
        }
        Command::CfarCheck(args) => {
            let cfg = resolve(file, &args.common.overrides())?;
            cmd_cfar_check(&cfg, &args)
        }
        Command::VerifyOracles(args) => cmd_verify_oracles(&args),
    }
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<ExitCode> {
    let records = calibrate_thresholds(
        &cfg.detectors,
        &cfg.scenario,
        cfg.pfa,
        cfg.trials_h0,
        cfg.seed,
    )?;
    for r in &records {
        println!(
            "calibrated {:<16} pfa {:<8} threshold {:.6} ({} trials, seed {})",
            r.detector.to_string(),
            r.pfa_target,
            r.threshold,
            r.n_trials,
            r.master_seed
        );
    }
    let out = cfg
        .out_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("thresholds.json"));
    write_json(&out, &records)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

/// Loads thresholds from disk when a path is configured, otherwise
/// calibrates in-process with the run's H0 budget.
fn obtain_thresholds(cfg: &RunConfig) -> Result<Vec<ThresholdRecord>> {
    match &cfg.threshold_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let all: Vec<ThresholdRecord> = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            cfg.detectors
                .iter()
                .map(|&want| {
                    all.iter()
                        .find(|r| r.detector == want)
                        .cloned()
                        .ok_or_else(|| {
                            Error::StaleThreshold(format!(
                                "no threshold for {want} in {}",
                                path.display()
                            ))
                        })
                })
                .collect()
        }
        None => {
            println!(
                "no --thresholds given; calibrating in-process ({} H0 trials)",
                cfg.trials_h0
            );
            calibrate_thresholds(
                &cfg.detectors,
                &cfg.scenario,
                cfg.pfa,
                cfg.trials_h0,
                cfg.seed,
            )
        }
    }
}

fn cmd_pd_curve(cfg: &RunConfig) -> Result<ExitCode> {
    let thresholds = obtain_thresholds(cfg)?;
    let grid = snr_points(cfg.snr_grid)?;
    let curves = estimate_pd_curves(&thresholds, &cfg.scenario, &grid, cfg.trials_h1, cfg.seed)?;
    let out = cfg
        .out_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("pd_curve.csv"));
    write_pd_csv(&curves, BufWriter::new(File::create(&out)?))?;
    println!(
        "wrote {} ({} detectors x {} SNR points, cos^2 theta = {:.3})",
        out.display(),
        curves.len(),
        grid.len(),
        curves[0].cos2_theta
    );
    Ok(ExitCode::SUCCESS)
}

/// Index of the first grid point where a curve strictly exceeds the level.
fn first_crossing(curve: &PdCurve, level: f64) -> Option<usize> {
    curve.pd.iter().position(|&p| p > level)
}

fn ordering_summary(curves: &[PdCurve]) -> String {
    let mut text = String::new();
    let best = curves
        .iter()
        .filter_map(|c| first_crossing(c, 0.9).map(|i| (i, c)))
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.pd[a.0].total_cmp(&a.1.pd[a.0])));
    match best {
        None => {
            text.push_str("no detector exceeded Pd = 0.9 on this grid\n");
        }
        Some((idx, best_curve)) => {
            let snr = best_curve.snr_grid_db[idx];
            text.push_str(&format!(
                "reference point: {} first exceeds Pd = 0.9 at SNR = {snr} dB\n",
                best_curve.detector
            ));
            let mut at_point: Vec<(String, f64)> = curves
                .iter()
                .map(|c| (c.detector.to_string(), c.pd[idx]))
                .collect();
            at_point.sort_by(|a, b| b.1.total_cmp(&a.1));
            text.push_str(&format!("ranking at {snr} dB:\n"));
            for (name, pd) in &at_point {
                text.push_str(&format!("  {name:<16} Pd = {pd:.3}\n"));
            }
            text.push_str("pairwise orderings:\n");
            for i in 0..at_point.len() {
                for j in (i + 1)..at_point.len() {
                    text.push_str(&format!(
                        "  Pd({}) - Pd({}) = {:+.3}\n",
                        at_point[i].0,
                        at_point[j].0,
                        at_point[i].1 - at_point[j].1
                    ));
                }
            }
        }
    }
    text
}

fn cmd_compare(cfg: &RunConfig) -> Result<ExitCode> {
    let thresholds = obtain_thresholds(cfg)?;
    let grid = snr_points(cfg.snr_grid)?;
    let curves = estimate_pd_curves(&thresholds, &cfg.scenario, &grid, cfg.trials_h1, cfg.seed)?;
    let out = cfg
        .out_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("compare.csv"));
    write_pd_csv(&curves, BufWriter::new(File::create(&out)?))?;
    let summary = ordering_summary(&curves);
    let summary_path = out.with_extension("summary.txt");
    std::fs::write(&summary_path, &summary)?;
    print!("{summary}");
    println!(
        "wrote {} and {} ({} rows)",
        out.display(),
        summary_path.display(),
        pd_rows(&curves).len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_cfar_check(cfg: &RunConfig, args: &CfarArgs) -> Result<ExitCode> {
    let mut alt = cfg.scenario.clone();
    match args.alt_covariance.to_ascii_lowercase().as_str() {
        "identity" => alt.covariance = CovarianceModel::Identity,
        "clutter" => {
            alt.covariance = CovarianceModel::Clutter;
            if let Some(sf) = args.alt_sigma_f {
                alt.sigma_f = sf;
            }
            if let Some(db) = args.alt_noise_db {
                alt.noise_db_below_clutter = db;
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown --alt-covariance `{other}` (expected identity or clutter)"
            )))
        }
    }
    let thresholds = obtain_thresholds(cfg)?;
    let reports = cfar_check_all(&thresholds, &cfg.scenario, &alt, cfg.trials_h0, cfg.seed)?;
    for r in &reports {
        println!(
            "{} {:<16} empirical pfa {:.3e} vs target {:.3e} (tolerance {:.3e}, {} trials)",
            if r.pass { "PASS" } else { "FAIL" },
            r.detector.to_string(),
            r.empirical_pfa,
            r.pfa_target,
            r.tolerance,
            r.n_trials
        );
    }
    let out = cfg
        .out_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("cfar_report.json"));
    write_json(&out, &reports)?;
    println!("wrote {}", out.display());
    if reports.iter().all(|r| r.pass) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: CFAR verdict failed for at least one detector");
        Ok(ExitCode::from(5))
    }
}

fn cmd_verify_oracles(args: &OracleArgs) -> Result<ExitCode> {
    let seed = args.seed.unwrap_or(1);
    let alpha = run_alpha_suite(args.instances, seed)?;
    let nu = run_nu_suite(args.instances, seed.wrapping_add(1_000_000))?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("oracle_reports.jsonl"));
    let mut writer = BufWriter::new(File::create(&out)?);
    for report in alpha.iter().chain(nu.iter()) {
        serde_json::to_writer(&mut writer, report)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;

    let failed = alpha.iter().chain(nu.iter()).filter(|r| !r.pass).count();
    println!(
        "oracle reports: {} amplitude-minimization, {} nu-minimization, {} failed",
        alpha.len(),
        nu.len(),
        failed
    );
    println!("wrote {}", out.display());
    if failed == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::OracleFailure(format!(
            "{failed} oracle reports failed; see {}",
            out.display()
        )))
    }
}
