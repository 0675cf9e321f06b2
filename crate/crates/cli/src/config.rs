//! Run configuration: built-in defaults, overridden by a JSON config file,
//! overridden again by command-line flags.

use std::path::PathBuf;

use serde::Deserialize;

use rsd_core::detectors::DetectorKind;
use rsd_core::scenario::Scenario;
use rsd_core::{Error, Result};

/// Fully resolved configuration for one command invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub detectors: Vec<DetectorKind>,
    pub pfa: f64,
    pub trials_h0: usize,
    pub trials_h1: usize,
    pub snr_grid: (f64, f64, f64),
    pub seed: u64,
    pub out_path: Option<PathBuf>,
    pub threshold_path: Option<PathBuf>,
}

/// JSON config file contents; every field is optional and missing fields
/// fall back to the built-in defaults. The `command` field is accepted for
/// self-documenting files but the CLI subcommand is authoritative.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[allow(dead_code)]
    pub command: Option<String>,
    pub scenario: Option<Scenario>,
    pub detectors: Option<Vec<DetectorKind>>,
    pub pfa: Option<f64>,
    pub trials_h0: Option<usize>,
    pub trials_h1: Option<usize>,
    pub snr_grid: Option<(f64, f64, f64)>,
    pub seed: Option<u64>,
    pub out_path: Option<PathBuf>,
    pub threshold_path: Option<PathBuf>,
}

/// Scenario and run overrides coming from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub n: Option<usize>,
    pub kp: Option<usize>,
    pub ks: Option<usize>,
    pub sigma_f: Option<f64>,
    pub fd: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub pfa: Option<f64>,
    pub trials_h0: Option<usize>,
    pub trials_h1: Option<usize>,
    pub snr: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub detectors: Vec<String>,
}

pub fn parse_snr_grid(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "SNR grid must be start:stop:step, got `{text}`"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad SNR grid component `{p}`")))
        })
        .collect::<Result<_>>()?;
    Ok((nums[0], nums[1], nums[2]))
}

/// Expands (start, stop, step) into grid points, inclusive of the stop value
/// up to rounding.
pub fn snr_points(grid: (f64, f64, f64)) -> Result<Vec<f64>> {
    let (start, stop, step) = grid;
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "SNR grid step must be positive, got {step}"
        )));
    }
    if stop < start {
        return Err(Error::InvalidConfig(format!(
            "SNR grid stop {stop} below start {start}"
        )));
    }
    let count = ((stop - start) / step).round() as usize;
    Ok((0..=count).map(|i| start + step * i as f64).collect())
}

/// Resolves the layered configuration: defaults, then file, then flags.
pub fn resolve(file: FileConfig, flags: &FlagOverrides) -> Result<RunConfig> {
    let mut scenario = file.scenario.unwrap_or_default();
    if let Some(n) = flags.n {
        scenario.n = n;
    }
    if let Some(kp) = flags.kp {
        scenario.k_p = kp;
    }
    if let Some(ks) = flags.ks {
        scenario.k_s = ks;
    }
    if let Some(sf) = flags.sigma_f {
        scenario.sigma_f = sf;
    }
    if let Some(fd) = flags.fd {
        scenario.f_d = fd;
    }
    if let Some(delta) = flags.delta {
        scenario.delta = delta;
    }
    scenario.validate()?;

    let epsilon = flags.epsilon.unwrap_or(0.2);
    let detectors = if !flags.detectors.is_empty() {
        flags
            .detectors
            .iter()
            .map(|d| d.parse())
            .collect::<Result<Vec<DetectorKind>>>()?
    } else if let Some(d) = file.detectors {
        d
    } else {
        DetectorKind::all_five(epsilon)
    };

    let pfa = flags.pfa.or(file.pfa).unwrap_or(1e-3);
    if !(pfa > 0.0 && pfa < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "pfa must be in (0, 0.5), got {pfa}"
        )));
    }
    let trials_h0 = flags.trials_h0.or(file.trials_h0).unwrap_or(100_000);
    let trials_h1 = flags.trials_h1.or(file.trials_h1).unwrap_or(1_000);

    // Default grid spans the Pd transition: shifted up when mismatched.
    let default_grid = if scenario.delta == 0.0 {
        (5.0, 30.0, 1.0)
    } else {
        (10.0, 35.0, 1.0)
    };
    let snr_grid = match &flags.snr {
        Some(text) => parse_snr_grid(text)?,
        None => file.snr_grid.unwrap_or(default_grid),
    };
    snr_points(snr_grid)?; // validate now, fail early

    Ok(RunConfig {
        scenario,
        detectors,
        pfa,
        trials_h0,
        trials_h1,
        snr_grid,
        seed: flags.seed.or(file.seed).unwrap_or(1),
        out_path: flags.out.clone().or(file.out_path),
        threshold_path: flags.thresholds.clone().or(file.threshold_path),
    })
}

pub fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", p.display())))
        }
    }
}
