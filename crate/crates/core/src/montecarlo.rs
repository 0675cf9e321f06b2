//! Monte Carlo counting: threshold calibration at a target false-alarm
//! rate, detection-probability curves, and empirical CFAR verification.
//!
//! Trials are embarrassingly parallel. Each trial owns the RNG substream
//! named by its index, results are collected in trial order, and every
//! reduction is deterministic, so outputs are bit-identical for any worker
//! count. The substream space is partitioned per task (calibration, Pd,
//! CFAR recheck) so the phases never share noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, WhitenedInstance};
use crate::error::{Error, Result};
use crate::scenario::{AmplitudeVector, DatasetSampler, Scenario};
use crate::CVector;

/// Substream regions keeping the task families statistically independent.
const STREAM_H0: u64 = 0;
const STREAM_PD: u64 = 1 << 40;
const STREAM_CFAR: u64 = 1 << 41;

/// A calibrated detection threshold and everything needed to re-derive it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub detector: DetectorKind,
    /// Hash of the H0-relevant scenario fields the calibration ran under.
    pub scenario_digest: String,
    pub pfa_target: f64,
    /// Log-domain threshold (same convention as `StatisticValue`).
    pub threshold: f64,
    pub n_trials: usize,
    pub master_seed: u64,
}

/// Detection probability versus SNR for one detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdCurve {
    pub detector: DetectorKind,
    pub snr_grid_db: Vec<f64>,
    pub pd: Vec<f64>,
    /// 95% binomial half-widths, floored at `1/n_trials`.
    pub ci_halfwidth: Vec<f64>,
    pub n_trials: usize,
    pub cos2_theta: f64,
    pub master_seed: u64,
}

/// Outcome of transporting a threshold to a different covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfarReport {
    pub detector: DetectorKind,
    pub pfa_target: f64,
    pub empirical_pfa: f64,
    pub n_trials: usize,
    /// Three binomial standard errors of the target.
    pub tolerance: f64,
    pub pass: bool,
    pub calibration_digest: String,
    pub check_digest: String,
}

/// How the target energy is distributed across the spread cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeSplit {
    /// Equal energy per cell (the reference choice).
    Equal,
    /// All energy in the first cell; detection probability must not change.
    SingleCell,
}

/// 95% half-width of a binomial proportion, floored at `1/n` so a curve
/// pinned at 0 or 1 still reports its resolution.
pub fn binomial_ci_halfwidth(p: f64, n: usize) -> f64 {
    let n = n as f64;
    (1.96 * (p * (1.0 - p) / n).sqrt()).max(1.0 / n)
}

/// Threshold by Monte Carlo counting: the midpoint of the k-th and
/// (k+1)-th largest statistics with `k = round(n * pfa)`, so that a strict
/// `>` comparison exceeds it with empirical rate `k / n`.
pub fn counting_threshold(statistics: &[f64], pfa_target: f64) -> Result<f64> {
    let n = statistics.len();
    if !(pfa_target > 0.0 && pfa_target < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "pfa_target must be in (0, 0.5), got {pfa_target}"
        )));
    }
    if (n as f64) * pfa_target < 20.0 {
        return Err(Error::InvalidConfig(format!(
            "insufficient trials for a stable order statistic: n * pfa = {:.1} < 20",
            n as f64 * pfa_target
        )));
    }
    if statistics.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("NaN in the statistic stream".into()));
    }
    let mut sorted = statistics.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let k = ((n as f64 * pfa_target).round() as usize).clamp(1, n - 1);
    Ok(0.5 * (sorted[k - 1] + sorted[k]))
}

fn require_finite_detectors(detectors: &[DetectorKind]) -> Result<()> {
    if detectors.is_empty() {
        return Err(Error::InvalidConfig("no detectors requested".into()));
    }
    Ok(())
}

/// Statistic streams for `n_trials` H0 datasets, one inner vector per
/// detector, trial-ordered.
fn statistic_streams(
    detectors: &[DetectorKind],
    sampler: &DatasetSampler,
    steering: &CVector,
    k_s: usize,
    n_trials: usize,
    master_seed: u64,
    stream_base: u64,
) -> Result<Vec<Vec<f64>>> {
    let per_trial: Vec<Vec<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let d = sampler.draw(master_seed, stream_base + t);
            let inst = WhitenedInstance::new(&d.z, &d.s, steering, k_s)?;
            detectors
                .iter()
                .map(|&kind| inst.statistic(kind).map(|s| s.log_value))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut streams = vec![Vec::with_capacity(n_trials); detectors.len()];
    for trial in per_trial {
        for (stream, value) in streams.iter_mut().zip(trial) {
            stream.push(value);
        }
    }
    Ok(streams)
}

/// Calibrates one threshold per detector from a shared set of H0 datasets.
///
/// Sharing the datasets is a pure variance-reduction choice; each detector's
/// threshold depends only on its own statistic stream.
pub fn calibrate_thresholds(
    detectors: &[DetectorKind],
    scenario: &Scenario,
    pfa_target: f64,
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<ThresholdRecord>> {
    require_finite_detectors(detectors)?;
    scenario.validate()?;
    let sampler = DatasetSampler::h0(scenario)?;
    let steering = scenario.nominal_steering();
    let streams = statistic_streams(
        detectors,
        &sampler,
        &steering,
        scenario.k_s,
        n_trials,
        master_seed,
        STREAM_H0,
    )?;
    let digest = scenario.h0_digest();
    detectors
        .iter()
        .zip(streams)
        .map(|(&detector, stream)| {
            let threshold = counting_threshold(&stream, pfa_target)?;
            if !threshold.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "calibrated threshold for {detector} is not finite"
                )));
            }
            Ok(ThresholdRecord {
                detector,
                scenario_digest: digest.clone(),
                pfa_target,
                threshold,
                n_trials,
                master_seed,
            })
        })
        .collect()
}

/// Single-detector convenience wrapper around [`calibrate_thresholds`].
pub fn calibrate_threshold(
    detector: DetectorKind,
    scenario: &Scenario,
    pfa_target: f64,
    n_trials: usize,
    master_seed: u64,
) -> Result<ThresholdRecord> {
    Ok(calibrate_thresholds(&[detector], scenario, pfa_target, n_trials, master_seed)?
        .pop()
        .expect("one record per detector"))
}

/// Detection probability curves for several detectors over one SNR grid,
/// reusing the same H1 datasets across detectors (common random numbers),
/// with the stated energy split.
pub fn estimate_pd_curves_with_split(
    thresholds: &[ThresholdRecord],
    scenario: &Scenario,
    snr_grid_db: &[f64],
    n_trials: usize,
    master_seed: u64,
    split: AmplitudeSplit,
) -> Result<Vec<PdCurve>> {
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig("no thresholds supplied".into()));
    }
    scenario.validate()?;
    if snr_grid_db.is_empty() {
        return Err(Error::InvalidConfig("empty SNR grid".into()));
    }
    let digest = scenario.h0_digest();
    for record in thresholds {
        if record.scenario_digest != digest {
            return Err(Error::StaleThreshold(format!(
                "threshold for {} was calibrated under digest {} but this scenario has {}",
                record.detector, record.scenario_digest, digest
            )));
        }
    }

    let cos2 = scenario.mismatch_cos2()?;
    let c = scenario.covariance_matrix()?;
    let p = scenario.actual_steering();
    let steering = scenario.nominal_steering();
    let chol = nalgebra::linalg::Cholesky::new(c.as_matrix().clone()).ok_or(
        Error::SingularMatrix {
            min_eigenvalue: 0.0,
            max_eigenvalue: f64::NAN,
        },
    )?;
    let ptcp = p.dotc(&chol.solve(&p)).re;

    let detectors: Vec<DetectorKind> = thresholds.iter().map(|r| r.detector).collect();
    let mut hits = vec![vec![0usize; snr_grid_db.len()]; detectors.len()];
    for (point, &snr_db) in snr_grid_db.iter().enumerate() {
        let total_energy = 10f64.powf(snr_db / 10.0) / ptcp;
        let alphas = match split {
            AmplitudeSplit::Equal => AmplitudeVector::equal_split(total_energy, scenario.k_p),
            AmplitudeSplit::SingleCell => {
                AmplitudeVector::single_cell(total_energy, scenario.k_p)
            }
        };
        let sampler = DatasetSampler::h1_with(scenario, &p, &alphas)?;
        let streams = statistic_streams(
            &detectors,
            &sampler,
            &steering,
            scenario.k_s,
            n_trials,
            master_seed,
            STREAM_PD + (point as u64) * n_trials as u64,
        )?;
        for (d, stream) in streams.iter().enumerate() {
            hits[d][point] = stream
                .iter()
                .filter(|&&s| s > thresholds[d].threshold)
                .count();
        }
    }

    Ok(thresholds
        .iter()
        .zip(hits)
        .map(|(record, detector_hits)| {
            let pd: Vec<f64> = detector_hits
                .iter()
                .map(|&h| h as f64 / n_trials as f64)
                .collect();
            let ci_halfwidth = pd
                .iter()
                .map(|&p| binomial_ci_halfwidth(p, n_trials))
                .collect();
            PdCurve {
                detector: record.detector,
                snr_grid_db: snr_grid_db.to_vec(),
                pd,
                ci_halfwidth,
                n_trials,
                cos2_theta: cos2,
                master_seed,
            }
        })
        .collect())
}

/// Equal-split detection probability curves (the reference configuration).
pub fn estimate_pd_curves(
    thresholds: &[ThresholdRecord],
    scenario: &Scenario,
    snr_grid_db: &[f64],
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<PdCurve>> {
    estimate_pd_curves_with_split(
        thresholds,
        scenario,
        snr_grid_db,
        n_trials,
        master_seed,
        AmplitudeSplit::Equal,
    )
}

/// Single-detector convenience wrapper around [`estimate_pd_curves`].
pub fn estimate_pd(
    detector: DetectorKind,
    scenario: &Scenario,
    threshold: &ThresholdRecord,
    snr_grid_db: &[f64],
    n_trials: usize,
    master_seed: u64,
) -> Result<PdCurve> {
    if threshold.detector != detector {
        return Err(Error::StaleThreshold(format!(
            "threshold belongs to {} but {} was requested",
            threshold.detector, detector
        )));
    }
    Ok(estimate_pd_curves(
        std::slice::from_ref(threshold),
        scenario,
        snr_grid_db,
        n_trials,
        master_seed,
    )?
    .pop()
    .expect("one curve per threshold"))
}

/// Empirical CFAR check for several thresholds at once, sharing the H0
/// datasets drawn under `scenario_b`. Each threshold must have been
/// calibrated under `scenario_a`, which may differ from `scenario_b` only in
/// its covariance description.
pub fn cfar_check_all(
    thresholds: &[ThresholdRecord],
    scenario_a: &Scenario,
    scenario_b: &Scenario,
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<CfarReport>> {
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig("no thresholds supplied".into()));
    }
    scenario_a.validate()?;
    scenario_b.validate()?;
    if !scenario_a.same_structure(scenario_b) {
        return Err(Error::InvalidComparison(format!(
            "scenarios must share (N, K_P, K_S); got ({}, {}, {}) vs ({}, {}, {})",
            scenario_a.n, scenario_a.k_p, scenario_a.k_s, scenario_b.n, scenario_b.k_p,
            scenario_b.k_s
        )));
    }
    let digest_a = scenario_a.h0_digest();
    for record in thresholds {
        if record.scenario_digest != digest_a {
            return Err(Error::StaleThreshold(format!(
                "threshold for {} was not calibrated under scenario_a",
                record.detector
            )));
        }
    }

    let sampler = DatasetSampler::h0(scenario_b)?;
    let steering = scenario_b.nominal_steering();
    let detectors: Vec<DetectorKind> = thresholds.iter().map(|r| r.detector).collect();
    let streams = statistic_streams(
        &detectors,
        &sampler,
        &steering,
        scenario_b.k_s,
        n_trials,
        master_seed,
        STREAM_CFAR,
    )?;
    let digest_b = scenario_b.h0_digest();
    Ok(thresholds
        .iter()
        .zip(streams)
        .map(|(record, stream)| {
            let exceedances = stream.iter().filter(|&&s| s > record.threshold).count();
            let empirical_pfa = exceedances as f64 / n_trials as f64;
            let pfa = record.pfa_target;
            let tolerance = 3.0 * (pfa * (1.0 - pfa) / n_trials as f64).sqrt();
            CfarReport {
                detector: record.detector,
                pfa_target: pfa,
                empirical_pfa,
                n_trials,
                tolerance,
                pass: (empirical_pfa - pfa).abs() <= tolerance,
                calibration_digest: record.scenario_digest.clone(),
                check_digest: digest_b.clone(),
            }
        })
        .collect())
}

/// Single-detector convenience wrapper around [`cfar_check_all`].
pub fn cfar_check(
    detector: DetectorKind,
    scenario_a: &Scenario,
    scenario_b: &Scenario,
    threshold_from_a: &ThresholdRecord,
    n_trials: usize,
    master_seed: u64,
) -> Result<CfarReport> {
    if threshold_from_a.detector != detector {
        return Err(Error::StaleThreshold(format!(
            "threshold belongs to {} but {} was requested",
            threshold_from_a.detector, detector
        )));
    }
    Ok(cfar_check_all(
        std::slice::from_ref(threshold_from_a),
        scenario_a,
        scenario_b,
        n_trials,
        master_seed,
    )?
    .pop()
    .expect("one report per threshold"))
}

/// One line of the Pd CSV contract:
/// `snr_db,detector,pd,ci_halfwidth,cos2_theta,n_trials,seed`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PdRow {
    pub snr_db: f64,
    pub detector: DetectorKind,
    pub pd: f64,
    pub ci_halfwidth: f64,
    pub cos2_theta: f64,
    pub n_trials: usize,
    pub seed: u64,
}

/// Flattens curves into CSV rows, detector-major then SNR-ascending.
pub fn pd_rows(curves: &[PdCurve]) -> Vec<PdRow> {
    let mut rows = Vec::new();
    for curve in curves {
        for (i, &snr_db) in curve.snr_grid_db.iter().enumerate() {
            rows.push(PdRow {
                snr_db,
                detector: curve.detector,
                pd: curve.pd[i],
                ci_halfwidth: curve.ci_halfwidth[i],
                cos2_theta: curve.cos2_theta,
                n_trials: curve.n_trials,
                seed: curve.master_seed,
            });
        }
    }
    rows
}

/// Writes curves in the documented CSV schema.
pub fn write_pd_csv<W: std::io::Write>(curves: &[PdCurve], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in pd_rows(curves) {
        out.serialize(row)
            .map_err(|e| Error::InvalidInput(format!("csv write: {e}")))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads rows written by [`write_pd_csv`] (the round-trip contract).
pub fn read_pd_csv<R: std::io::Read>(reader: R) -> Result<Vec<PdRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .map(|row| row.map_err(|e| Error::InvalidInput(format!("csv read: {e}"))))
        .collect()
}
