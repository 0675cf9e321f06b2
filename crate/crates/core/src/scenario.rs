//! The simulated radar world: clutter-plus-noise covariance, steering
//! vectors, mismatch geometry, SNR-controlled amplitudes, and reproducible
//! synthetic datasets.
//!
//! Reproducibility contract: every dataset is a pure function of
//! `(master_seed, trial_index)`. Each trial owns a private counter-derived
//! RNG stream, so trials can be drawn in any order on any number of workers
//! and still come out bit-identical.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::{C64, CMatrix, CVector};

/// Shape of the noise covariance used when generating data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    /// Gaussian-shaped clutter plus white noise, from `sigma_f` and
    /// `noise_db_below_clutter`.
    #[default]
    Clutter,
    /// Identity covariance (white noise only); used by CFAR checks.
    Identity,
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Samples per range cell.
    #[serde(rename = "N")]
    pub n: usize,
    /// Cells under test.
    #[serde(rename = "K_P")]
    pub k_p: usize,
    /// Training cells.
    #[serde(rename = "K_S")]
    pub k_s: usize,
    /// Clutter spectral spread in normalized frequency units.
    pub sigma_f: f64,
    /// Thermal noise level below the unit clutter power, in dB.
    pub noise_db_below_clutter: f64,
    /// Nominal normalized Doppler of the steering vector.
    pub f_d: f64,
    /// Mismatch offset: the actual target Doppler is `f_d + delta / N`.
    pub delta: f64,
    /// Target SNR in dB (total energy across the spread cells).
    pub snr_db: f64,
    /// Covariance shape for data generation.
    #[serde(default)]
    pub covariance: CovarianceModel,
}

impl Default for Scenario {
    /// The reference radar setup: 16 samples, 4 spread cells, 32 training
    /// cells, lowpass clutter with one-lag correlation 0.95, target Doppler
    /// competing with the clutter spectrum.
    fn default() -> Self {
        Scenario {
            n: 16,
            k_p: 4,
            k_s: 32,
            sigma_f: 0.05,
            noise_db_below_clutter: 10.0,
            f_d: 0.08,
            delta: 0.0,
            snr_db: 15.0,
            covariance: CovarianceModel::Clutter,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig("need N >= 2".into()));
        }
        if self.k_p < 1 {
            return Err(Error::InvalidConfig("need K_P >= 1".into()));
        }
        if self.k_s < self.n {
            return Err(Error::InvalidConfig(format!(
                "need K_S >= N (got K_S = {}, N = {})",
                self.k_s, self.n
            )));
        }
        if !(self.sigma_f > 0.0) {
            return Err(Error::InvalidConfig("need sigma_f > 0".into()));
        }
        for (name, val) in [
            ("sigma_f", self.sigma_f),
            ("noise_db_below_clutter", self.noise_db_below_clutter),
            ("f_d", self.f_d),
            ("delta", self.delta),
        ] {
            if !val.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Noise covariance according to the configured model.
    pub fn covariance_matrix(&self) -> Result<HermitianMatrix> {
        match self.covariance {
            CovarianceModel::Clutter => {
                clutter_covariance(self.n, self.sigma_f, self.noise_db_below_clutter)
            }
            CovarianceModel::Identity => Ok(HermitianMatrix::identity(self.n)),
        }
    }

    /// Steering vector the detector assumes.
    pub fn nominal_steering(&self) -> CVector {
        steering_vector(self.n, self.f_d)
    }

    /// Steering vector the target actually has (`delta = 0` means matched).
    pub fn actual_steering(&self) -> CVector {
        steering_vector(self.n, self.f_d + self.delta / self.n as f64)
    }

    /// Whitened-space squared cosine between nominal and actual steering.
    pub fn mismatch_cos2(&self) -> Result<f64> {
        cos2_theta(
            &self.nominal_steering(),
            &self.actual_steering(),
            &self.covariance_matrix()?,
        )
    }

    /// Content hash of the fields that determine the H0 statistic stream:
    /// dimensions, covariance shape, and nominal steering. SNR and mismatch
    /// are H1-only and deliberately excluded, so one calibration serves all
    /// signal strengths.
    pub fn h0_digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!(
            "N={};K_P={};K_S={};sigma_f={:e};noise_db={:e};f_d={:e};cov={:?}",
            self.n, self.k_p, self.k_s, self.sigma_f, self.noise_db_below_clutter, self.f_d,
            self.covariance
        ));
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// True when two scenarios describe the same data dimensions, so their
    /// statistics live on comparable scales.
    pub fn same_structure(&self, other: &Scenario) -> bool {
        self.n == other.n && self.k_p == other.k_p && self.k_s == other.k_s
    }
}

/// Gaussian-shaped clutter covariance plus white noise:
/// `C = R_c + sigma_n^2 I` with `[R_c]_ij = exp(-2 pi^2 sigma_f^2 (i-j)^2)`
/// and `sigma_n^2 = 10^(-noise_db/10)` relative to unit clutter power.
pub fn clutter_covariance(
    n: usize,
    sigma_f: f64,
    noise_db_below_clutter: f64,
) -> Result<HermitianMatrix> {
    if n < 1 {
        return Err(Error::InvalidInput("need N >= 1".into()));
    }
    if !(sigma_f > 0.0) {
        return Err(Error::InvalidInput("need sigma_f > 0".into()));
    }
    let sigma_n_sq = 10f64.powf(-noise_db_below_clutter / 10.0);
    let mut c = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let lag = i as f64 - j as f64;
            let mut val = (-2.0 * PI * PI * sigma_f * sigma_f * lag * lag).exp();
            if i == j {
                val += sigma_n_sq;
            }
            c[(i, j)] = C64::new(val, 0.0);
        }
    }
    HermitianMatrix::new(c)
}

/// Temporal steering vector `[1, e^{i 2 pi f_d}, ..., e^{i 2 pi (N-1) f_d}]`.
pub fn steering_vector(n: usize, fd: f64) -> CVector {
    CVector::from_fn(n, |k, _| {
        let phase = 2.0 * PI * fd * k as f64;
        C64::new(phase.cos(), phase.sin())
    })
}

/// Squared cosine of the whitened-space angle between two steering vectors:
/// `|v^H C^-1 p|^2 / ((v^H C^-1 v)(p^H C^-1 p))`, 1 for a perfect match.
pub fn cos2_theta(v: &CVector, p: &CVector, c: &HermitianMatrix) -> Result<f64> {
    if v.norm_squared() == 0.0 || p.norm_squared() == 0.0 {
        return Err(Error::InvalidInput("steering vectors must be nonzero".into()));
    }
    let chol = nalgebra::linalg::Cholesky::new(c.as_matrix().clone()).ok_or(
        Error::SingularMatrix {
            min_eigenvalue: 0.0,
            max_eigenvalue: f64::NAN,
        },
    )?;
    let ci_p = chol.solve(p);
    let ci_v = chol.solve(v);
    let cross = v.dotc(&ci_p).norm_sqr();
    let vv = v.dotc(&ci_v).re;
    let pp = p.dotc(&ci_p).re;
    Ok(cross / (vv * pp))
}

/// Per-cell target amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector {
    pub alphas: Vec<C64>,
}

impl AmplitudeVector {
    /// Equal energy split: every cell gets `total_energy / k_p`, zero phase.
    pub fn equal_split(total_energy: f64, k_p: usize) -> Self {
        let a = (total_energy / k_p as f64).sqrt();
        AmplitudeVector {
            alphas: vec![C64::new(a, 0.0); k_p],
        }
    }

    /// Degenerate split with all energy in the first cell; the detection
    /// probability must not care (it sees only the total).
    pub fn single_cell(total_energy: f64, k_p: usize) -> Self {
        let mut alphas = vec![C64::new(0.0, 0.0); k_p];
        alphas[0] = C64::new(total_energy.sqrt(), 0.0);
        AmplitudeVector { alphas }
    }

    pub fn total_energy(&self) -> f64 {
        self.alphas.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Equal-split amplitudes realizing the scenario's SNR:
/// `|alpha_k|^2 = 10^(snr_db/10) / (K_P * p^H C^-1 p)`, zero phase.
pub fn amplitudes_for_snr(
    scenario: &Scenario,
    p: &CVector,
    c: &HermitianMatrix,
) -> Result<AmplitudeVector> {
    let chol = nalgebra::linalg::Cholesky::new(c.as_matrix().clone()).ok_or(
        Error::SingularMatrix {
            min_eigenvalue: 0.0,
            max_eigenvalue: f64::NAN,
        },
    )?;
    let ptcp = p.dotc(&chol.solve(p)).re;
    if !(ptcp > 0.0) {
        return Err(Error::InvalidInput("p^H C^-1 p must be positive".into()));
    }
    let snr_lin = 10f64.powf(scenario.snr_db / 10.0);
    Ok(AmplitudeVector::equal_split(snr_lin / ptcp, scenario.k_p))
}

/// Which hypothesis generated a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// One Monte Carlo realization: primary data and scatter matrix, plus the
/// seed path that reproduces it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub z: CMatrix,
    pub s: HermitianMatrix,
    pub hypothesis: Hypothesis,
    pub seed_path: (u64, u64),
}

/// RNG for one trial: a counter-indexed substream of the master seed.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Circular complex Gaussian vector `L (x + i y) / sqrt(2)` with `x`, `y`
/// standard normal, so the covariance comes out as `L L^H`.
fn draw_noise(l: &CMatrix, rng: &mut impl Rng) -> CVector {
    let n = l.nrows();
    let white = CVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    l * white
}

/// Repeated-trial dataset generator with the covariance factorization and
/// signal means hoisted out of the per-trial loop.
#[derive(Debug, Clone)]
pub struct DatasetSampler {
    n: usize,
    k_p: usize,
    k_s: usize,
    hypothesis: Hypothesis,
    chol_l: CMatrix,
    /// Column k holds `alpha_k * p`; zero matrix under H0.
    mean: CMatrix,
}

impl DatasetSampler {
    /// Noise-only sampler for the scenario's covariance model.
    pub fn h0(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let c = scenario.covariance_matrix()?;
        Self::build(scenario, &c, None)
    }

    /// Signal-plus-noise sampler with the scenario's equal-split amplitudes
    /// on the (possibly mismatched) actual steering vector.
    pub fn h1(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let c = scenario.covariance_matrix()?;
        let p = scenario.actual_steering();
        let alphas = amplitudes_for_snr(scenario, &p, &c)?;
        Self::build(scenario, &c, Some((p, alphas)))
    }

    /// Signal-plus-noise sampler with explicit amplitudes and steering.
    pub fn h1_with(
        scenario: &Scenario,
        p: &CVector,
        alphas: &AmplitudeVector,
    ) -> Result<Self> {
        scenario.validate()?;
        if alphas.alphas.len() != scenario.k_p {
            return Err(Error::InvalidInput(format!(
                "need {} amplitudes, got {}",
                scenario.k_p,
                alphas.alphas.len()
            )));
        }
        let c = scenario.covariance_matrix()?;
        Self::build(scenario, &c, Some((p.clone(), alphas.clone())))
    }

    fn build(
        scenario: &Scenario,
        c: &HermitianMatrix,
        signal: Option<(CVector, AmplitudeVector)>,
    ) -> Result<Self> {
        let chol = nalgebra::linalg::Cholesky::new(c.as_matrix().clone()).ok_or(
            Error::SingularMatrix {
                min_eigenvalue: 0.0,
                max_eigenvalue: f64::NAN,
            },
        )?;
        let mut mean = CMatrix::zeros(scenario.n, scenario.k_p);
        let hypothesis = match &signal {
            None => Hypothesis::H0,
            Some((p, alphas)) => {
                if p.len() != scenario.n {
                    return Err(Error::InvalidInput(
                        "steering vector length must equal N".into(),
                    ));
                }
                for (k, &a) in alphas.alphas.iter().enumerate() {
                    for i in 0..scenario.n {
                        mean[(i, k)] = a * p[i];
                    }
                }
                Hypothesis::H1
            }
        };
        Ok(Self {
            n: scenario.n,
            k_p: scenario.k_p,
            k_s: scenario.k_s,
            hypothesis,
            chol_l: chol.l(),
            mean,
        })
    }

    /// Draw the dataset for one trial. Secondaries are drawn first, then the
    /// primaries, so the draw count per trial is fixed and the output is a
    /// pure function of `(master_seed, trial_index)`.
    pub fn draw(&self, master_seed: u64, trial_index: u64) -> Dataset {
        let mut rng = trial_rng(master_seed, trial_index);
        let mut s = CMatrix::zeros(self.n, self.n);
        for _ in 0..self.k_s {
            let r = draw_noise(&self.chol_l, &mut rng);
            for i in 0..self.n {
                for j in i..self.n {
                    let val = r[i] * r[j].conj();
                    s[(i, j)] += val;
                    if j != i {
                        s[(j, i)] += val.conj();
                    }
                }
            }
        }
        let mut z = self.mean.clone();
        for k in 0..self.k_p {
            let noise = draw_noise(&self.chol_l, &mut rng);
            for i in 0..self.n {
                z[(i, k)] += noise[i];
            }
        }
        Dataset {
            z,
            s: HermitianMatrix::new(s).expect("accumulated scatter matrix is Hermitian"),
            hypothesis: self.hypothesis,
            seed_path: (master_seed, trial_index),
        }
    }
}

/// One-shot dataset draw for the given hypothesis and actual steering.
pub fn draw_dataset(
    scenario: &Scenario,
    hypothesis: Hypothesis,
    actual_steering: &CVector,
    master_seed: u64,
    trial_index: u64,
) -> Result<Dataset> {
    let sampler = match hypothesis {
        Hypothesis::H0 => DatasetSampler::h0(scenario)?,
        Hypothesis::H1 => {
            let c = scenario.covariance_matrix()?;
            let alphas = amplitudes_for_snr(scenario, actual_steering, &c)?;
            DatasetSampler::h1_with(scenario, actual_steering, &alphas)?
        }
    };
    Ok(sampler.draw(master_seed, trial_index))
}
