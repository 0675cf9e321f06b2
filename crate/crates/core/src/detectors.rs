//! Detection statistics for range-spread targets.
//!
//! Five detectors share one whitened view of the data `(Z, S, v)`:
//!
//! - the robust GLRT, whose H1 model inflates the noise covariance by an
//!   unknown factor `1 + nu` estimated from the data;
//! - a parametric family that deflates the exponent `m` to `m / (1 + eps)`,
//!   trading matched-signal power for robustness (`eps = 0` recovers the
//!   robust GLRT exactly);
//! - the GLRT for the homogeneous model (GLRT-H, Kelly's detector when a
//!   single cell is under test);
//! - the energy competitors GAMF and GASD (AMF and ACE for one cell).
//!
//! All determinant-based statistics are evaluated in log domain from the
//! eigenvalues of two small Gram matrices: `Z^H S^-1 Z` and its projection
//! orthogonal to the whitened steering vector. These share their nonzero
//! eigenvalues with the corresponding N x N whitened forms, so nothing is
//! lost by never materializing an N x N product.

use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{eigvals_psd_with_floor, symmetrize, EigenSpectrum, HermitianMatrix};
use crate::{C64, CMatrix, CVector};

/// Which decision statistic to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorKind {
    /// Robust GLRT with data-estimated signal-power factor `nu`.
    RobustGlrt,
    /// Parametric detector with robustness knob `epsilon >= 0`.
    Parametric(f64),
    /// GLRT for the homogeneous environment (`nu = 0`).
    GlrtH,
    /// Generalized adaptive matched filter.
    Gamf,
    /// Generalized adaptive subspace detector.
    Gasd,
}

impl DetectorKind {
    /// The five detectors compared in the performance analysis, with the
    /// given `epsilon` for the parametric one.
    pub fn all_five(epsilon: f64) -> Vec<DetectorKind> {
        vec![
            DetectorKind::RobustGlrt,
            DetectorKind::Parametric(epsilon),
            DetectorKind::GlrtH,
            DetectorKind::Gamf,
            DetectorKind::Gasd,
        ]
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorKind::RobustGlrt => write!(f, "glrt"),
            DetectorKind::Parametric(eps) => write!(f, "parametric:{eps}"),
            DetectorKind::GlrtH => write!(f, "glrt-h"),
            DetectorKind::Gamf => write!(f, "gamf"),
            DetectorKind::Gasd => write!(f, "gasd"),
        }
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "glrt" => Ok(DetectorKind::RobustGlrt),
            "glrt-h" | "glrth" => Ok(DetectorKind::GlrtH),
            "gamf" => Ok(DetectorKind::Gamf),
            "gasd" => Ok(DetectorKind::Gasd),
            _ => {
                if let Some(eps) = lower.strip_prefix("parametric:") {
                    let eps: f64 = eps.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad epsilon in detector name `{s}`"))
                    })?;
                    if eps < 0.0 {
                        return Err(Error::InvalidConfig(
                            "parametric epsilon must be nonnegative".into(),
                        ));
                    }
                    Ok(DetectorKind::Parametric(eps))
                } else {
                    Err(Error::InvalidConfig(format!(
                        "unknown detector `{s}` (expected glrt, parametric:<eps>, glrt-h, gamf, gasd)"
                    )))
                }
            }
        }
    }
}

impl Serialize for DetectorKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DetectorKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which branch of the `nu` minimizer was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuBranch {
    /// `sum lambda_i/(lambda_i+1) <= m_eff`: the minimum sits at `nu = 0`.
    BoundaryZero,
    /// Interior root of `g(nu) = m_eff`.
    InteriorRoot,
}

/// Estimated signal-power factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuEstimate {
    pub value: f64,
    pub branch: NuBranch,
    /// `|g(nu) - m_eff|` on the interior branch, 0 on the boundary.
    pub residual: f64,
}

/// A detector output, kept in log domain for uniform thresholding.
///
/// For the determinant-based detectors this is `ln` of the statistic
/// (nonnegative since the statistic is >= 1). GAMF and GASD are linear
/// statistics stored as `ln(value)`, with `ln(0)` mapped to negative
/// infinity, which orders correctly against any finite threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticValue {
    pub log_value: f64,
    pub detector: DetectorKind,
}

impl StatisticValue {
    /// The statistic on its natural linear scale.
    pub fn linear_value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Exponent `m = N * K_P / (K_P + K_S)` of the nu-minimization.
pub fn exponent_m(n: usize, k_p: usize, k_s: usize) -> f64 {
    (n * k_p) as f64 / (k_p + k_s) as f64
}

fn check_dims(z: &CMatrix, s: &HermitianMatrix, v: &CVector) -> Result<()> {
    let n = s.dim();
    if z.nrows() != n || v.len() != n {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: S is {n}x{n}, Z is {}x{}, v has length {}",
            z.nrows(),
            z.ncols(),
            v.len()
        )));
    }
    if z.ncols() == 0 {
        return Err(Error::InvalidInput("Z must have at least one column".into()));
    }
    if v.norm_squared() == 0.0 {
        return Err(Error::InvalidInput("steering vector must be nonzero".into()));
    }
    Ok(())
}

fn cholesky_of(s: &HermitianMatrix) -> Result<Cholesky<C64, Dyn>> {
    Cholesky::new(s.as_matrix().clone()).ok_or(Error::SingularMatrix {
        min_eigenvalue: 0.0,
        max_eigenvalue: f64::NAN,
    })
}

/// Whitens `Z` and `v` by the inverse Cholesky factor of `S`, so that
/// ordinary inner products of the results are `S^-1`-weighted products of
/// the originals.
fn whiten(z: &CMatrix, s: &HermitianMatrix, v: &CVector) -> Result<(CMatrix, CVector)> {
    check_dims(z, s, v)?;
    let chol = cholesky_of(s)?;
    let l = chol.l();
    let zt = l
        .solve_lower_triangular(z)
        .ok_or_else(|| Error::InvalidInput("triangular solve failed".into()))?;
    let vt = l
        .solve_lower_triangular(v)
        .ok_or_else(|| Error::InvalidInput("triangular solve failed".into()))?;
    Ok((zt, vt))
}

/// Closed-form amplitude estimates `alpha_k = v^H S^-1 z_k / v^H S^-1 v`.
pub fn alpha_hat(z: &CMatrix, s: &HermitianMatrix, v: &CVector) -> Result<Vec<C64>> {
    let (zt, vt) = whiten(z, s, v)?;
    let q = vt.norm_squared();
    Ok(zt.column_iter().map(|col| vt.dotc(&col) / q).collect())
}

/// Eigenvalues of the whitened data matrix projected orthogonal to the
/// whitened steering vector.
///
/// Computed from the `K_P x K_P` Gram form, which shares its nonzero
/// eigenvalues with the `N x N` projected matrix; the zero-band tolerance is
/// widened to the unprojected magnitude so that data lying entirely in the
/// steering direction collapses to an exact rank-0 spectrum.
pub fn projected_spectrum(
    z: &CMatrix,
    s: &HermitianMatrix,
    v: &CVector,
) -> Result<EigenSpectrum> {
    let (zt, vt) = whiten(z, s, v)?;
    projected_spectrum_whitened(&zt, &vt).map(|(_, proj)| proj)
}

/// Shared core: spectra of `G = Zt^H Zt` and of `G - u u^H / q`.
fn projected_spectrum_whitened(
    zt: &CMatrix,
    vt: &CVector,
) -> Result<(EigenSpectrum, EigenSpectrum)> {
    let q = vt.norm_squared();
    let u: CVector = zt.ad_mul(vt);
    let g = zt.ad_mul(zt);
    let full = eigvals_psd_with_floor(&HermitianMatrix::new(symmetrize(&g))?, 0.0)?;
    let scale = full.values().first().copied().unwrap_or(0.0);
    let mut b = g;
    let inv_q = C64::new(1.0 / q, 0.0);
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            b[(i, j)] -= u[i] * u[j].conj() * inv_q;
        }
    }
    let proj = eigvals_psd_with_floor(&HermitianMatrix::new(symmetrize(&b))?, scale)?;
    Ok((full, proj))
}

/// Minimizer of `f(nu) = (1+nu)^m_eff * prod(lambda_i/(nu+1) + 1)` over
/// `nu >= 0`.
///
/// The boundary branch applies when `g(0) = sum lambda_i/(lambda_i+1)` does
/// not exceed `m_eff`; otherwise the unique root of the strictly decreasing
/// `g(nu) = m_eff` is bracketed in `(0, sum lambda_i / m_eff)` and polished
/// by Newton steps safeguarded by bisection.
pub fn nu_hat(spectrum: &EigenSpectrum, m_eff: f64) -> Result<NuEstimate> {
    if !(m_eff > 0.0) {
        return Err(Error::InvalidInput(format!(
            "m_eff must be positive, got {m_eff}"
        )));
    }
    let g0 = spectrum.g(0.0);
    if g0 <= m_eff {
        return Ok(NuEstimate {
            value: 0.0,
            branch: NuBranch::BoundaryZero,
            residual: 0.0,
        });
    }
    let sum_lambda: f64 = spectrum.nonzero().iter().sum();
    let mut lo = 0.0f64;
    let mut hi = sum_lambda / m_eff; // g(hi) < m_eff since g(nu) < sum/nu
    let mut nu = 0.5 * hi;
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let g = spectrum.g(nu);
        residual = g - m_eff;
        if residual.abs() <= 1e-12 * m_eff {
            break;
        }
        if residual > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= 1e-12 * (1.0 + nu) {
            break;
        }
        let dg: f64 = spectrum
            .nonzero()
            .iter()
            .map(|&l| -l / ((l + 1.0 + nu) * (l + 1.0 + nu)))
            .sum();
        let newton = nu - residual / dg;
        nu = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(NuEstimate {
        value: nu,
        branch: NuBranch::InteriorRoot,
        residual: residual.abs(),
    })
}

/// One dataset whitened once and shared by every detector.
///
/// Holds the two spectra and scalar summaries from which all five statistics
/// follow; building it costs one Cholesky of `S` and two `K_P x K_P`
/// eigendecompositions.
#[derive(Debug, Clone)]
pub struct WhitenedInstance {
    k_p: usize,
    m: f64,
    /// `v^H S^-1 v`.
    q: f64,
    /// `u_k = z_k^H S^-1 v`.
    u: CVector,
    /// Spectrum of `Z^H S^-1 Z` (numerator determinant).
    full_spectrum: EigenSpectrum,
    /// Spectrum of the steering-orthogonal projection (denominator).
    proj_spectrum: EigenSpectrum,
    /// `tr(Z^H S^-1 Z)`.
    trace_g: f64,
}

impl WhitenedInstance {
    pub fn new(z: &CMatrix, s: &HermitianMatrix, v: &CVector, k_s: usize) -> Result<Self> {
        if k_s < s.dim() {
            return Err(Error::InvalidInput(format!(
                "need K_S >= N for an almost-surely invertible S (K_S = {k_s}, N = {})",
                s.dim()
            )));
        }
        let (zt, vt) = whiten(z, s, v)?;
        let q = vt.norm_squared();
        let u: CVector = zt.ad_mul(&vt);
        let (full_spectrum, proj_spectrum) = projected_spectrum_whitened(&zt, &vt)?;
        let trace_g = full_spectrum.values().iter().sum();
        Ok(Self {
            k_p: z.ncols(),
            m: exponent_m(s.dim(), z.ncols(), k_s),
            q,
            u,
            full_spectrum,
            proj_spectrum,
            trace_g,
        })
    }

    /// Exponent `m = N K_P / (K_P + K_S)` for this instance.
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn proj_spectrum(&self) -> &EigenSpectrum {
        &self.proj_spectrum
    }

    /// Amplitude estimates, free once the instance is built.
    pub fn alpha_hat(&self) -> Vec<C64> {
        self.u.iter().map(|&u_k| u_k.conj() / self.q).collect()
    }

    /// `nu` estimate for the parametric detector with the given epsilon
    /// (`epsilon = 0` gives the GLRT's estimate).
    pub fn nu_estimate(&self, epsilon: f64) -> Result<NuEstimate> {
        if epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        nu_hat(&self.proj_spectrum, self.m / (1.0 + epsilon))
    }

    fn det_statistic(&self, epsilon: f64, detector: DetectorKind) -> Result<StatisticValue> {
        let m_eff = self.m / (1.0 + epsilon);
        let nu = nu_hat(&self.proj_spectrum, m_eff)?;
        let log_value = self.full_spectrum.logdet_id_plus(1.0)
            - m_eff * (1.0 + nu.value).ln()
            - self.proj_spectrum.logdet_id_plus(1.0 + nu.value);
        Ok(StatisticValue {
            log_value,
            detector,
        })
    }

    fn gamf_linear(&self) -> f64 {
        self.u.norm_squared() / self.q
    }

    /// Evaluate one detector on this instance.
    pub fn statistic(&self, kind: DetectorKind) -> Result<StatisticValue> {
        match kind {
            DetectorKind::RobustGlrt => self.det_statistic(0.0, kind),
            DetectorKind::Parametric(eps) => {
                if eps < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "epsilon must be nonnegative, got {eps}"
                    )));
                }
                self.det_statistic(eps, kind)
            }
            DetectorKind::GlrtH => {
                let log_value = self.full_spectrum.logdet_id_plus(1.0)
                    - self.proj_spectrum.logdet_id_plus(1.0);
                Ok(StatisticValue {
                    log_value,
                    detector: kind,
                })
            }
            DetectorKind::Gamf => Ok(StatisticValue {
                log_value: self.gamf_linear().ln(),
                detector: kind,
            }),
            DetectorKind::Gasd => {
                if self.trace_g == 0.0 {
                    return Err(Error::UndefinedStatistic(format!(
                        "GASD is 0/0 on all-zero primary data (K_P = {})",
                        self.k_p
                    )));
                }
                Ok(StatisticValue {
                    log_value: (self.gamf_linear() / self.trace_g).ln(),
                    detector: kind,
                })
            }
        }
    }
}

/// Robust GLRT statistic for range-spread targets, in log domain.
pub fn glrt_robust_statistic(
    z: &CMatrix,
    s: &HermitianMatrix,
    v: &CVector,
    k_s: usize,
) -> Result<StatisticValue> {
    WhitenedInstance::new(z, s, v, k_s)?.statistic(DetectorKind::RobustGlrt)
}

/// Parametric detector statistic with robustness parameter `epsilon`.
pub fn parametric_statistic(
    z: &CMatrix,
    s: &HermitianMatrix,
    v: &CVector,
    k_s: usize,
    epsilon: f64,
) -> Result<StatisticValue> {
    WhitenedInstance::new(z, s, v, k_s)?.statistic(DetectorKind::Parametric(epsilon))
}

/// GLRT for the homogeneous environment, in log domain.
pub fn glrt_h_statistic(
    z: &CMatrix,
    s: &HermitianMatrix,
    v: &CVector,
    k_s: usize,
) -> Result<StatisticValue> {
    WhitenedInstance::new(z, s, v, k_s)?.statistic(DetectorKind::GlrtH)
}

/// Generalized adaptive matched filter
/// `sum_k |z_k^H S^-1 v|^2 / (v^H S^-1 v)`, stored as its logarithm.
pub fn gamf_statistic(z: &CMatrix, s: &HermitianMatrix, v: &CVector) -> Result<StatisticValue> {
    let (zt, vt) = whiten(z, s, v)?;
    let u: CVector = zt.ad_mul(&vt);
    Ok(StatisticValue {
        log_value: (u.norm_squared() / vt.norm_squared()).ln(),
        detector: DetectorKind::Gamf,
    })
}

/// Generalized adaptive subspace detector: the GAMF numerator normalized by
/// the whitened data energy, a value in `[0, 1]` stored as its logarithm.
pub fn gasd_statistic(z: &CMatrix, s: &HermitianMatrix, v: &CVector) -> Result<StatisticValue> {
    let (zt, vt) = whiten(z, s, v)?;
    let energy = zt.norm_squared();
    if energy == 0.0 {
        return Err(Error::UndefinedStatistic(
            "GASD is 0/0 on all-zero primary data".into(),
        ));
    }
    let u: CVector = zt.ad_mul(&vt);
    Ok(StatisticValue {
        log_value: (u.norm_squared() / (vt.norm_squared() * energy)).ln(),
        detector: DetectorKind::Gasd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{complement_projector, eigvals_psd, inv_sqrt};
    use crate::oracle::seeded_instance;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn alpha_hat_reads_off_component() {
        let z = CMatrix::from_column_slice(2, 1, &[c(3.0, 4.0), c(5.0, 0.0)]);
        let s = HermitianMatrix::identity(2);
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let a = alpha_hat(&z, &s, &v).unwrap();
        assert_relative_eq!(a[0].re, 3.0, max_relative = 1e-14);
        assert_relative_eq!(a[0].im, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn alpha_hat_orthogonal_data() {
        let z = CMatrix::from_column_slice(2, 1, &[c(0.0, 0.0), c(0.0, 7.0)]);
        let s = HermitianMatrix::identity(2);
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let a = alpha_hat(&z, &s, &v).unwrap();
        assert!(a[0].norm() < 1e-15);
    }

    #[test]
    fn alpha_hat_rejects_zero_steering() {
        let z = CMatrix::zeros(2, 1);
        let s = HermitianMatrix::identity(2);
        let v = CVector::zeros(2);
        assert!(alpha_hat(&z, &s, &v).is_err());
    }

    #[test]
    fn projected_spectrum_zero_data() {
        let z = CMatrix::zeros(3, 2);
        let s = HermitianMatrix::identity(3);
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let spec = projected_spectrum(&z, &s, &v).unwrap();
        assert_eq!(spec.rank(), 0);
        assert!(spec.values().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn projected_spectrum_kills_steering_aligned_data() {
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.5)]);
        let z = CMatrix::from_columns(&[v.scale(3.0)]);
        let s = HermitianMatrix::identity(3);
        let spec = projected_spectrum(&z, &s, &v).unwrap();
        assert_eq!(spec.rank(), 0, "signal inside the steering subspace");
    }

    #[test]
    fn projected_spectrum_matches_explicit_nxn_form() {
        for seed in 0..20u64 {
            let (z, s, v) = seeded_instance(4, 2, 8, seed);
            let small = projected_spectrum(&z, &s, &v).unwrap();

            let t = inv_sqrt(&s).unwrap();
            let vt = t.as_matrix() * &v;
            let p = complement_projector(&vt).unwrap();
            let zt = t.as_matrix() * &z;
            let a = p.as_matrix() * &zt * zt.adjoint() * p.as_matrix();
            let big = eigvals_psd(&HermitianMatrix::new(symmetrize(&a)).unwrap()).unwrap();

            for (ls, lb) in small.nonzero().iter().zip(big.nonzero()) {
                assert_relative_eq!(ls, lb, max_relative = 1e-9);
            }
            assert_eq!(small.rank(), big.rank());
        }
    }

    #[test]
    fn nu_hat_boundary_branch() {
        let spec = EigenSpectrum::from_raw(vec![1.0], 0.0).unwrap();
        let est = nu_hat(&spec, 16.0 * 4.0 / 36.0).unwrap();
        assert_eq!(est.branch, NuBranch::BoundaryZero);
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn nu_hat_single_eigenvalue_closed_form() {
        // g(nu) = 9/(10+nu) = 0.5 at nu = lambda/m - lambda - 1 = 8.
        let spec = EigenSpectrum::from_raw(vec![9.0], 0.0).unwrap();
        let est = nu_hat(&spec, 0.5).unwrap();
        assert_eq!(est.branch, NuBranch::InteriorRoot);
        assert_relative_eq!(est.value, 8.0, max_relative = 1e-12);
        assert!(est.residual <= 1e-12 * 0.5);
    }

    #[test]
    fn nu_hat_two_eigenvalue_quadratic() {
        // Clearing denominators in 3/(4+nu) + 1/(2+nu) = 1 gives
        // nu^2 + 2 nu - 2 = 0, so nu = sqrt(3) - 1.
        let spec = EigenSpectrum::from_raw(vec![3.0, 1.0], 0.0).unwrap();
        let est = nu_hat(&spec, 1.0).unwrap();
        assert_relative_eq!(est.value, 3.0f64.sqrt() - 1.0, max_relative = 1e-12);
    }

    #[test]
    fn nu_hat_empty_spectrum() {
        let spec = EigenSpectrum::from_raw(vec![0.0, 0.0], 0.0).unwrap();
        let est = nu_hat(&spec, 0.3).unwrap();
        assert_eq!(est.branch, NuBranch::BoundaryZero);
    }

    #[test]
    fn nu_hat_boundary_tie_is_zero() {
        // g(0) = 0.5 exactly equals m_eff: the `<=` convention keeps nu = 0.
        let spec = EigenSpectrum::from_raw(vec![1.0], 0.0).unwrap();
        let est = nu_hat(&spec, 0.5).unwrap();
        assert_eq!(est.branch, NuBranch::BoundaryZero);
    }

    #[test]
    fn glrt_statistics_on_zero_data() {
        let z = CMatrix::zeros(3, 2);
        let s = HermitianMatrix::identity(3);
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(glrt_robust_statistic(&z, &s, &v, 6).unwrap().log_value, 0.0);
        assert_eq!(glrt_h_statistic(&z, &s, &v, 6).unwrap().log_value, 0.0);
        assert_eq!(
            parametric_statistic(&z, &s, &v, 6, 1.3).unwrap().log_value,
            0.0
        );
        assert_eq!(
            gamf_statistic(&z, &s, &v).unwrap().log_value,
            f64::NEG_INFINITY
        );
        assert!(gasd_statistic(&z, &s, &v).is_err());
    }

    #[test]
    fn robust_equals_glrt_h_on_boundary_branch() {
        // Small data keeps g(0) below m, forcing the boundary branch.
        for seed in 0..50u64 {
            let (mut z, s, v) = seeded_instance(4, 2, 12, 900 + seed);
            z.scale_mut(1e-3);
            let inst = WhitenedInstance::new(&z, &s, &v, 12).unwrap();
            let nu = inst.nu_estimate(0.0).unwrap();
            assert_eq!(nu.branch, NuBranch::BoundaryZero);
            let robust = inst.statistic(DetectorKind::RobustGlrt).unwrap();
            let glrt_h = inst.statistic(DetectorKind::GlrtH).unwrap();
            assert_eq!(robust.log_value, glrt_h.log_value, "bitwise equal branch");
        }
    }

    #[test]
    fn parametric_zero_epsilon_is_robust_glrt() {
        for seed in 0..50u64 {
            let (z, s, v) = seeded_instance(4, 2, 8, 40 + seed);
            let a = glrt_robust_statistic(&z, &s, &v, 8).unwrap();
            let b = parametric_statistic(&z, &s, &v, 8, 0.0).unwrap();
            assert_eq!(a.log_value, b.log_value);
        }
    }

    #[test]
    fn parametric_epsilon_grows_nu() {
        for seed in 0..50u64 {
            let (mut z, s, v) = seeded_instance(4, 2, 8, 500 + seed);
            z.scale_mut(3.0); // push into the interior branch more often
            let inst = WhitenedInstance::new(&z, &s, &v, 8).unwrap();
            let nu0 = inst.nu_estimate(0.0).unwrap();
            let nu2 = inst.nu_estimate(0.2).unwrap();
            assert!(
                nu2.value >= nu0.value - 1e-12,
                "smaller m_eff cannot shrink the root: {} vs {}",
                nu2.value,
                nu0.value
            );
        }
    }

    #[test]
    fn parametric_rejects_negative_epsilon() {
        let (z, s, v) = seeded_instance(4, 2, 8, 3);
        assert!(parametric_statistic(&z, &s, &v, 8, -0.1).is_err());
    }

    #[test]
    fn glrt_h_reduces_to_kelly_for_single_cell() {
        for seed in 0..50u64 {
            let (z, s, v) = seeded_instance(5, 1, 10, 7000 + seed);
            let stat = glrt_h_statistic(&z, &s, &v, 10).unwrap();

            // Kelly's statistic coded directly from S^-1 products.
            let s_inv = s.as_matrix().clone().try_inverse().unwrap();
            let zc = z.column(0).into_owned();
            let num = (v.adjoint() * &s_inv * &zc)[(0, 0)].norm_sqr();
            let vsv = (v.adjoint() * &s_inv * v)[(0, 0)].re;
            let zsz = (zc.adjoint() * &s_inv * &zc)[(0, 0)].re;
            let t_kelly = num / (vsv * (1.0 + zsz));

            assert_relative_eq!(
                stat.linear_value(),
                1.0 / (1.0 - t_kelly),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn gamf_direct_evaluation() {
        let z = CMatrix::from_column_slice(2, 1, &[c(2.0, 0.0), c(0.0, 0.0)]);
        let s = HermitianMatrix::identity(2);
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let stat = gamf_statistic(&z, &s, &v).unwrap();
        assert_relative_eq!(stat.linear_value(), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn gamf_matches_amf_for_single_cell() {
        for seed in 0..20u64 {
            let (z, s, v) = seeded_instance(4, 1, 8, 300 + seed);
            let stat = gamf_statistic(&z, &s, &v).unwrap();
            let s_inv = s.as_matrix().clone().try_inverse().unwrap();
            let zc = z.column(0).into_owned();
            let amf = (v.adjoint() * &s_inv * &zc)[(0, 0)].norm_sqr()
                / (v.adjoint() * &s_inv * v)[(0, 0)].re;
            assert_relative_eq!(stat.linear_value(), amf, max_relative = 1e-10);
        }
    }

    #[test]
    fn gasd_alignment_extremes() {
        let s = HermitianMatrix::identity(2);
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let aligned = CMatrix::from_column_slice(2, 1, &[c(2.0, 0.0), c(0.0, 0.0)]);
        assert_relative_eq!(
            gasd_statistic(&aligned, &s, &v).unwrap().linear_value(),
            1.0,
            max_relative = 1e-14
        );
        let orthogonal = CMatrix::from_column_slice(2, 1, &[c(0.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(
            gasd_statistic(&orthogonal, &s, &v).unwrap().linear_value(),
            0.0
        );
    }

    #[test]
    fn gasd_matches_ace_for_single_cell() {
        for seed in 0..20u64 {
            let (z, s, v) = seeded_instance(4, 1, 8, 600 + seed);
            let stat = gasd_statistic(&z, &s, &v).unwrap();
            let s_inv = s.as_matrix().clone().try_inverse().unwrap();
            let zc = z.column(0).into_owned();
            let ace = (v.adjoint() * &s_inv * &zc)[(0, 0)].norm_sqr()
                / ((v.adjoint() * &s_inv * v)[(0, 0)].re
                    * (zc.adjoint() * &s_inv * &zc)[(0, 0)].re);
            assert_relative_eq!(stat.linear_value(), ace, max_relative = 1e-10);
        }
    }

    #[test]
    fn gasd_stays_in_unit_interval() {
        for seed in 0..100u64 {
            let (z, s, v) = seeded_instance(4, 3, 9, 1234 + seed);
            let val = gasd_statistic(&z, &s, &v).unwrap().linear_value();
            assert!((0.0..=1.0).contains(&val), "GASD = {val} out of [0,1]");
        }
    }

    #[test]
    fn det_statistics_are_at_least_one() {
        for seed in 0..100u64 {
            let (z, s, v) = seeded_instance(5, 2, 10, 4321 + seed);
            let inst = WhitenedInstance::new(&z, &s, &v, 10).unwrap();
            for kind in [
                DetectorKind::RobustGlrt,
                DetectorKind::Parametric(0.2),
                DetectorKind::GlrtH,
            ] {
                let stat = inst.statistic(kind).unwrap();
                assert!(stat.log_value >= -1e-10, "{kind}: {}", stat.log_value);
            }
        }
    }

    #[test]
    fn second_form_cross_implementation() {
        // det(Z Z^H + S) / [(1+nu)^m det(Z_ah Z_ah^H/(1+nu) + S)] computed
        // with dense determinants must match the eigenvalue route.
        for seed in 0..20u64 {
            let (z, s, v) = seeded_instance(4, 2, 8, 2200 + seed);
            let k_s = 8;
            let inst = WhitenedInstance::new(&z, &s, &v, k_s).unwrap();
            let stat = inst.statistic(DetectorKind::RobustGlrt).unwrap();
            let nu = inst.nu_estimate(0.0).unwrap().value;
            let m = inst.m();

            let alphas = alpha_hat(&z, &s, &v).unwrap();
            let mut z_ah = z.clone();
            for (k, &a) in alphas.iter().enumerate() {
                for i in 0..z.nrows() {
                    z_ah[(i, k)] -= a * v[i];
                }
            }
            let num = (&z * z.adjoint() + s.as_matrix()).determinant();
            let den =
                (&z_ah * z_ah.adjoint() / C64::new(1.0 + nu, 0.0) + s.as_matrix()).determinant();
            let second_form = num.re.ln() - m * (1.0 + nu).ln() - den.re.ln();
            assert_relative_eq!(stat.log_value, second_form, max_relative = 1e-8);
        }
    }

    #[test]
    fn detector_kind_roundtrip() {
        for kind in DetectorKind::all_five(0.2) {
            let s = kind.to_string();
            let back: DetectorKind = s.parse().unwrap();
            assert_eq!(kind, back);
        }
        assert!("parametric:-1".parse::<DetectorKind>().is_err());
        assert!("nope".parse::<DetectorKind>().is_err());
    }
}
