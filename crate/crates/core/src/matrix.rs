//! Complex Hermitian linear-algebra primitives.
//!
//! Everything downstream (detector statistics, oracles, Monte Carlo) reduces
//! to a handful of operations on Hermitian positive (semi)definite matrices:
//! eigenvalues with a numerical-rank decision, the inverse square root used
//! for whitening, orthogonal-complement projectors, and log-domain
//! determinants of `M/scale + I`. Determinant ratios are never formed
//! directly: with `N = 16` and millions of calibration trials a product of
//! `N` factors would drift out of range, so all determinant work happens on
//! eigenvalues in log space.

use crate::error::{Error, Result};
use crate::{C64, CMatrix, CVector};

/// Hermitian deviation allowed on input, relative to the largest entry.
const HERMITIAN_REL_TOL: f64 = 1e-10;

/// Returns `(M + M^H) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * C64::new(0.5, 0.0);
        }
    }
    out
}

fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A square complex matrix kept exactly Hermitian.
///
/// Construction symmetrizes the input; matrices whose asymmetry exceeds the
/// tolerance are rejected rather than silently repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: CMatrix,
}

impl HermitianMatrix {
    /// Validates squareness, finiteness and Hermitian symmetry, then stores
    /// the symmetrized matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !all_finite(&m) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = max_abs_entry(&m).max(1.0);
        let tolerance = HERMITIAN_REL_TOL * scale;
        let mut max_asymmetry = 0.0f64;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                max_asymmetry = max_asymmetry.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if max_asymmetry > tolerance {
            return Err(Error::NotHermitian {
                max_asymmetry,
                tolerance,
            });
        }
        Ok(Self {
            inner: symmetrize(&m),
        })
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            inner: CMatrix::identity(dim, dim),
        }
    }

    /// Zero matrix of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: CMatrix::zeros(dim, dim),
        }
    }

    /// Real diagonal matrix.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }
}

/// Eigenvalues of a Hermitian PSD matrix with a numerical-rank decision.
///
/// `values` are sorted descending; negatives inside the tolerance band are
/// clamped to zero. `rank` counts values strictly above `tolerance_used`,
/// the standard `dim * eps * max(lambda_max, 1)` rule.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values: Vec<f64>,
    rank: usize,
    tolerance_used: f64,
}

impl EigenSpectrum {
    /// Builds a spectrum from raw eigenvalues, deciding rank against
    /// `dim * eps * max(lambda_max, scale_floor, 1)`.
    ///
    /// `scale_floor` lets callers widen the zero band when the matrix is a
    /// projection of something much larger (rounding noise then scales with
    /// the pre-projection magnitude, not with `lambda_max` of the result).
    pub fn from_raw(mut values: Vec<f64>, scale_floor: f64) -> Result<Self> {
        values.sort_unstable_by(|a, b| b.total_cmp(a));
        let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
        let dim = values.len() as f64;
        let tolerance_used = dim * f64::EPSILON * lambda_max.max(scale_floor).max(1.0);
        for v in values.iter_mut() {
            if *v < 0.0 {
                if *v < -tolerance_used {
                    return Err(Error::NotPsd {
                        min_eigenvalue: *v,
                        tolerance: tolerance_used,
                    });
                }
                *v = 0.0;
            }
        }
        let rank = values.iter().filter(|&&v| v > tolerance_used).count();
        Ok(Self {
            values,
            rank,
            tolerance_used,
        })
    }

    /// All eigenvalues, descending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The eigenvalues deemed nonzero.
    pub fn nonzero(&self) -> &[f64] {
        &self.values[..self.rank]
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tolerance_used(&self) -> f64 {
        self.tolerance_used
    }

    /// `log det(M/scale + I) = sum_i log(lambda_i/scale + 1)`.
    pub fn logdet_id_plus(&self, scale: f64) -> f64 {
        self.values
            .iter()
            .map(|&lambda| (lambda / scale).ln_1p())
            .sum()
    }

    /// `g(nu) = sum over nonzero eigenvalues of lambda/(lambda + 1 + nu)`.
    pub fn g(&self, nu: f64) -> f64 {
        self.nonzero()
            .iter()
            .map(|&lambda| lambda / (lambda + 1.0 + nu))
            .sum()
    }
}

/// Eigenvalues of a Hermitian PSD matrix, descending, with rank decision.
///
/// Errors on inputs that are non-Hermitian beyond tolerance (via
/// [`HermitianMatrix::new`]) or that have an eigenvalue below the negative
/// tolerance band.
pub fn eigvals_psd(m: &HermitianMatrix) -> Result<EigenSpectrum> {
    eigvals_psd_with_floor(m, 0.0)
}

/// Like [`eigvals_psd`] but widens the zero band to `scale_floor`; used when
/// `m` was obtained by projecting a larger-magnitude matrix.
pub fn eigvals_psd_with_floor(m: &HermitianMatrix, scale_floor: f64) -> Result<EigenSpectrum> {
    let raw = m.as_matrix().clone().symmetric_eigenvalues();
    EigenSpectrum::from_raw(raw.iter().copied().collect(), scale_floor)
}

/// Unique Hermitian positive definite `T` with `T * S * T = I`, computed by
/// eigendecomposition and re-symmetrized.
pub fn inv_sqrt(s: &HermitianMatrix) -> Result<HermitianMatrix> {
    let dim = s.dim();
    let eig = s.as_matrix().clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let lambda_min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if lambda_min <= dim as f64 * f64::EPSILON * lambda_max {
        return Err(Error::SingularMatrix {
            min_eigenvalue: lambda_min,
            max_eigenvalue: lambda_max,
        });
    }
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let f = C64::new(1.0 / eig.eigenvalues[j].sqrt(), 0.0);
        for z in col.iter_mut() {
            *z *= f;
        }
    }
    let t = &scaled * q.adjoint();
    Ok(HermitianMatrix {
        inner: symmetrize(&t),
    })
}

/// `log det(M/scale + I)` through the eigenvalues of `M`.
pub fn logdet_id_plus(m: &HermitianMatrix, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scale must be positive, got {scale}"
        )));
    }
    Ok(eigvals_psd(m)?.logdet_id_plus(scale))
}

/// Projector onto the orthogonal complement of a nonzero vector:
/// `P = I - v v^H / (v^H v)`.
pub fn complement_projector(vt: &CVector) -> Result<HermitianMatrix> {
    if vt.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("vector has non-finite entries".into()));
    }
    let norm_sq = vt.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::InvalidInput(
            "cannot project against the zero vector".into(),
        ));
    }
    let n = vt.len();
    let mut p = CMatrix::identity(n, n);
    let inv = C64::new(1.0 / norm_sq, 0.0);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] -= vt[i] * vt[j].conj() * inv;
        }
    }
    Ok(HermitianMatrix {
        inner: symmetrize(&p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_pd(dim: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        };
        let a = CMatrix::from_fn(dim, dim, |_, _| draw());
        let m = &a * a.adjoint() + CMatrix::identity(dim, dim) * C64::new(0.5, 0.0);
        HermitianMatrix::new(m).unwrap()
    }

    #[test]
    fn eigvals_identity() {
        let spec = eigvals_psd(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(spec.values(), &[1.0, 1.0, 1.0]);
        assert_eq!(spec.rank(), 3);
    }

    #[test]
    fn eigvals_zero_matrix() {
        let spec = eigvals_psd(&HermitianMatrix::zeros(4)).unwrap();
        assert_eq!(spec.values(), &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(spec.rank(), 0);
    }

    #[test]
    fn eigvals_diagonal() {
        let spec = eigvals_psd(&HermitianMatrix::from_real_diagonal(&[3.0, 1.0, 0.0])).unwrap();
        assert_relative_eq!(spec.values()[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(spec.values()[1], 1.0, max_relative = 1e-12);
        assert_eq!(spec.values()[2], 0.0);
        assert_eq!(spec.rank(), 2);
    }

    #[test]
    fn eigvals_complex_hermitian() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1.
        let mut m = CMatrix::identity(2, 2) * C64::new(2.0, 0.0);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, -1.0);
        let spec = eigvals_psd(&HermitianMatrix::new(m).unwrap()).unwrap();
        assert_relative_eq!(spec.values()[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(spec.values()[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn eigvals_rejects_indefinite() {
        let m = HermitianMatrix::from_real_diagonal(&[1.0, -0.5]);
        assert!(matches!(eigvals_psd(&m), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn hermitian_rejects_asymmetric() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(0.5, 0.0);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn inv_sqrt_identity() {
        let t = inv_sqrt(&HermitianMatrix::identity(3)).unwrap();
        assert_relative_eq!(
            (t.as_matrix() - CMatrix::identity(3, 3)).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn inv_sqrt_diagonal() {
        let t = inv_sqrt(&HermitianMatrix::from_real_diagonal(&[4.0, 9.0])).unwrap();
        assert_relative_eq!(t.as_matrix()[(0, 0)].re, 0.5, max_relative = 1e-12);
        assert_relative_eq!(t.as_matrix()[(1, 1)].re, 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn inv_sqrt_multiply_back() {
        for seed in 0..20u64 {
            let s = random_pd(5, seed);
            let t = inv_sqrt(&s).unwrap();
            let tst = t.as_matrix() * s.as_matrix() * t.as_matrix();
            let err = (&tst - CMatrix::identity(5, 5)).norm() / tst.norm();
            assert!(err <= 1e-10, "seed {seed}: relative error {err:.3e}");
        }
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let s = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        assert!(matches!(inv_sqrt(&s), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn logdet_zero_matrix() {
        assert_eq!(logdet_id_plus(&HermitianMatrix::zeros(3), 7.5).unwrap(), 0.0);
    }

    #[test]
    fn logdet_diagonal() {
        let m = HermitianMatrix::from_real_diagonal(&[3.0, 1.0]);
        assert_relative_eq!(
            logdet_id_plus(&m, 1.0).unwrap(),
            4.0f64.ln() + 2.0f64.ln(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            logdet_id_plus(&m, 2.0).unwrap(),
            2.5f64.ln() + 1.5f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn logdet_matches_dense_determinant() {
        for seed in 0..20u64 {
            let m = random_pd(5, 100 + seed);
            let dense = (m.as_matrix() + CMatrix::identity(5, 5)).determinant();
            assert!(dense.im.abs() < 1e-9 * dense.re.abs());
            let ours = logdet_id_plus(&m, 1.0).unwrap();
            assert_relative_eq!(ours, dense.re.ln(), max_relative = 1e-9);
        }
    }

    #[test]
    fn projector_axis_vector() {
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let p = complement_projector(&v).unwrap();
        assert_relative_eq!(p.as_matrix()[(0, 0)].re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(p.as_matrix()[(1, 1)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn projector_symmetric_case() {
        let inv_sqrt2 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let v = CVector::from_vec(vec![inv_sqrt2, inv_sqrt2]);
        let p = complement_projector(&v).unwrap();
        assert_relative_eq!(p.as_matrix()[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(p.as_matrix()[(0, 1)].re, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn projector_idempotent_and_annihilating() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut draw = || {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        };
        for _ in 0..10 {
            let v = CVector::from_fn(6, |_, _| draw());
            let p = complement_projector(&v).unwrap();
            let pp = p.as_matrix() * p.as_matrix();
            assert!((&pp - p.as_matrix()).norm() <= 1e-12);
            assert!((p.as_matrix() * &v).norm() <= 1e-12 * v.norm());
        }
    }

    #[test]
    fn projector_rejects_zero_vector() {
        let v = CVector::zeros(3);
        assert!(matches!(
            complement_projector(&v),
            Err(Error::InvalidInput(_))
        ));
    }
}
