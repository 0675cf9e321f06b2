//! Independent brute-force verifiers for the closed-form results.
//!
//! Everything here is deliberately elementary: dense determinants by
//! Gaussian elimination, exhaustive grids, derivative-free coordinate
//! descent, central finite differences. None of it shares a code path with
//! the eigenvalue/root-finding machinery it validates, so agreement between
//! the two routes is meaningful evidence rather than a tautology.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detectors::{alpha_hat, nu_hat, NuBranch};
use crate::error::{Error, Result};
use crate::matrix::{complement_projector, inv_sqrt, EigenSpectrum, HermitianMatrix};
use crate::{C64, CMatrix, CVector};

/// Largest instance the alpha minimizer will accept; beyond this the
/// derivative-free search is no longer trustworthy in reasonable time.
const MAX_ORACLE_N: usize = 6;
const MAX_ORACLE_KP: usize = 3;

/// Outcome of one closed-form-vs-brute-force comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance_seed: u64,
    pub closed_form_value: f64,
    pub brute_force_value: f64,
    pub gap: f64,
    pub pass: bool,
}

fn complex_gauss(rng: &mut impl Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Deterministic random test instance: Gaussian `Z` (N x K_P), scatter
/// matrix `S` accumulated from `K_S >= N` Gaussian draws, Gaussian steering
/// vector.
pub fn seeded_instance(
    n: usize,
    k_p: usize,
    k_s: usize,
    seed: u64,
) -> (CMatrix, HermitianMatrix, CVector) {
    assert!(k_s >= n, "need K_S >= N for an invertible scatter matrix");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = CMatrix::from_fn(n, k_p, |_, _| complex_gauss(&mut rng));
    let mut s = CMatrix::zeros(n, n);
    for _ in 0..k_s {
        let r = CVector::from_fn(n, |_, _| complex_gauss(&mut rng));
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] += r[i] * r[j].conj();
            }
        }
    }
    let v = CVector::from_fn(n, |_, _| complex_gauss(&mut rng));
    (z, HermitianMatrix::new(s).expect("scatter matrix is Hermitian"), v)
}

/// Dense determinant by Gaussian elimination with partial pivoting.
/// Oracle-local on purpose; never used by the detector implementations.
pub fn dense_det(m: &CMatrix) -> C64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant needs a square matrix");
    let mut a = m.clone();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = a[(col, col)].norm_sqr();
        for row in (col + 1)..n {
            let mag = a[(row, col)].norm_sqr();
            if mag > best {
                best = mag;
                pivot_row = row;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot_row != col {
            a.swap_rows(pivot_row, col);
            det = -det;
        }
        let pivot = a[(col, col)];
        det *= pivot;
        for row in (col + 1)..n {
            let factor = a[(row, col)] / pivot;
            for c in (col + 1)..n {
                let sub = factor * a[(col, c)];
                a[(row, c)] -= sub;
            }
        }
    }
    det
}

/// `m(alpha) = det(Z_alpha Z_alpha^H / (nu+1) + S)` evaluated densely from
/// the real coordinates `[Re a_1, Im a_1, Re a_2, ...]`.
fn alpha_objective(z: &CMatrix, s: &HermitianMatrix, v: &CVector, nu: f64, x: &[f64]) -> f64 {
    let n = z.nrows();
    let k_p = z.ncols();
    let mut z_alpha = z.clone();
    for k in 0..k_p {
        let a = C64::new(x[2 * k], x[2 * k + 1]);
        for i in 0..n {
            z_alpha[(i, k)] -= a * v[i];
        }
    }
    let scale = C64::new(1.0 / (nu + 1.0), 0.0);
    let mut m = s.as_matrix().clone();
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..k_p {
                acc += z_alpha[(i, k)] * z_alpha[(j, k)].conj();
            }
            m[(i, j)] += acc * scale;
        }
    }
    dense_det(&m).re
}

/// Result of the derivative-free minimization over the amplitudes.
#[derive(Debug, Clone)]
pub struct AlphaMinimum {
    pub alphas: Vec<C64>,
    pub value: f64,
}

/// Minimizes `det(Z_alpha Z_alpha^H/(nu+1) + S)` over the complex amplitude
/// vector by multi-start coordinate descent with shrinking steps.
///
/// Refuses instances beyond N = 6 or K_P = 3.
pub fn min_alpha_oracle(
    z: &CMatrix,
    s: &HermitianMatrix,
    v: &CVector,
    nu: f64,
    seed: u64,
) -> Result<AlphaMinimum> {
    if z.nrows() > MAX_ORACLE_N || z.ncols() > MAX_ORACLE_KP {
        return Err(Error::OracleFailure(format!(
            "instance too large for brute force: N = {}, K_P = {} (limits {MAX_ORACLE_N}, {MAX_ORACLE_KP})",
            z.nrows(),
            z.ncols()
        )));
    }
    if nu < 0.0 {
        return Err(Error::OracleFailure("nu must be nonnegative".into()));
    }
    let dims = 2 * z.ncols();
    let spread = 3.0 * (z.norm() / v.norm() + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best_x = vec![0.0; dims];
    let mut best_f = f64::INFINITY;
    for start in 0..20 {
        let mut x: Vec<f64> = if start == 0 {
            vec![0.0; dims]
        } else {
            (0..dims).map(|_| rng.gen_range(-spread..spread)).collect()
        };
        let mut fx = alpha_objective(z, s, v, nu, &x);
        let mut h = spread * 0.5;
        while h > 1e-9 {
            loop {
                let mut improved = false;
                for i in 0..dims {
                    for dir in [h, -h] {
                        let old = x[i];
                        x[i] = old + dir;
                        let fy = alpha_objective(z, s, v, nu, &x);
                        if fy < fx {
                            fx = fy;
                            improved = true;
                        } else {
                            x[i] = old;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            h *= 0.5;
        }
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
    }

    let alphas = (0..z.ncols())
        .map(|k| C64::new(best_x[2 * k], best_x[2 * k + 1]))
        .collect();
    Ok(AlphaMinimum {
        alphas,
        value: best_f,
    })
}

/// The closed-form minimum `m_min` computed in three algebraically equal
/// ways, each finished by a dense determinant:
///
/// 1. `det(S) * det(A/(nu+1) + I_N)` with the projected N x N matrix;
/// 2. `det(Z_ah Z_ah^H/(nu+1) + S)` with the estimated amplitudes removed;
/// 3. `det(S) * det(Zp^H Zp/(nu+1) + I_KP)` with the K_P x K_P Gram form.
pub fn m_min_three_forms(
    z: &CMatrix,
    s: &HermitianMatrix,
    v: &CVector,
    nu: f64,
) -> Result<[f64; 3]> {
    let n = z.nrows();
    let det_s = dense_det(s.as_matrix()).re;
    let t = inv_sqrt(s)?;
    let vt = t.as_matrix() * v;
    let p_perp = complement_projector(&vt)?;
    let zt = t.as_matrix() * z;
    let z_perp = p_perp.as_matrix() * &zt;
    let scale = C64::new(1.0 / (nu + 1.0), 0.0);

    let a_big = &z_perp * z_perp.adjoint();
    let form1 = det_s * dense_det(&(a_big * scale + CMatrix::identity(n, n))).re;

    let alphas = alpha_hat(z, s, v)?;
    let mut z_ah = z.clone();
    for (k, &a) in alphas.iter().enumerate() {
        for i in 0..n {
            z_ah[(i, k)] -= a * v[i];
        }
    }
    let form2 = dense_det(&(&z_ah * z_ah.adjoint() * scale + s.as_matrix())).re;

    let k_p = z.ncols();
    let gram = z_perp.ad_mul(&z_perp);
    let form3 = det_s * dense_det(&(gram * scale + CMatrix::identity(k_p, k_p))).re;

    Ok([form1, form2, form3])
}

/// `f(nu) = (1+nu)^m_eff * prod_i (lambda_i/(nu+1) + 1)`, the function whose
/// minimizer the detector's root-finder claims to locate.
pub fn f_nu(spectrum: &EigenSpectrum, m_eff: f64, nu: f64) -> f64 {
    log_f_nu(spectrum, m_eff, nu).exp()
}

fn log_f_nu(spectrum: &EigenSpectrum, m_eff: f64, nu: f64) -> f64 {
    m_eff * nu.ln_1p()
        + spectrum
            .nonzero()
            .iter()
            .map(|&l| (l / (nu + 1.0)).ln_1p())
            .sum::<f64>()
}

/// Grid search over `nu in {0, 1e-3, 2e-3, ..., 100}` followed by
/// golden-section refinement around the best grid point. Returns
/// `(argmin, min value)`.
pub fn min_nu_oracle(spectrum: &EigenSpectrum, m_eff: f64) -> (f64, f64) {
    const STEP: f64 = 1e-3;
    const MAX_NU: f64 = 100.0;
    let mut best_nu = 0.0;
    let mut best_log = f64::INFINITY;
    let points = (MAX_NU / STEP) as usize;
    for i in 0..=points {
        let nu = i as f64 * STEP;
        let lf = log_f_nu(spectrum, m_eff, nu);
        if lf < best_log {
            best_log = lf;
            best_nu = nu;
        }
    }

    // Golden-section refinement on the bracket around the best grid point.
    let mut lo = (best_nu - STEP).max(0.0);
    let mut hi = (best_nu + STEP).min(MAX_NU);
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = log_f_nu(spectrum, m_eff, x1);
    let mut f2 = log_f_nu(spectrum, m_eff, x2);
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = log_f_nu(spectrum, m_eff, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = log_f_nu(spectrum, m_eff, x2);
        }
    }
    let nu = 0.5 * (lo + hi);
    (nu, f_nu(spectrum, m_eff, nu))
}

/// One sampled point of the derivative check for `g`.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativePoint {
    pub nu: f64,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Finite-difference audit of `dg/dnu = -sum lambda_i/(lambda_i+1+nu)^2`.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub points: Vec<DerivativePoint>,
    pub pass: bool,
}

/// Central-difference check that `g` is strictly decreasing with the stated
/// analytic slope at each requested point.
pub fn derivative_check_g(spectrum: &EigenSpectrum, nu_points: &[f64]) -> DerivativeReport {
    let mut pass = true;
    let points = nu_points
        .iter()
        .map(|&nu| {
            let h = 1e-5 * (1.0 + nu);
            let finite = (spectrum.g(nu + h) - spectrum.g((nu - h).max(0.0)))
                / (nu + h - (nu - h).max(0.0));
            let analytic: f64 = spectrum
                .nonzero()
                .iter()
                .map(|&l| -l / ((l + 1.0 + nu) * (l + 1.0 + nu)))
                .sum();
            let denom = analytic.abs().max(f64::MIN_POSITIVE);
            let relative_error = (finite - analytic).abs() / denom;
            if spectrum.rank() > 0 && (finite >= 0.0 || relative_error > 1e-5) {
                pass = false;
            }
            DerivativePoint {
                nu,
                analytic,
                finite_difference: finite,
                relative_error,
            }
        })
        .collect();
    DerivativeReport { points, pass }
}

/// Tolerances used by the standard oracle suites.
pub const ALPHA_BRUTE_FORCE_REL_TOL: f64 = 1e-6;
pub const ALPHA_FORM_SPREAD_REL_TOL: f64 = 1e-8;
pub const ALPHA_DISTANCE_TOL: f64 = 1e-4;
pub const NU_ORACLE_ABS_TOL: f64 = 1e-9;
pub const NU_RESIDUAL_REL_TOL: f64 = 1e-12;

/// Standard amplitude-minimization suite: `count` seeded instances at
/// N = 4, K_P = 2, K_S = 8, each validated at `nu in {0, 0.5, 2}`.
///
/// One report per (instance, nu); `pass` requires brute-force agreement to
/// 1e-6 relative, three-form agreement to 1e-8 relative, and an estimated
/// amplitude within 1e-4 of the brute-force argmin.
pub fn run_alpha_suite(count: usize, base_seed: u64) -> Result<Vec<OracleReport>> {
    let mut reports = Vec::with_capacity(count * 3);
    for idx in 0..count {
        let seed = base_seed + idx as u64;
        let (z, s, v) = seeded_instance(4, 2, 8, seed);
        for &nu in &[0.0, 0.5, 2.0] {
            let forms = m_min_three_forms(&z, &s, &v, nu)?;
            let closed = forms[0];
            let spread = forms
                .iter()
                .map(|f| (f - closed).abs() / closed.abs())
                .fold(0.0f64, f64::max);
            let brute = min_alpha_oracle(&z, &s, &v, nu, seed ^ 0x5eed)?;
            let gap = (brute.value - closed).abs() / closed.abs();

            let alphas = alpha_hat(&z, &s, &v)?;
            let distance = alphas
                .iter()
                .zip(&brute.alphas)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();

            let pass = gap <= ALPHA_BRUTE_FORCE_REL_TOL
                && spread <= ALPHA_FORM_SPREAD_REL_TOL
                && distance <= ALPHA_DISTANCE_TOL;
            reports.push(OracleReport {
                instance_seed: seed,
                closed_form_value: closed,
                brute_force_value: brute.value,
                gap,
                pass,
            });
        }
    }
    Ok(reports)
}

/// Random eigenvalue spectrum for the nu suite: rank 1..=4, eigenvalues in
/// (0, 50], and an m_eff that exercises both branches.
pub fn seeded_spectrum(seed: u64) -> (EigenSpectrum, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = rng.gen_range(1..=4usize);
    let values: Vec<f64> = (0..rank)
        .map(|_| rng.gen_range(1e-3..=50.0f64))
        .collect();
    let spectrum = EigenSpectrum::from_raw(values, 0.0).expect("positive eigenvalues");
    let m_eff = rng.gen_range(0.2..=2.5);
    (spectrum, m_eff)
}

/// Standard nu-minimization suite: `count` seeded spectra; each report's
/// `pass` requires the closed-form branch value to beat the grid oracle
/// within 1e-9, the interior-branch root residual to stay below
/// 1e-12 * m_eff, and the derivative audit to succeed.
pub fn run_nu_suite(count: usize, base_seed: u64) -> Result<Vec<OracleReport>> {
    let mut reports = Vec::with_capacity(count);
    for idx in 0..count {
        let seed = base_seed + idx as u64;
        let (spectrum, m_eff) = seeded_spectrum(seed);
        let est = nu_hat(&spectrum, m_eff)?;
        let closed = f_nu(&spectrum, m_eff, est.value);
        let (_, grid_min) = min_nu_oracle(&spectrum, m_eff);
        let gap = closed - grid_min;

        let residual_ok = match est.branch {
            NuBranch::BoundaryZero => est.residual == 0.0,
            NuBranch::InteriorRoot => est.residual <= NU_RESIDUAL_REL_TOL * m_eff,
        };
        let derivative = derivative_check_g(&spectrum, &[0.0, 0.5, 1.0, 5.0, 20.0, 80.0]);
        let pass = gap <= NU_ORACLE_ABS_TOL * (1.0 + grid_min.abs()) && residual_ok && derivative.pass;
        reports.push(OracleReport {
            instance_seed: seed,
            closed_form_value: closed,
            brute_force_value: grid_min,
            gap,
            pass,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dense_det_identity_and_diag() {
        assert_relative_eq!(dense_det(&CMatrix::identity(4, 4)).re, 1.0);
        let d = HermitianMatrix::from_real_diagonal(&[2.0, 3.0, 4.0]);
        assert_relative_eq!(dense_det(d.as_matrix()).re, 24.0, max_relative = 1e-14);
    }

    #[test]
    fn dense_det_matches_library() {
        for seed in 0..10u64 {
            let (_, s, _) = seeded_instance(5, 1, 7, seed);
            let ours = dense_det(s.as_matrix());
            let lib = s.as_matrix().determinant();
            assert_relative_eq!(ours.re, lib.re, max_relative = 1e-11);
            assert!(ours.im.abs() <= 1e-10 * ours.re.abs());
        }
    }

    #[test]
    fn dense_det_singular_is_zero() {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = C64::new(1.0, 0.0);
        assert_eq!(dense_det(&m), C64::new(0.0, 0.0));
    }

    #[test]
    fn alpha_oracle_exact_cancellation() {
        // All columns proportional to v with S = I: the minimum is det(S)=1
        // at alpha_k = c.
        let v = CVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.5, -0.5),
        ]);
        let c_amp = C64::new(2.0, -1.0);
        let z = CMatrix::from_columns(&[v.scale(1.0) * c_amp, v.scale(1.0) * c_amp]);
        let s = HermitianMatrix::identity(3);
        let min = min_alpha_oracle(&z, &s, &v, 0.0, 42).unwrap();
        assert_relative_eq!(min.value, 1.0, max_relative = 1e-8);
        for a in &min.alphas {
            assert!((a - c_amp).norm() <= 1e-4, "argmin should recover c");
        }
    }

    #[test]
    fn alpha_oracle_refuses_large_instances() {
        let (z, s, v) = seeded_instance(8, 2, 10, 1);
        assert!(min_alpha_oracle(&z, &s, &v, 0.0, 1).is_err());
    }

    #[test]
    fn three_forms_agree_and_bound_brute_force() {
        for seed in 0..10u64 {
            let (z, s, v) = seeded_instance(4, 2, 8, 7_000 + seed);
            for &nu in &[0.0, 0.5, 2.0] {
                let forms = m_min_three_forms(&z, &s, &v, nu).unwrap();
                for f in &forms[1..] {
                    assert_relative_eq!(*f, forms[0], max_relative = 1e-8);
                }
                let brute = min_alpha_oracle(&z, &s, &v, nu, seed).unwrap();
                let rel = (brute.value - forms[0]).abs() / forms[0];
                assert!(rel <= 1e-6, "seed {seed} nu {nu}: rel gap {rel:.3e}");
            }
        }
    }

    #[test]
    fn alpha_local_optimality() {
        // 100 random perturbations around the closed-form argmin never win.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..5u64 {
            let (z, s, v) = seeded_instance(4, 2, 8, 3_000 + seed);
            let nu = 0.5;
            let alphas = alpha_hat(&z, &s, &v).unwrap();
            let mut x = Vec::new();
            for a in &alphas {
                x.push(a.re);
                x.push(a.im);
            }
            let f_hat = alpha_objective(&z, &s, &v, nu, &x);
            for _ in 0..100 {
                let y: Vec<f64> = x
                    .iter()
                    .map(|&c| c + rng.gen_range(-0.3..0.3))
                    .collect();
                assert!(alpha_objective(&z, &s, &v, nu, &y) >= f_hat - 1e-12 * f_hat.abs());
            }
        }
    }

    #[test]
    fn nu_oracle_single_eigenvalue() {
        let spectrum = EigenSpectrum::from_raw(vec![9.0], 0.0).unwrap();
        let (argmin, _) = min_nu_oracle(&spectrum, 0.5);
        assert!((argmin - 8.0).abs() <= 2e-3, "argmin = {argmin}");
    }

    #[test]
    fn nu_oracle_boundary_branch() {
        let spectrum = EigenSpectrum::from_raw(vec![1.0], 0.0).unwrap();
        let (argmin, value) = min_nu_oracle(&spectrum, 1.5);
        assert!(argmin <= 1e-3);
        assert_relative_eq!(value, f_nu(&spectrum, 1.5, 0.0), max_relative = 1e-9);
    }

    #[test]
    fn f_increases_past_the_root() {
        let spectrum = EigenSpectrum::from_raw(vec![9.0], 0.0).unwrap();
        let est = nu_hat(&spectrum, 0.5).unwrap();
        let at_root = f_nu(&spectrum, 0.5, est.value);
        assert!(f_nu(&spectrum, 0.5, est.value + 1.0) > at_root);
        // Sign of the slope just past the root, by finite differences.
        let h = 1e-5;
        let slope = (f_nu(&spectrum, 0.5, est.value + h) - f_nu(&spectrum, 0.5, est.value - h))
            / (2.0 * h);
        assert!(slope.abs() <= 1e-4 * at_root, "stationary at the root");
    }

    #[test]
    fn derivative_check_known_values() {
        let one = EigenSpectrum::from_raw(vec![1.0], 0.0).unwrap();
        let report = derivative_check_g(&one, &[0.0]);
        assert!(report.pass);
        assert_relative_eq!(report.points[0].analytic, -0.25, max_relative = 1e-12);

        // lambda = {3, 1} at nu = 0: -(3/16 + 1/4); the finite difference
        // in the report independently confirms the same slope.
        let two = EigenSpectrum::from_raw(vec![3.0, 1.0], 0.0).unwrap();
        let report = derivative_check_g(&two, &[0.0]);
        assert!(report.pass);
        assert_relative_eq!(
            report.points[0].analytic,
            -(3.0 / 16.0 + 1.0 / 4.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn g_monotone_endpoints() {
        for seed in 0..20u64 {
            let (spectrum, _) = seeded_spectrum(seed);
            assert!(spectrum.g(100.0) < spectrum.g(0.0));
        }
    }

    #[test]
    fn small_suites_pass() {
        for r in run_alpha_suite(5, 11_000).unwrap() {
            assert!(r.pass, "alpha report failed: {r:?}");
        }
        for r in run_nu_suite(20, 12_000).unwrap() {
            assert!(r.pass, "nu report failed: {r:?}");
        }
    }
}
