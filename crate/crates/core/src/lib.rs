//! Robust GLRT-based detection of range-spread radar targets in Gaussian
//! noise with unknown covariance.
//!
//! The library is organized around the lifecycle of a detection experiment:
//!
//! - [`matrix`] — complex Hermitian linear-algebra primitives (whitening,
//!   projectors, PSD eigenvalues, log-determinants) shared by everything else.
//! - [`detectors`] — the five decision statistics (robust GLRT, parametric
//!   detector, GLRT-H, GAMF, GASD) together with the closed-form amplitude
//!   and signal-power estimators they require.
//! - [`scenario`] — construction of the simulated radar world: clutter
//!   covariance, steering vectors, mismatch angle, SNR-controlled amplitudes,
//!   and reproducible synthetic datasets.
//! - [`montecarlo`] — threshold calibration at a fixed false-alarm rate,
//!   detection-probability curves, and empirical CFAR verification.
//! - [`oracle`] — independent brute-force verifiers (dense determinants,
//!   grids, finite differences) for the closed-form results.

pub mod detectors;
pub mod error;
pub mod matrix;
pub mod montecarlo;
pub mod oracle;
pub mod scenario;

pub use error::{Error, Result};

/// Complex scalar used throughout: double-precision with circular conventions.
pub type C64 = nalgebra::Complex<f64>;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dynamically sized complex column vector.
pub type CVector = nalgebra::DVector<C64>;
