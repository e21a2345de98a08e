//! Spectral toolkit for the rotating Navier-Stokes-alpha equations on an
//! anisotropic periodic box `[0,2*pi*a1] x [0,2*pi*a2] x [0,2*pi*a3]`, `a1 = 1`.
//!
//! The building blocks are organized bottom-up:
//!
//! * [`lattice`] - wavenumber geometry, per-mode operator matrices, dispersion
//! * [`field`] - truncated divergence-free spectral fields and norms
//! * [`nonlinear`] - bilinear operators (direct convolution and dealiased FFT paths)
//! * [`poincare`] - the rotation propagator, oscillating and resonant bilinears
//! * [`resonance`] - triad enumeration and classification, small-divisor statistics
//! * [`integrate`] - exponential integrating-factor RK4 stepping and experiments
//! * [`bounds`] - attractor-dimension bound formulas and lattice constants
//! * [`snapshot`] - binary state snapshots and CSV table writers
//!
//! All randomness is seeded (ChaCha), all parallel regions are per-output maps
//! or ordered reductions, so every result is bit-identical across thread counts.

pub mod bounds;
pub mod field;
pub mod integrate;
pub mod lattice;
pub mod nonlinear;
pub mod poincare;
pub mod resonance;
pub mod snapshot;
pub mod tolerances;

mod dd;
mod fft;
mod sums;

pub use field::SpectralField;
pub use lattice::{DomainParams, Mode, ModeMatrix, WaveVector};

/// Complex scalar used for all spectral coefficients.
pub type Complex64 = num_complex::Complex<f64>;

/// A coefficient vector attached to one lattice mode.
pub type Coeff = [Complex64; 3];

pub(crate) const ZERO_COEFF: Coeff = [
    Complex64 { re: 0.0, im: 0.0 },
    Complex64 { re: 0.0, im: 0.0 },
    Complex64 { re: 0.0, im: 0.0 },
];
