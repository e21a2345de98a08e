//! The rotation propagator group and the oscillatory/resonant splitting of
//! the filtered bilinear term.
//!
//! In the rotating frame the linear Coriolis part is removed by conjugating
//! with the propagator `E(t)`, which acts mode-wise as a rotation of the
//! coefficient plane perpendicular to the wavevector, at angular rate
//! `Omega * omega_alpha(n)`. The conjugated nonlinearity splits into a
//! time-independent resonant part, supported on the triads whose phase
//! combination cancels, and an oscillatory remainder whose time average
//! decays like `1/Omega`. This module provides the group, the conjugated
//! bilinear term, the resonant collapse in the helical eigenbasis, and a
//! quadrature experiment measuring the decay of the remainder.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::field::{FieldError, SpectralField};
use crate::lattice::{cross_matrix, LatticeError, ModeMatrix, ModeMatrixKind, WaveVector};
use crate::nonlinear::{cross_complex, cross_real_complex, mul_i, BilinearWorkspace, ConvolutionPath};
use crate::resonance::{divisor_combos, sign_combo, ResonanceError, ResonantTriadSet};
use crate::tolerances::RESONANCE_TOL;
use crate::{Coeff, ZERO_COEFF};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PoincareError {
    #[error("rotation rate {0} must be finite and nonnegative")]
    BadRotationRate(f64),
    #[error("group parameter t = {0} must be finite")]
    BadTime(f64),
    #[error("rotation rates must be finite, nonnegative and strictly increasing")]
    UnorderedRates,
    #[error("averaging horizon T = {0} must be finite and positive")]
    BadHorizon(f64),
    #[error("triad set does not match this field: {0}")]
    StaleTriadSet(&'static str),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Resonance(#[from] ResonanceError),
}

/// Rotation rate, filter parameter and group parameter of one propagator
/// evaluation `E(Omega t)`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PropagatorParams {
    pub omega_big: f64,
    pub alpha: f64,
    pub t: f64,
}

impl PropagatorParams {
    pub fn new(omega_big: f64, alpha: f64, t: f64) -> Result<Self, PoincareError> {
        let p = PropagatorParams {
            omega_big,
            alpha,
            t,
        };
        p.check()?;
        Ok(p)
    }

    /// Same rotation rate and filter, reversed group parameter.
    pub fn reversed(self) -> Self {
        PropagatorParams {
            omega_big: self.omega_big,
            alpha: self.alpha,
            t: -self.t,
        }
    }

    fn check(&self) -> Result<(), PoincareError> {
        if !self.omega_big.is_finite() || self.omega_big < 0.0 {
            return Err(PoincareError::BadRotationRate(self.omega_big));
        }
        if !self.t.is_finite() {
            return Err(PoincareError::BadTime(self.t));
        }
        crate::lattice::check_alpha(self.alpha)?;
        Ok(())
    }
}

/// Per-mode propagator block
/// `cos(Omega w t) I + (sin(Omega w t) / |n_check|) R_n`
/// with `w` the dispersion frequency of the mode. On the plane perpendicular
/// to the wavevector this is a rotation, so the block is unitary there; the
/// normal direction never carries coefficient mass on a divergence-free
/// field.
pub fn propagator_mode(
    n: &WaveVector,
    params: &PropagatorParams,
) -> Result<ModeMatrix, PoincareError> {
    params.check()?;
    if n.n.is_zero() {
        return Err(PoincareError::Lattice(LatticeError::ZeroMode));
    }
    let omega = n.check[2] / ((1.0 + params.alpha * params.alpha * n.norm_sq) * n.norm);
    let angle = params.omega_big * omega * params.t;
    let m = Matrix3::identity() * angle.cos() + cross_matrix(n.check) * (angle.sin() / n.norm);
    Ok(ModeMatrix::from_parts(ModeMatrixKind::Propagator, m))
}

/// Apply `E(Omega t)` mode by mode. Preserves the lattice, divergence and
/// reality invariants and the L2 norm.
pub fn apply_propagator(
    v: &SpectralField,
    params: &PropagatorParams,
) -> Result<SpectralField, PoincareError> {
    params.check()?;
    let mut out = v.clone();
    let coeffs = out.coeffs_mut();
    for idx in 0..coeffs.len() {
        let n = v.mode_at(idx);
        if n.is_zero() {
            continue;
        }
        let w = v.domain().wavevector(n);
        let block = propagator_mode(&w, params)?;
        coeffs[idx] = block.apply(coeffs[idx]);
    }
    Ok(out)
}

/// The conjugated nonlinearity of the transformed equation:
/// `E(Omega t) . ( -B_alpha( E(-Omega t) V, E(-Omega t) V ) )`.
pub fn oscillating_bilinear(
    ws: &mut BilinearWorkspace,
    v: &SpectralField,
    params: &PropagatorParams,
    path: ConvolutionPath,
) -> Result<SpectralField, PoincareError> {
    params.check()?;
    let unwound = apply_propagator(v, &params.reversed())?;
    let mut b = ws.bilinear_alpha(&unwound, &unwound, params.alpha, path)?;
    b.scale(-1.0);
    apply_propagator(&b, params)
}

/// The resonant part of the conjugated nonlinearity: the convolution
/// restricted to enumerated triads, with each mode decomposed into the
/// helical eigenvectors of its Coriolis block and only the sign combinations
/// whose small divisor clears the set's tolerance retained. The result is
/// time independent and equals the long-time average of
/// [`oscillating_bilinear`].
pub fn resonant_bilinear(
    v: &SpectralField,
    alpha: f64,
    triads: &ResonantTriadSet,
) -> Result<SpectralField, PoincareError> {
    crate::lattice::check_alpha(alpha)?;
    if triads.domain() != v.domain() {
        return Err(PoincareError::StaleTriadSet(
            "domain differs from the field's lattice",
        ));
    }
    if triads.alpha() != alpha {
        return Err(PoincareError::StaleTriadSet(
            "enumerated at a different filter parameter",
        ));
    }
    if triads.cutoff() < v.cutoff() {
        return Err(PoincareError::StaleTriadSet(
            "enumerated at a smaller cutoff than the field",
        ));
    }
    let domain = v.domain().clone();
    let tol = triads.tolerance();

    let side = v.side();
    let mut bases = Vec::with_capacity(side * side * side);
    let mut comps = Vec::with_capacity(side * side * side);
    for idx in 0..side * side * side {
        let n = v.mode_at(idx);
        if n.is_zero() {
            bases.push(None);
            comps.push((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
            continue;
        }
        let basis = domain.helical_basis(n)?;
        let c = v.coeffs()[idx];
        comps.push((dot_conj(&basis.plus, &c), dot_conj(&basis.minus, &c)));
        bases.push(Some(basis));
    }

    let mut out = SpectralField::zero(domain.clone(), v.cutoff())?;
    for triad in triads.triads() {
        let (ik, im, io) = match (
            v.lin(triad.k.n),
            v.lin(triad.m.n),
            v.lin(triad.n.n),
        ) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => continue,
        };
        let (ck_plus, ck_minus) = comps[ik];
        let (cm_plus, cm_minus) = comps[im];
        if coeff_mass(ck_plus, ck_minus) == 0.0 || coeff_mass(cm_plus, cm_minus) == 0.0 {
            continue;
        }
        let basis_k = bases[ik].as_ref().expect("nonzero mode");
        let basis_m = bases[im].as_ref().expect("nonzero mode");
        let basis_n = bases[io].as_ref().expect("nonzero mode");
        let r_k = domain.helmholtz_scalar(triad.k.n, alpha)?;
        let combos = divisor_combos(&domain, alpha, triad.k.n, triad.m.n, triad.n.n)?;
        let mut add = ZERO_COEFF;
        for l in 1..=8u8 {
            if combos[(l - 1) as usize].abs() > tol {
                continue;
            }
            let (sig_k, sig_m, sig_n) = sign_combo(l);
            let s_k = -sig_k;
            let s_m = -sig_m;
            let s_n = sig_n;
            let amp_k = if s_k > 0 { ck_plus } else { ck_minus };
            let amp_m = if s_m > 0 { cm_plus } else { cm_minus };
            let u = scale_coeff(basis_k.vector(s_k), amp_k);
            let w = scale_coeff(basis_m.vector(s_m), amp_m);
            let inner = cross_real_complex(triad.m.check, w);
            let term = mul_i(scale_coeff_real(&cross_complex(u, inner), r_k));
            let amp_n = dot_conj(basis_n.vector(s_n), &term);
            let h_n = basis_n.vector(s_n);
            for j in 0..3 {
                add[j] += amp_n * h_n[j];
            }
        }
        let idx = io;
        let coeffs = out.coeffs_mut();
        for j in 0..3 {
            coeffs[idx][j] += add[j];
        }
    }
    Ok(out)
}

/// One row of the fast-averaging decay table.
#[derive(Copy, Clone, Debug)]
pub struct DecayRow {
    pub omega_big: f64,
    pub t_end: f64,
    pub panels: u32,
    pub residual: f64,
}

/// Time-average the oscillatory remainder
/// `oscillating_bilinear(t) - resonant_bilinear` over `[0, T]` for each
/// rotation rate and report the L2 norm of the mean. The quadrature is
/// composite Gauss-Legendre with the panel count scaled so the fastest phase
/// present gets at least eight nodes per oscillation period. Rates must be
/// strictly increasing; the residual norms decay like `1/Omega`.
pub fn fast_average_experiment(
    ws: &mut BilinearWorkspace,
    v: &SpectralField,
    alpha: f64,
    omegas: &[f64],
    t_end: f64,
    path: ConvolutionPath,
) -> Result<Vec<DecayRow>, PoincareError> {
    crate::lattice::check_alpha(alpha)?;
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(PoincareError::BadHorizon(t_end));
    }
    for pair in omegas.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(PoincareError::UnorderedRates);
        }
    }
    if let Some(&first) = omegas.first() {
        if !first.is_finite() || first < 0.0 {
            return Err(PoincareError::BadRotationRate(first));
        }
    }
    if let Some(&last) = omegas.last() {
        if !last.is_finite() {
            return Err(PoincareError::BadRotationRate(last));
        }
    }

    let triads = crate::resonance::enumerate_resonances(
        v.domain(),
        alpha,
        v.cutoff(),
        RESONANCE_TOL,
        false,
    )?;
    let resonant = resonant_bilinear(v, alpha, &triads)?;
    let omega_max = max_dispersion(v, alpha);

    let mut rows = Vec::with_capacity(omegas.len());
    for &omega_big in omegas {
        let phase_rate = omega_big * 3.0 * omega_max;
        let panels = (phase_rate * t_end / std::f64::consts::TAU).ceil().max(1.0) as u32;
        let mut mean = SpectralField::zero(v.domain().clone(), v.cutoff())?;
        let width = t_end / panels as f64;
        for panel in 0..panels {
            let a = panel as f64 * width;
            for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
                let t = a + 0.5 * width * (1.0 + node);
                let params = PropagatorParams::new(omega_big, alpha, t)?;
                let osc = oscillating_bilinear(ws, v, &params, path)?;
                mean.axpy(weight * 0.5 * width / t_end, &osc)?;
            }
        }
        mean.axpy(-1.0, &resonant)?;
        rows.push(DecayRow {
            omega_big,
            t_end,
            panels,
            residual: mean.norm_l2(),
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log residual` against `log Omega` over the rows
/// with positive rate and residual. `None` with fewer than two usable rows.
pub fn fitted_slope(rows: &[DecayRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.omega_big > 0.0 && r.residual > 0.0)
        .map(|r| (r.omega_big.ln(), r.residual.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Largest dispersion frequency over the nonzero modes of the field's cube.
fn max_dispersion(v: &SpectralField, alpha: f64) -> f64 {
    let side = v.side();
    let mut best: f64 = 0.0;
    for idx in 0..side * side * side {
        let n = v.mode_at(idx);
        if n.is_zero() {
            continue;
        }
        let w = v.domain().wavevector(n);
        let omega = w.check[2] / ((1.0 + alpha * alpha * w.norm_sq) * w.norm);
        best = best.max(omega.abs());
    }
    best
}

fn dot_conj(a: &Coeff, b: &Coeff) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2]
}

fn scale_coeff(v: &Coeff, c: Complex64) -> Coeff {
    [v[0] * c, v[1] * c, v[2] * c]
}

fn scale_coeff_real(v: &Coeff, c: f64) -> Coeff {
    [v[0] * c, v[1] * c, v[2] * c]
}

fn coeff_mass(a: Complex64, b: Complex64) -> f64 {
    a.norm_sqr() + b.norm_sqr()
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];

const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];
