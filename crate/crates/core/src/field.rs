//! Truncated divergence-free spectral vector fields.
//!
//! Coefficients live on the full symmetric cube `max_j |n_j| <= cutoff` in a
//! dense lexicographic layout, with the reality constraint
//! `v_{-n} = conj(v_n)` enforced on every write and the zero mode pinned to
//! zero. Inner products are plain coefficient sums (no volume factor); the
//! physical-space transform carries the volume normalization instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::LatticeError;
use crate::sums::CompensatedSum;
use crate::tolerances::{DIVERGENCE_REL, REALITY_REL};
use crate::{Coeff, Complex64, DomainParams, Mode, ZERO_COEFF};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("fields live on different lattices (domain or cutoff mismatch)")]
    LatticeMismatch,
    #[error("cutoff must be a positive integer, got {0}")]
    BadCutoff(u32),
    #[error("mode {n} lies outside the cube of cutoff {cutoff}")]
    ModeOutsideLattice { n: Mode, cutoff: u32 },
    #[error("mode {n} listed twice")]
    DuplicateMode { n: Mode },
    #[error("reality residual {residual:.3e} exceeds {bound:.3e}")]
    RealityViolation { residual: f64, bound: f64 },
    #[error("divergence residual {residual:.3e} exceeds {bound:.3e}")]
    NotDivergenceFree { residual: f64, bound: f64 },
    #[error("coefficient at mode {n} is not finite")]
    NonFinite { n: Mode },
    #[error("spectrum profile assigns energy to shell {shell} which holds no lattice modes")]
    EmptyShell { shell: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Norms of one field; `alpha_energy` is half the filtered energy,
/// `(1/2) <v, R_alpha v> = (1/2) sum_n r_n |v_n|^2`.
#[derive(Clone, Copy, Debug)]
pub struct FieldNormReport {
    pub l2: f64,
    pub h1: f64,
    pub hs: f64,
    pub s: f64,
    pub alpha: f64,
    pub alpha_energy: f64,
}

/// Target energy per radial shell: entry `j` is the requested value of
/// `sum |v_n|^2` over modes with `j <= |n_check| < j+1`.
#[derive(Clone, Debug)]
pub struct SpectrumProfile {
    pub shell_energy: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SpectralField {
    domain: DomainParams,
    cutoff: u32,
    data: Vec<Coeff>,
}

impl SpectralField {
    pub fn zero(domain: DomainParams, cutoff: u32) -> Result<Self, FieldError> {
        if cutoff == 0 {
            return Err(FieldError::BadCutoff(cutoff));
        }
        let side = (2 * cutoff + 1) as usize;
        Ok(SpectralField {
            domain,
            cutoff,
            data: vec![ZERO_COEFF; side * side * side],
        })
    }

    /// Build a field from explicit coefficients. Each listed mode is
    /// symmetrized with its mirror (so listing only one of `n, -n` is enough),
    /// the zero mode is forced to zero, and the result is projected
    /// divergence-free.
    pub fn from_modes(
        domain: DomainParams,
        cutoff: u32,
        entries: &[(Mode, Coeff)],
    ) -> Result<Self, FieldError> {
        let mut raw = Self::zero(domain, cutoff)?;
        let mut seen = vec![false; raw.data.len()];
        for &(n, v) in entries {
            if n.is_zero() {
                continue;
            }
            let idx = raw
                .lin(n)
                .ok_or(FieldError::ModeOutsideLattice { n, cutoff })?;
            if seen[idx] {
                return Err(FieldError::DuplicateMode { n });
            }
            seen[idx] = true;
            raw.data[idx] = v;
        }
        let mut out = raw.clone();
        for idx in 0..raw.data.len() {
            let n = raw.mode_at(idx);
            let midx = raw.lin(-n).expect("mirror stays in cube");
            let given = seen[idx];
            let mirror_given = seen[midx];
            out.data[idx] = match (given, mirror_given) {
                (true, true) => avg_with_conj(raw.data[idx], raw.data[midx]),
                (true, false) => raw.data[idx],
                (false, true) => conj3(raw.data[midx]),
                (false, false) => ZERO_COEFF,
            };
        }
        let mut projected = out.project_divergence_free();
        projected.set_mode_raw(Mode::new(0, 0, 0), ZERO_COEFF);
        projected.validate()?;
        Ok(projected)
    }

    /// Reproducible random divergence-free field with the requested energy in
    /// each radial shell.
    pub fn random(
        domain: DomainParams,
        cutoff: u32,
        seed: u64,
        profile: &SpectrumProfile,
    ) -> Result<Self, FieldError> {
        let mut f = Self::zero(domain, cutoff)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cutoff as i32;
        for n1 in -c..=c {
            for n2 in -c..=c {
                for n3 in -c..=c {
                    let n = Mode::new(n1, n2, n3);
                    // Walk only the lexicographically positive half so each
                    // mirror pair is drawn once.
                    if n.0 <= [0, 0, 0] {
                        continue;
                    }
                    let mut v = ZERO_COEFF;
                    for slot in &mut v {
                        *slot = Complex64::new(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        );
                    }
                    let p = f.domain.leray_projector(n).expect("nonzero mode");
                    f.set_pair_raw(n, p.apply(v));
                }
            }
        }
        // Rescale every shell to its exact target.
        let n_shells = profile.shell_energy.len();
        let mut current = vec![CompensatedSum::new(); n_shells];
        for idx in 0..f.data.len() {
            let n = f.mode_at(idx);
            if n.is_zero() {
                continue;
            }
            let shell = f.domain.norm_sq(n).sqrt().floor() as usize;
            if shell < n_shells {
                current[shell].add(coeff_norm_sq(&f.data[idx]));
            } else {
                f.data[idx] = ZERO_COEFF;
            }
        }
        let mut factor = vec![0.0f64; n_shells];
        for (shell, acc) in current.iter().enumerate() {
            let have = acc.value();
            let want = profile.shell_energy[shell];
            if want > 0.0 && have == 0.0 {
                return Err(FieldError::EmptyShell { shell });
            }
            factor[shell] = if have > 0.0 { (want / have).sqrt() } else { 0.0 };
        }
        for idx in 0..f.data.len() {
            let n = f.mode_at(idx);
            if n.is_zero() {
                continue;
            }
            let shell = f.domain.norm_sq(n).sqrt().floor() as usize;
            if shell < n_shells {
                let s = factor[shell];
                for slot in &mut f.data[idx] {
                    *slot *= s;
                }
            }
        }
        f.validate()?;
        Ok(f)
    }

    pub fn domain(&self) -> &DomainParams {
        &self.domain
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn side(&self) -> usize {
        (2 * self.cutoff + 1) as usize
    }

    pub fn coeffs(&self) -> &[Coeff] {
        &self.data
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Coeff] {
        &mut self.data
    }

    /// Linear index of a mode, or `None` outside the cube.
    pub fn lin(&self, n: Mode) -> Option<usize> {
        let c = self.cutoff as i32;
        if n.0.iter().any(|&x| x < -c || x > c) {
            return None;
        }
        let side = self.side();
        let i = (n.0[0] + c) as usize;
        let j = (n.0[1] + c) as usize;
        let k = (n.0[2] + c) as usize;
        Some((i * side + j) * side + k)
    }

    /// Mode sitting at a linear index.
    pub fn mode_at(&self, idx: usize) -> Mode {
        let side = self.side();
        let c = self.cutoff as i32;
        let k = (idx % side) as i32 - c;
        let j = ((idx / side) % side) as i32 - c;
        let i = (idx / (side * side)) as i32 - c;
        Mode::new(i, j, k)
    }

    /// Coefficient at a mode; zero outside the cube.
    pub fn get(&self, n: Mode) -> Coeff {
        match self.lin(n) {
            Some(idx) => self.data[idx],
            None => ZERO_COEFF,
        }
    }

    pub(crate) fn set_mode_raw(&mut self, n: Mode, v: Coeff) {
        let idx = self.lin(n).expect("mode inside cube");
        self.data[idx] = v;
    }

    /// Write `v` at `n` and its conjugate at `-n`.
    pub(crate) fn set_pair_raw(&mut self, n: Mode, v: Coeff) {
        self.set_mode_raw(n, v);
        self.set_mode_raw(-n, conj3(v));
    }

    pub fn same_lattice(&self, other: &Self) -> bool {
        self.cutoff == other.cutoff && self.domain == other.domain
    }

    /// Apply the Leray projector mode by mode; the zero mode is forced to zero.
    pub fn project_divergence_free(&self) -> Self {
        let mut out = self.clone();
        for idx in 0..out.data.len() {
            let n = out.mode_at(idx);
            if n.is_zero() {
                out.data[idx] = ZERO_COEFF;
                continue;
            }
            let p = self.domain.leray_projector(n).expect("nonzero mode");
            out.data[idx] = p.apply(self.data[idx]);
        }
        out
    }

    /// Modes with `n3 = 0` (the vertical average); everything else zeroed.
    pub fn barotropic_part(&self) -> Self {
        let mut out = Self::zero(self.domain.clone(), self.cutoff).expect("valid cutoff");
        for idx in 0..self.data.len() {
            if self.mode_at(idx).is_horizontal() {
                out.data[idx] = self.data[idx];
            }
        }
        out
    }

    /// Modes with `n3 != 0`; exact complement of [`Self::barotropic_part`].
    pub fn baroclinic_part(&self) -> Self {
        let mut out = Self::zero(self.domain.clone(), self.cutoff).expect("valid cutoff");
        for idx in 0..self.data.len() {
            if !self.mode_at(idx).is_horizontal() {
                out.data[idx] = self.data[idx];
            }
        }
        out
    }

    /// Apply the inverse Helmholtz filter, `v_n -> r_n v_n`.
    pub fn filtered(&self, alpha: f64) -> Result<Self, FieldError> {
        let mut out = self.clone();
        for idx in 0..out.data.len() {
            let n = out.mode_at(idx);
            let r = self.domain.helmholtz_scalar(n, alpha)?;
            for slot in &mut out.data[idx] {
                *slot *= r;
            }
        }
        Ok(out)
    }

    /// Weighted inner product `sum_n |n_check|^{2s} Re(u_n . conj(v_n))`.
    /// `s = 0` is the plain pairing, `s = 1` the gradient pairing.
    pub fn inner_product(&self, other: &Self, s: f64) -> Result<f64, FieldError> {
        if !self.same_lattice(other) {
            return Err(FieldError::LatticeMismatch);
        }
        let mut acc = CompensatedSum::new();
        for idx in 0..self.data.len() {
            let n = self.mode_at(idx);
            if n.is_zero() {
                continue;
            }
            let w = sobolev_weight(self.domain.norm_sq(n), s);
            let u = &self.data[idx];
            let v = &other.data[idx];
            let mut re = 0.0;
            for j in 0..3 {
                re += u[j].re * v[j].re + u[j].im * v[j].im;
            }
            acc.add(w * re);
        }
        Ok(acc.value())
    }

    /// `|v|^2 = sum |v_n|^2`.
    pub fn energy(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for v in &self.data {
            acc.add(coeff_norm_sq(v));
        }
        acc.value()
    }

    pub fn norm_l2(&self) -> f64 {
        self.energy().sqrt()
    }

    /// `sum_n |n_check|^{2s} |v_n|^2`, the squared Sobolev norm.
    pub fn energy_hs(&self, s: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for idx in 0..self.data.len() {
            let n = self.mode_at(idx);
            if n.is_zero() {
                continue;
            }
            acc.add(sobolev_weight(self.domain.norm_sq(n), s) * coeff_norm_sq(&self.data[idx]));
        }
        acc.value()
    }

    /// Filtered energy `<v, R_alpha v> = sum_n r_n |v_n|^2`.
    pub fn filtered_energy(&self, alpha: f64) -> Result<f64, FieldError> {
        let mut acc = CompensatedSum::new();
        for idx in 0..self.data.len() {
            let n = self.mode_at(idx);
            let r = self.domain.helmholtz_scalar(n, alpha)?;
            acc.add(r * coeff_norm_sq(&self.data[idx]));
        }
        Ok(acc.value())
    }

    pub fn norms(&self, s: f64, alpha: f64) -> Result<FieldNormReport, FieldError> {
        Ok(FieldNormReport {
            l2: self.norm_l2(),
            h1: self.energy_hs(1.0).sqrt(),
            hs: self.energy_hs(s).sqrt(),
            s,
            alpha,
            alpha_energy: 0.5 * self.filtered_energy(alpha)?,
        })
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for v in &self.data {
            for c in v {
                m = m.max(c.norm_sqr());
            }
        }
        m.sqrt()
    }

    /// Largest relative divergence `|n_check . v_n| / (|n_check| |v_n|)`.
    pub fn divergence_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.data.len() {
            let n = self.mode_at(idx);
            if n.is_zero() {
                continue;
            }
            let v = &self.data[idx];
            let vnorm = coeff_norm_sq(v).sqrt();
            if vnorm == 0.0 {
                continue;
            }
            let w = self.domain.wavevector(n);
            let mut dot = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                dot += v[j] * w.check[j];
            }
            worst = worst.max(dot.norm() / (w.norm * vnorm));
        }
        worst
    }

    /// Largest absolute mismatch `|v_n - conj(v_{-n})|`.
    pub fn reality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.data.len() {
            let n = self.mode_at(idx);
            let mirror = self.get(-n);
            let v = &self.data[idx];
            for j in 0..3 {
                worst = worst.max((v[j] - mirror[j].conj()).norm());
            }
        }
        worst
    }

    /// Check every stored-field invariant: finite coefficients, zero mean,
    /// conjugate symmetry, incompressibility.
    pub fn validate(&self) -> Result<(), FieldError> {
        for idx in 0..self.data.len() {
            for c in &self.data[idx] {
                if !c.re.is_finite() || !c.im.is_finite() {
                    return Err(FieldError::NonFinite {
                        n: self.mode_at(idx),
                    });
                }
            }
        }
        let scale = self.max_abs();
        let zero = self.get(Mode::new(0, 0, 0));
        let zero_mag = coeff_norm_sq(&zero).sqrt();
        if zero_mag > REALITY_REL * scale {
            return Err(FieldError::RealityViolation {
                residual: zero_mag,
                bound: REALITY_REL * scale,
            });
        }
        let reality = self.reality_residual();
        if reality > REALITY_REL * scale {
            return Err(FieldError::RealityViolation {
                residual: reality,
                bound: REALITY_REL * scale,
            });
        }
        let div = self.divergence_residual();
        if div > DIVERGENCE_REL {
            return Err(FieldError::NotDivergenceFree {
                residual: div,
                bound: DIVERGENCE_REL,
            });
        }
        Ok(())
    }

    /// `self += c * x`.
    pub fn axpy(&mut self, c: f64, x: &Self) -> Result<(), FieldError> {
        if !self.same_lattice(x) {
            return Err(FieldError::LatticeMismatch);
        }
        for (dst, src) in self.data.iter_mut().zip(x.data.iter()) {
            for j in 0..3 {
                dst[j] += c * src[j];
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            for slot in v {
                *slot *= c;
            }
        }
    }

    pub fn l2_distance(&self, other: &Self) -> Result<f64, FieldError> {
        if !self.same_lattice(other) {
            return Err(FieldError::LatticeMismatch);
        }
        let mut acc = CompensatedSum::new();
        for (u, v) in self.data.iter().zip(other.data.iter()) {
            for j in 0..3 {
                acc.add((u[j] - v[j]).norm_sqr());
            }
        }
        Ok(acc.value().sqrt())
    }

    /// Iterate `(mode, coefficient)` over the whole cube in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Mode, &Coeff)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(move |(idx, v)| (self.mode_at(idx), v))
    }

    /// Evaluate the truncated series at a physical point
    /// `v(x) = sum_n v_n exp(i n_check . x)`; real by conjugate symmetry.
    pub fn eval_physical(&self, x: [f64; 3]) -> [f64; 3] {
        let mut out = [CompensatedSum::new(); 3];
        for idx in 0..self.data.len() {
            let n = self.mode_at(idx);
            let check = self.domain.check(n);
            let phase = check[0] * x[0] + check[1] * x[1] + check[2] * x[2];
            let e = Complex64::new(phase.cos(), phase.sin());
            for j in 0..3 {
                out[j].add((self.data[idx][j] * e).re);
            }
        }
        [out[0].value(), out[1].value(), out[2].value()]
    }
}

fn sobolev_weight(norm_sq: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if s == 1.0 {
        norm_sq
    } else {
        norm_sq.powf(s)
    }
}

pub(crate) fn coeff_norm_sq(v: &Coeff) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
}

pub(crate) fn conj3(v: Coeff) -> Coeff {
    [v[0].conj(), v[1].conj(), v[2].conj()]
}

fn avg_with_conj(a: Coeff, mirror: Coeff) -> Coeff {
    let mut out = ZERO_COEFF;
    for j in 0..3 {
        out[j] = 0.5 * (a[j] + mirror[j].conj());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_domain() -> DomainParams {
        DomainParams::new(1.3, 0.7).unwrap()
    }

    fn sample_profile() -> SpectrumProfile {
        SpectrumProfile {
            shell_energy: vec![0.0, 1.0, 0.5],
        }
    }

    #[test]
    fn random_field_is_reproducible_and_valid() {
        let d = sample_domain();
        let a = SpectralField::random(d.clone(), 3, 42, &sample_profile()).unwrap();
        let b = SpectralField::random(d, 3, 42, &sample_profile()).unwrap();
        for (x, y) in a.coeffs().iter().zip(b.coeffs().iter()) {
            assert_eq!(x, y);
        }
        a.validate().unwrap();
        assert!(a.divergence_residual() <= 1e-13);
    }

    #[test]
    fn random_field_hits_requested_shell_energy() {
        let d = DomainParams::unit();
        let profile = SpectrumProfile {
            shell_energy: vec![0.0, 2.0, 0.25],
        };
        let f = SpectralField::random(d.clone(), 3, 7, &profile).unwrap();
        let mut shells = vec![0.0f64; 3];
        for (n, v) in f.iter() {
            if n.is_zero() {
                continue;
            }
            let shell = d.norm_sq(n).sqrt().floor() as usize;
            if shell < 3 {
                shells[shell] += coeff_norm_sq(v);
            }
        }
        assert_eq!(shells[0], 0.0);
        assert_relative_eq!(shells[1], 2.0, max_relative = 1e-10);
        assert_relative_eq!(shells[2], 0.25, max_relative = 1e-10);
        assert_relative_eq!(f.energy(), 2.25, max_relative = 1e-10);
    }

    #[test]
    fn empty_shell_with_positive_target_is_rejected() {
        let d = DomainParams::unit();
        // On the unit box no mode has |n_check| < 1, so shell 0 is empty.
        let profile = SpectrumProfile {
            shell_energy: vec![1.0],
        };
        assert!(matches!(
            SpectralField::random(d, 2, 1, &profile),
            Err(FieldError::EmptyShell { shell: 0 })
        ));
    }

    #[test]
    fn projection_annihilates_gradients_and_fixes_nothing_divergence_free() {
        let d = sample_domain();
        let mut grad = SpectralField::zero(d.clone(), 2).unwrap();
        for idx in 0..grad.data.len() {
            let n = grad.mode_at(idx);
            if n.is_zero() {
                continue;
            }
            let check = d.check(n);
            let s = Complex64::new(0.3, -0.8);
            grad.data[idx] = [s * check[0], s * check[1], s * check[2]];
        }
        let projected = grad.project_divergence_free();
        assert!(projected.max_abs() <= 1e-14);

        let f = SpectralField::random(d, 2, 5, &sample_profile()).unwrap();
        let again = f.project_divergence_free();
        assert!(f.l2_distance(&again).unwrap() <= 1e-14 * f.norm_l2());
    }

    #[test]
    fn projection_is_self_adjoint() {
        let d = sample_domain();
        for seed in 0..50 {
            let u = SpectralField::random(d.clone(), 2, 100 + seed, &sample_profile()).unwrap();
            // Start from an intentionally compressible field.
            let mut g = SpectralField::zero(d.clone(), 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            for idx in 0..g.data.len() {
                let n = g.mode_at(idx);
                if n.0 <= [0, 0, 0] {
                    continue;
                }
                let v = [
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ];
                g.set_pair_raw(n, v);
            }
            let lhs = u
                .project_divergence_free()
                .inner_product(&g, 0.0)
                .unwrap();
            let rhs = u
                .inner_product(&g.project_divergence_free(), 0.0)
                .unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn barotropic_baroclinic_is_an_orthogonal_partition() {
        let d = sample_domain();
        for seed in 0..20 {
            let v = SpectralField::random(d.clone(), 3, seed, &sample_profile()).unwrap();
            let bar = v.barotropic_part();
            let bc = v.baroclinic_part();
            // Exact partition of modes.
            let mut recombined = bar.clone();
            recombined.axpy(1.0, &bc).unwrap();
            assert_eq!(v.l2_distance(&recombined).unwrap(), 0.0);
            // Orthogonality and Parseval.
            assert_eq!(bar.inner_product(&bc, 0.0).unwrap(), 0.0);
            assert_relative_eq!(
                v.energy(),
                bar.energy() + bc.energy(),
                max_relative = 1e-13
            );
            // Idempotence.
            assert_eq!(bar.barotropic_part().l2_distance(&bar).unwrap(), 0.0);
            assert!(bar.baroclinic_part().max_abs() == 0.0);
        }
    }

    #[test]
    fn baroclinic_part_has_zero_vertical_average() {
        let d = sample_domain();
        let v = SpectralField::random(d.clone(), 2, 9, &sample_profile()).unwrap();
        let bc = v.baroclinic_part();
        // Average the physical reconstruction over 32 equispaced x3 points;
        // the quadrature is exact for these trigonometric polynomials.
        let a3 = d.periods()[2];
        let grid = 32;
        for &(x1, x2) in &[(0.3, 1.1), (2.0, 0.4), (5.5, 3.3)] {
            let mut mean = [CompensatedSum::new(); 3];
            for g in 0..grid {
                let x3 = 2.0 * std::f64::consts::PI * a3 * (g as f64) / (grid as f64);
                let val = bc.eval_physical([x1, x2, x3]);
                for j in 0..3 {
                    mean[j].add(val[j]);
                }
            }
            for acc in mean {
                assert!((acc.value() / grid as f64).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn inner_product_weights_and_poincare() {
        let d = sample_domain();
        let lambda1 = d.lambda1();
        for seed in 0..100 {
            let v = SpectralField::random(d.clone(), 3, 300 + seed, &sample_profile()).unwrap();
            let l2 = v.inner_product(&v, 0.0).unwrap();
            assert_relative_eq!(l2, v.energy(), max_relative = 1e-13);
            assert!(l2 >= 0.0);
            let h1 = v.inner_product(&v, 1.0).unwrap();
            assert!(h1 + 1e-12 >= lambda1 * l2);
        }
    }

    #[test]
    fn distinct_single_modes_are_orthogonal() {
        let d = DomainParams::unit();
        let e = Complex64::new(0.0, 1.0);
        let u = SpectralField::from_modes(
            d.clone(),
            2,
            &[(Mode::new(1, 0, 0), [ZERO_COEFF[0], e, ZERO_COEFF[2]])],
        )
        .unwrap();
        let v = SpectralField::from_modes(
            d,
            2,
            &[(Mode::new(0, 1, 1), [e, ZERO_COEFF[1], ZERO_COEFF[2]])],
        )
        .unwrap();
        assert_eq!(u.inner_product(&v, 0.0).unwrap(), 0.0);
        assert!(u.inner_product(&u, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn lattice_mismatch_is_a_usage_error() {
        let u = SpectralField::random(DomainParams::unit(), 2, 1, &sample_profile()).unwrap();
        let v = SpectralField::random(sample_domain(), 2, 1, &sample_profile()).unwrap();
        assert!(matches!(
            u.inner_product(&v, 0.0),
            Err(FieldError::LatticeMismatch)
        ));
        let w = SpectralField::random(DomainParams::unit(), 3, 1, &sample_profile()).unwrap();
        assert!(matches!(
            u.inner_product(&w, 0.0),
            Err(FieldError::LatticeMismatch)
        ));
    }

    #[test]
    fn parseval_against_collocation_grid() {
        let d = sample_domain();
        let v = SpectralField::random(d.clone(), 2, 77, &sample_profile()).unwrap();
        // Mean of |v(x)|^2 over a uniform grid equals sum |v_n|^2 once the
        // grid resolves all mode differences (G > 2N).
        let grid = 8usize;
        let periods = d.periods();
        let mut acc = CompensatedSum::new();
        for g1 in 0..grid {
            for g2 in 0..grid {
                for g3 in 0..grid {
                    let x = [
                        2.0 * std::f64::consts::PI * periods[0] * g1 as f64 / grid as f64,
                        2.0 * std::f64::consts::PI * periods[1] * g2 as f64 / grid as f64,
                        2.0 * std::f64::consts::PI * periods[2] * g3 as f64 / grid as f64,
                    ];
                    let val = v.eval_physical(x);
                    acc.add(val[0] * val[0] + val[1] * val[1] + val[2] * val[2]);
                }
            }
        }
        let mean = acc.value() / (grid * grid * grid) as f64;
        assert_relative_eq!(mean, v.energy(), max_relative = 1e-10);
    }

    #[test]
    fn from_modes_symmetrizes_and_rejects_duplicates() {
        let d = DomainParams::unit();
        let v = [
            Complex64::new(0.0, 0.4),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let f =
            SpectralField::from_modes(d.clone(), 2, &[(Mode::new(0, 0, 1), v)]).unwrap();
        let got = f.get(Mode::new(0, 0, -1));
        let there = f.get(Mode::new(0, 0, 1));
        for j in 0..3 {
            assert_eq!(got[j], there[j].conj());
        }
        f.validate().unwrap();

        assert!(matches!(
            SpectralField::from_modes(
                d.clone(),
                2,
                &[(Mode::new(0, 0, 1), v), (Mode::new(0, 0, 1), v)]
            ),
            Err(FieldError::DuplicateMode { .. })
        ));
        assert!(matches!(
            SpectralField::from_modes(d, 2, &[(Mode::new(5, 0, 0), v)]),
            Err(FieldError::ModeOutsideLattice { .. })
        ));
    }

    #[test]
    fn norm_report_is_consistent() {
        let d = sample_domain();
        let v = SpectralField::random(d, 3, 13, &sample_profile()).unwrap();
        let r = v.norms(2.0, 0.8).unwrap();
        assert_relative_eq!(r.l2 * r.l2, v.energy(), max_relative = 1e-13);
        assert!(r.h1 >= r.l2 * v.domain().lambda1().sqrt() - 1e-12);
        assert_relative_eq!(
            r.hs * r.hs,
            v.energy_hs(2.0),
            max_relative = 1e-12
        );
        assert!(r.alpha_energy <= 0.5 * v.energy());
        assert!(r.alpha_energy > 0.0);
    }
}
