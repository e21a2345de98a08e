//! Bilinear operators of the truncated system: the classical advection form
//! `B(u,v) = P_L[(u.grad)v]`, the filtered form
//! `B_alpha(u,v) = -P_L[(R_alpha u) x curl v]`, the catalytic limit operator
//! advected by the filtered barotropic part, plus the Stokes and Coriolis
//! multipliers and numerical checks of the operator identities.
//!
//! Every bilinear comes in two evaluation paths: an `O(M^2)` direct
//! convolution (the oracle) and a dealiased collocation path whose padded grid
//! (`G >= 3*cutoff + 1` per axis) makes retained modes alias-free, so the two
//! agree to roundoff. The direct path sums over pairs in a fixed lattice
//! order per output mode and parallelizes only across outputs, which keeps
//! results bit-identical for any thread count.

use rayon::prelude::*;

use crate::fft::{smooth_size, Fft3};
use crate::field::FieldError;
use crate::{Coeff, Complex64, DomainParams, Mode, SpectralField, ZERO_COEFF};

/// Which evaluation path a bilinear call should take.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum ConvolutionPath {
    /// Exact pairwise convolution; quadratic in mode count.
    Direct,
    /// Collocation with zero padding past the 2/3 rule; near-linear cost.
    Transform,
}

/// Scratch state shared by bilinear evaluations on one lattice.
pub struct BilinearWorkspace {
    domain: DomainParams,
    cutoff: u32,
    transform: Option<TransformPlan>,
}

struct TransformPlan {
    grid: usize,
    fft: Fft3,
}

/// Result of checking `<B_alpha(u,v),w> = <B(R_alpha u,v),w> - <B(w,v),R_alpha u>`.
#[derive(Clone, Copy, Debug)]
pub struct RelationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Magnitude scale of the three pairings, for relative comparison.
    pub scale: f64,
}

/// One checked orthogonality identity.
#[derive(Clone, Debug)]
pub struct OrthogonalityItem {
    pub name: &'static str,
    pub residual: f64,
    pub scale: f64,
}

/// Residuals of the barotropic/baroclinic orthogonality identities.
#[derive(Clone, Debug)]
pub struct OrthogonalityReport {
    pub items: Vec<OrthogonalityItem>,
}

impl OrthogonalityReport {
    pub fn max_relative(&self) -> f64 {
        self.items
            .iter()
            .map(|i| i.residual / i.scale.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.items.iter().map(|i| i.residual).fold(0.0, f64::max)
    }
}

impl BilinearWorkspace {
    pub fn new(domain: DomainParams, cutoff: u32) -> Result<Self, FieldError> {
        if cutoff == 0 {
            return Err(FieldError::BadCutoff(cutoff));
        }
        Ok(BilinearWorkspace {
            domain,
            cutoff,
            transform: None,
        })
    }

    pub fn domain(&self) -> &DomainParams {
        &self.domain
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    /// Padded collocation grid edge for the transform path.
    pub fn grid_size(&mut self) -> usize {
        self.plan().0
    }

    fn plan(&mut self) -> (usize, Fft3) {
        if self.transform.is_none() {
            let grid = smooth_size(3 * self.cutoff as usize + 1);
            self.transform = Some(TransformPlan {
                grid,
                fft: Fft3::new(grid),
            });
        }
        let plan = self.transform.as_ref().expect("plan just built");
        (plan.grid, plan.fft.clone())
    }

    fn check_field(&self, f: &SpectralField) -> Result<(), FieldError> {
        if f.cutoff() != self.cutoff || f.domain() != &self.domain {
            return Err(FieldError::LatticeMismatch);
        }
        Ok(())
    }

    /// `B(u,v) = P_L[(u.grad)v]`, per mode `i P_n sum_{k+m=n} (u_k.m_check) v_m`.
    pub fn bilinear_classical(
        &mut self,
        u: &SpectralField,
        v: &SpectralField,
        path: ConvolutionPath,
    ) -> Result<SpectralField, FieldError> {
        self.check_field(u)?;
        self.check_field(v)?;
        match path {
            ConvolutionPath::Direct => Ok(self.direct_advection(u, v, None)),
            ConvolutionPath::Transform => Ok(self.transform_advection(u, v, None)),
        }
    }

    /// `B_alpha(u,v) = -P_L[(R_alpha u) x curl v]`, per mode
    /// `-i P_n sum_{k+m=n} r_k (u_k x (m_check x v_m))`; the filter acts on
    /// the advecting slot.
    pub fn bilinear_alpha(
        &mut self,
        u: &SpectralField,
        v: &SpectralField,
        alpha: f64,
        path: ConvolutionPath,
    ) -> Result<SpectralField, FieldError> {
        self.check_field(u)?;
        self.check_field(v)?;
        let r = self.helmholtz_table(alpha)?;
        match path {
            ConvolutionPath::Direct => Ok(self.direct_rotational(u, v, &r)),
            ConvolutionPath::Transform => Ok(self.transform_rotational(u, v, &r)),
        }
    }

    /// Catalytic form `P_L[((R_alpha P_b u).grad) v]`: advection by the
    /// filtered barotropic part of the first argument. With both arguments
    /// equal this is the nonlinearity of the resonant-limit system.
    pub fn catalytic_form(
        &mut self,
        u: &SpectralField,
        v: &SpectralField,
        alpha: f64,
        path: ConvolutionPath,
    ) -> Result<SpectralField, FieldError> {
        self.check_field(u)?;
        self.check_field(v)?;
        let r = self.helmholtz_table(alpha)?;
        match path {
            ConvolutionPath::Direct => Ok(self.direct_advection(u, v, Some(&r))),
            ConvolutionPath::Transform => Ok(self.transform_advection(u, v, Some(&r))),
        }
    }

    /// `B_c(w,w)`: the catalytic form with both slots equal.
    pub fn catalytic_bilinear(
        &mut self,
        w: &SpectralField,
        alpha: f64,
        path: ConvolutionPath,
    ) -> Result<SpectralField, FieldError> {
        self.catalytic_form(w, w, alpha, path)
    }

    fn helmholtz_table(&self, alpha: f64) -> Result<Vec<f64>, FieldError> {
        let side = (2 * self.cutoff + 1) as usize;
        let len = side * side * side;
        let probe = SpectralField::zero(self.domain.clone(), self.cutoff)?;
        let mut r = vec![0.0; len];
        for (idx, slot) in r.iter_mut().enumerate() {
            *slot = self.domain.helmholtz_scalar(probe.mode_at(idx), alpha)?;
        }
        Ok(r)
    }

    /// Direct convolution of the advection kernel. When `barotropic_filter`
    /// is given, the advecting slot is restricted to its `k3 = 0` modes and
    /// scaled by `r_k` (the catalytic channel); otherwise all modes advect.
    fn direct_advection(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        barotropic_filter: Option<&[f64]>,
    ) -> SpectralField {
        let mut out = SpectralField::zero(self.domain.clone(), self.cutoff)
            .expect("validated cutoff");
        let c = self.cutoff as i32;
        let checks = self.check_table();
        let data: Vec<Coeff> = (0..out.coeffs().len())
            .into_par_iter()
            .map(|idx| {
                let n = out.mode_at(idx);
                if n.is_zero() {
                    return ZERO_COEFF;
                }
                let mut acc = ZERO_COEFF;
                for k1 in -c..=c {
                    for k2 in -c..=c {
                        for k3 in -c..=c {
                            if barotropic_filter.is_some() && k3 != 0 {
                                continue;
                            }
                            let k = Mode::new(k1, k2, k3);
                            let m = n - k;
                            if !m.in_cube(self.cutoff) {
                                continue;
                            }
                            let uk = u.get(k);
                            if coeff_is_zero(&uk) {
                                continue;
                            }
                            let vm = v.get(m);
                            if coeff_is_zero(&vm) {
                                continue;
                            }
                            let kidx = u.lin(k).expect("k in cube");
                            let midx = u.lin(m).expect("m in cube");
                            let mc = checks[midx];
                            let mut dot = Complex64::new(0.0, 0.0);
                            for j in 0..3 {
                                dot += uk[j] * mc[j];
                            }
                            if let Some(r) = barotropic_filter {
                                dot *= r[kidx];
                            }
                            for j in 0..3 {
                                acc[j] += dot * vm[j];
                            }
                        }
                    }
                }
                let projected = self.project(n, acc);
                mul_i(projected)
            })
            .collect();
        out.coeffs_mut().copy_from_slice(&data);
        out
    }

    /// Direct convolution of the rotational kernel
    /// `-i r_k u_k x (m_check x v_m)`.
    fn direct_rotational(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        r: &[f64],
    ) -> SpectralField {
        let mut out = SpectralField::zero(self.domain.clone(), self.cutoff)
            .expect("validated cutoff");
        let c = self.cutoff as i32;
        let checks = self.check_table();
        let data: Vec<Coeff> = (0..out.coeffs().len())
            .into_par_iter()
            .map(|idx| {
                let n = out.mode_at(idx);
                if n.is_zero() {
                    return ZERO_COEFF;
                }
                let mut acc = ZERO_COEFF;
                for k1 in -c..=c {
                    for k2 in -c..=c {
                        for k3 in -c..=c {
                            let k = Mode::new(k1, k2, k3);
                            let m = n - k;
                            if !m.in_cube(self.cutoff) {
                                continue;
                            }
                            let uk = u.get(k);
                            if coeff_is_zero(&uk) {
                                continue;
                            }
                            let vm = v.get(m);
                            if coeff_is_zero(&vm) {
                                continue;
                            }
                            let kidx = u.lin(k).expect("k in cube");
                            let midx = u.lin(m).expect("m in cube");
                            let mc = checks[midx];
                            let inner = cross_real_complex(mc, vm);
                            let outer = cross_complex(uk, inner);
                            let rk = r[kidx];
                            for j in 0..3 {
                                acc[j] += rk * outer[j];
                            }
                        }
                    }
                }
                let projected = self.project(n, acc);
                mul_neg_i(projected)
            })
            .collect();
        out.coeffs_mut().copy_from_slice(&data);
        out
    }

    fn transform_advection(
        &mut self,
        u: &SpectralField,
        v: &SpectralField,
        barotropic_filter: Option<&[f64]>,
    ) -> SpectralField {
        let checks = self.check_table();
        let (g, fft) = self.plan();
        let vol = (g * g * g) as f64;

        // Advecting velocity on the grid.
        let mut u_phys: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        for comp in 0..3 {
            let mut grid = vec![Complex64::new(0.0, 0.0); g * g * g];
            scatter(u, g, &mut grid, |idx, n, w| match barotropic_filter {
                Some(r) if n.is_horizontal() => w[comp] * r[idx],
                Some(_) => Complex64::new(0.0, 0.0),
                None => w[comp],
            });
            fft.inverse(&mut grid);
            u_phys.push(grid);
        }
        // Gradient components of the advected field.
        let mut product: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        for comp in 0..3 {
            let mut acc: Option<Vec<Complex64>> = None;
            for deriv in 0..3 {
                let mut grid = vec![Complex64::new(0.0, 0.0); g * g * g];
                scatter(v, g, &mut grid, |idx, _n, w| {
                    Complex64::new(0.0, checks[idx][deriv]) * w[comp]
                });
                fft.inverse(&mut grid);
                mul_pointwise(&mut grid, &u_phys[deriv]);
                match &mut acc {
                    None => acc = Some(grid),
                    Some(sum) => add_pointwise(sum, &grid),
                }
            }
            let mut grid = acc.expect("three derivative terms");
            fft.forward(&mut grid);
            product.push(grid);
        }
        self.gather_project(&product, g, vol)
    }

    fn transform_rotational(
        &mut self,
        u: &SpectralField,
        v: &SpectralField,
        r: &[f64],
    ) -> SpectralField {
        let checks = self.check_table();
        let (g, fft) = self.plan();
        let vol = (g * g * g) as f64;

        let mut filtered: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        for comp in 0..3 {
            let mut grid = vec![Complex64::new(0.0, 0.0); g * g * g];
            scatter(u, g, &mut grid, |idx, _n, w| w[comp] * r[idx]);
            fft.inverse(&mut grid);
            filtered.push(grid);
        }
        let mut curl: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        for comp in 0..3 {
            let mut grid = vec![Complex64::new(0.0, 0.0); g * g * g];
            scatter(v, g, &mut grid, |idx, _n, w| {
                // (curl v)_n = i n_check x v_n
                let c = checks[idx];
                match comp {
                    0 => Complex64::new(0.0, c[1]) * w[2] - Complex64::new(0.0, c[2]) * w[1],
                    1 => Complex64::new(0.0, c[2]) * w[0] - Complex64::new(0.0, c[0]) * w[2],
                    _ => Complex64::new(0.0, c[0]) * w[1] - Complex64::new(0.0, c[1]) * w[0],
                }
            });
            fft.inverse(&mut grid);
            curl.push(grid);
        }
        // -(R_alpha u) x curl v, pointwise.
        let mut product: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        for comp in 0..3 {
            let (a, b) = ((comp + 1) % 3, (comp + 2) % 3);
            let grid: Vec<Complex64> = (0..g * g * g)
                .into_par_iter()
                .map(|i| -(filtered[a][i] * curl[b][i] - filtered[b][i] * curl[a][i]))
                .collect();
            let mut grid = grid;
            fft.forward(&mut grid);
            product.push(grid);
        }
        self.gather_project(&product, g, vol)
    }

    /// Pull retained modes out of transformed product grids, normalize,
    /// project, and symmetrize so conjugate symmetry is exact.
    fn gather_project(&self, grids: &[Vec<Complex64>], g: usize, vol: f64) -> SpectralField {
        let mut out = SpectralField::zero(self.domain.clone(), self.cutoff)
            .expect("validated cutoff");
        for idx in 0..out.coeffs().len() {
            let n = out.mode_at(idx);
            if n.is_zero() {
                continue;
            }
            let bin = grid_bin(n, g);
            let raw = [
                grids[0][bin] / vol,
                grids[1][bin] / vol,
                grids[2][bin] / vol,
            ];
            out.coeffs_mut()[idx] = self.project(n, raw);
        }
        // Enforce conjugate symmetry exactly (roundoff on the grid path can
        // leave a ~1e-16 mismatch between mirror modes).
        let mut sym = out.clone();
        for idx in 0..out.coeffs().len() {
            let n = out.mode_at(idx);
            let mirror = out.get(-n);
            let v = out.coeffs()[idx];
            let mut w = ZERO_COEFF;
            for j in 0..3 {
                w[j] = 0.5 * (v[j] + mirror[j].conj());
            }
            sym.coeffs_mut()[idx] = w;
        }
        sym
    }

    fn check_table(&self) -> Vec<[f64; 3]> {
        let probe =
            SpectralField::zero(self.domain.clone(), self.cutoff).expect("validated cutoff");
        (0..probe.coeffs().len())
            .map(|idx| self.domain.check(probe.mode_at(idx)))
            .collect()
    }

    fn project(&self, n: Mode, v: Coeff) -> Coeff {
        let w = self.domain.wavevector(n);
        let mut dot = Complex64::new(0.0, 0.0);
        for j in 0..3 {
            dot += v[j] * w.check[j];
        }
        let scale = dot / w.norm_sq;
        let mut out = ZERO_COEFF;
        for j in 0..3 {
            out[j] = v[j] - scale * w.check[j];
        }
        out
    }
}

/// Stokes operator: `(Av)_n = |n_check|^2 v_n`.
pub fn stokes_apply(v: &SpectralField) -> SpectralField {
    let mut out = v.clone();
    for idx in 0..out.coeffs().len() {
        let n = out.mode_at(idx);
        let s = v.domain().norm_sq(n);
        for slot in &mut out.coeffs_mut()[idx] {
            *slot *= s;
        }
    }
    out
}

/// Filtered Coriolis operator without the rotation rate:
/// `(M_alpha v)_n = r_n P_n J P_n v_n`. Scale by `Omega` at the call site.
pub fn coriolis_apply(v: &SpectralField, alpha: f64) -> Result<SpectralField, FieldError> {
    let mut out = v.clone();
    for idx in 0..out.coeffs().len() {
        let n = out.mode_at(idx);
        if n.is_zero() {
            out.coeffs_mut()[idx] = ZERO_COEFF;
            continue;
        }
        let block = v.domain().coriolis_block(n, alpha)?;
        out.coeffs_mut()[idx] = block.apply(v.coeffs()[idx]);
    }
    Ok(out)
}

/// Check `<B_alpha(u,v),w> = <B(R_alpha u,v),w> - <B(w,v),R_alpha u>` on the
/// direct path.
pub fn verify_bilinear_relation(
    ws: &mut BilinearWorkspace,
    u: &SpectralField,
    v: &SpectralField,
    w: &SpectralField,
    alpha: f64,
) -> Result<RelationReport, FieldError> {
    let filtered_u = u.filtered(alpha)?;
    let lhs_field = ws.bilinear_alpha(u, v, alpha, ConvolutionPath::Direct)?;
    let lhs = lhs_field.inner_product(w, 0.0)?;
    let term_a = ws
        .bilinear_classical(&filtered_u, v, ConvolutionPath::Direct)?
        .inner_product(w, 0.0)?;
    let term_b = ws
        .bilinear_classical(w, v, ConvolutionPath::Direct)?
        .inner_product(&filtered_u, 0.0)?;
    let rhs = term_a - term_b;
    Ok(RelationReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale: lhs.abs() + term_a.abs() + term_b.abs() + f64::MIN_POSITIVE,
    })
}

/// Evaluate the barotropic/baroclinic orthogonality identities on the direct
/// path: the viscous cross terms, the barotropic collapse of the catalytic
/// form, the advection cross terms, the cross-channel pairing, and the
/// baroclinic energy neutrality.
pub fn verify_orthogonality_identities(
    ws: &mut BilinearWorkspace,
    w: &SpectralField,
    phi: &SpectralField,
    alpha: f64,
) -> Result<OrthogonalityReport, FieldError> {
    let path = ConvolutionPath::Direct;
    let w_bar = w.barotropic_part();
    let w_perp = w.baroclinic_part();
    let phi_bar = phi.barotropic_part();
    let phi_perp = phi.baroclinic_part();
    let scale_w = w.norms(1.0, alpha)?.h1.max(1e-300);
    let scale_phi = phi.norms(1.0, alpha)?.h1.max(1e-300);

    let mut items = Vec::new();

    let a_bar = stokes_apply(&phi_bar);
    items.push(OrthogonalityItem {
        name: "viscous_cross_barotropic",
        residual: a_bar.inner_product(&phi_perp, 0.0)?.abs(),
        scale: a_bar.norm_l2() * phi_perp.norm_l2() + f64::MIN_POSITIVE,
    });
    let a_perp = stokes_apply(&phi_perp);
    items.push(OrthogonalityItem {
        name: "viscous_cross_baroclinic",
        residual: a_perp.inner_product(&phi_bar, 0.0)?.abs(),
        scale: a_perp.norm_l2() * phi_bar.norm_l2() + f64::MIN_POSITIVE,
    });

    let b_i = ws.catalytic_form(&w_bar, &phi_bar, alpha, path)?;
    let full = ws.catalytic_form(w, phi, alpha, path)?;
    let collapse = b_i.l2_distance(&full.barotropic_part())?;
    items.push(OrthogonalityItem {
        name: "barotropic_collapse",
        residual: collapse,
        scale: b_i.norm_l2() + f64::MIN_POSITIVE,
    });

    items.push(OrthogonalityItem {
        name: "advection_cross_wphi",
        residual: b_i.inner_product(&phi_perp, 0.0)?.abs(),
        scale: b_i.norm_l2() * phi_perp.norm_l2() + f64::MIN_POSITIVE,
    });
    let b_i_swapped = ws.catalytic_form(&phi_bar, &w_bar, alpha, path)?;
    items.push(OrthogonalityItem {
        name: "advection_cross_phiw",
        residual: b_i_swapped.inner_product(&phi_perp, 0.0)?.abs(),
        scale: b_i_swapped.norm_l2() * phi_perp.norm_l2() + f64::MIN_POSITIVE,
    });

    let mut cross = ws.catalytic_form(&w_bar, &phi_perp, alpha, path)?;
    let cross_b = ws.catalytic_form(&phi_bar, &w_perp, alpha, path)?;
    cross.axpy(1.0, &cross_b)?;
    items.push(OrthogonalityItem {
        name: "corollary_cross_channel",
        residual: cross.inner_product(&phi_bar, 0.0)?.abs(),
        scale: cross.norm_l2() * phi_bar.norm_l2() + f64::MIN_POSITIVE,
    });

    let b_ii = ws.catalytic_form(&w_bar, &phi_perp, alpha, path)?;
    items.push(OrthogonalityItem {
        name: "baroclinic_energy_neutrality",
        residual: b_ii.inner_product(&phi_perp, 0.0)?.abs(),
        scale: scale_w * scale_phi * phi_perp.norm_l2().max(1.0) + f64::MIN_POSITIVE,
    });

    Ok(OrthogonalityReport { items })
}

fn coeff_is_zero(v: &Coeff) -> bool {
    v[0].re == 0.0
        && v[0].im == 0.0
        && v[1].re == 0.0
        && v[1].im == 0.0
        && v[2].re == 0.0
        && v[2].im == 0.0
}

pub(crate) fn mul_i(v: Coeff) -> Coeff {
    [
        Complex64::new(-v[0].im, v[0].re),
        Complex64::new(-v[1].im, v[1].re),
        Complex64::new(-v[2].im, v[2].re),
    ]
}

fn mul_neg_i(v: Coeff) -> Coeff {
    [
        Complex64::new(v[0].im, -v[0].re),
        Complex64::new(v[1].im, -v[1].re),
        Complex64::new(v[2].im, -v[2].re),
    ]
}

pub(crate) fn cross_real_complex(a: [f64; 3], b: Coeff) -> Coeff {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn cross_complex(a: Coeff, b: Coeff) -> Coeff {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn grid_bin(n: Mode, g: usize) -> usize {
    let wrap = |x: i32| -> usize { x.rem_euclid(g as i32) as usize };
    (wrap(n.0[0]) * g + wrap(n.0[1])) * g + wrap(n.0[2])
}

fn scatter<F>(f: &SpectralField, g: usize, grid: &mut [Complex64], pick: F)
where
    F: Fn(usize, Mode, Coeff) -> Complex64,
{
    for idx in 0..f.coeffs().len() {
        let n = f.mode_at(idx);
        grid[grid_bin(n, g)] = pick(idx, n, f.coeffs()[idx]);
    }
}

fn mul_pointwise(dst: &mut [Complex64], src: &[Complex64]) {
    dst.par_iter_mut().zip(src.par_iter()).for_each(|(d, s)| {
        *d *= *s;
    });
}

fn add_pointwise(dst: &mut [Complex64], src: &[Complex64]) {
    dst.par_iter_mut().zip(src.par_iter()).for_each(|(d, s)| {
        *d += *s;
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpectrumProfile;
    use approx::assert_relative_eq;

    fn domain() -> DomainParams {
        DomainParams::new(1.3, 0.7).unwrap()
    }

    fn profile() -> SpectrumProfile {
        SpectrumProfile {
            shell_energy: vec![0.0, 1.0, 0.5],
        }
    }

    fn random_field(seed: u64, cutoff: u32) -> SpectralField {
        SpectralField::random(domain(), cutoff, seed, &profile()).unwrap()
    }

    #[test]
    fn classical_bilinear_matches_two_mode_hand_convolution() {
        let d = DomainParams::unit();
        let k = Mode::new(1, 0, 0);
        let m = Mode::new(0, 1, 1);
        let uk: Coeff = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.3, -0.1),
            Complex64::new(0.2, 0.4),
        ];
        let vm: Coeff = [
            Complex64::new(-0.5, 0.2),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let u = SpectralField::from_modes(d.clone(), 3, &[(k, uk)]).unwrap();
        let v = SpectralField::from_modes(d.clone(), 3, &[(m, vm)]).unwrap();
        let mut ws = BilinearWorkspace::new(d.clone(), 3).unwrap();
        let b = ws
            .bilinear_classical(&u, &v, ConvolutionPath::Direct)
            .unwrap();

        // Hand convolution: contributions at n = +-k +- m from the four
        // stored coefficient pairs.
        let mut expect = SpectralField::zero(d.clone(), 3).unwrap();
        let pairs = [(k, u.get(k)), (-k, u.get(-k))];
        let others = [(m, v.get(m)), (-m, v.get(-m))];
        for (kk, uc) in pairs {
            for (mm, vc) in others {
                let n = kk + mm;
                if n.is_zero() || !n.in_cube(3) {
                    continue;
                }
                let mc = d.check(mm);
                let mut dot = Complex64::new(0.0, 0.0);
                for j in 0..3 {
                    dot += uc[j] * mc[j];
                }
                let w = d.wavevector(n);
                let mut term = ZERO_COEFF;
                for j in 0..3 {
                    term[j] = dot * vc[j];
                }
                let mut ndot = Complex64::new(0.0, 0.0);
                for j in 0..3 {
                    ndot += term[j] * w.check[j];
                }
                let idx = expect.lin(n).unwrap();
                for j in 0..3 {
                    let p = term[j] - ndot / w.norm_sq * w.check[j];
                    expect.coeffs_mut()[idx][j] += Complex64::new(0.0, 1.0) * p;
                }
            }
        }
        assert!(b.l2_distance(&expect).unwrap() <= 1e-14);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let d = domain();
        let z = SpectralField::zero(d.clone(), 2).unwrap();
        let v = random_field(3, 2);
        let mut ws = BilinearWorkspace::new(d, 2).unwrap();
        for path in [ConvolutionPath::Direct, ConvolutionPath::Transform] {
            assert_eq!(
                ws.bilinear_classical(&z, &v, path).unwrap().max_abs(),
                0.0
            );
        }
    }

    #[test]
    fn classical_bilinear_is_energy_neutral_in_truncation() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 3).unwrap();
        for seed in 0..5 {
            let u = random_field(10 + seed, 3);
            let v = random_field(20 + seed, 3);
            let b = ws
                .bilinear_classical(&u, &v, ConvolutionPath::Direct)
                .unwrap();
            let pairing = b.inner_product(&v, 0.0).unwrap();
            let scale = b.norm_l2() * v.norm_l2() + 1e-300;
            assert!(pairing.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn alpha_zero_reduces_to_classical() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 3).unwrap();
        let v = random_field(5, 3);
        let rot = ws
            .bilinear_alpha(&v, &v, 0.0, ConvolutionPath::Direct)
            .unwrap();
        let adv = ws
            .bilinear_classical(&v, &v, ConvolutionPath::Direct)
            .unwrap();
        let scale = adv.norm_l2().max(1e-300);
        assert!(rot.l2_distance(&adv).unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn bilinear_relation_holds() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 3).unwrap();
        for (seed, alpha) in [(1u64, 0.0), (2, 0.5), (3, 1.0), (4, 2.0)] {
            let u = random_field(seed, 3);
            let v = random_field(seed + 50, 3);
            let w = random_field(seed + 100, 3);
            let rep = verify_bilinear_relation(&mut ws, &u, &v, &w, alpha).unwrap();
            assert!(
                rep.residual <= 1e-12 * rep.scale,
                "residual {} scale {}",
                rep.residual,
                rep.scale
            );
        }
    }

    #[test]
    fn alpha_energy_neutrality() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 3).unwrap();
        for (seed, alpha) in [(7u64, 0.5), (8, 1.0)] {
            let v = random_field(seed, 3);
            let b = ws
                .bilinear_alpha(&v, &v, alpha, ConvolutionPath::Direct)
                .unwrap();
            let rv = v.filtered(alpha).unwrap();
            let pairing = b.inner_product(&rv, 0.0).unwrap();
            let scale = b.norm_l2() * rv.norm_l2() + 1e-300;
            assert!(pairing.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn bilinearity_in_each_slot() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 2).unwrap();
        let u = random_field(31, 2);
        let v = random_field(32, 2);
        let w = random_field(33, 2);
        let (a, b) = (0.7, -1.3);
        // First slot.
        let mut combo = u.clone();
        combo.scale(a);
        combo.axpy(b, &w).unwrap();
        let lhs = ws
            .bilinear_alpha(&combo, &v, 0.6, ConvolutionPath::Direct)
            .unwrap();
        let mut rhs = ws
            .bilinear_alpha(&u, &v, 0.6, ConvolutionPath::Direct)
            .unwrap();
        rhs.scale(a);
        let t = ws
            .bilinear_alpha(&w, &v, 0.6, ConvolutionPath::Direct)
            .unwrap();
        rhs.axpy(b, &t).unwrap();
        assert!(lhs.l2_distance(&rhs).unwrap() <= 1e-13 * rhs.norm_l2().max(1.0));
        // Second slot.
        let lhs2 = ws
            .bilinear_classical(&v, &combo, ConvolutionPath::Direct)
            .unwrap();
        let mut rhs2 = ws
            .bilinear_classical(&v, &u, ConvolutionPath::Direct)
            .unwrap();
        rhs2.scale(a);
        let t2 = ws
            .bilinear_classical(&v, &w, ConvolutionPath::Direct)
            .unwrap();
        rhs2.axpy(b, &t2).unwrap();
        assert!(lhs2.l2_distance(&rhs2).unwrap() <= 1e-13 * rhs2.norm_l2().max(1.0));
    }

    #[test]
    fn transform_path_agrees_with_direct() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 3).unwrap();
        let u = random_field(41, 3);
        let v = random_field(42, 3);
        let alpha = 0.8;

        let cases: Vec<(SpectralField, SpectralField)> = vec![
            (
                ws.bilinear_classical(&u, &v, ConvolutionPath::Direct).unwrap(),
                ws.bilinear_classical(&u, &v, ConvolutionPath::Transform).unwrap(),
            ),
            (
                ws.bilinear_alpha(&u, &v, alpha, ConvolutionPath::Direct).unwrap(),
                ws.bilinear_alpha(&u, &v, alpha, ConvolutionPath::Transform).unwrap(),
            ),
            (
                ws.catalytic_form(&u, &v, alpha, ConvolutionPath::Direct).unwrap(),
                ws.catalytic_form(&u, &v, alpha, ConvolutionPath::Transform).unwrap(),
            ),
        ];
        for (direct, transform) in cases {
            let scale = direct.norm_l2().max(1e-300);
            assert!(
                direct.l2_distance(&transform).unwrap() <= 1e-10 * scale,
                "paths disagree: {}",
                direct.l2_distance(&transform).unwrap() / scale
            );
        }
    }

    #[test]
    fn outputs_are_divergence_free_and_real_symmetric() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 3).unwrap();
        let u = random_field(51, 3);
        let v = random_field(52, 3);
        for path in [ConvolutionPath::Direct, ConvolutionPath::Transform] {
            let b = ws.bilinear_alpha(&u, &v, 0.7, path).unwrap();
            b.validate().unwrap();
        }
    }

    #[test]
    fn catalytic_operator_support() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d.clone(), 3).unwrap();
        let w = random_field(61, 3);

        // Purely baroclinic input: no barotropic advecting modes, zero output.
        let baroclinic = w.baroclinic_part();
        let out = ws
            .catalytic_bilinear(&baroclinic, 0.9, ConvolutionPath::Direct)
            .unwrap();
        assert_eq!(out.max_abs(), 0.0);

        // Purely barotropic input: output stays barotropic and matches the
        // 2D filtered advection of the barotropic part.
        let barotropic = w.barotropic_part();
        let out = ws
            .catalytic_bilinear(&barotropic, 0.9, ConvolutionPath::Direct)
            .unwrap();
        assert_eq!(out.baroclinic_part().max_abs(), 0.0);
        let same = ws
            .catalytic_form(&w, &barotropic, 0.9, ConvolutionPath::Direct)
            .unwrap();
        assert_eq!(out.barotropic_part().l2_distance(&same.barotropic_part()).unwrap(), 0.0);
    }

    #[test]
    fn catalytic_form_is_linear_in_second_slot() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 2).unwrap();
        let w = random_field(71, 2);
        let a = random_field(72, 2);
        let b = random_field(73, 2);
        let mut combo = a.clone();
        combo.axpy(2.5, &b).unwrap();
        let lhs = ws
            .catalytic_form(&w, &combo, 0.4, ConvolutionPath::Direct)
            .unwrap();
        let mut rhs = ws
            .catalytic_form(&w, &a, 0.4, ConvolutionPath::Direct)
            .unwrap();
        let t = ws
            .catalytic_form(&w, &b, 0.4, ConvolutionPath::Direct)
            .unwrap();
        rhs.axpy(2.5, &t).unwrap();
        assert!(lhs.l2_distance(&rhs).unwrap() <= 1e-12 * rhs.norm_l2().max(1.0));
    }

    #[test]
    fn stokes_apply_properties() {
        let d = domain();
        let v = random_field(81, 2);
        let av = stokes_apply(&v);
        assert_relative_eq!(
            av.inner_product(&v, 0.0).unwrap(),
            v.energy_hs(1.0),
            max_relative = 1e-13
        );
        let single = SpectralField::from_modes(
            d.clone(),
            2,
            &[(
                Mode::new(0, 1, 0),
                [
                    Complex64::new(0.4, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.2),
                ],
            )],
        )
        .unwrap();
        let asingle = stokes_apply(&single);
        let lam = d.norm_sq(Mode::new(0, 1, 0));
        let mut scaled = single.clone();
        scaled.scale(lam);
        assert_eq!(asingle.l2_distance(&scaled).unwrap(), 0.0);
        // Rayleigh quotient floor.
        let rq = av.inner_product(&v, 0.0).unwrap() / v.energy();
        assert!(rq + 1e-12 >= d.lambda1());
    }

    #[test]
    fn coriolis_apply_is_skew_and_filter_decays() {
        let v = random_field(91, 2);
        let mv = coriolis_apply(&v, 0.5).unwrap();
        let pairing = mv.inner_product(&v, 0.0).unwrap();
        assert!(pairing.abs() <= 1e-13 * mv.norm_l2() * v.norm_l2() + 1e-300);
        let m10 = coriolis_apply(&v, 10.0).unwrap().norm_l2();
        let m100 = coriolis_apply(&v, 100.0).unwrap().norm_l2();
        assert!(m100 <= m10 / 50.0);
    }

    #[test]
    fn orthogonality_identities_hold_on_random_fields() {
        let d = domain();
        let mut ws = BilinearWorkspace::new(d, 2).unwrap();
        for seed in 0..10 {
            let w = random_field(1000 + seed, 2);
            let phi = random_field(2000 + seed, 2);
            let rep = verify_orthogonality_identities(&mut ws, &w, &phi, 0.7).unwrap();
            for item in &rep.items {
                assert!(
                    item.residual <= 1e-12 * item.scale.max(1.0),
                    "{} residual {} scale {}",
                    item.name,
                    item.residual,
                    item.scale
                );
            }
        }
    }
}
