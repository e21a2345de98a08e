//! Attractor-dimension bound formulas and the constants feeding them.
//!
//! The chain evaluated here turns a forcing amplitude and viscosity into
//! dimension bounds: the Grashof-type number rho_V, the filter-dependent
//! constant c(alpha) (as a truncated lattice sum and as its closed-form
//! bound), the prefactor K(alpha), the frame-size threshold N, and the
//! final Hausdorff/fractal bounds with the associated length scale.
//!
//! Two caveats are load-bearing and surface explicitly in the API. The
//! closed form for c(alpha) diverges as alpha tends to zero, so alpha = 0
//! is a typed error there and reports carry a divergence flag; the finite
//! substitute sqrt(2) is available as [`C_ALPHA_PAPER_LIMIT`] and is only
//! used where the caller asks for it. And two inequivalent exponent forms
//! of the Hausdorff bound circulate in the derivation; both are computed
//! and labeled, neither is chosen silently.

use rayon::prelude::*;

use crate::field::{FieldError, SpectralField};
use crate::lattice::{DomainParams, LatticeError};
use crate::sums::CompensatedSum;
use crate::Mode;

/// The claimed finite limit of c(alpha) as alpha tends to zero. The closed
/// form itself diverges there; this value never substitutes for it unless
/// the caller passes it explicitly (for example to evaluate K0).
pub const C_ALPHA_PAPER_LIMIT: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("constant {name} = {value} must be finite and strictly positive")]
    BadConstant { name: &'static str, value: f64 },
    #[error("viscosity nu = {0} must be finite and strictly positive")]
    BadViscosity(f64),
    #[error("filter parameter alpha = {0} must be finite and nonnegative")]
    BadAlpha(f64),
    #[error(
        "the closed form for c(alpha) diverges at alpha = 0; \
         pass C_ALPHA_PAPER_LIMIT explicitly for the limit-mode value"
    )]
    AlphaZeroDivergence,
    #[error("exponent q = {0} must be finite and nonnegative")]
    BadExponent(f64),
    #[error("epsilon estimate {0} must be finite and nonnegative")]
    BadEpsilon(f64),
    #[error("truncation cutoff must be at least 1")]
    BadCutoff,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Where the lattice-gap constant came from.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum C1Source {
    /// Computed as `min_p lambda_p / p` over the ordered horizontal
    /// spectrum at the working truncation; `p` is the attaining index.
    Computed { p: usize },
    Supplied,
}

/// Configurable inputs for [`BoundConstants::resolve`]. The absolute
/// constants are unnamed in the source material, so they default to 1 and
/// every report records the values used.
#[derive(Copy, Clone, Debug)]
pub struct ConstantOverrides {
    pub c_l: f64,
    pub c_tilde: f64,
    pub c0: f64,
    pub k_tilde: f64,
    /// Override for the trace constant d; by default it is derived from c0.
    pub d: Option<f64>,
    /// Override for the lattice-gap constant; by default it is computed
    /// from the horizontal spectrum.
    pub c1: Option<f64>,
}

impl Default for ConstantOverrides {
    fn default() -> Self {
        ConstantOverrides {
            c_l: 1.0,
            c_tilde: 1.0,
            c0: 1.0,
            k_tilde: 1.0,
            d: None,
            c1: None,
        }
    }
}

/// The resolved constant set feeding every bound formula.
#[derive(Copy, Clone, Debug)]
pub struct BoundConstants {
    /// Lieb-Thirring constant.
    pub c_l: f64,
    /// Constant relating the dissipation level to rho_V squared.
    pub c_tilde: f64,
    /// Trace lower-bound constant.
    pub c0: f64,
    /// Derived trace constant `d = c0 * c(5/3) / 4` unless overridden.
    pub d: f64,
    /// Lattice-gap constant with `lambda_p >= c1 * p` on the horizontal
    /// spectrum.
    pub c1: f64,
    pub c1_source: C1Source,
    /// First Stokes eigenvalue of the 3D lattice.
    pub lambda1: f64,
    /// Prefactor of the alpha = 0 bound, config input only.
    pub k_tilde: f64,
}

fn check_positive(name: &'static str, value: f64) -> Result<f64, BoundsError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(BoundsError::BadConstant { name, value });
    }
    Ok(value)
}

fn check_alpha(alpha: f64) -> Result<(), BoundsError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(BoundsError::BadAlpha(alpha));
    }
    Ok(())
}

impl BoundConstants {
    /// Resolve the constant set on a lattice truncated at `cutoff`:
    /// validates the config inputs, derives d from c0 when not overridden,
    /// computes the lattice-gap constant from the ordered horizontal
    /// spectrum when not overridden, and computes the first Stokes
    /// eigenvalue.
    pub fn resolve(
        domain: &DomainParams,
        cutoff: u32,
        overrides: &ConstantOverrides,
    ) -> Result<Self, BoundsError> {
        if cutoff == 0 {
            return Err(BoundsError::BadCutoff);
        }
        let c_l = check_positive("c_l", overrides.c_l)?;
        let c_tilde = check_positive("c_tilde", overrides.c_tilde)?;
        let c0 = check_positive("c0", overrides.c0)?;
        let k_tilde = check_positive("k_tilde", overrides.k_tilde)?;
        let d = match overrides.d {
            Some(d) => check_positive("d", d)?,
            None => c0 * c_of_q(5.0 / 3.0)? / 4.0,
        };
        let (c1, c1_source) = match overrides.c1 {
            Some(c1) => (check_positive("c1", c1)?, C1Source::Supplied),
            None => {
                let (value, p) = horizontal_gap(domain, cutoff);
                (value, C1Source::Computed { p })
            }
        };
        Ok(BoundConstants {
            c_l,
            c_tilde,
            c0,
            d,
            c1,
            c1_source,
            lambda1: lambda1(domain, cutoff),
            k_tilde,
        })
    }
}

/// First Stokes eigenvalue: the smallest `|n_check|^2` over nonzero modes
/// of the truncated 3D lattice.
pub fn lambda1(domain: &DomainParams, cutoff: u32) -> f64 {
    let c = cutoff as i32;
    let mut min = f64::INFINITY;
    for n1 in -c..=c {
        for n2 in -c..=c {
            for n3 in -c..=c {
                let n = Mode([n1, n2, n3]);
                if !n.is_zero() {
                    min = min.min(domain.norm_sq(n));
                }
            }
        }
    }
    min
}

/// Lattice-gap constant of the horizontal (2D) spectrum: the ordered
/// eigenvalues `theta1*k1^2 + theta2*k2^2` over nonzero `(k1,k2)` with
/// multiplicity satisfy `lambda_p >= c1 * p`; returns the minimum ratio and
/// the index attaining it.
pub fn horizontal_gap(domain: &DomainParams, cutoff: u32) -> (f64, usize) {
    let theta = domain.theta();
    let c = cutoff as i32;
    let mut spectrum = Vec::with_capacity(((2 * c + 1) * (2 * c + 1) - 1) as usize);
    for k1 in -c..=c {
        for k2 in -c..=c {
            if (k1, k2) != (0, 0) {
                let (x1, x2) = (k1 as f64, k2 as f64);
                spectrum.push(theta[0] * x1 * x1 + theta[1] * x2 * x2);
            }
        }
    }
    spectrum.sort_by(f64::total_cmp);
    let mut best = f64::INFINITY;
    let mut best_p = 0;
    for (i, lam) in spectrum.iter().enumerate() {
        let ratio = lam / (i + 1) as f64;
        if ratio < best {
            best = ratio;
            best_p = i + 1;
        }
    }
    (best, best_p)
}

/// Grashof-type number `sqrt(2) |f| / (nu lambda1)`.
pub fn rho_v(f: &SpectralField, nu: f64, lambda1: f64) -> Result<f64, BoundsError> {
    if !nu.is_finite() || nu <= 0.0 {
        return Err(BoundsError::BadViscosity(nu));
    }
    check_positive("lambda1", lambda1)?;
    Ok(std::f64::consts::SQRT_2 * f.norm_l2() / (nu * lambda1))
}

/// Closed-form bound for c(alpha):
/// `c^2 = 1/(1+alpha^2 c1) * (1/(1+alpha^2 c1) + 1/(alpha^2 c1))`, returned
/// as c. The expression diverges at alpha = 0, which is a typed error; see
/// [`C_ALPHA_PAPER_LIMIT`].
pub fn c_alpha_closed(alpha: f64, c1: f64) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    check_positive("c1", c1)?;
    if alpha == 0.0 {
        return Err(BoundsError::AlphaZeroDivergence);
    }
    let a2c1 = alpha * alpha * c1;
    let head = 1.0 / (1.0 + a2c1);
    Ok((head * (head + 1.0 / a2c1)).sqrt())
}

/// Truncated 2D lattice sum for c(alpha) squared, with a tail bound.
#[derive(Copy, Clone, Debug)]
pub struct LatticeSum {
    /// Partial sum of `1/(1 + alpha^2 |k_check|^2)^2` over the truncated
    /// horizontal lattice; this is the c^2 value, monotone in cutoff.
    pub sum: f64,
    /// Integral-comparison bound on everything the truncation dropped.
    pub tail_bound: f64,
    pub cutoff: u32,
}

/// Partial lattice sum defining c(alpha)^2 over the horizontal modes
/// `k_check = (k1/a1, k2/a2)`, `0 < |k_j| <= cutoff`, with an integral
/// tail bound for the dropped modes.
pub fn c_alpha_lattice(
    domain: &DomainParams,
    alpha: f64,
    cutoff: u32,
) -> Result<LatticeSum, BoundsError> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Err(BoundsError::AlphaZeroDivergence);
    }
    if cutoff == 0 {
        return Err(BoundsError::BadCutoff);
    }
    let theta = domain.theta();
    let c = cutoff as i32;
    let a2 = alpha * alpha;
    let rows: Vec<f64> = (-c..=c)
        .into_par_iter()
        .map(|k1| {
            let mut row = CompensatedSum::new();
            let x1 = k1 as f64;
            for k2 in -c..=c {
                if (k1, k2) == (0, 0) {
                    continue;
                }
                let x2 = k2 as f64;
                let nsq = theta[0] * x1 * x1 + theta[1] * x2 * x2;
                let den = 1.0 + a2 * nsq;
                row.add(1.0 / (den * den));
            }
            row.value()
        })
        .collect();
    let mut total = CompensatedSum::new();
    for row in rows {
        total.add(row);
    }
    let periods = domain.periods();
    let density = periods[0] * periods[1];
    let radius = cutoff as f64 * theta[0].min(theta[1]).sqrt();
    let slop = 0.5 * (theta[0] + theta[1]).sqrt();
    let inner = (radius - slop).max(0.0);
    let tail_bound = density * std::f64::consts::PI / (a2 * (1.0 + a2 * inner * inner));
    Ok(LatticeSum {
        sum: total.value(),
        tail_bound,
        cutoff,
    })
}

/// The constant in `x^q + y^q >= c(q) (x+y)^q` for all `x, y >= 0`:
/// 1 for `0 <= q <= 1` and `2^{1-q}` beyond, sharp at `x = y`.
pub fn c_of_q(q: f64) -> Result<f64, BoundsError> {
    if !q.is_finite() || q < 0.0 {
        return Err(BoundsError::BadExponent(q));
    }
    if q <= 1.0 {
        Ok(1.0)
    } else {
        Ok((2.0f64).powf(1.0 - q))
    }
}

/// The prefactor K(alpha) together with its claimed alpha -> 0 limit K0.
#[derive(Copy, Clone, Debug)]
pub struct KAlpha {
    pub k_alpha: f64,
    /// `((24 sqrt(2) + 1) c_l c_tilde / d)^{3/2}`.
    pub k0: f64,
    /// The c(alpha) value the prefactor was evaluated at.
    pub c_alpha: f64,
}

/// Evaluate `K(alpha) = (c_l c_tilde (24 c(alpha) + 1) / d)^{3/2}` with
/// c(alpha) from the closed form at the constants' lattice-gap value.
pub fn k_alpha(alpha: f64, constants: &BoundConstants) -> Result<KAlpha, BoundsError> {
    let c = c_alpha_closed(alpha, constants.c1)?;
    k_alpha_with(c, constants)
}

/// The same prefactor at an explicitly supplied c(alpha), the hook for the
/// limit mode: passing [`C_ALPHA_PAPER_LIMIT`] makes `k_alpha == k0`.
pub fn k_alpha_with(c_alpha: f64, constants: &BoundConstants) -> Result<KAlpha, BoundsError> {
    check_positive("c_alpha", c_alpha)?;
    let base = constants.c_l * constants.c_tilde / constants.d;
    Ok(KAlpha {
        k_alpha: (base * (24.0 * c_alpha + 1.0)).powf(1.5),
        k0: (base * (24.0 * C_ALPHA_PAPER_LIMIT + 1.0)).powf(1.5),
        c_alpha,
    })
}

/// Everything the bound chain produces for one (alpha, nu, f) input.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub alpha: f64,
    pub nu: f64,
    pub rho_v: f64,
    /// Dissipation level used; the saturating default `c_tilde rho_V^2`
    /// unless a trajectory estimate was supplied.
    pub epsilon: f64,
    pub epsilon_is_default: bool,
    /// Closed-form c(alpha); infinite at alpha = 0, where the divergence
    /// flag is set.
    pub c_alpha_closed: f64,
    pub alpha_zero_divergence: bool,
    pub c_alpha_lattice: LatticeSum,
    pub k_alpha: f64,
    pub k0: f64,
    /// Frame size solving the trace sign-change equation,
    /// `(c_l (24 c(alpha) + 1) epsilon / (d nu^2))^{3/2}`.
    pub n_threshold: f64,
    /// Main-theorem form `K(alpha) (rho_V / nu)^2`.
    pub dh_bound_main: f64,
    /// Derivation-chain form `K(alpha) (rho_V / nu^2)^3`.
    pub dh_bound_derivation: f64,
    /// The alpha = 0 bound `k_tilde (rho_V / nu)^{6/5}`.
    pub dh_bound_alpha0: f64,
    /// Twice the governing Hausdorff bound: the main form for alpha > 0,
    /// the alpha = 0 form at alpha = 0.
    pub df_bound: f64,
    /// `sqrt(|box| / df_bound)`.
    pub length_scale: f64,
    pub constants: BoundConstants,
}

fn guarded_product(prefactor: f64, base: f64, exponent: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        prefactor * base.powf(exponent)
    }
}

/// Evaluate the full bound chain. The lattice sum is reported at the
/// resolution the constants were resolved at (via `lattice_cutoff`). At
/// alpha = 0 the closed-form columns are infinite and flagged; the
/// alpha = 0 bound column is the governing one there.
pub fn dimension_bounds(
    alpha: f64,
    nu: f64,
    f: &SpectralField,
    constants: &BoundConstants,
    lattice_cutoff: u32,
    epsilon_estimate: Option<f64>,
) -> Result<BoundReport, BoundsError> {
    check_alpha(alpha)?;
    if !nu.is_finite() || nu <= 0.0 {
        return Err(BoundsError::BadViscosity(nu));
    }
    if let Some(eps) = epsilon_estimate {
        if !eps.is_finite() || eps < 0.0 {
            return Err(BoundsError::BadEpsilon(eps));
        }
    }
    let rho = rho_v(f, nu, constants.lambda1)?;
    let epsilon = match epsilon_estimate {
        Some(eps) => eps,
        None => constants.c_tilde * rho * rho,
    };
    let diverges = alpha == 0.0;
    let (c_closed, k) = if diverges {
        let k = k_alpha_with(C_ALPHA_PAPER_LIMIT, constants)?;
        (
            f64::INFINITY,
            KAlpha {
                k_alpha: f64::INFINITY,
                k0: k.k0,
                c_alpha: f64::INFINITY,
            },
        )
    } else {
        let c = c_alpha_closed(alpha, constants.c1)?;
        (c, k_alpha_with(c, constants)?)
    };
    let lattice = if diverges {
        LatticeSum {
            sum: f64::INFINITY,
            tail_bound: f64::INFINITY,
            cutoff: lattice_cutoff,
        }
    } else {
        c_alpha_lattice(f.domain(), alpha, lattice_cutoff)?
    };
    let n_factor = if diverges {
        f64::INFINITY
    } else {
        constants.c_l / constants.d * (24.0 * k.c_alpha + 1.0)
    };
    let n_threshold = if epsilon == 0.0 {
        0.0
    } else {
        (n_factor * epsilon / (nu * nu)).powf(1.5)
    };
    let dh_main = guarded_product(k.k_alpha, rho / nu, 2.0);
    let dh_derivation = guarded_product(k.k_alpha, rho / (nu * nu), 3.0);
    let dh_alpha0 = guarded_product(constants.k_tilde, rho / nu, 6.0 / 5.0);
    let governing = if diverges { dh_alpha0 } else { dh_main };
    let df_bound = 2.0 * governing;
    let length_scale = if df_bound > 0.0 {
        (f.domain().volume() / df_bound).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(BoundReport {
        alpha,
        nu,
        rho_v: rho,
        epsilon,
        epsilon_is_default: epsilon_estimate.is_none(),
        c_alpha_closed: c_closed,
        alpha_zero_divergence: diverges,
        c_alpha_lattice: lattice,
        k_alpha: k.k_alpha,
        k0: k.k0,
        n_threshold,
        dh_bound_main: dh_main,
        dh_bound_derivation: dh_derivation,
        dh_bound_alpha0: dh_alpha0,
        df_bound,
        length_scale,
        constants: *constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> DomainParams {
        DomainParams::unit()
    }

    fn generic_box() -> DomainParams {
        DomainParams::new(1.8426034353481495, 0.5790901244252229).unwrap()
    }

    fn unit_norm_forcing(domain: &DomainParams) -> SpectralField {
        let c = Complex64::new(0.5, 0.0);
        SpectralField::from_modes(
            domain.clone(),
            2,
            &[(
                Mode([0, 0, 1]),
                [c, Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0)],
            )],
        )
        .unwrap()
    }

    #[test]
    fn rho_v_is_homogeneous_and_matches_hand_values() {
        let domain = unit_box();
        let zero = SpectralField::zero(domain.clone(), 2).unwrap();
        assert_eq!(rho_v(&zero, 1.0, 1.0).unwrap(), 0.0);

        let f = unit_norm_forcing(&domain);
        assert!((f.norm_l2() - 1.0).abs() <= 1e-15);
        let r = rho_v(&f, 1.0, 1.0).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() <= 1e-15);

        let mut scaled = f.clone();
        scaled.scale(-3.0);
        let rs = rho_v(&scaled, 1.0, 1.0).unwrap();
        assert!((rs - 3.0 * r).abs() <= 1e-14);

        assert!(matches!(
            rho_v(&f, 0.0, 1.0),
            Err(BoundsError::BadViscosity(_))
        ));
        assert!(matches!(
            rho_v(&f, 1.0, 0.0),
            Err(BoundsError::BadConstant { name: "lambda1", .. })
        ));
    }

    #[test]
    fn closed_form_matches_hand_evaluations() {
        let c = c_alpha_closed(1.0, 1.0).unwrap();
        assert!((c * c - 0.75).abs() <= 1e-15);

        let c10 = c_alpha_closed(10.0, 1.0).unwrap();
        let want = 201.0 / 1020100.0;
        assert!((c10 * c10 - want).abs() <= 1e-15 * want.max(1.0));
        assert!((c10 * c10 - 1.970395059307911e-4).abs() <= 1e-15);

        let mut prev = f64::INFINITY;
        for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let c = c_alpha_closed(alpha, 0.37).unwrap();
            assert!(c < prev, "c({alpha}) = {c} not decreasing");
            prev = c;
        }

        assert!(matches!(
            c_alpha_closed(0.0, 1.0),
            Err(BoundsError::AlphaZeroDivergence)
        ));
        assert!(matches!(
            c_alpha_closed(-1.0, 1.0),
            Err(BoundsError::BadAlpha(_))
        ));
        assert!(matches!(
            c_alpha_closed(1.0, 0.0),
            Err(BoundsError::BadConstant { name: "c1", .. })
        ));
    }

    #[test]
    fn lattice_sum_respects_the_closed_form_bound() {
        for domain in [unit_box(), generic_box()] {
            let cutoff = 24;
            let (c1, _) = horizontal_gap(&domain, cutoff);
            for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
                let partial = c_alpha_lattice(&domain, alpha, cutoff).unwrap();
                let closed = c_alpha_closed(alpha, c1).unwrap();
                assert!(
                    partial.sum <= closed * closed,
                    "alpha {alpha}: sum {} vs bound {}",
                    partial.sum,
                    closed * closed
                );
            }
        }
    }

    #[test]
    fn lattice_sum_value_monotonicity_and_tail() {
        let domain = unit_box();
        let s24 = c_alpha_lattice(&domain, 1.0, 24).unwrap();
        assert!((s24.sum - 2.2223065291565278).abs() <= 1e-13);

        let s8 = c_alpha_lattice(&domain, 1.0, 8).unwrap();
        assert!(s8.sum < s24.sum);

        let s64 = c_alpha_lattice(&domain, 1.0, 64).unwrap();
        let s128 = c_alpha_lattice(&domain, 1.0, 128).unwrap();
        assert!(s128.sum > s64.sum);
        assert!(s128.sum - s64.sum < s64.tail_bound);

        let large = c_alpha_lattice(&domain, 100.0, 8).unwrap();
        let first_shell = 4.0 / (1.0 + 100.0f64 * 100.0).powi(2);
        assert!((large.sum - first_shell).abs() <= 1.1 * first_shell);
    }

    #[test]
    fn corollary_constant_is_piecewise_and_sharp() {
        assert_eq!(c_of_q(0.0).unwrap(), 1.0);
        assert_eq!(c_of_q(1.0).unwrap(), 1.0);
        assert_eq!(c_of_q(0.4).unwrap(), 1.0);

        let c53 = c_of_q(5.0 / 3.0).unwrap();
        assert_eq!(c53, (2.0f64).powf(-2.0 / 3.0));
        assert!((c53 - 0.6299605249474366).abs() <= 1e-15);
        assert!((c53 - (0.25f64).powf(1.0 / 3.0)).abs() <= 2e-16);

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let q: f64 = rng.gen_range(1e-6..=4.0);
            let x: f64 = rng.gen_range(0.0..10.0);
            let y: f64 = rng.gen_range(0.0..10.0);
            let lhs = x.powf(q) + y.powf(q);
            let rhs = c_of_q(q).unwrap() * (x + y).powf(q);
            assert!(
                lhs >= rhs - 1e-15 * rhs.abs().max(1.0),
                "violation at q={q} x={x} y={y}: {lhs} < {rhs}"
            );
        }
        for _ in 0..100 {
            let q: f64 = rng.gen_range(1.0..4.0);
            let x: f64 = rng.gen_range(0.1..10.0);
            let lhs = 2.0 * x.powf(q);
            let rhs = c_of_q(q).unwrap() * (2.0 * x).powf(q);
            assert!((lhs - rhs).abs() <= 1e-15 * lhs, "q={q} x={x}");
        }

        assert!(matches!(c_of_q(-0.5), Err(BoundsError::BadExponent(_))));
    }

    #[test]
    fn prefactor_reproduces_k0_in_limit_mode() {
        let unit = ConstantOverrides {
            d: Some(1.0),
            c1: Some(1.0),
            ..ConstantOverrides::default()
        };
        let constants = BoundConstants::resolve(&unit_box(), 4, &unit).unwrap();
        let k = k_alpha_with(C_ALPHA_PAPER_LIMIT, &constants).unwrap();
        assert_eq!(k.k_alpha, k.k0);
        assert!((k.k0 - 206.54055279528569).abs() <= 1e-12 * k.k0);

        let mut prev = f64::INFINITY;
        for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let k = k_alpha(alpha, &constants).unwrap();
            assert!(k.k_alpha < prev, "K({alpha}) not decreasing");
            assert!(k.k_alpha > 0.0);
            prev = k.k_alpha;
        }
    }

    #[test]
    fn constants_resolution_computes_the_lattice_gaps() {
        let constants =
            BoundConstants::resolve(&unit_box(), 8, &ConstantOverrides::default()).unwrap();
        assert_eq!(constants.lambda1, 1.0);
        assert_eq!(constants.c1, 0.25);
        assert_eq!(constants.c1_source, C1Source::Computed { p: 4 });
        let expected_d = c_of_q(5.0 / 3.0).unwrap() / 4.0;
        assert_eq!(constants.d, expected_d);
        assert!((constants.d - 0.15749013123685915).abs() <= 1e-16);

        let generic =
            BoundConstants::resolve(&generic_box(), 8, &ConstantOverrides::default()).unwrap();
        let theta2 = generic_box().theta()[1];
        assert!((generic.lambda1 - theta2).abs() <= 1e-16);
        assert!((generic.c1 - 0.12945345503232111).abs() <= 1e-15);
        assert_eq!(generic.c1_source, C1Source::Computed { p: 10 });

        let (c1, _) = horizontal_gap(&generic_box(), 8);
        let theta = generic_box().theta();
        let mut spectrum = Vec::new();
        for k1 in -8i32..=8 {
            for k2 in -8i32..=8 {
                if (k1, k2) != (0, 0) {
                    spectrum
                        .push(theta[0] * (k1 * k1) as f64 + theta[1] * (k2 * k2) as f64);
                }
            }
        }
        spectrum.sort_by(f64::total_cmp);
        for (i, lam) in spectrum.iter().enumerate() {
            assert!(*lam >= c1 * (i + 1) as f64 - 1e-15);
        }

        let bad = ConstantOverrides {
            c_l: -1.0,
            ..ConstantOverrides::default()
        };
        assert!(matches!(
            BoundConstants::resolve(&unit_box(), 8, &bad),
            Err(BoundsError::BadConstant { name: "c_l", .. })
        ));
    }

    #[test]
    fn report_matches_the_frozen_pinned_chain() {
        let domain = unit_box();
        let f = unit_norm_forcing(&domain);
        let overrides = ConstantOverrides {
            c1: Some(1.0),
            ..ConstantOverrides::default()
        };
        let constants = BoundConstants::resolve(&domain, 8, &overrides).unwrap();
        let report = dimension_bounds(1.0, 1.0, &f, &constants, 24, None).unwrap();

        let rel = 1e-12;
        assert!((report.rho_v - std::f64::consts::SQRT_2).abs() <= rel);
        assert!(report.epsilon_is_default);
        assert!((report.epsilon - 2.0).abs() <= rel * 2.0);
        let c = report.c_alpha_closed;
        assert!((c * c - 0.75).abs() <= rel);
        assert!(!report.alpha_zero_divergence);
        assert!((report.k_alpha - 1626.8393083431572).abs() <= rel * report.k_alpha);
        assert!((report.k0 - 3304.6488447245711).abs() <= rel * report.k0);
        assert!((report.n_threshold - 4601.396427321117).abs() <= rel * report.n_threshold);
        assert!((report.dh_bound_main - 3253.6786166863144).abs() <= rel * report.dh_bound_main);
        assert!(
            (report.dh_bound_derivation - 4601.396427321117).abs()
                <= rel * report.dh_bound_derivation
        );
        assert!(
            (report.dh_bound_alpha0 - 1.5157165665103981).abs() <= rel * report.dh_bound_alpha0
        );
        assert_eq!(report.df_bound, 2.0 * report.dh_bound_main);
        assert!(
            (report.length_scale - 0.19523940620859720).abs() <= rel * report.length_scale
        );
    }

    #[test]
    fn report_handles_the_divergent_and_degenerate_cases() {
        let domain = unit_box();
        let f = unit_norm_forcing(&domain);
        let constants =
            BoundConstants::resolve(&domain, 8, &ConstantOverrides::default()).unwrap();

        let at_zero = dimension_bounds(0.0, 1.0, &f, &constants, 8, None).unwrap();
        assert!(at_zero.alpha_zero_divergence);
        assert!(at_zero.c_alpha_closed.is_infinite());
        assert!(at_zero.k_alpha.is_infinite());
        assert!(at_zero.dh_bound_main.is_infinite());
        assert!(at_zero.dh_bound_alpha0.is_finite());
        assert_eq!(at_zero.df_bound, 2.0 * at_zero.dh_bound_alpha0);
        assert!(at_zero.k0.is_finite());
        assert!(at_zero.length_scale.is_finite());

        let zero_f = SpectralField::zero(domain.clone(), 2).unwrap();
        let empty = dimension_bounds(0.5, 1.0, &zero_f, &constants, 8, None).unwrap();
        assert_eq!(empty.rho_v, 0.0);
        assert_eq!(empty.epsilon, 0.0);
        assert_eq!(empty.n_threshold, 0.0);
        assert_eq!(empty.dh_bound_main, 0.0);
        assert_eq!(empty.dh_bound_derivation, 0.0);
        assert_eq!(empty.dh_bound_alpha0, 0.0);
        assert_eq!(empty.df_bound, 0.0);
        assert!(empty.length_scale.is_infinite());

        let empty_zero_alpha = dimension_bounds(0.0, 1.0, &zero_f, &constants, 8, None).unwrap();
        assert_eq!(empty_zero_alpha.n_threshold, 0.0);
        assert!(!empty_zero_alpha.n_threshold.is_nan());

        let eps = Some(0.125);
        let base = dimension_bounds(0.5, 1.0, &f, &constants, 8, eps).unwrap();
        let doubled = dimension_bounds(0.5, 2.0, &f, &constants, 8, eps).unwrap();
        assert!(!base.epsilon_is_default);
        let ratio = base.n_threshold / doubled.n_threshold;
        assert!((ratio - 8.0).abs() <= 1e-12 * 8.0, "ratio {ratio}");
    }

    #[test]
    fn length_scales_compare_as_the_dimensions_do() {
        let domain = unit_box();
        let f = unit_norm_forcing(&domain);
        let constants =
            BoundConstants::resolve(&domain, 8, &ConstantOverrides::default()).unwrap();
        let filtered = dimension_bounds(0.7, 0.05, &f, &constants, 8, None).unwrap();
        let limit = dimension_bounds(0.0, 0.05, &f, &constants, 8, None).unwrap();
        if filtered.df_bound >= limit.df_bound {
            assert!(filtered.length_scale <= limit.length_scale);
        } else {
            assert!(filtered.length_scale >= limit.length_scale);
        }
    }
}
