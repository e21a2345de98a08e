//! Wavenumber lattice of the periodic box and the per-mode operator blocks.
//!
//! The box is `[0, 2*pi*a1] x [0, 2*pi*a2] x [0, 2*pi*a3]` with `a1 = 1`.
//! A lattice point `n` in `Z^3` carries the scaled wavevector
//! `n_check = (n1/a1, n2/a2, n3/a3)` and every norm below is the weighted sum
//! `|n_check|^2 = theta1*n1^2 + theta2*n2^2 + theta3*n3^2` with
//! `theta_j = 1/a_j^2`. The weights are also kept as exact rationals so that
//! norm-equality questions (which decide resonance classes) never hinge on
//! floating-point rounding.

use nalgebra::Matrix3;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::tolerances::PERIOD_RANGE;
use crate::{Coeff, Complex64};

/// Integer lattice mode `n = (n1, n2, n3)`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Mode(pub [i32; 3]);

impl Mode {
    pub fn new(n1: i32, n2: i32, n3: i32) -> Self {
        Mode([n1, n2, n3])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    /// True when the mode lies in the cube `max_j |n_j| <= cutoff`.
    pub fn in_cube(&self, cutoff: u32) -> bool {
        self.0.iter().all(|&c| c.unsigned_abs() <= cutoff)
    }

    /// True for barotropic (vertically averaged) modes, `n3 = 0`.
    pub fn is_horizontal(&self) -> bool {
        self.0[2] == 0
    }
}

impl Add for Mode {
    type Output = Mode;
    fn add(self, rhs: Mode) -> Mode {
        Mode([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

impl Sub for Mode {
    type Output = Mode;
    fn sub(self, rhs: Mode) -> Mode {
        Mode([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ])
    }
}

impl Neg for Mode {
    type Output = Mode;
    fn neg(self) -> Mode {
        Mode([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// A mode together with its scaled wavevector and weighted norm.
#[derive(Copy, Clone, Debug)]
pub struct WaveVector {
    pub n: Mode,
    /// `(n1/a1, n2/a2, n3/a3)`.
    pub check: [f64; 3],
    /// `theta1*n1^2 + theta2*n2^2 + theta3*n3^2`.
    pub norm_sq: f64,
    pub norm: f64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("box period a{index} = {value} is outside the admissible range [{lo}, {hi}]")]
    PeriodOutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("box period a{index} = {value} is not a finite positive number")]
    PeriodNotFinite { index: usize, value: f64 },
    #[error("rational weight theta{index} must be positive, got {num}/{den}")]
    NonPositiveWeight { index: usize, num: i64, den: i64 },
    #[error("the zero mode has no direction-dependent operator block")]
    ZeroMode,
    #[error("filter parameter alpha = {0} must be finite and nonnegative")]
    BadAlpha(f64),
}

/// Geometry of the periodic box: float and exact-rational lattice weights.
#[derive(Clone, Debug)]
pub struct DomainParams {
    a: [f64; 3],
    theta: [f64; 3],
    theta_exact: [BigRational; 3],
}

impl PartialEq for DomainParams {
    fn eq(&self, other: &Self) -> bool {
        self.theta_exact == other.theta_exact
    }
}

fn ratio_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

impl DomainParams {
    /// Box with periods `(1, a2, a3)`. The weights `theta_j = 1/a_j^2` are
    /// formed exactly from the binary representation of each period.
    pub fn new(a2: f64, a3: f64) -> Result<Self, LatticeError> {
        let (lo, hi) = PERIOD_RANGE;
        let a = [1.0, a2, a3];
        for (index, &value) in a.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(LatticeError::PeriodNotFinite {
                    index: index + 1,
                    value,
                });
            }
            if !(lo..=hi).contains(&value) {
                return Err(LatticeError::PeriodOutOfRange {
                    index: index + 1,
                    value,
                    lo,
                    hi,
                });
            }
        }
        let theta_exact = a.map(|aj| {
            let r = ratio_from_f64(aj);
            BigRational::one() / (&r * &r)
        });
        let theta = a.map(|aj| 1.0 / (aj * aj));
        Ok(DomainParams {
            a,
            theta,
            theta_exact,
        })
    }

    /// Unit cube `a = (1, 1, 1)`.
    pub fn unit() -> Self {
        Self::new(1.0, 1.0).expect("unit box is admissible")
    }

    /// Box specified by exact rational weights `theta2 = num/den` and likewise
    /// `theta3`, for lattices whose periods are irrational (`a_j = 1/sqrt(theta_j)`).
    /// The float periods are the correctly rounded square roots.
    pub fn from_theta_ratios(
        theta2: (i64, i64),
        theta3: (i64, i64),
    ) -> Result<Self, LatticeError> {
        let mut theta_exact = [
            BigRational::one(),
            BigRational::one(),
            BigRational::one(),
        ];
        let mut theta = [1.0, 1.0, 1.0];
        let mut a = [1.0, 1.0, 1.0];
        for (slot, (num, den)) in [(1, theta2), (2, theta3)] {
            if num <= 0 || den <= 0 {
                return Err(LatticeError::NonPositiveWeight {
                    index: slot + 1,
                    num,
                    den,
                });
            }
            theta_exact[slot] =
                BigRational::new(BigInt::from(num), BigInt::from(den));
            theta[slot] = num as f64 / den as f64;
            a[slot] = 1.0 / theta[slot].sqrt();
        }
        let (lo, hi) = PERIOD_RANGE;
        for (index, &value) in a.iter().enumerate() {
            if !(lo..=hi).contains(&value) {
                return Err(LatticeError::PeriodOutOfRange {
                    index: index + 1,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(DomainParams {
            a,
            theta,
            theta_exact,
        })
    }

    pub fn periods(&self) -> [f64; 3] {
        self.a
    }

    pub fn theta(&self) -> [f64; 3] {
        self.theta
    }

    pub fn theta_exact(&self) -> &[BigRational; 3] {
        &self.theta_exact
    }

    /// Volume of the box, `(2*pi)^3 * a1 * a2 * a3`.
    pub fn volume(&self) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        two_pi.powi(3) * self.a[0] * self.a[1] * self.a[2]
    }

    /// Scaled wavevector `n_check`.
    pub fn check(&self, n: Mode) -> [f64; 3] {
        [
            n.0[0] as f64 / self.a[0],
            n.0[1] as f64 / self.a[1],
            n.0[2] as f64 / self.a[2],
        ]
    }

    /// Weighted norm `theta1*n1^2 + theta2*n2^2 + theta3*n3^2`.
    pub fn norm_sq(&self, n: Mode) -> f64 {
        let [n1, n2, n3] = n.0.map(|c| c as f64);
        self.theta[0] * (n1 * n1) + self.theta[1] * (n2 * n2) + self.theta[2] * (n3 * n3)
    }

    /// The same norm in exact rational arithmetic.
    pub fn norm_sq_exact(&self, n: Mode) -> BigRational {
        let mut acc = BigRational::zero();
        for j in 0..3 {
            let c = BigInt::from(n.0[j]);
            acc += &self.theta_exact[j] * BigRational::from_integer(&c * &c);
        }
        acc
    }

    pub fn wavevector(&self, n: Mode) -> WaveVector {
        let norm_sq = self.norm_sq(n);
        WaveVector {
            n,
            check: self.check(n),
            norm_sq,
            norm: norm_sq.sqrt(),
        }
    }

    /// Smallest nonzero Stokes eigenvalue `lambda_1 = min_j theta_j`.
    ///
    /// The weighted norm of any nonzero integer vector is at least
    /// `min_j theta_j`, attained at the corresponding unit vector, so no
    /// lattice scan is needed.
    pub fn lambda1(&self) -> f64 {
        self.theta.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Sorted nonzero horizontal spectrum `{ |k_check|^2 : k3 = 0, |k_j| <= cutoff }`,
    /// each eigenvalue listed once per lattice point.
    pub fn horizontal_spectrum(&self, cutoff: u32) -> Vec<f64> {
        let c = cutoff as i32;
        let mut out = Vec::with_capacity(((2 * c + 1) * (2 * c + 1) - 1) as usize);
        for k1 in -c..=c {
            for k2 in -c..=c {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                out.push(self.norm_sq(Mode::new(k1, k2, 0)));
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).expect("finite norms"));
        out
    }

    /// Leray projection block `P_n = I - n_check n_check^T / |n_check|^2`.
    pub fn leray_projector(&self, n: Mode) -> Result<ModeMatrix, LatticeError> {
        if n.is_zero() {
            return Err(LatticeError::ZeroMode);
        }
        let w = self.wavevector(n);
        let mut m = Matrix3::identity();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] -= w.check[i] * w.check[j] / w.norm_sq;
            }
        }
        Ok(ModeMatrix {
            kind: ModeMatrixKind::Leray,
            m,
        })
    }

    /// Curl block `R_n`, acting as `R_n v = n_check x v`; the curl of the mode
    /// is `i R_n v_n`.
    pub fn curl_block(&self, n: Mode) -> Result<ModeMatrix, LatticeError> {
        if n.is_zero() {
            return Err(LatticeError::ZeroMode);
        }
        let c = self.check(n);
        Ok(ModeMatrix {
            kind: ModeMatrixKind::Curl,
            m: cross_matrix(c),
        })
    }

    /// Smoothing scalar `r_n = 1 / (1 + alpha^2 |n_check|^2)` of the inverse
    /// Helmholtz filter. Defined for every mode including `n = 0`.
    pub fn helmholtz_scalar(&self, n: Mode, alpha: f64) -> Result<f64, LatticeError> {
        check_alpha(alpha)?;
        Ok(1.0 / (1.0 + alpha * alpha * self.norm_sq(n)))
    }

    /// Diagonal Helmholtz block `r_n I`.
    pub fn helmholtz_block(&self, n: Mode, alpha: f64) -> Result<ModeMatrix, LatticeError> {
        let r = self.helmholtz_scalar(n, alpha)?;
        Ok(ModeMatrix {
            kind: ModeMatrixKind::Helmholtz,
            m: Matrix3::identity() * r,
        })
    }

    /// Dispersion frequency
    /// `omega_alpha(n) = n_check_3 / ((1 + alpha^2 |n_check|^2) |n_check|)`,
    /// the nonzero eigenfrequency of the filtered Coriolis block. Odd in `n3`
    /// and zero exactly on barotropic modes.
    pub fn dispersion(&self, n: Mode, alpha: f64) -> Result<f64, LatticeError> {
        if n.is_zero() {
            return Err(LatticeError::ZeroMode);
        }
        check_alpha(alpha)?;
        let w = self.wavevector(n);
        Ok(w.check[2] / ((1.0 + alpha * alpha * w.norm_sq) * w.norm))
    }

    /// Filtered Coriolis block `M_n = r_n P_n J P_n` with
    /// `J = e3 x .` restricted to the mode. Skew block with eigenvalues
    /// `{0, +i omega, -i omega}`.
    pub fn coriolis_block(&self, n: Mode, alpha: f64) -> Result<ModeMatrix, LatticeError> {
        let p = self.leray_projector(n)?;
        let r = self.helmholtz_scalar(n, alpha)?;
        let m = (p.m * e3_cross_matrix() * p.m) * r;
        Ok(ModeMatrix {
            kind: ModeMatrixKind::Coriolis,
            m,
        })
    }

    /// Orthonormal helical pair `h_plus, h_minus` spanning the plane
    /// perpendicular to `n_check`, satisfying
    /// `M_n h_s = i s omega h_s` for `s = +1, -1`.
    pub fn helical_basis(&self, n: Mode) -> Result<HelicalBasis, LatticeError> {
        if n.is_zero() {
            return Err(LatticeError::ZeroMode);
        }
        let w = self.wavevector(n);
        let e1 = if n.0[0] == 0 && n.0[1] == 0 {
            [1.0, 0.0, 0.0]
        } else {
            let raw = cross(w.check, [0.0, 0.0, 1.0]);
            let len = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
            [raw[0] / len, raw[1] / len, raw[2] / len]
        };
        let unit = [w.check[0] / w.norm, w.check[1] / w.norm, w.check[2] / w.norm];
        let e2 = cross(unit, e1);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut plus = [Complex64::new(0.0, 0.0); 3];
        let mut minus = [Complex64::new(0.0, 0.0); 3];
        for j in 0..3 {
            plus[j] = Complex64::new(e1[j] * inv_sqrt2, -e2[j] * inv_sqrt2);
            minus[j] = Complex64::new(e1[j] * inv_sqrt2, e2[j] * inv_sqrt2);
        }
        Ok(HelicalBasis { plus, minus })
    }
}

/// Helical eigenvectors of one mode's Coriolis block.
#[derive(Clone, Debug)]
pub struct HelicalBasis {
    pub plus: Coeff,
    pub minus: Coeff,
}

impl HelicalBasis {
    pub fn vector(&self, sign: i8) -> &Coeff {
        if sign >= 0 {
            &self.plus
        } else {
            &self.minus
        }
    }
}

/// Which operator a per-mode 3x3 block represents.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum ModeMatrixKind {
    Leray,
    Curl,
    Coriolis,
    Helmholtz,
    Propagator,
}

/// Real 3x3 operator block attached to one mode.
#[derive(Clone, Debug)]
pub struct ModeMatrix {
    kind: ModeMatrixKind,
    m: Matrix3<f64>,
}

impl ModeMatrix {
    pub(crate) fn from_parts(kind: ModeMatrixKind, m: Matrix3<f64>) -> Self {
        ModeMatrix { kind, m }
    }

    pub fn kind(&self) -> ModeMatrixKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Apply the block to a complex coefficient vector.
    pub fn apply(&self, v: Coeff) -> Coeff {
        apply_real3(&self.m, v)
    }
}

pub(crate) fn apply_real3(m: &Matrix3<f64>, v: Coeff) -> Coeff {
    let mut out = crate::ZERO_COEFF;
    for i in 0..3 {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..3 {
            re += m[(i, j)] * v[j].re;
            im += m[(i, j)] * v[j].im;
        }
        out[i] = Complex64::new(re, im);
    }
    out
}

/// Matrix of the map `v -> e3 x v`.
pub fn e3_cross_matrix() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

pub(crate) fn cross_matrix(a: [f64; 3]) -> Matrix3<f64> {
    Matrix3::new(0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0)
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), LatticeError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(LatticeError::BadAlpha(alpha));
    }
    Ok(())
}
