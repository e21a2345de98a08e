//! Numerical tolerances shared across the crate.
//!
//! Relative tolerances are applied against a problem-dependent scale (a norm
//! or coefficient magnitude) that the caller supplies; absolute ones are used
//! as-is. Keeping them in one place makes the acceptance thresholds auditable.

/// Relative bound on the conjugate-symmetry residual of a stored field.
pub const REALITY_REL: f64 = 1e-14;

/// Relative bound on the divergence residual `|n_check . v_n| / (|n_check| |v_n|)`.
pub const DIVERGENCE_REL: f64 = 1e-12;

/// Relative agreement required between the direct-convolution and dealiased
/// FFT evaluations of a bilinear term.
pub const PATH_EQUIVALENCE: f64 = 1e-10;

/// Default window for the near-resonance test `|D_l| <= RESONANCE_TOL`.
pub const RESONANCE_TOL: f64 = 1e-9;

/// Bound on per-mode propagator identities (group law, unitarity, commutation).
pub const PROPAGATOR_ID: f64 = 1e-13;

/// Relative bound on the bilinear-form identity and the energy orthogonality
/// identities checked by the verification routines.
pub const FORM_IDENTITY_REL: f64 = 1e-12;

/// Rank tolerance of the modified Gram-Schmidt pass in the variational solver:
/// a direction whose orthogonalized remainder falls below this multiple of its
/// original norm is treated as linearly dependent.
pub const GRAM_SCHMIDT_RANK_REL: f64 = 1e-12;

/// Largest enumeration cutoff accepted without an explicit override; the triad
/// scan is cubic in the cutoff and becomes a footgun beyond this.
pub const ENUMERATION_CUTOFF_LIMIT: u32 = 24;

/// Admissible box-period range enforced by the default domain constructor.
pub const PERIOD_RANGE: (f64, f64) = (0.1, 10.0);
