//! Time integration of the filtered rotating system and its resonant-limit
//! reduction.
//!
//! The linear part, viscosity plus rotation, is handled exactly: per mode it
//! is `nu |n_check|^2 I + Omega M_n`, whose exponential is the viscous decay
//! scalar times the same cosine/sine rotation block as the propagator. The
//! bounded convolution term is advanced with classical RK4 in the
//! integrating-factor (Lawson) frame, so the scheme is unconditionally
//! stable in the stiff linear part and fourth order in the nonlinearity.
//! The same stepper drives the resonant-limit system, whose linear part is
//! viscosity alone and whose nonlinearity is the catalytic form, and the
//! batched variational system used for trace estimates.

use nalgebra::Matrix3;

use crate::field::{FieldError, SpectralField};
use crate::lattice::{apply_real3, check_alpha, cross_matrix, DomainParams, LatticeError};
use crate::nonlinear::{BilinearWorkspace, ConvolutionPath};
use crate::resonance::{ResonanceError, ResonantTriadSet};
use crate::sums::CompensatedSum;
use crate::tolerances::GRAM_SCHMIDT_RANK_REL;
use crate::{Coeff, Mode};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("viscosity nu = {0} must be finite and nonnegative")]
    BadViscosity(f64),
    #[error("rotation rate {0} must be finite and nonnegative")]
    BadRotationRate(f64),
    #[error("time step dt = {0} must be finite and positive")]
    BadTimeStep(f64),
    #[error("horizon t_end = {0} must be finite and positive")]
    BadHorizon(f64),
    #[error("t_end = {t_end} is not an integer number of steps dt = {dt}")]
    MisalignedHorizon { t_end: f64, dt: f64 },
    #[error("checkpoint cadence must be at least one step")]
    BadCadence,
    #[error("truncation cutoff must be at least 1")]
    BadCutoff,
    #[error("forcing must not contain the zero mode")]
    ForcingZeroMode,
    #[error("forcing mode {n} lies outside the cutoff-{cutoff} cube")]
    ForcingOutsideLattice { n: Mode, cutoff: u32 },
    #[error("forcing mode {n} is listed twice")]
    ForcingDuplicate { n: Mode },
    #[error("forcing coefficient at {n} is not perpendicular to its wavevector")]
    ForcingNotDivergenceFree { n: Mode },
    #[error("state became non-finite at t = {t}")]
    BlowUp { t: f64 },
    #[error("state does not live on the integrator's lattice")]
    StateMismatch,
    #[error("variational frame lost rank at step {step}, vector {index}")]
    RankLoss { step: u64, index: usize },
    #[error("frame of {n} vectors exceeds the {max} available basis directions")]
    FrameTooLarge { n: usize, max: usize },
    #[error("comparison base config must have alpha = 0, got {0}")]
    BaseAlphaNotZero(f64),
    #[error("triad set does not match the run: {0}")]
    StaleTriadSet(&'static str),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Resonance(#[from] ResonanceError),
}

/// Time-stepping scheme tag. A single scheme is provided; the tag keeps run
/// provenance explicit.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    LawsonRk4,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::LawsonRk4 => "lawson-rk4",
        }
    }
}

/// Parameters of one integration run.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub nu: f64,
    pub omega_big: f64,
    pub alpha: f64,
    pub cutoff: u32,
    pub dt: f64,
    pub t_end: f64,
    pub forcing: Vec<(Mode, Coeff)>,
    pub scheme: Scheme,
    pub path: ConvolutionPath,
    /// Drop the convolution term; the run then follows the closed-form
    /// linear flow exactly.
    pub linear_only: bool,
    /// Steps between diagnostics rows.
    pub checkpoint_every: u32,
    /// Consumed by callers that draw initial data; the stepper itself is
    /// deterministic and never reads it.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nu: 1.0,
            omega_big: 0.0,
            alpha: 0.0,
            cutoff: 2,
            dt: 1e-2,
            t_end: 1.0,
            forcing: Vec::new(),
            scheme: Scheme::LawsonRk4,
            path: ConvolutionPath::Direct,
            linear_only: false,
            checkpoint_every: 10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Validate every parameter against the given lattice. Viscosity zero is
    /// admitted so the inviscid conservation checks can run; production
    /// configurations use a strictly positive value.
    pub fn validate(&self, domain: &DomainParams) -> Result<(), IntegrateError> {
        if !self.nu.is_finite() || self.nu < 0.0 {
            return Err(IntegrateError::BadViscosity(self.nu));
        }
        if !self.omega_big.is_finite() || self.omega_big < 0.0 {
            return Err(IntegrateError::BadRotationRate(self.omega_big));
        }
        check_alpha(self.alpha)?;
        if self.cutoff == 0 {
            return Err(IntegrateError::BadCutoff);
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(IntegrateError::BadTimeStep(self.dt));
        }
        if !self.t_end.is_finite() || self.t_end <= 0.0 {
            return Err(IntegrateError::BadHorizon(self.t_end));
        }
        self.steps()?;
        if self.checkpoint_every == 0 {
            return Err(IntegrateError::BadCadence);
        }
        let c = self.cutoff as i32;
        let mut seen = Vec::with_capacity(self.forcing.len());
        for &(n, v) in &self.forcing {
            if n.is_zero() {
                return Err(IntegrateError::ForcingZeroMode);
            }
            if n.0.iter().any(|&x| x.abs() > c) {
                return Err(IntegrateError::ForcingOutsideLattice {
                    n,
                    cutoff: self.cutoff,
                });
            }
            if seen.contains(&n.0) {
                return Err(IntegrateError::ForcingDuplicate { n });
            }
            seen.push(n.0);
            let w = domain.wavevector(n);
            let dot_re = w.check[0] * v[0].re + w.check[1] * v[1].re + w.check[2] * v[2].re;
            let dot_im = w.check[0] * v[0].im + w.check[1] * v[1].im + w.check[2] * v[2].im;
            let mass = (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt();
            if (dot_re * dot_re + dot_im * dot_im).sqrt() > 1e-12 * w.norm * mass {
                return Err(IntegrateError::ForcingNotDivergenceFree { n });
            }
        }
        Ok(())
    }

    /// Number of steps covering `[0, t_end]`; `t_end` must be an integer
    /// multiple of `dt` so the exponential factor tables stay fixed.
    pub fn steps(&self) -> Result<u64, IntegrateError> {
        let ratio = self.t_end / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return Err(IntegrateError::MisalignedHorizon {
                t_end: self.t_end,
                dt: self.dt,
            });
        }
        Ok(steps as u64)
    }

    /// Stiffness metric `dt * nu * max |n_check|^2` of the viscous part,
    /// recorded with run output. The exponential treatment keeps the scheme
    /// stable at any value; the metric documents how stiff the run was.
    pub fn stiffness(&self, domain: &DomainParams) -> f64 {
        let c = self.cutoff as i32;
        let corner = Mode([c, c, c]);
        self.dt * self.nu * domain.norm_sq(corner)
    }

    /// Assemble the forcing field on the lattice.
    pub fn forcing_field(&self, domain: &DomainParams) -> Result<SpectralField, IntegrateError> {
        self.validate(domain)?;
        Ok(SpectralField::from_modes(
            domain.clone(),
            self.cutoff,
            &self.forcing,
        )?)
    }
}

/// One diagnostics record along a trajectory.
#[derive(Copy, Clone, Debug)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub l2_energy: f64,
    pub alpha_energy: f64,
    pub enstrophy: f64,
    pub divergence_residual: f64,
    pub barotropic_fraction: f64,
}

/// Result of one integration run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub diagnostics: Vec<DiagnosticsRow>,
    pub final_state: SpectralField,
    pub steps: u64,
    /// Relative closure defect of the discrete energy balance.
    pub energy_balance_residual: f64,
    pub stiffness: f64,
    /// For resonant-limit runs, the number of equal-norm triads the
    /// catalytic operator does not carry; `None` for full runs.
    pub kstar_excluded: Option<u64>,
}

enum SystemKind {
    Full,
    ResonantLimit,
}

/// Precomputed stepper for one configuration.
pub struct Integrator {
    domain: DomainParams,
    cfg: SolverConfig,
    ws: BilinearWorkspace,
    forcing: SpectralField,
    e_full: Vec<Matrix3<f64>>,
    e_half: Vec<Matrix3<f64>>,
    kind: SystemKind,
    kstar_excluded: Option<u64>,
}

impl Integrator {
    /// Stepper for the full rotating filtered system.
    pub fn new_full(domain: DomainParams, cfg: SolverConfig) -> Result<Self, IntegrateError> {
        cfg.validate(&domain)?;
        let forcing = cfg.forcing_field(&domain)?;
        Self::build(domain, cfg, forcing, SystemKind::Full, None)
    }

    /// Stepper for the resonant-limit system. The nonlinearity is the
    /// catalytic form and the source is the averaged forcing; the triad set
    /// documents which resonances the operator drops.
    pub fn new_resonant_limit(
        domain: DomainParams,
        cfg: SolverConfig,
        triads: &ResonantTriadSet,
    ) -> Result<Self, IntegrateError> {
        cfg.validate(&domain)?;
        if triads.domain() != &domain {
            return Err(IntegrateError::StaleTriadSet(
                "domain differs from the run's lattice",
            ));
        }
        if triads.alpha() != cfg.alpha {
            return Err(IntegrateError::StaleTriadSet(
                "enumerated at a different filter parameter",
            ));
        }
        if triads.cutoff() < cfg.cutoff {
            return Err(IntegrateError::StaleTriadSet(
                "enumerated at a smaller cutoff than the run",
            ));
        }
        let f = cfg.forcing_field(&domain)?;
        let f_tilde = averaged_forcing(&f, cfg.alpha, cfg.omega_big)?;
        let kstar = triads.counts().kstar;
        Self::build(
            domain,
            cfg,
            f_tilde,
            SystemKind::ResonantLimit,
            Some(kstar),
        )
    }

    fn build(
        domain: DomainParams,
        cfg: SolverConfig,
        forcing: SpectralField,
        kind: SystemKind,
        kstar_excluded: Option<u64>,
    ) -> Result<Self, IntegrateError> {
        let ws = BilinearWorkspace::new(domain.clone(), cfg.cutoff)?;
        let rotation = match kind {
            SystemKind::Full => cfg.omega_big,
            SystemKind::ResonantLimit => 0.0,
        };
        let e_full = factor_table(&domain, &cfg, rotation, cfg.dt);
        let e_half = factor_table(&domain, &cfg, rotation, 0.5 * cfg.dt);
        Ok(Integrator {
            domain,
            cfg,
            ws,
            forcing,
            e_full,
            e_half,
            kind,
            kstar_excluded,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    /// Advance one step; `advance_with_frame` with an empty frame.
    pub fn step(&mut self, state: &SpectralField) -> Result<SpectralField, IntegrateError> {
        self.advance_with_frame(state, &mut [])
    }

    /// One Lawson RK4 step of the state, advancing any variational frame
    /// vectors alongside it through the shared stage values.
    fn advance_with_frame(
        &mut self,
        state: &SpectralField,
        frame: &mut [SpectralField],
    ) -> Result<SpectralField, IntegrateError> {
        if !state.same_lattice(&self.forcing) {
            return Err(IntegrateError::StateMismatch);
        }
        let h = self.cfg.dt;
        let ev = self.apply_full(state);
        let ev2 = self.apply_half(state);

        let a = self.nonlinearity(state)?;
        let mut w_b = ev2.clone();
        w_b.axpy(0.5 * h, &self.apply_half(&a))?;
        let b = self.nonlinearity(&w_b)?;
        let mut w_c = ev2.clone();
        w_c.axpy(0.5 * h, &b)?;
        let c = self.nonlinearity(&w_c)?;
        let mut w_d = ev.clone();
        w_d.axpy(h, &self.apply_half(&c))?;
        let d = self.nonlinearity(&w_d)?;

        let mut next = ev.clone();
        next.axpy(h / 6.0, &self.apply_full(&a))?;
        let mut mid = b.clone();
        mid.axpy(1.0, &c)?;
        next.axpy(h / 3.0, &self.apply_half(&mid))?;
        next.axpy(h / 6.0, &d)?;

        for phi in frame.iter_mut() {
            let ep = self.apply_full(phi);
            let ep2 = self.apply_half(phi);
            let pa = self.linearized(state, phi)?;
            let mut p_b = ep2.clone();
            p_b.axpy(0.5 * h, &self.apply_half(&pa))?;
            let pb = self.linearized(&w_b, &p_b)?;
            let mut p_c = ep2.clone();
            p_c.axpy(0.5 * h, &pb)?;
            let pc = self.linearized(&w_c, &p_c)?;
            let mut p_d = ep.clone();
            p_d.axpy(h, &self.apply_half(&pc))?;
            let pd = self.linearized(&w_d, &p_d)?;

            let mut out = ep;
            out.axpy(h / 6.0, &self.apply_full(&pa))?;
            let mut pm = pb.clone();
            pm.axpy(1.0, &pc)?;
            out.axpy(h / 3.0, &self.apply_half(&pm))?;
            out.axpy(h / 6.0, &pd)?;
            *phi = out;
        }
        Ok(next)
    }

    fn nonlinearity(&mut self, v: &SpectralField) -> Result<SpectralField, IntegrateError> {
        if self.cfg.linear_only {
            return Ok(self.forcing.clone());
        }
        let b = match self.kind {
            SystemKind::Full => {
                self.ws
                    .bilinear_alpha(v, v, self.cfg.alpha, self.cfg.path)?
            }
            SystemKind::ResonantLimit => {
                self.ws.catalytic_bilinear(v, self.cfg.alpha, self.cfg.path)?
            }
        };
        let mut out = self.forcing.clone();
        out.axpy(-1.0, &b)?;
        Ok(out)
    }

    /// Linearization of the resonant-limit nonlinearity around `w`, applied
    /// to `phi`: minus the catalytic form in each slot.
    fn linearized(
        &mut self,
        w: &SpectralField,
        phi: &SpectralField,
    ) -> Result<SpectralField, IntegrateError> {
        debug_assert!(matches!(self.kind, SystemKind::ResonantLimit));
        let mut out = self
            .ws
            .catalytic_form(w, phi, self.cfg.alpha, self.cfg.path)?;
        out.axpy(
            1.0,
            &self
                .ws
                .catalytic_form(phi, w, self.cfg.alpha, self.cfg.path)?,
        )?;
        out.scale(-1.0);
        Ok(out)
    }

    fn apply_full(&self, v: &SpectralField) -> SpectralField {
        apply_table(&self.e_full, v)
    }

    fn apply_half(&self, v: &SpectralField) -> SpectralField {
        apply_table(&self.e_half, v)
    }

    fn diagnostics_row(&self, t: f64, v: &SpectralField) -> Result<DiagnosticsRow, IntegrateError> {
        let l2 = v.energy();
        let bar = v.barotropic_part().energy();
        Ok(DiagnosticsRow {
            t,
            l2_energy: l2,
            alpha_energy: v.filtered_energy(self.cfg.alpha)?,
            enstrophy: v.energy_hs(1.0),
            divergence_residual: v.divergence_residual(),
            barotropic_fraction: if l2 > 0.0 { bar / l2 } else { 0.0 },
        })
    }

    /// Power balance rate `2 nu <Av, R v> - 2 <f, R v>` for the full system,
    /// or its unfiltered analogue for the limit system; its time integral
    /// must match the drop in the conserved energy.
    fn balance_rate(&self, v: &SpectralField) -> Result<f64, IntegrateError> {
        match self.kind {
            SystemKind::Full => {
                let filtered = v.filtered(self.cfg.alpha)?;
                let visc = filtered.inner_product(v, 1.0)?;
                let work = self.forcing.inner_product(&filtered, 0.0)?;
                Ok(2.0 * self.cfg.nu * visc - 2.0 * work)
            }
            SystemKind::ResonantLimit => {
                let visc = v.energy_hs(1.0);
                let work = self.forcing.inner_product(v, 0.0)?;
                Ok(2.0 * self.cfg.nu * visc - 2.0 * work)
            }
        }
    }

    fn balance_energy(&self, v: &SpectralField) -> Result<f64, IntegrateError> {
        match self.kind {
            SystemKind::Full => Ok(v.filtered_energy(self.cfg.alpha)?),
            SystemKind::ResonantLimit => Ok(v.energy()),
        }
    }

    /// Integrate from `v0` over the configured horizon, recording
    /// diagnostics at the checkpoint cadence and the discrete energy-balance
    /// closure over all steps.
    pub fn run(&mut self, v0: &SpectralField) -> Result<RunOutput, IntegrateError> {
        if !v0.same_lattice(&self.forcing) {
            return Err(IntegrateError::StateMismatch);
        }
        v0.validate()?;
        let steps = self.cfg.steps()?;
        let h = self.cfg.dt;
        let mut v = v0.clone();
        let mut diagnostics = vec![self.diagnostics_row(0.0, &v)?];
        let e_start = self.balance_energy(&v)?;
        let mut rates = Vec::with_capacity(steps as usize + 1);
        rates.push(self.balance_rate(&v)?);
        for step in 1..=steps {
            v = self.step(&v)?;
            let t = step as f64 * h;
            if !v.norm_l2().is_finite() {
                return Err(IntegrateError::BlowUp { t });
            }
            rates.push(self.balance_rate(&v)?);
            if step % self.cfg.checkpoint_every as u64 == 0 || step == steps {
                diagnostics.push(self.diagnostics_row(t, &v)?);
            }
        }
        let e_end = self.balance_energy(&v)?;
        let dissipated = integrate_rate_series(&rates, h);
        let defect = e_end - e_start + dissipated;
        let scale = e_start
            .abs()
            .max(e_end.abs())
            .max(dissipated.abs())
            .max(f64::MIN_POSITIVE);
        Ok(RunOutput {
            diagnostics,
            final_state: v,
            steps,
            energy_balance_residual: defect.abs() / scale,
            stiffness: self.cfg.stiffness(&self.domain),
            kstar_excluded: self.kstar_excluded,
        })
    }
}

/// Integral of a uniformly sampled rate series: composite Simpson over step
/// pairs, one trapezoid panel when the count is odd.
fn integrate_rate_series(rates: &[f64], h: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    let intervals = rates.len() - 1;
    let mut i = 0;
    while i + 2 <= intervals {
        acc.add(h / 3.0 * (rates[i] + 4.0 * rates[i + 1] + rates[i + 2]));
        i += 2;
    }
    if i < intervals {
        acc.add(0.5 * h * (rates[i] + rates[i + 1]));
    }
    acc.value()
}

/// Advance the full system one step from `state`.
pub fn step_rns_alpha(
    state: &SpectralField,
    cfg: &SolverConfig,
) -> Result<SpectralField, IntegrateError> {
    let mut integrator = Integrator::new_full(state.domain().clone(), cfg.clone())?;
    integrator.step(state)
}

/// Advance the resonant-limit system one step from `state`.
pub fn step_resonant_limit(
    state: &SpectralField,
    cfg: &SolverConfig,
    triads: &ResonantTriadSet,
) -> Result<SpectralField, IntegrateError> {
    let mut integrator =
        Integrator::new_resonant_limit(state.domain().clone(), cfg.clone(), triads)?;
    integrator.step(state)
}

/// Long-time average of the propagated forcing. For positive rotation rate
/// only the kernel of the per-mode Coriolis block survives: the barotropic
/// modes. At rate zero the propagator is the identity and the average is the
/// forcing itself. The filter parameter does not change the kernel; it is
/// validated and otherwise inert.
pub fn averaged_forcing(
    f: &SpectralField,
    alpha: f64,
    omega_big: f64,
) -> Result<SpectralField, IntegrateError> {
    check_alpha(alpha)?;
    if !omega_big.is_finite() || omega_big < 0.0 {
        return Err(IntegrateError::BadRotationRate(omega_big));
    }
    if omega_big == 0.0 {
        Ok(f.clone())
    } else {
        Ok(f.barotropic_part())
    }
}

/// One row of the filter-convergence table.
#[derive(Copy, Clone, Debug)]
pub struct ComparisonRow {
    pub alpha: f64,
    pub sup_distance: f64,
}

/// Integrate the same initial data under each filter parameter and report
/// the largest checkpoint distance to the unfiltered run. The base config
/// carries alpha = 0 and everything shared.
pub fn alpha_zero_comparison(
    cfg0: &SolverConfig,
    alphas: &[f64],
    v0: &SpectralField,
) -> Result<Vec<ComparisonRow>, IntegrateError> {
    if cfg0.alpha != 0.0 {
        return Err(IntegrateError::BaseAlphaNotZero(cfg0.alpha));
    }
    let base = checkpoint_states(cfg0, v0)?;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        check_alpha(alpha)?;
        let mut cfg = cfg0.clone();
        cfg.alpha = alpha;
        let states = checkpoint_states(&cfg, v0)?;
        let mut sup = 0.0f64;
        for (b, s) in base.iter().zip(states.iter()) {
            sup = sup.max(s.l2_distance(b)?);
        }
        rows.push(ComparisonRow {
            alpha,
            sup_distance: sup,
        });
    }
    Ok(rows)
}

fn checkpoint_states(
    cfg: &SolverConfig,
    v0: &SpectralField,
) -> Result<Vec<SpectralField>, IntegrateError> {
    let mut integrator = Integrator::new_full(v0.domain().clone(), cfg.clone())?;
    let steps = cfg.steps()?;
    let mut v = v0.clone();
    let mut states = vec![v.clone()];
    for step in 1..=steps {
        v = integrator.step(&v)?;
        if !v.norm_l2().is_finite() {
            return Err(IntegrateError::BlowUp {
                t: step as f64 * cfg.dt,
            });
        }
        if step % cfg.checkpoint_every as u64 == 0 || step == steps {
            states.push(v.clone());
        }
    }
    Ok(states)
}

/// One sampled instant of the variational trace.
#[derive(Copy, Clone, Debug)]
pub struct TraceSample {
    pub t: f64,
    /// Trace of the linearized generator over the adapted frame.
    pub full: f64,
    /// The reduced form: barotropic channel plus baroclinic Stokes decay.
    pub reduced: f64,
    /// Running time average of the full trace up to this instant.
    pub running_mean: f64,
    pub n_barotropic: usize,
    pub n_baroclinic: usize,
}

/// Output of the variational trace run.
#[derive(Clone, Debug)]
pub struct TraceReport {
    pub samples: Vec<TraceSample>,
    pub mean_full: f64,
    pub mean_reduced: f64,
    /// `nu` times the time-averaged squared H1 norm of the barotropic part
    /// of the trajectory: the finite-horizon stand-in for the dissipation
    /// level.
    pub epsilon_estimate: f64,
    pub frame_size: usize,
}

/// Integrate the resonant-limit system together with `n_frame` linearized
/// solutions, re-orthonormalizing the frame each step, and sample the trace
/// of the linearized generator over the frame adapted to the
/// barotropic/baroclinic splitting.
pub fn variational_trace(
    w0: &SpectralField,
    cfg: &SolverConfig,
    n_frame: usize,
    triads: &ResonantTriadSet,
) -> Result<TraceReport, IntegrateError> {
    let domain = w0.domain().clone();
    let mut integrator = Integrator::new_resonant_limit(domain.clone(), cfg.clone(), triads)?;
    if !w0.same_lattice(integrator.forcing()) {
        return Err(IntegrateError::StateMismatch);
    }
    w0.validate()?;
    let mut frame = initial_frame(&domain, cfg.cutoff, n_frame)?;
    let steps = cfg.steps()?;
    let h = cfg.dt;
    let mut w = w0.clone();

    let mut samples = Vec::new();
    let first = trace_sample(&mut integrator, &w, &frame, 0.0)?;
    samples.push(first);

    let mut eps_acc = CompensatedSum::new();
    let mut g_prev = w.barotropic_part().energy_hs(1.0);
    for step in 1..=steps {
        w = integrator.advance_with_frame(&w, &mut frame)?;
        let t = step as f64 * h;
        if !w.norm_l2().is_finite() {
            return Err(IntegrateError::BlowUp { t });
        }
        orthonormalize(&mut frame, step)?;
        let g = w.barotropic_part().energy_hs(1.0);
        eps_acc.add(0.5 * h * (g_prev + g));
        g_prev = g;
        if step % cfg.checkpoint_every as u64 == 0 || step == steps {
            samples.push(trace_sample(&mut integrator, &w, &frame, t)?);
        }
    }

    let mut running = CompensatedSum::new();
    let mut prev: Option<TraceSample> = None;
    for sample in samples.iter_mut() {
        if let Some(p) = prev {
            running.add(0.5 * (sample.t - p.t) * (sample.full + p.full));
        }
        sample.running_mean = if sample.t > 0.0 {
            running.value() / sample.t
        } else {
            sample.full
        };
        prev = Some(*sample);
    }
    let span = samples.last().map(|s| s.t).unwrap_or(0.0);
    let mean_full = if span > 0.0 {
        samples.last().unwrap().running_mean
    } else {
        samples[0].full
    };
    let mut reduced_acc = CompensatedSum::new();
    for pair in samples.windows(2) {
        reduced_acc.add(0.5 * (pair[1].t - pair[0].t) * (pair[1].reduced + pair[0].reduced));
    }
    let mean_reduced = if span > 0.0 {
        reduced_acc.value() / span
    } else {
        samples[0].reduced
    };
    Ok(TraceReport {
        samples,
        mean_full,
        mean_reduced,
        epsilon_estimate: cfg.nu * eps_acc.value() / cfg.t_end,
        frame_size: n_frame,
    })
}

/// Orthonormal frame of `n` real divergence-free fields built from the
/// lowest-norm mirror pairs, four independent directions per pair.
pub fn initial_frame(
    domain: &DomainParams,
    cutoff: u32,
    n: usize,
) -> Result<Vec<SpectralField>, IntegrateError> {
    let c = cutoff as i32;
    let mut modes = Vec::new();
    for n1 in -c..=c {
        for n2 in -c..=c {
            for n3 in -c..=c {
                let m = Mode([n1, n2, n3]);
                if m.0 > [0, 0, 0] {
                    modes.push(m);
                }
            }
        }
    }
    modes.sort_by(|a, b| {
        domain
            .norm_sq(*a)
            .total_cmp(&domain.norm_sq(*b))
            .then(a.0.cmp(&b.0))
    });
    let max = 4 * modes.len();
    if n == 0 || n > max {
        return Err(IntegrateError::FrameTooLarge { n, max });
    }
    let mut frame = Vec::with_capacity(n);
    'outer: for m in modes {
        let basis = domain.helical_basis(m)?;
        let sqrt2 = std::f64::consts::SQRT_2;
        let e1: [f64; 3] = std::array::from_fn(|j| sqrt2 * basis.plus[j].re);
        let e2: [f64; 3] = std::array::from_fn(|j| -sqrt2 * basis.plus[j].im);
        for tangent in [e1, e2] {
            for imaginary in [false, true] {
                let coeff: Coeff = std::array::from_fn(|j| {
                    if imaginary {
                        num_complex::Complex64::new(0.0, tangent[j])
                    } else {
                        num_complex::Complex64::new(tangent[j], 0.0)
                    }
                });
                let mut f = SpectralField::from_modes(domain.clone(), cutoff, &[(m, coeff)])?;
                f.scale(std::f64::consts::FRAC_1_SQRT_2);
                frame.push(f);
                if frame.len() == n {
                    break 'outer;
                }
            }
        }
    }
    Ok(frame)
}

/// Modified Gram-Schmidt pass over the frame in place. A vector whose
/// orthogonal remainder collapses relative to its own length signals a
/// degenerate frame.
fn orthonormalize(frame: &mut [SpectralField], step: u64) -> Result<(), IntegrateError> {
    for i in 0..frame.len() {
        let (done, rest) = frame.split_at_mut(i);
        let v = &mut rest[0];
        let before = v.norm_l2();
        for f in done.iter() {
            let c = v.inner_product(f, 0.0)?;
            v.axpy(-c, f)?;
        }
        let after = v.norm_l2();
        if !(after > GRAM_SCHMIDT_RANK_REL * before) {
            return Err(IntegrateError::RankLoss { step, index: i });
        }
        v.scale(1.0 / after);
    }
    Ok(())
}

/// Orthonormal frame adapted to the channel splitting: the barotropic and
/// baroclinic parts of the evolved frame vectors, interleaved and
/// orthonormalized, keeping at most the original frame size. Each member is
/// purely one channel; the flag records which.
fn adapted_frame(frame: &[SpectralField]) -> Result<Vec<(SpectralField, bool)>, IntegrateError> {
    let mut kept: Vec<(SpectralField, bool)> = Vec::with_capacity(frame.len());
    for phi in frame {
        for (candidate, barotropic) in
            [(phi.barotropic_part(), true), (phi.baroclinic_part(), false)]
        {
            if kept.len() == frame.len() {
                return Ok(kept);
            }
            let before = candidate.norm_l2();
            if before == 0.0 {
                continue;
            }
            let mut v = candidate;
            for (f, _) in kept.iter() {
                let c = v.inner_product(f, 0.0)?;
                if c != 0.0 {
                    v.axpy(-c, f)?;
                }
            }
            let after = v.norm_l2();
            if after > GRAM_SCHMIDT_RANK_REL * before {
                v.scale(1.0 / after);
                kept.push((v, barotropic));
            }
        }
    }
    Ok(kept)
}

fn trace_sample(
    integrator: &mut Integrator,
    w: &SpectralField,
    frame: &[SpectralField],
    t: f64,
) -> Result<TraceSample, IntegrateError> {
    let adapted = adapted_frame(frame)?;
    let nu = integrator.cfg.nu;
    let alpha = integrator.cfg.alpha;
    let path = integrator.cfg.path;
    let w_bar = w.barotropic_part();
    let mut full = CompensatedSum::new();
    let mut reduced = CompensatedSum::new();
    let mut n_barotropic = 0;
    let mut n_baroclinic = 0;
    for (phi, barotropic) in &adapted {
        let stokes = phi.energy_hs(1.0);
        let advected = integrator.ws.catalytic_form(w, phi, alpha, path)?;
        let transported = integrator.ws.catalytic_form(phi, w, alpha, path)?;
        full.add(-nu * stokes - advected.inner_product(phi, 0.0)? - transported.inner_product(phi, 0.0)?);
        if *barotropic {
            n_barotropic += 1;
            let lhs = integrator.ws.catalytic_form(&w_bar, phi, alpha, path)?;
            let rhs = integrator.ws.catalytic_form(phi, &w_bar, alpha, path)?;
            reduced.add(
                -nu * stokes - lhs.inner_product(phi, 0.0)? - rhs.inner_product(phi, 0.0)?,
            );
        } else {
            n_baroclinic += 1;
            reduced.add(-nu * stokes);
        }
    }
    Ok(TraceSample {
        t,
        full: full.value(),
        reduced: reduced.value(),
        running_mean: 0.0,
        n_barotropic,
        n_baroclinic,
    })
}

/// Exponential of the per-mode linear part over one interval: viscous decay
/// times the rotation block, the identity on the zero mode.
fn factor_table(
    domain: &DomainParams,
    cfg: &SolverConfig,
    rotation: f64,
    h: f64,
) -> Vec<Matrix3<f64>> {
    let side = (2 * cfg.cutoff + 1) as usize;
    let c = cfg.cutoff as i32;
    let mut table = Vec::with_capacity(side * side * side);
    for idx in 0..side * side * side {
        let k = side * side;
        let n1 = (idx / k) as i32 - c;
        let n2 = ((idx / side) % side) as i32 - c;
        let n3 = (idx % side) as i32 - c;
        let n = Mode([n1, n2, n3]);
        if n.is_zero() {
            table.push(Matrix3::identity());
            continue;
        }
        let w = domain.wavevector(n);
        let visc = (-cfg.nu * w.norm_sq * h).exp();
        let mut m = Matrix3::identity();
        if rotation > 0.0 && n.0[2] != 0 {
            let omega =
                w.check[2] / ((1.0 + cfg.alpha * cfg.alpha * w.norm_sq) * w.norm);
            let angle = rotation * omega * h;
            m = Matrix3::identity() * angle.cos()
                - cross_matrix(w.check) * (angle.sin() / w.norm);
        }
        table.push(m * visc);
    }
    table
}

fn apply_table(table: &[Matrix3<f64>], v: &SpectralField) -> SpectralField {
    let mut out = v.clone();
    let coeffs = out.coeffs_mut();
    for (idx, m) in table.iter().enumerate() {
        coeffs[idx] = apply_real3(m, coeffs[idx]);
    }
    out
}
