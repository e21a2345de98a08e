//! Command execution: wires a parsed configuration into the core library,
//! runs one experiment, and writes its artifact set.
//!
//! Every artifact carries the same provenance header (tool version,
//! command, config hash, seed, tolerance set), and the status-bearing
//! text file of each command is written last, so an interrupted run is
//! recognizable by its absence. Numbers are formatted with the shortest
//! round-trip representation, which keeps byte-identical reruns possible
//! across thread counts.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rnsa_core::bounds::{
    c_of_q, dimension_bounds, BoundConstants, BoundReport, BoundsError, C1Source,
    ConstantOverrides,
};
use rnsa_core::field::{FieldError, SpectrumProfile};
use rnsa_core::integrate::{
    alpha_zero_comparison, IntegrateError, Integrator, Scheme, SolverConfig,
};
use rnsa_core::lattice::LatticeError;
use rnsa_core::nonlinear::{
    verify_bilinear_relation, verify_orthogonality_identities, BilinearWorkspace,
    ConvolutionPath,
};
use rnsa_core::poincare::{
    apply_propagator, fast_average_experiment, fitted_slope, propagator_mode, PoincareError,
    PropagatorParams,
};
use rnsa_core::resonance::{
    enumerate_resonances, generic_domain_search, sign_combo, small_divisor_histogram,
    ResonanceError, ResonantTriadSet,
};
use rnsa_core::snapshot::{write_magnitudes_csv, write_snapshot, SnapshotError};
use rnsa_core::{Coeff, Complex64, DomainParams, Mode, SpectralField};

use crate::config::RunConfig;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    LimitSim,
    Resonances,
    Bounds,
    Compare,
    Verify,
}

impl CommandKind {
    pub fn label(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::LimitSim => "limit-sim",
            CommandKind::Resonances => "resonances",
            CommandKind::Bounds => "bounds",
            CommandKind::Compare => "compare",
            CommandKind::Verify => "verify",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DispatchError {
    #[error("failed writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("lattice setup failed: {0}")]
    Lattice(#[from] LatticeError),
    #[error("field assembly failed: {0}")]
    Field(#[from] FieldError),
    #[error("integration failed: {0}")]
    Integrate(#[from] IntegrateError),
    #[error("averaging failed: {0}")]
    Poincare(#[from] PoincareError),
    #[error("resonance scan failed: {0}")]
    Resonance(#[from] ResonanceError),
    #[error("bound evaluation failed: {0}")]
    Bounds(#[from] BoundsError),
    #[error("snapshot emission failed: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("{0}")]
    Unsupported(String),
    #[error("{failed} of {total} identity checks failed; see verify.txt")]
    Violations { failed: usize, total: usize },
}

/// What a completed command produced: file paths in write order and the
/// lines worth echoing to the terminal.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Emitter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self, DispatchError> {
        std::fs::create_dir_all(dir).map_err(|source| DispatchError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), DispatchError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| DispatchError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }
}

fn provenance_lines(cfg: &RunConfig, kind: CommandKind) -> Vec<String> {
    let tol = &cfg.numerics.tolerances;
    vec![
        format!("rnsa {}", env!("CARGO_PKG_VERSION")),
        format!("command: {}", kind.label()),
        format!("config sha256: {}", cfg.hash()),
        format!("seed: {}", cfg.output.seed),
        format!(
            "tolerances: resonance={:?} identity={:?} path_equivalence={:?}",
            tol.resonance, tol.identity, tol.path_equivalence
        ),
    ]
}

fn csv(provenance: &[String], header: &str, rows: &[String]) -> Vec<u8> {
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out.into_bytes()
}

fn text(lines: &[String]) -> Vec<u8> {
    let mut out = String::new();
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    out.into_bytes()
}

fn build_domain(cfg: &RunConfig) -> Result<DomainParams, DispatchError> {
    Ok(DomainParams::new(cfg.domain.a2, cfg.domain.a3)?)
}

fn convolution_path(cfg: &RunConfig) -> ConvolutionPath {
    if cfg.numerics.dealias == "transform" {
        ConvolutionPath::Transform
    } else {
        ConvolutionPath::Direct
    }
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        nu: cfg.physics.nu,
        omega_big: cfg.physics.omega,
        alpha: cfg.physics.alpha,
        cutoff: cfg.numerics.cutoff,
        dt: cfg.numerics.dt,
        t_end: cfg.numerics.t_end,
        forcing: cfg
            .forcing
            .iter()
            .map(|entry| (entry.mode(), entry.coeff()))
            .collect(),
        scheme: Scheme::LawsonRk4,
        path: convolution_path(cfg),
        linear_only: false,
        checkpoint_every: cfg.numerics.checkpoint_every,
        seed: cfg.output.seed,
    }
}

fn initial_state(cfg: &RunConfig, domain: &DomainParams) -> Result<SpectralField, DispatchError> {
    if cfg.initial.shells.is_empty() {
        Ok(SpectralField::zero(domain.clone(), cfg.numerics.cutoff)?)
    } else {
        let profile = SpectrumProfile {
            shell_energy: cfg.initial.shells.clone(),
        };
        Ok(SpectralField::random(
            domain.clone(),
            cfg.numerics.cutoff,
            cfg.output.seed,
            &profile,
        )?)
    }
}

/// Execute one subcommand against a validated configuration, writing its
/// artifacts under `out_dir`.
pub fn run_command(
    kind: CommandKind,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<RunArtifacts, DispatchError> {
    match kind {
        CommandKind::Simulate => simulate(cfg, out_dir, kind),
        CommandKind::LimitSim => simulate(cfg, out_dir, kind),
        CommandKind::Resonances => resonances(cfg, out_dir),
        CommandKind::Bounds => bounds(cfg, out_dir),
        CommandKind::Compare => compare(cfg, out_dir),
        CommandKind::Verify => verify(cfg, out_dir),
    }
}

fn triad_set(cfg: &RunConfig, domain: &DomainParams) -> Result<ResonantTriadSet, DispatchError> {
    Ok(enumerate_resonances(
        domain,
        cfg.physics.alpha,
        cfg.numerics.cutoff,
        cfg.numerics.tolerances.resonance,
        false,
    )?)
}

fn simulate(
    cfg: &RunConfig,
    out_dir: &Path,
    kind: CommandKind,
) -> Result<RunArtifacts, DispatchError> {
    let domain = build_domain(cfg)?;
    let solver = solver_config(cfg);
    let v0 = initial_state(cfg, &domain)?;
    let mut integrator = match kind {
        CommandKind::Simulate => Integrator::new_full(domain.clone(), solver)?,
        CommandKind::LimitSim => {
            let triads = triad_set(cfg, &domain)?;
            Integrator::new_resonant_limit(domain.clone(), solver, &triads)?
        }
        _ => unreachable!("simulate handles only the two stepping commands"),
    };
    let output = integrator.run(&v0)?;
    let provenance = provenance_lines(cfg, kind);

    let rows: Vec<String> = output
        .diagnostics
        .iter()
        .map(|d| {
            format!(
                "{:?},{:?},{:?},{:?},{:?},{:?}",
                d.t,
                d.l2_energy,
                d.alpha_energy,
                d.enstrophy,
                d.divergence_residual,
                d.barotropic_fraction
            )
        })
        .collect();
    let mut emitter = Emitter::new(out_dir)?;
    emitter.write(
        "diagnostics.csv",
        &csv(
            &provenance,
            "t,l2_energy,alpha_energy,enstrophy,divergence_residual,barotropic_fraction",
            &rows,
        ),
    )?;

    let final_t = output.diagnostics.last().map_or(0.0, |d| d.t);
    let mut snap = Vec::new();
    write_snapshot(
        &mut snap,
        &output.final_state,
        cfg.physics.alpha,
        final_t,
        &provenance.join("; "),
    )?;
    emitter.write("final.raf1", &snap)?;

    let mut spectrum = Vec::new();
    write_magnitudes_csv(&mut spectrum, &output.final_state, &provenance)?;
    emitter.write("spectrum.csv", &spectrum)?;

    let mut summary = provenance.clone();
    summary.push(format!("steps: {}", output.steps));
    summary.push(format!("stiffness: {:?}", output.stiffness));
    summary.push(format!(
        "energy_balance_residual: {:?}",
        output.energy_balance_residual
    ));
    summary.push(format!(
        "final_l2_energy: {:?}",
        output.final_state.energy()
    ));
    if let Some(excluded) = output.kstar_excluded {
        summary.push(format!("kstar_triads_excluded: {excluded}"));
    }
    summary.push("status: complete".to_string());
    emitter.write("summary.txt", &text(&summary))?;

    Ok(RunArtifacts {
        files: emitter.files,
        summary: summary[provenance.len()..].to_vec(),
    })
}

fn format_signs(l: u8) -> String {
    let (sk, sm, sn) = sign_combo(l);
    [sk, sm, sn]
        .iter()
        .map(|&s| if s > 0 { '+' } else { '-' })
        .collect()
}

fn resonances(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, DispatchError> {
    let domain = build_domain(cfg)?;
    let set = triad_set(cfg, &domain)?;
    let hist = small_divisor_histogram(&domain, cfg.physics.alpha, cfg.numerics.cutoff)?;
    let provenance = provenance_lines(cfg, CommandKind::Resonances);

    let rows: Vec<String> = set
        .triads()
        .iter()
        .map(|t| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{:?}",
                t.k.n.0[0],
                t.k.n.0[1],
                t.k.n.0[2],
                t.m.n.0[0],
                t.m.n.0[1],
                t.m.n.0[2],
                t.n.n.0[0],
                t.n.n.0[1],
                t.n.n.0[2],
                t.class.label(),
                format_signs(t.signs),
                t.divisor
            )
        })
        .collect();
    let mut emitter = Emitter::new(out_dir)?;
    emitter.write(
        "triads.csv",
        &csv(
            &provenance,
            "k1,k2,k3,m1,m2,m3,n1,n2,n3,class,signs,divisor",
            &rows,
        ),
    )?;

    let mut hist_header = provenance.clone();
    hist_header.push(format!("total combinations: {}", hist.total));
    hist_header.push(format!("exact zeros: {}", hist.zero_count));
    match hist.min_nonzero {
        Some(x) => hist_header.push(format!("smallest nonzero divisor: {x:?}")),
        None => hist_header.push("smallest nonzero divisor: none".to_string()),
    }
    let hist_rows: Vec<String> = hist
        .bins
        .iter()
        .map(|b| format!("{:?},{:?},{}", b.lower, b.upper, b.count))
        .collect();
    emitter.write(
        "histogram.csv",
        &csv(&hist_header, "lower,upper,count", &hist_rows),
    )?;

    if cfg.experiment.samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.output.seed);
        let samples = generic_domain_search(
            |_| (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)),
            cfg.physics.alpha,
            cfg.numerics.cutoff,
            cfg.numerics.tolerances.resonance,
            cfg.experiment.samples,
        )?;
        let rows: Vec<String> = samples
            .iter()
            .map(|s| {
                format!(
                    "{:?},{:?},{},{},{},{},{},{}",
                    s.a2,
                    s.a3,
                    s.counts.k2d,
                    s.counts.k14,
                    s.counts.k24,
                    s.counts.k34,
                    s.counts.kstar,
                    s.counts.total()
                )
            })
            .collect();
        emitter.write(
            "search.csv",
            &csv(&provenance, "a2,a3,k2d,k14,k24,k34,kstar,total", &rows),
        )?;
    }

    let counts = set.counts();
    let mut summary = provenance.clone();
    summary.push(format!(
        "triads: total {} = K2D {} + K14 {} + K24 {} + K34 {} + KSTAR {}",
        counts.total(),
        counts.k2d,
        counts.k14,
        counts.k24,
        counts.k34,
        counts.kstar
    ));
    summary.push(match hist.min_nonzero {
        Some(x) => format!("smallest nonzero divisor: {x:?}"),
        None => "smallest nonzero divisor: none".to_string(),
    });
    summary.push("status: complete".to_string());
    emitter.write("summary.txt", &text(&summary))?;

    Ok(RunArtifacts {
        files: emitter.files,
        summary: summary[provenance.len()..].to_vec(),
    })
}

fn constant_overrides(cfg: &RunConfig) -> ConstantOverrides {
    ConstantOverrides {
        c_l: cfg.bounds.c_l,
        c_tilde: cfg.bounds.c_tilde,
        c0: cfg.bounds.c0,
        k_tilde: cfg.bounds.k_tilde,
        d: cfg.bounds.d,
        c1: cfg.bounds.c1,
    }
}

fn report_row(r: &BoundReport) -> String {
    format!(
        "{:?},{:?},{:?},{:?},{},{:?},{},{:?},{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
        r.alpha,
        r.nu,
        r.rho_v,
        r.epsilon,
        r.epsilon_is_default,
        r.c_alpha_closed,
        r.alpha_zero_divergence,
        r.c_alpha_lattice.sum,
        r.c_alpha_lattice.tail_bound,
        r.c_alpha_lattice.cutoff,
        r.k_alpha,
        r.k0,
        r.n_threshold,
        r.dh_bound_main,
        r.dh_bound_derivation,
        r.dh_bound_alpha0,
        r.df_bound,
        r.length_scale
    )
}

const REPORT_HEADER: &str = "alpha,nu,rho_v,epsilon,epsilon_is_default,c_alpha_closed,\
alpha_zero_divergence,c_alpha_lattice,c_alpha_lattice_tail,lattice_cutoff,k_alpha,k0,\
n_threshold,dh_bound_main,dh_bound_derivation,dh_bound_alpha0,df_bound,length_scale";

fn bounds(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, DispatchError> {
    let domain = build_domain(cfg)?;
    let constants = BoundConstants::resolve(&domain, cfg.numerics.cutoff, &constant_overrides(cfg))?;
    let forcing = solver_config(cfg).forcing_field(&domain)?;
    let report = dimension_bounds(
        cfg.physics.alpha,
        cfg.physics.nu,
        &forcing,
        &constants,
        cfg.bounds.lattice_cutoff,
        cfg.bounds.epsilon,
    )?;
    let provenance = provenance_lines(cfg, CommandKind::Bounds);

    let mut emitter = Emitter::new(out_dir)?;
    emitter.write(
        "bounds.csv",
        &csv(&provenance, REPORT_HEADER, &[report_row(&report)]),
    )?;

    if !cfg.bounds.alphas.is_empty() {
        let rows: Vec<String> = cfg
            .bounds
            .alphas
            .iter()
            .map(|&alpha| {
                let r = dimension_bounds(
                    alpha,
                    cfg.physics.nu,
                    &forcing,
                    &constants,
                    cfg.bounds.lattice_cutoff,
                    cfg.bounds.epsilon,
                )?;
                Ok(format!(
                    "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                    r.alpha,
                    r.c_alpha_closed,
                    r.c_alpha_lattice.sum,
                    r.k_alpha,
                    r.dh_bound_main,
                    r.dh_bound_derivation,
                    r.dh_bound_alpha0,
                    r.alpha_zero_divergence
                ))
            })
            .collect::<Result<_, DispatchError>>()?;
        emitter.write(
            "sweep.csv",
            &csv(
                &provenance,
                "alpha,c_alpha_closed,c_alpha_lattice,k_alpha,dh_bound_main,\
dh_bound_derivation,dh_bound_alpha0,diverges",
                &rows,
            ),
        )?;
    }

    let c1_source = match constants.c1_source {
        C1Source::Computed { p } => format!("computed (minimum at index p = {p})"),
        C1Source::Supplied => "supplied".to_string(),
    };
    let mut lines = provenance.clone();
    lines.push(String::new());
    lines.push(format!("alpha                = {:?}", report.alpha));
    lines.push(format!("nu                   = {:?}", report.nu));
    lines.push(format!("rho_v                = {:?}", report.rho_v));
    lines.push(format!(
        "epsilon              = {:?}{}",
        report.epsilon,
        if report.epsilon_is_default {
            "  (default: c_tilde * rho_v^2)"
        } else {
            "  (supplied estimate)"
        }
    ));
    lines.push(format!(
        "c(alpha) closed form = {:?}{}",
        report.c_alpha_closed,
        if report.alpha_zero_divergence {
            "  (DIVERGES at alpha = 0; the alpha = 0 bound below governs)"
        } else {
            ""
        }
    ));
    lines.push(format!(
        "c(alpha)^2 lattice   = {:?}  (cutoff {}, tail bound {:?})",
        report.c_alpha_lattice.sum, report.c_alpha_lattice.cutoff, report.c_alpha_lattice.tail_bound
    ));
    lines.push(format!("K(alpha)             = {:?}", report.k_alpha));
    lines.push(format!("K0 (limit constant)  = {:?}", report.k0));
    lines.push(format!("N threshold          = {:?}", report.n_threshold));
    lines.push(format!(
        "dim_H bound          = {:?}  [main form: K(alpha) (rho_v/nu)^2]",
        report.dh_bound_main
    ));
    lines.push(format!(
        "dim_H bound          = {:?}  [derivation form: K(alpha) (rho_v/nu^2)^3]",
        report.dh_bound_derivation
    ));
    lines.push(format!(
        "dim_H bound          = {:?}  [alpha = 0 form: k_tilde (rho_v/nu)^(6/5)]",
        report.dh_bound_alpha0
    ));
    lines.push(format!("dim_F bound          = {:?}", report.df_bound));
    lines.push(format!("length scale         = {:?}", report.length_scale));
    lines.push(String::new());
    lines.push(format!(
        "constants: c_l = {:?}, c_tilde = {:?}, c0 = {:?}, d = {:?}, k_tilde = {:?}",
        constants.c_l, constants.c_tilde, constants.c0, constants.d, constants.k_tilde
    ));
    lines.push(format!("c1 = {:?}  ({c1_source})", constants.c1));
    lines.push(format!("lambda1 = {:?}", constants.lambda1));
    lines.push("status: complete".to_string());
    emitter.write("bounds.txt", &text(&lines))?;

    Ok(RunArtifacts {
        files: emitter.files,
        summary: lines[provenance.len() + 1..].to_vec(),
    })
}

fn compare(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, DispatchError> {
    match cfg.experiment.selector.as_str() {
        "alpha-sweep" => compare_alpha_sweep(cfg, out_dir),
        "averaging" => compare_averaging(cfg, out_dir),
        other => Err(DispatchError::Unsupported(format!(
            "experiment.selector {other:?} is not a compare experiment"
        ))),
    }
}

fn compare_alpha_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, DispatchError> {
    if cfg.physics.alpha != 0.0 {
        return Err(DispatchError::Unsupported(format!(
            "the filter sweep compares against an unfiltered base run; \
             set physics.alpha = 0 (found {})",
            cfg.physics.alpha
        )));
    }
    if cfg.experiment.alphas.is_empty() {
        return Err(DispatchError::Unsupported(
            "experiment.alphas is empty; nothing to compare".to_string(),
        ));
    }
    let domain = build_domain(cfg)?;
    let solver = solver_config(cfg);
    let v0 = initial_state(cfg, &domain)?;
    let rows = alpha_zero_comparison(&solver, &cfg.experiment.alphas, &v0)?;
    let provenance = provenance_lines(cfg, CommandKind::Compare);

    let mut emitter = Emitter::new(out_dir)?;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| format!("{:?},{:?}", r.alpha, r.sup_distance))
        .collect();
    emitter.write(
        "compare.csv",
        &csv(&provenance, "alpha,sup_distance", &csv_rows),
    )?;

    let mut summary = provenance.clone();
    for r in &rows {
        summary.push(format!(
            "alpha {:?}: sup checkpoint distance {:?}",
            r.alpha, r.sup_distance
        ));
    }
    summary.push("status: complete".to_string());
    emitter.write("summary.txt", &text(&summary))?;

    Ok(RunArtifacts {
        files: emitter.files,
        summary: summary[provenance.len()..].to_vec(),
    })
}

fn compare_averaging(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, DispatchError> {
    let domain = build_domain(cfg)?;
    let v = initial_state(cfg, &domain)?;
    if v.energy() == 0.0 {
        return Err(DispatchError::Unsupported(
            "the averaging experiment needs a nonzero state; set [initial] shells".to_string(),
        ));
    }
    let mut ws = BilinearWorkspace::new(domain.clone(), cfg.numerics.cutoff)?;
    let rows = fast_average_experiment(
        &mut ws,
        &v,
        cfg.physics.alpha,
        &cfg.experiment.omegas,
        cfg.experiment.horizon,
        convolution_path(cfg),
    )?;
    let provenance = provenance_lines(cfg, CommandKind::Compare);

    let mut emitter = Emitter::new(out_dir)?;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{:?},{:?},{},{:?}",
                r.omega_big, r.t_end, r.panels, r.residual
            )
        })
        .collect();
    emitter.write(
        "averaging.csv",
        &csv(&provenance, "omega,t_end,panels,residual_norm", &csv_rows),
    )?;

    let mut summary = provenance.clone();
    for r in &rows {
        summary.push(format!(
            "omega {:?}: mean oscillatory residual {:?} ({} panels)",
            r.omega_big, r.residual, r.panels
        ));
    }
    match fitted_slope(&rows) {
        Some(slope) => summary.push(format!("log-log decay slope: {slope:?}")),
        None => summary.push("log-log decay slope: not enough usable rows".to_string()),
    }
    summary.push("status: complete".to_string());
    emitter.write("summary.txt", &text(&summary))?;

    Ok(RunArtifacts {
        files: emitter.files,
        summary: summary[provenance.len()..].to_vec(),
    })
}

struct CheckRow {
    name: &'static str,
    worst: f64,
    tol: f64,
    pass: bool,
}

impl CheckRow {
    fn bounded(name: &'static str, worst: f64, tol: f64) -> Self {
        CheckRow {
            name,
            worst,
            tol,
            pass: worst <= tol,
        }
    }

    fn line(&self) -> String {
        format!(
            "{} {}: worst {:?} (tolerance {:?})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tol
        )
    }
}

fn random_state(
    domain: &DomainParams,
    cutoff: u32,
    seed: u64,
) -> Result<SpectralField, FieldError> {
    let profile = SpectrumProfile {
        shell_energy: vec![0.0, 1.0, 0.5],
    };
    SpectralField::random(domain.clone(), cutoff, seed, &profile)
}

fn verify(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, DispatchError> {
    let domain = build_domain(cfg)?;
    let cutoff = cfg.numerics.cutoff;
    let seed = cfg.output.seed;
    let identity_tol = cfg.numerics.tolerances.identity;
    let path_tol = cfg.numerics.tolerances.path_equivalence;
    let mut ws = BilinearWorkspace::new(domain.clone(), cutoff)?;

    let mut alphas = vec![0.0, 0.5, 1.0];
    if !alphas.contains(&cfg.physics.alpha) {
        alphas.push(cfg.physics.alpha);
    }

    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let u = random_state(&domain, cutoff, seed ^ (3 * i + 1))?;
        let v = random_state(&domain, cutoff, seed ^ (3 * i + 2))?;
        let w = random_state(&domain, cutoff, seed ^ (3 * i + 3))?;
        let alpha = alphas[(i as usize) % alphas.len()];
        let report = verify_bilinear_relation(&mut ws, &u, &v, &w, alpha)?;
        worst = worst.max(report.residual / report.scale);
    }
    checks.push(CheckRow::bounded("bilinear-relation", worst, identity_tol));

    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let w = random_state(&domain, cutoff, seed ^ (7 * i + 5))?;
        let phi = random_state(&domain, cutoff, seed ^ (7 * i + 6))?;
        let alpha = alphas[(i as usize) % alphas.len()];
        let report = verify_orthogonality_identities(&mut ws, &w, &phi, alpha)?;
        worst = worst.max(report.max_relative());
    }
    checks.push(CheckRow::bounded("orthogonality", worst, identity_tol));

    let mut unitarity = 0.0f64;
    let mut group = 0.0f64;
    let mut inverse = 0.0f64;
    let mut commutation = 0.0f64;
    let mut at_zero = 0.0f64;
    for (i, &alpha) in alphas.iter().enumerate() {
        let v = random_state(&domain, cutoff, seed ^ (11 * i as u64 + 1))?;
        let norm = v.norm_l2();
        for &omega_big in &[1.0, 37.5] {
            for &t in &[0.4, -1.1] {
                let p = PropagatorParams::new(omega_big, alpha, t)?;
                let ev = apply_propagator(&v, &p)?;
                unitarity = unitarity.max((ev.norm_l2() - norm).abs() / norm);

                let s = 0.7;
                let ps = PropagatorParams::new(omega_big, alpha, s)?;
                let pst = PropagatorParams::new(omega_big, alpha, s + t)?;
                let two_step = apply_propagator(&ev, &ps)?;
                group = group.max(two_step.l2_distance(&apply_propagator(&v, &pst)?)? / norm);

                let back = apply_propagator(&ev, &p.reversed())?;
                inverse = inverse.max(back.l2_distance(&v)? / norm);

                let a_first = apply_propagator(&rnsa_core::nonlinear::stokes_apply(&v), &p)?;
                let a_last = rnsa_core::nonlinear::stokes_apply(&ev);
                commutation =
                    commutation.max(a_first.l2_distance(&a_last)? / a_last.norm_l2().max(1.0));

                let r_first = apply_propagator(&v.filtered(alpha)?, &p)?;
                let r_last = ev.filtered(alpha)?;
                commutation = commutation.max(r_first.l2_distance(&r_last)? / norm);

                commutation = commutation.max(projector_commutation(&domain, cutoff, &p)?);
            }
        }
        let zero = PropagatorParams::new(37.5, alpha, 0.0)?;
        at_zero = at_zero.max(apply_propagator(&v, &zero)?.l2_distance(&v)?);
    }
    checks.push(CheckRow::bounded(
        "propagator-unitarity",
        unitarity,
        identity_tol,
    ));
    checks.push(CheckRow::bounded("propagator-group", group, identity_tol));
    checks.push(CheckRow::bounded(
        "propagator-inverse",
        inverse,
        identity_tol,
    ));
    checks.push(CheckRow::bounded(
        "propagator-commutation",
        commutation,
        identity_tol,
    ));
    checks.push(CheckRow::bounded("propagator-identity-at-zero", at_zero, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violation = 0.0f64;
    for _ in 0..10_000 {
        let q: f64 = rng.gen_range(1e-9..=4.0);
        let x: f64 = rng.gen_range(0.0..10.0);
        let y: f64 = rng.gen_range(0.0..10.0);
        let lhs = x.powf(q) + y.powf(q);
        let rhs = c_of_q(q)? * (x + y).powf(q);
        violation = violation.max((rhs - lhs) / rhs.abs().max(1.0));
    }
    for _ in 0..100 {
        let q: f64 = rng.gen_range(1.0..4.0);
        let x: f64 = rng.gen_range(0.1..10.0);
        let lhs = 2.0 * x.powf(q);
        let rhs = c_of_q(q)? * (2.0 * x).powf(q);
        violation = violation.max((lhs - rhs).abs() / lhs);
    }
    checks.push(CheckRow::bounded("corollary-inequality", violation, 1e-15));

    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let u = random_state(&domain, cutoff, seed ^ (13 * i + 9))?;
        let v = random_state(&domain, cutoff, seed ^ (13 * i + 10))?;
        let alpha = alphas[(i as usize) % alphas.len()];
        let direct = ws.bilinear_alpha(&u, &v, alpha, ConvolutionPath::Direct)?;
        let transform = ws.bilinear_alpha(&u, &v, alpha, ConvolutionPath::Transform)?;
        worst = worst.max(direct.l2_distance(&transform)? / direct.norm_l2().max(1e-300));
        let direct = ws.catalytic_form(&u, &v, alpha, ConvolutionPath::Direct)?;
        let transform = ws.catalytic_form(&u, &v, alpha, ConvolutionPath::Transform)?;
        worst = worst.max(direct.l2_distance(&transform)? / direct.norm_l2().max(1e-300));
    }
    checks.push(CheckRow::bounded("path-equivalence", worst, path_tol));

    let provenance = provenance_lines(cfg, CommandKind::Verify);
    let failed = checks.iter().filter(|c| !c.pass).count();
    let mut lines = provenance.clone();
    for check in &checks {
        lines.push(check.line());
    }
    lines.push(if failed == 0 {
        "status: complete".to_string()
    } else {
        format!("status: FAILED ({failed}/{} checks)", checks.len())
    });

    let mut emitter = Emitter::new(out_dir)?;
    emitter.write("verify.txt", &text(&lines))?;

    if failed > 0 {
        return Err(DispatchError::Violations {
            failed,
            total: checks.len(),
        });
    }
    Ok(RunArtifacts {
        files: emitter.files,
        summary: lines[provenance.len()..].to_vec(),
    })
}

fn projector_commutation(
    domain: &DomainParams,
    cutoff: u32,
    params: &PropagatorParams,
) -> Result<f64, DispatchError> {
    let basis: [Coeff; 3] = [
        [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ],
    ];
    let c = cutoff as i32;
    let mut worst = 0.0f64;
    for n1 in -c..=c {
        for n2 in -c..=c {
            for n3 in -c..=c {
                let n = Mode::new(n1, n2, n3);
                if n.is_zero() {
                    continue;
                }
                let w = domain.wavevector(n);
                let e = propagator_mode(&w, params)?;
                let p = domain.leray_projector(n)?;
                for col in basis {
                    let ep = e.apply(p.apply(col));
                    let pe = p.apply(e.apply(col));
                    for (a, b) in ep.iter().zip(pe.iter()) {
                        worst = worst.max((a - b).norm());
                    }
                }
            }
        }
    }
    Ok(worst)
}
