//! Run configuration: TOML parsing with exhaustive error collection,
//! documented defaults, canonical re-serialization, and the provenance
//! hash stamped into every artifact.
//!
//! Parsing never stops at the first problem. The walker visits every
//! section, records one message per issue with the full key path, and
//! rejects keys it does not know, so a typo cannot silently fall back to
//! a default.

use sha2::{Digest, Sha256};
use toml::value::{Table, Value};

use rnsa_core::tolerances::PERIOD_RANGE;
use rnsa_core::{Complex64, Mode};

/// All configuration problems found in one pass.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", issues.join("\n"))]
pub struct ConfigErrors {
    pub issues: Vec<String>,
}

/// Box periods; the first period is fixed at 1 by normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSection {
    pub a2: f64,
    pub a3: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection { a2: 1.0, a3: 1.0 }
    }
}

/// Viscosity, rotation rate, and filter parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsSection {
    pub nu: f64,
    pub omega: f64,
    pub alpha: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            nu: 1.0,
            omega: 0.0,
            alpha: 0.0,
        }
    }
}

/// Tolerances applied by the resonance scan and the identity suite.
#[derive(Clone, Debug, PartialEq)]
pub struct ToleranceSet {
    pub resonance: f64,
    pub identity: f64,
    pub path_equivalence: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet {
            resonance: 1e-9,
            identity: 1e-12,
            path_equivalence: 1e-10,
        }
    }
}

/// Truncation, step size, horizon, scheme and convolution path.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericsSection {
    pub cutoff: u32,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: String,
    pub dealias: String,
    pub checkpoint_every: u32,
    pub tolerances: ToleranceSet,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            cutoff: 2,
            dt: 1e-2,
            t_end: 1.0,
            scheme: "lawson-rk4".to_string(),
            dealias: "direct".to_string(),
            checkpoint_every: 10,
            tolerances: ToleranceSet::default(),
        }
    }
}

/// One forced mode: the integer wavevector and the complex coefficient
/// triple, which must be perpendicular to the wavevector.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingEntry {
    pub n: [i32; 3],
    pub re: [f64; 3],
    pub im: [f64; 3],
}

impl ForcingEntry {
    pub fn mode(&self) -> Mode {
        Mode(self.n)
    }

    pub fn coeff(&self) -> [Complex64; 3] {
        [
            Complex64::new(self.re[0], self.im[0]),
            Complex64::new(self.re[1], self.im[1]),
            Complex64::new(self.re[2], self.im[2]),
        ]
    }
}

/// Initial data: target energy per radial shell for the seeded random
/// draw. Empty means a zero initial state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitialSection {
    pub shells: Vec<f64>,
}

/// Knobs for the study commands: which comparison to run, the filter
/// sweep, the rotation sweep with its averaging horizon, and the number
/// of random boxes the resonance search samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSection {
    pub selector: String,
    pub alphas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub horizon: f64,
    pub samples: u32,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            selector: "alpha-sweep".to_string(),
            alphas: vec![0.4, 0.2, 0.1, 0.05],
            omegas: vec![1e2, 1e3, 1e4],
            horizon: 1.0,
            samples: 0,
        }
    }
}

/// Constants and options of the dimension-bound chain. Absolute constants
/// default to 1; `d` and `c1` are derived/computed unless overridden;
/// `epsilon` switches the dissipation level from its saturating default to
/// a supplied estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsSection {
    pub c_l: f64,
    pub c_tilde: f64,
    pub c0: f64,
    pub k_tilde: f64,
    pub d: Option<f64>,
    pub c1: Option<f64>,
    pub epsilon: Option<f64>,
    pub lattice_cutoff: u32,
    pub alphas: Vec<f64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            c_l: 1.0,
            c_tilde: 1.0,
            c0: 1.0,
            k_tilde: 1.0,
            d: None,
            c1: None,
            epsilon: None,
            lattice_cutoff: 24,
            alphas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

/// Destination directory and the seed for every random draw.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub dir: String,
    pub seed: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".to_string(),
            seed: 0,
        }
    }
}

/// The complete, validated run configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub physics: PhysicsSection,
    pub numerics: NumericsSection,
    pub forcing: Vec<ForcingEntry>,
    pub initial: InitialSection,
    pub experiment: ExperimentSection,
    pub bounds: BoundsSection,
    pub output: OutputSection,
}

struct Walker {
    issues: Vec<String>,
}

impl Walker {
    fn new() -> Self {
        Walker { issues: Vec::new() }
    }

    fn push(&mut self, msg: String) {
        self.issues.push(msg);
    }

    fn finish(self, cfg: RunConfig) -> Result<RunConfig, ConfigErrors> {
        if self.issues.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors {
                issues: self.issues,
            })
        }
    }

    fn reject_unknown(&mut self, table: &Table, path: &str) {
        for key in table.keys() {
            if path.is_empty() {
                self.push(format!("{key}: unknown key"));
            } else {
                self.push(format!("{path}.{key}: unknown key"));
            }
        }
    }

    fn section(&mut self, root: &mut Table, key: &str) -> Table {
        match root.remove(key) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(other) => {
                self.push(format!("{key}: expected a table, found {}", kind(&other)));
                Table::new()
            }
        }
    }

    fn f64_key(&mut self, table: &mut Table, path: &str, key: &str, default: f64) -> f64 {
        match table.remove(key) {
            None => default,
            Some(v) => self.coerce_f64(&format!("{path}.{key}"), &v).unwrap_or(default),
        }
    }

    fn opt_f64_key(&mut self, table: &mut Table, path: &str, key: &str) -> Option<f64> {
        let v = table.remove(key)?;
        self.coerce_f64(&format!("{path}.{key}"), &v)
    }

    fn coerce_f64(&mut self, path: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.push(format!("{path}: expected a number, found {}", kind(other)));
                None
            }
        }
    }

    fn u32_key(&mut self, table: &mut Table, path: &str, key: &str, default: u32) -> u32 {
        match table.remove(key) {
            None => default,
            Some(Value::Integer(i)) if (0..=u32::MAX as i64).contains(&i) => i as u32,
            Some(other) => {
                self.push(format!(
                    "{path}.{key}: expected a nonnegative integer, found {}",
                    kind(&other)
                ));
                default
            }
        }
    }

    fn u64_key(&mut self, table: &mut Table, path: &str, key: &str, default: u64) -> u64 {
        match table.remove(key) {
            None => default,
            Some(Value::Integer(i)) if i >= 0 => i as u64,
            Some(other) => {
                self.push(format!(
                    "{path}.{key}: expected a nonnegative integer, found {}",
                    kind(&other)
                ));
                default
            }
        }
    }

    fn string_key(&mut self, table: &mut Table, path: &str, key: &str, default: &str) -> String {
        match table.remove(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s,
            Some(other) => {
                self.push(format!(
                    "{path}.{key}: expected a string, found {}",
                    kind(&other)
                ));
                default.to_string()
            }
        }
    }

    fn f64_array_key(
        &mut self,
        table: &mut Table,
        path: &str,
        key: &str,
        default: &[f64],
    ) -> Vec<f64> {
        match table.remove(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    if let Some(x) = self.coerce_f64(&format!("{path}.{key}[{i}]"), item) {
                        out.push(x);
                    }
                }
                out
            }
            Some(other) => {
                self.push(format!(
                    "{path}.{key}: expected an array of numbers, found {}",
                    kind(&other)
                ));
                default.to_vec()
            }
        }
    }

    fn triple_key<T: Copy>(
        &mut self,
        table: &mut Table,
        path: &str,
        key: &str,
        default: [T; 3],
        mut coerce: impl FnMut(&mut Self, &str, &Value) -> Option<T>,
    ) -> [T; 3] {
        match table.remove(key) {
            None => {
                self.push(format!("{path}.{key}: missing required key"));
                default
            }
            Some(Value::Array(items)) if items.len() == 3 => {
                let mut out = default;
                for (i, item) in items.iter().enumerate() {
                    if let Some(x) = coerce(self, &format!("{path}.{key}[{i}]"), item) {
                        out[i] = x;
                    }
                }
                out
            }
            Some(other) => {
                self.push(format!(
                    "{path}.{key}: expected an array of exactly 3 entries, found {}",
                    kind(&other)
                ));
                default
            }
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

/// Parse a TOML run configuration, filling documented defaults for absent
/// keys. Returns every problem found, not just the first: type mismatches,
/// unknown keys, and all validation failures, each naming the offending
/// key path.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            return Err(ConfigErrors {
                issues: vec![format!("config is not valid TOML: {e}")],
            })
        }
    };
    let mut w = Walker::new();

    let mut t = w.section(&mut root, "domain");
    let domain = DomainSection {
        a2: w.f64_key(&mut t, "domain", "a2", 1.0),
        a3: w.f64_key(&mut t, "domain", "a3", 1.0),
    };
    w.reject_unknown(&t, "domain");

    let mut t = w.section(&mut root, "physics");
    let physics = PhysicsSection {
        nu: w.f64_key(&mut t, "physics", "nu", 1.0),
        omega: w.f64_key(&mut t, "physics", "omega", 0.0),
        alpha: w.f64_key(&mut t, "physics", "alpha", 0.0),
    };
    w.reject_unknown(&t, "physics");

    let mut t = w.section(&mut root, "numerics");
    let mut tol_table = w.section(&mut t, "tolerances");
    let tolerances = ToleranceSet {
        resonance: w.f64_key(&mut tol_table, "numerics.tolerances", "resonance", 1e-9),
        identity: w.f64_key(&mut tol_table, "numerics.tolerances", "identity", 1e-12),
        path_equivalence: w.f64_key(
            &mut tol_table,
            "numerics.tolerances",
            "path_equivalence",
            1e-10,
        ),
    };
    w.reject_unknown(&tol_table, "numerics.tolerances");
    let numerics = NumericsSection {
        cutoff: w.u32_key(&mut t, "numerics", "cutoff", 2),
        dt: w.f64_key(&mut t, "numerics", "dt", 1e-2),
        t_end: w.f64_key(&mut t, "numerics", "t_end", 1.0),
        scheme: w.string_key(&mut t, "numerics", "scheme", "lawson-rk4"),
        dealias: w.string_key(&mut t, "numerics", "dealias", "direct"),
        checkpoint_every: w.u32_key(&mut t, "numerics", "checkpoint_every", 10),
        tolerances,
    };
    w.reject_unknown(&t, "numerics");

    let mut forcing = Vec::new();
    match root.remove("forcing") {
        None => {}
        Some(Value::Array(items)) => {
            for (i, item) in items.into_iter().enumerate() {
                let path = format!("forcing[{i}]");
                match item {
                    Value::Table(mut entry) => {
                        let n = w.triple_key(&mut entry, &path, "n", [0i32; 3], |w, p, v| {
                            match v {
                                Value::Integer(x)
                                    if (i32::MIN as i64..=i32::MAX as i64).contains(x) =>
                                {
                                    Some(*x as i32)
                                }
                                other => {
                                    w.push(format!(
                                        "{p}: expected an integer, found {}",
                                        kind(other)
                                    ));
                                    None
                                }
                            }
                        });
                        let re = w.triple_key(&mut entry, &path, "re", [0.0; 3], |w, p, v| {
                            w.coerce_f64(p, v)
                        });
                        let im = w.triple_key(&mut entry, &path, "im", [0.0; 3], |w, p, v| {
                            w.coerce_f64(p, v)
                        });
                        w.reject_unknown(&entry, &path);
                        forcing.push(ForcingEntry { n, re, im });
                    }
                    other => {
                        w.push(format!("{path}: expected a table, found {}", kind(&other)));
                    }
                }
            }
        }
        Some(other) => {
            w.push(format!(
                "forcing: expected an array of tables, found {}",
                kind(&other)
            ));
        }
    }

    let mut t = w.section(&mut root, "initial");
    let initial = InitialSection {
        shells: w.f64_array_key(&mut t, "initial", "shells", &[]),
    };
    w.reject_unknown(&t, "initial");

    let mut t = w.section(&mut root, "experiment");
    let defaults = ExperimentSection::default();
    let experiment = ExperimentSection {
        selector: w.string_key(&mut t, "experiment", "selector", &defaults.selector),
        alphas: w.f64_array_key(&mut t, "experiment", "alphas", &defaults.alphas),
        omegas: w.f64_array_key(&mut t, "experiment", "omegas", &defaults.omegas),
        horizon: w.f64_key(&mut t, "experiment", "horizon", defaults.horizon),
        samples: w.u32_key(&mut t, "experiment", "samples", defaults.samples),
    };
    w.reject_unknown(&t, "experiment");

    let mut t = w.section(&mut root, "bounds");
    let defaults = BoundsSection::default();
    let bounds = BoundsSection {
        c_l: w.f64_key(&mut t, "bounds", "c_l", 1.0),
        c_tilde: w.f64_key(&mut t, "bounds", "c_tilde", 1.0),
        c0: w.f64_key(&mut t, "bounds", "c0", 1.0),
        k_tilde: w.f64_key(&mut t, "bounds", "k_tilde", 1.0),
        d: w.opt_f64_key(&mut t, "bounds", "d"),
        c1: w.opt_f64_key(&mut t, "bounds", "c1"),
        epsilon: w.opt_f64_key(&mut t, "bounds", "epsilon"),
        lattice_cutoff: w.u32_key(&mut t, "bounds", "lattice_cutoff", 24),
        alphas: w.f64_array_key(&mut t, "bounds", "alphas", &defaults.alphas),
    };
    w.reject_unknown(&t, "bounds");

    let mut t = w.section(&mut root, "output");
    let output = OutputSection {
        dir: w.string_key(&mut t, "output", "dir", "out"),
        seed: w.u64_key(&mut t, "output", "seed", 0),
    };
    w.reject_unknown(&t, "output");

    w.reject_unknown(&root, "");

    let cfg = RunConfig {
        domain,
        physics,
        numerics,
        forcing,
        initial,
        experiment,
        bounds,
        output,
    };
    validate(&cfg, &mut w);
    w.finish(cfg)
}

fn positive(w: &mut Walker, key: &str, x: f64) {
    if !x.is_finite() || x <= 0.0 {
        w.push(format!("{key} = {x}: must be finite and strictly positive"));
    }
}

fn nonnegative(w: &mut Walker, key: &str, x: f64) {
    if !x.is_finite() || x < 0.0 {
        w.push(format!("{key} = {x}: must be finite and nonnegative"));
    }
}

fn validate(cfg: &RunConfig, w: &mut Walker) {
    let (lo, hi) = PERIOD_RANGE;
    for (key, a) in [("domain.a2", cfg.domain.a2), ("domain.a3", cfg.domain.a3)] {
        if !a.is_finite() || a < lo || a > hi {
            w.push(format!("{key} = {a}: period must lie in [{lo}, {hi}]"));
        }
    }
    nonnegative(w, "physics.nu", cfg.physics.nu);
    nonnegative(w, "physics.omega", cfg.physics.omega);
    nonnegative(w, "physics.alpha", cfg.physics.alpha);

    let n = &cfg.numerics;
    if n.cutoff == 0 {
        w.push("numerics.cutoff = 0: must be at least 1".to_string());
    }
    positive(w, "numerics.dt", n.dt);
    positive(w, "numerics.t_end", n.t_end);
    if n.scheme != "lawson-rk4" {
        w.push(format!(
            "numerics.scheme = {:?}: the only implemented scheme is \"lawson-rk4\"",
            n.scheme
        ));
    }
    if n.dealias != "direct" && n.dealias != "transform" {
        w.push(format!(
            "numerics.dealias = {:?}: expected \"direct\" or \"transform\"",
            n.dealias
        ));
    }
    if n.checkpoint_every == 0 {
        w.push("numerics.checkpoint_every = 0: must be at least 1".to_string());
    }
    positive(w, "numerics.tolerances.resonance", n.tolerances.resonance);
    positive(w, "numerics.tolerances.identity", n.tolerances.identity);
    positive(
        w,
        "numerics.tolerances.path_equivalence",
        n.tolerances.path_equivalence,
    );

    let domain_ok = cfg.domain.a2.is_finite()
        && cfg.domain.a3.is_finite()
        && cfg.domain.a2 >= lo
        && cfg.domain.a2 <= hi
        && cfg.domain.a3 >= lo
        && cfg.domain.a3 <= hi;
    let theta = [
        1.0,
        1.0 / (cfg.domain.a2 * cfg.domain.a2),
        1.0 / (cfg.domain.a3 * cfg.domain.a3),
    ];
    for (i, entry) in cfg.forcing.iter().enumerate() {
        let path = format!("forcing[{i}]");
        if entry.n == [0, 0, 0] {
            w.push(format!("{path}.n: the zero mode cannot carry forcing"));
        }
        let c = cfg.numerics.cutoff as i32;
        if entry.n.iter().any(|&x| x.abs() > c) {
            w.push(format!(
                "{path}.n = {:?}: outside the truncation cube |n_j| <= {c}",
                entry.n
            ));
        }
        for x in entry.re.iter().chain(entry.im.iter()) {
            if !x.is_finite() {
                w.push(format!("{path}: coefficient entries must be finite"));
                break;
            }
        }
        if cfg.forcing[..i].iter().any(|prev| prev.n == entry.n) {
            w.push(format!("{path}.n = {:?}: duplicate forcing mode", entry.n));
        }
        if domain_ok && entry.n != [0, 0, 0] {
            let check = [
                theta[0].sqrt() * entry.n[0] as f64,
                theta[1].sqrt() * entry.n[1] as f64,
                theta[2].sqrt() * entry.n[2] as f64,
            ];
            let coeff = entry.coeff();
            let dot = (0..3).fold(Complex64::new(0.0, 0.0), |acc, j| {
                acc + coeff[j] * check[j]
            });
            let nrm = (check.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let cnrm = coeff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if dot.norm() > 1e-12 * nrm * cnrm {
                w.push(format!(
                    "{path}: coefficient is not perpendicular to the wavevector \
                     (|n_check . f| = {:.3e}); project out the component along \
                     n_check before configuring it",
                    dot.norm()
                ));
            }
        }
    }

    for (i, s) in cfg.initial.shells.iter().enumerate() {
        if !s.is_finite() || *s < 0.0 {
            w.push(format!(
                "initial.shells[{i}] = {s}: shell energies must be finite and nonnegative"
            ));
        }
    }

    let e = &cfg.experiment;
    if e.selector != "alpha-sweep" && e.selector != "averaging" {
        w.push(format!(
            "experiment.selector = {:?}: expected \"alpha-sweep\" or \"averaging\"",
            e.selector
        ));
    }
    for (i, a) in e.alphas.iter().enumerate() {
        positive(w, &format!("experiment.alphas[{i}]"), *a);
    }
    for (i, o) in e.omegas.iter().enumerate() {
        nonnegative(w, &format!("experiment.omegas[{i}]"), *o);
    }
    if e.omegas.windows(2).any(|p| !(p[0] < p[1])) {
        w.push("experiment.omegas: rates must be strictly increasing".to_string());
    }
    positive(w, "experiment.horizon", e.horizon);

    let b = &cfg.bounds;
    positive(w, "bounds.c_l", b.c_l);
    positive(w, "bounds.c_tilde", b.c_tilde);
    positive(w, "bounds.c0", b.c0);
    positive(w, "bounds.k_tilde", b.k_tilde);
    if let Some(d) = b.d {
        positive(w, "bounds.d", d);
    }
    if let Some(c1) = b.c1 {
        positive(w, "bounds.c1", c1);
    }
    if let Some(eps) = b.epsilon {
        nonnegative(w, "bounds.epsilon", eps);
    }
    if b.lattice_cutoff == 0 {
        w.push("bounds.lattice_cutoff = 0: must be at least 1".to_string());
    }
    for (i, a) in b.alphas.iter().enumerate() {
        nonnegative(w, &format!("bounds.alphas[{i}]"), *a);
    }

    if cfg.output.dir.is_empty() {
        w.push("output.dir: must not be empty".to_string());
    }
}

fn float(x: f64) -> Value {
    Value::Float(x)
}

fn float_array(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float(x)).collect())
}

impl RunConfig {
    /// Canonical TOML form: every key explicit (absent optionals omitted),
    /// sections in a fixed order. Parsing this text reproduces the config
    /// exactly, and its digest is the provenance hash.
    pub fn to_toml_string(&self) -> String {
        let mut root = Table::new();

        let mut t = Table::new();
        t.insert("a2".into(), float(self.domain.a2));
        t.insert("a3".into(), float(self.domain.a3));
        root.insert("domain".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("nu".into(), float(self.physics.nu));
        t.insert("omega".into(), float(self.physics.omega));
        t.insert("alpha".into(), float(self.physics.alpha));
        root.insert("physics".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("cutoff".into(), Value::Integer(self.numerics.cutoff as i64));
        t.insert("dt".into(), float(self.numerics.dt));
        t.insert("t_end".into(), float(self.numerics.t_end));
        t.insert("scheme".into(), Value::String(self.numerics.scheme.clone()));
        t.insert(
            "dealias".into(),
            Value::String(self.numerics.dealias.clone()),
        );
        t.insert(
            "checkpoint_every".into(),
            Value::Integer(self.numerics.checkpoint_every as i64),
        );
        let mut tol = Table::new();
        tol.insert("resonance".into(), float(self.numerics.tolerances.resonance));
        tol.insert("identity".into(), float(self.numerics.tolerances.identity));
        tol.insert(
            "path_equivalence".into(),
            float(self.numerics.tolerances.path_equivalence),
        );
        t.insert("tolerances".into(), Value::Table(tol));
        root.insert("numerics".into(), Value::Table(t));

        if !self.forcing.is_empty() {
            let entries = self
                .forcing
                .iter()
                .map(|f| {
                    let mut t = Table::new();
                    t.insert(
                        "n".into(),
                        Value::Array(f.n.iter().map(|&x| Value::Integer(x as i64)).collect()),
                    );
                    t.insert("re".into(), float_array(&f.re));
                    t.insert("im".into(), float_array(&f.im));
                    Value::Table(t)
                })
                .collect();
            root.insert("forcing".into(), Value::Array(entries));
        }

        let mut t = Table::new();
        t.insert("shells".into(), float_array(&self.initial.shells));
        root.insert("initial".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert(
            "selector".into(),
            Value::String(self.experiment.selector.clone()),
        );
        t.insert("alphas".into(), float_array(&self.experiment.alphas));
        t.insert("omegas".into(), float_array(&self.experiment.omegas));
        t.insert("horizon".into(), float(self.experiment.horizon));
        t.insert(
            "samples".into(),
            Value::Integer(self.experiment.samples as i64),
        );
        root.insert("experiment".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("c_l".into(), float(self.bounds.c_l));
        t.insert("c_tilde".into(), float(self.bounds.c_tilde));
        t.insert("c0".into(), float(self.bounds.c0));
        t.insert("k_tilde".into(), float(self.bounds.k_tilde));
        if let Some(d) = self.bounds.d {
            t.insert("d".into(), float(d));
        }
        if let Some(c1) = self.bounds.c1 {
            t.insert("c1".into(), float(c1));
        }
        if let Some(eps) = self.bounds.epsilon {
            t.insert("epsilon".into(), float(eps));
        }
        t.insert(
            "lattice_cutoff".into(),
            Value::Integer(self.bounds.lattice_cutoff as i64),
        );
        t.insert("alphas".into(), float_array(&self.bounds.alphas));
        root.insert("bounds".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("dir".into(), Value::String(self.output.dir.clone()));
        t.insert("seed".into(), Value::Integer(self.output.seed as i64));
        root.insert("output".into(), Value::Table(t));

        toml::to_string(&Value::Table(root)).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, lowercase hex. Stamped into
    /// every artifact so outputs are traceable to their exact inputs.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(out, "{byte:02x}").expect("hex formatting");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_fills_documented_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.physics.nu, 1.0);
        assert_eq!(cfg.numerics.cutoff, 2);
        assert_eq!(cfg.numerics.scheme, "lawson-rk4");
        assert_eq!(cfg.numerics.dealias, "direct");
        assert_eq!(cfg.numerics.tolerances.resonance, 1e-9);
        assert_eq!(cfg.numerics.tolerances.identity, 1e-12);
        assert_eq!(cfg.numerics.tolerances.path_equivalence, 1e-10);
        assert_eq!(cfg.output.dir, "out");
        assert_eq!(cfg.output.seed, 0);
        assert!(cfg.forcing.is_empty());

        let partial = parse_config("[physics]\nnu = 0.25\n").unwrap();
        assert_eq!(partial.physics.nu, 0.25);
        assert_eq!(partial.physics.omega, 0.0);
        assert_eq!(partial.numerics, RunConfig::default().numerics);
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut cfg = RunConfig::default();
        cfg.domain.a2 = 1.8426034353481495;
        cfg.domain.a3 = 0.5790901244252229;
        cfg.physics = PhysicsSection {
            nu: 0.037,
            omega: 12.5,
            alpha: 0.61,
        };
        cfg.numerics.cutoff = 7;
        cfg.numerics.dt = 1.25e-3;
        cfg.numerics.t_end = 0.375;
        cfg.numerics.dealias = "transform".into();
        cfg.numerics.checkpoint_every = 25;
        cfg.numerics.tolerances.resonance = 3e-10;
        cfg.forcing.push(ForcingEntry {
            n: [0, 0, 1],
            re: [0.5, 0.0, 0.0],
            im: [0.0, 0.5, 0.0],
        });
        cfg.forcing.push(ForcingEntry {
            n: [1, 1, 0],
            re: [0.0, 0.0, 0.1],
            im: [0.0, 0.0, 0.2],
        });
        cfg.initial.shells = vec![0.0, 1.0, 0.5];
        cfg.experiment.selector = "averaging".into();
        cfg.experiment.horizon = 0.5;
        cfg.experiment.samples = 3;
        cfg.bounds.d = Some(1.0);
        cfg.bounds.c1 = Some(0.25);
        cfg.bounds.epsilon = Some(2.0);
        cfg.output.dir = "artifacts".into();
        cfg.output.seed = 424242;

        let text = cfg.to_toml_string();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);

        let mut other = cfg.clone();
        other.output.seed = 7;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn negative_viscosity_names_the_key() {
        let err = parse_config("[physics]\nnu = -1\n").unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert!(err.issues[0].contains("physics.nu"), "{}", err.issues[0]);
    }

    #[test]
    fn compressible_forcing_gets_a_projection_hint() {
        let text = "[[forcing]]\nn = [0, 0, 1]\nre = [0.0, 0.0, 1.0]\nim = [0.0, 0.0, 0.0]\n";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert!(err.issues[0].contains("forcing[0]"), "{}", err.issues[0]);
        assert!(err.issues[0].contains("project out"), "{}", err.issues[0]);
    }

    #[test]
    fn every_problem_is_reported_at_once() {
        let text = concat!(
            "typo_section = 1\n",
            "[physics]\n",
            "nu = -2.0\n",
            "spin = 3\n",
            "[numerics]\n",
            "dt = 0.0\n",
            "dealias = \"thirds\"\n",
        );
        let err = parse_config(text).unwrap_err();
        let all = err.issues.join("\n");
        assert!(all.contains("physics.spin"), "{all}");
        assert!(all.contains("typo_section"), "{all}");
        assert!(all.contains("physics.nu"), "{all}");
        assert!(all.contains("numerics.dt"), "{all}");
        assert!(all.contains("numerics.dealias"), "{all}");
        assert_eq!(err.issues.len(), 5, "{all}");
    }

    #[test]
    fn malformed_toml_is_a_single_clear_error() {
        let err = parse_config("[physics\nnu = 1").unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert!(err.issues[0].contains("not valid TOML"));
    }

    #[test]
    fn forcing_geometry_is_checked() {
        let text = concat!(
            "[[forcing]]\n",
            "n = [0, 0, 0]\n",
            "re = [0.0, 0.0, 0.0]\n",
            "im = [0.0, 0.0, 0.0]\n",
            "[[forcing]]\n",
            "n = [5, 0, 0]\n",
            "re = [0.0, 1.0, 0.0]\n",
            "im = [0.0, 0.0, 0.0]\n",
            "[[forcing]]\n",
            "n = [5, 0, 0]\n",
            "re = [0.0, 1.0, 0.0]\n",
            "im = [0.0, 0.0, 0.0]\n",
        );
        let err = parse_config(text).unwrap_err();
        let all = err.issues.join("\n");
        assert!(all.contains("forcing[0].n: the zero mode"), "{all}");
        assert!(all.contains("outside the truncation cube"), "{all}");
        assert!(all.contains("duplicate forcing mode"), "{all}");
    }
}
