//! Resonant-triad enumeration and classification.
//!
//! A triad is an integer convolution pair `(k, m, n)` with `n = k + m`, all
//! three nonzero within the truncation cube. Its eight small divisors are
//! `D_l = s_k w(k) + s_m w(m) + s_n w(n)` over the sign patterns
//! `s in {+1,-1}^3`, where `w` is the dispersion frequency of the mode. The
//! triad is resonant when the smallest `|D_l|` does not exceed the
//! classification tolerance.
//!
//! Divisors are evaluated in double-double arithmetic so that exact
//! cancellations (equal norms, mirrored vertical wavenumbers) come out as
//! true zeros, while class predicates (norm equalities) are decided in exact
//! rational arithmetic on the lattice weights. The quadratic scan runs
//! parallel over `k1` slabs and merges in slab order, so output order and
//! content are independent of the thread count.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::dd::Dd;
use crate::lattice::LatticeError;
use crate::tolerances::ENUMERATION_CUTOFF_LIMIT;
use crate::{DomainParams, Mode, WaveVector};

/// Extra slack added to the tolerance when prefiltering candidate pairs in
/// plain f64 before the double-double evaluation; safely above the f64
/// rounding error of a three-term frequency combination.
const PREFILTER_MARGIN: f64 = 1e-12;

/// Sign patterns `(s_k, s_m, s_n)` indexed by `l - 1` for `l in 1..=8`.
const SIGN_COMBOS: [(i8, i8, i8); 8] = [
    (1, 1, 1),
    (-1, 1, 1),
    (1, -1, 1),
    (-1, -1, 1),
    (1, 1, -1),
    (-1, 1, -1),
    (1, -1, -1),
    (-1, -1, -1),
];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ResonanceError {
    #[error("cutoff must be at least 1")]
    BadCutoff,
    #[error("cutoff {cutoff} exceeds the quadratic-scan guard ({limit}); pass force to override")]
    CutoffTooLarge { cutoff: u32, limit: u32 },
    #[error("classification tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("({k}, {m}, {n}) is not a triad: n != k + m")]
    NotATriad { k: Mode, m: Mode, n: Mode },
    #[error("triad members must be nonzero modes")]
    ZeroMode,
    #[error(
        "resonant triad ({k}, {m}, {n}) with min divisor {min_divisor:.3e} fits no class \
         predicate; the tolerance admits a near-resonance"
    )]
    Unclassifiable {
        k: Mode,
        m: Mode,
        n: Mode,
        min_divisor: f64,
    },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Resonance classes of the truncated interaction set.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub enum TriadClass {
    /// All three vertical wavenumbers vanish: horizontal (2D) interactions.
    K2D,
    /// `n3 = 0`, `k3 = -m3 != 0`, `|k_check| = |m_check|`.
    K14,
    /// `k3 = 0`, `m3 = n3 != 0`, `|m_check| = |n_check|`.
    K24,
    /// `m3 = 0`, `k3 = n3 != 0`, `|k_check| = |n_check|`.
    K34,
    /// All three vertical wavenumbers nonzero: strict three-wave resonances.
    KStar,
}

impl TriadClass {
    pub fn label(self) -> &'static str {
        match self {
            TriadClass::K2D => "K2D",
            TriadClass::K14 => "K14",
            TriadClass::K24 => "K24",
            TriadClass::K34 => "K34",
            TriadClass::KStar => "KSTAR",
        }
    }
}

impl std::fmt::Display for TriadClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One resonant interaction `n = k + m`.
#[derive(Copy, Clone, Debug)]
pub struct ResonantTriad {
    pub k: WaveVector,
    pub m: WaveVector,
    pub n: WaveVector,
    /// Index `l in 1..=8` of the sign combination minimizing `|D_l|`
    /// (smallest `l` on ties); see [`sign_combo`].
    pub signs: u8,
    /// `D_l` at that combination, rounded from double-double.
    pub divisor: f64,
    pub class: TriadClass,
}

/// Triad counts per class.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub k2d: u64,
    pub k14: u64,
    pub k24: u64,
    pub k34: u64,
    pub kstar: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.k2d + self.k14 + self.k24 + self.k34 + self.kstar
    }

    pub fn get(&self, class: TriadClass) -> u64 {
        match class {
            TriadClass::K2D => self.k2d,
            TriadClass::K14 => self.k14,
            TriadClass::K24 => self.k24,
            TriadClass::K34 => self.k34,
            TriadClass::KStar => self.kstar,
        }
    }

    fn bump(&mut self, class: TriadClass) {
        match class {
            TriadClass::K2D => self.k2d += 1,
            TriadClass::K14 => self.k14 += 1,
            TriadClass::K24 => self.k24 += 1,
            TriadClass::K34 => self.k34 += 1,
            TriadClass::KStar => self.kstar += 1,
        }
    }

    fn merge(&mut self, other: &ClassCounts) {
        self.k2d += other.k2d;
        self.k14 += other.k14;
        self.k24 += other.k24;
        self.k34 += other.k34;
        self.kstar += other.kstar;
    }
}

/// The enumerated resonant set of one `(domain, alpha, cutoff, tol)` run.
#[derive(Clone, Debug)]
pub struct ResonantTriadSet {
    domain: DomainParams,
    alpha: f64,
    cutoff: u32,
    tolerance: f64,
    triads: Vec<ResonantTriad>,
    counts: ClassCounts,
}

impl ResonantTriadSet {
    pub fn domain(&self) -> &DomainParams {
        &self.domain
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn triads(&self) -> &[ResonantTriad] {
        &self.triads
    }

    pub fn counts(&self) -> ClassCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.triads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triads.is_empty()
    }

    /// Re-derive every stored invariant: integer closure, divisor below
    /// tolerance, class predicate, and count totals.
    pub fn recheck(&self) -> Result<(), ResonanceError> {
        let mut counts = ClassCounts::default();
        for t in &self.triads {
            if t.k.n + t.m.n != t.n.n {
                return Err(ResonanceError::NotATriad {
                    k: t.k.n,
                    m: t.m.n,
                    n: t.n.n,
                });
            }
            if t.divisor.abs() > self.tolerance {
                return Err(ResonanceError::BadTolerance(t.divisor));
            }
            let class = classify_triad(t.k, t.m, t.n, &self.domain, self.alpha)?;
            if class != t.class {
                return Err(ResonanceError::Unclassifiable {
                    k: t.k.n,
                    m: t.m.n,
                    n: t.n.n,
                    min_divisor: t.divisor,
                });
            }
            counts.bump(class);
        }
        if counts != self.counts {
            return Err(ResonanceError::BadTolerance(f64::NAN));
        }
        Ok(())
    }
}

/// Decade histogram of the smallest divisor magnitude over every triad in
/// the cube; exact zeros (resonances) are kept in their own bucket so the
/// remaining mass describes the near-resonance gap structure.
#[derive(Clone, Debug)]
pub struct DivisorHistogram {
    pub alpha: f64,
    pub cutoff: u32,
    /// Total triads scanned.
    pub total: u64,
    /// Triads whose minimum divisor is exactly zero in double-double.
    pub zero_count: u64,
    /// Decade buckets `[10^e, 10^{e+1})` for `e = -18..=0`.
    pub bins: Vec<HistogramBin>,
    /// Smallest strictly positive minimum divisor, if any.
    pub min_nonzero: Option<f64>,
}

#[derive(Copy, Clone, Debug)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

/// One sampled box of a genericity search.
#[derive(Copy, Clone, Debug)]
pub struct SearchSample {
    pub a2: f64,
    pub a3: f64,
    pub counts: ClassCounts,
}

impl SearchSample {
    pub fn kstar(&self) -> u64 {
        self.counts.kstar
    }
}

/// Sign pattern `(s_k, s_m, s_n)` of combination index `l in 1..=8`.
pub fn sign_combo(l: u8) -> (i8, i8, i8) {
    assert!((1..=8).contains(&l), "sign combination index out of range");
    SIGN_COMBOS[(l - 1) as usize]
}

/// All eight divisors `D_l(k, m, n)` in combination order, evaluated in
/// double-double and rounded.
pub fn divisor_combos(
    domain: &DomainParams,
    alpha: f64,
    k: Mode,
    m: Mode,
    n: Mode,
) -> Result<[f64; 8], ResonanceError> {
    if k.is_zero() || m.is_zero() || n.is_zero() {
        return Err(ResonanceError::ZeroMode);
    }
    let theta = theta_dd(domain);
    let alpha_dd = Dd::from_f64(alpha);
    let alpha_sq = alpha_dd.mul(alpha_dd);
    let wk = omega_dd(&theta, alpha_sq, k);
    let wm = omega_dd(&theta, alpha_sq, m);
    let wn = omega_dd(&theta, alpha_sq, n);
    Ok(combos_dd(wk, wm, wn).map(Dd::to_f64))
}

fn combos_dd(wk: Dd, wm: Dd, wn: Dd) -> [Dd; 8] {
    let mut out = [Dd::from_f64(0.0); 8];
    for (slot, &(sk, sm, sn)) in out.iter_mut().zip(SIGN_COMBOS.iter()) {
        let a = if sk > 0 { wk } else { wk.neg() };
        let b = if sm > 0 { wm } else { wm.neg() };
        let c = if sn > 0 { wn } else { wn.neg() };
        *slot = a.add(b).add(c);
    }
    out
}

fn min_combo(combos: &[Dd; 8]) -> (u8, Dd) {
    let mut best = 0usize;
    for l in 1..8 {
        if combos[l].abs().to_f64() < combos[best].abs().to_f64() {
            best = l;
        }
    }
    ((best + 1) as u8, combos[best])
}

fn rational_to_dd(r: &BigRational) -> Dd {
    let hi = r.to_f64().expect("finite rational");
    let rem = r - BigRational::from_float(hi).expect("finite float");
    let lo = rem.to_f64().expect("finite residual");
    Dd { hi, lo }
}

fn theta_dd(domain: &DomainParams) -> [Dd; 3] {
    let t = domain.theta_exact();
    [
        rational_to_dd(&t[0]),
        rational_to_dd(&t[1]),
        rational_to_dd(&t[2]),
    ]
}

/// Dispersion frequency in double-double; exactly zero on horizontal modes.
fn omega_dd(theta: &[Dd; 3], alpha_sq: Dd, n: Mode) -> Dd {
    if n.0[2] == 0 {
        return Dd::from_f64(0.0);
    }
    let mut nsq = Dd::from_f64(0.0);
    for j in 0..3 {
        let c = n.0[j] as i64;
        nsq = nsq.add(theta[j].scale_int(c * c));
    }
    let norm = nsq.sqrt();
    let check3 = theta[2].sqrt().scale_int(n.0[2] as i64);
    let denom = Dd::from_f64(1.0).add(alpha_sq.mul(nsq)).mul(norm);
    check3.div(denom)
}

struct FreqTables {
    side: usize,
    cutoff: i32,
    omega_f: Vec<f64>,
    omega_dd: Vec<Dd>,
    norm_exact: Vec<BigRational>,
}

impl FreqTables {
    fn build(domain: &DomainParams, alpha: f64, cutoff: u32) -> Self {
        let theta = theta_dd(domain);
        let alpha_dd = Dd::from_f64(alpha);
        let alpha_sq = alpha_dd.mul(alpha_dd);
        let c = cutoff as i32;
        let side = (2 * cutoff + 1) as usize;
        let len = side * side * side;
        let mut omega_f = vec![0.0; len];
        let mut omega_dd_tab = vec![Dd::from_f64(0.0); len];
        let mut norm_exact = Vec::with_capacity(len);
        for idx in 0..len {
            let n = Self::mode_of(idx, side, c);
            norm_exact.push(domain.norm_sq_exact(n));
            if n.is_zero() {
                continue;
            }
            let w = omega_dd(&theta, alpha_sq, n);
            omega_dd_tab[idx] = w;
            omega_f[idx] = w.to_f64();
        }
        FreqTables {
            side,
            cutoff: c,
            omega_f,
            omega_dd: omega_dd_tab,
            norm_exact,
        }
    }

    fn mode_of(idx: usize, side: usize, c: i32) -> Mode {
        let k = (idx % side) as i32 - c;
        let j = ((idx / side) % side) as i32 - c;
        let i = (idx / (side * side)) as i32 - c;
        Mode::new(i, j, k)
    }

    fn lin(&self, n: Mode) -> usize {
        let i = (n.0[0] + self.cutoff) as usize;
        let j = (n.0[1] + self.cutoff) as usize;
        let k = (n.0[2] + self.cutoff) as usize;
        (i * self.side + j) * self.side + k
    }
}

fn classify_exact(
    k: Mode,
    m: Mode,
    n: Mode,
    norm_k: &BigRational,
    norm_m: &BigRational,
    norm_n: &BigRational,
    min_divisor: f64,
) -> Result<TriadClass, ResonanceError> {
    let (k3, m3, n3) = (k.0[2], m.0[2], n.0[2]);
    if k3 == 0 && m3 == 0 {
        return Ok(TriadClass::K2D);
    }
    if n3 == 0 {
        // k3 = -m3 != 0 is automatic here.
        if norm_k == norm_m {
            return Ok(TriadClass::K14);
        }
    } else if k3 == 0 {
        if norm_m == norm_n {
            return Ok(TriadClass::K24);
        }
    } else if m3 == 0 {
        if norm_k == norm_n {
            return Ok(TriadClass::K34);
        }
    } else {
        return Ok(TriadClass::KStar);
    }
    Err(ResonanceError::Unclassifiable {
        k,
        m,
        n,
        min_divisor,
    })
}

/// Class of a resonant triad, decided by exact rational norm comparisons.
/// `n = k + m` and nonzero members are enforced; `alpha` only feeds the
/// divisor reported when no predicate matches.
pub fn classify_triad(
    k: WaveVector,
    m: WaveVector,
    n: WaveVector,
    domain: &DomainParams,
    alpha: f64,
) -> Result<TriadClass, ResonanceError> {
    let (k, m, n) = (k.n, m.n, n.n);
    if k + m != n {
        return Err(ResonanceError::NotATriad { k, m, n });
    }
    if k.is_zero() || m.is_zero() || n.is_zero() {
        return Err(ResonanceError::ZeroMode);
    }
    let norm_k = domain.norm_sq_exact(k);
    let norm_m = domain.norm_sq_exact(m);
    let norm_n = domain.norm_sq_exact(n);
    let min_divisor = match divisor_combos(domain, alpha, k, m, n) {
        Ok(c) => c.iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs())),
        Err(_) => f64::NAN,
    };
    classify_exact(k, m, n, &norm_k, &norm_m, &norm_n, min_divisor)
}

fn check_scan_params(cutoff: u32, tol: f64, force: bool) -> Result<(), ResonanceError> {
    if cutoff == 0 {
        return Err(ResonanceError::BadCutoff);
    }
    if cutoff > ENUMERATION_CUTOFF_LIMIT && !force {
        return Err(ResonanceError::CutoffTooLarge {
            cutoff,
            limit: ENUMERATION_CUTOFF_LIMIT,
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ResonanceError::BadTolerance(tol));
    }
    Ok(())
}

/// Run one `k1` slab of the quadratic scan, feeding resonant triads to the
/// collector in lexicographic `(k, m)` order.
fn scan_slab<A>(
    domain: &DomainParams,
    tables: &FreqTables,
    cutoff: u32,
    tol: f64,
    k1: i32,
    acc: &mut A,
    mut push: impl FnMut(&mut A, ResonantTriad),
) -> Result<(), ResonanceError> {
    let c = cutoff as i32;
    let prefilter = tol + PREFILTER_MARGIN;
    for k2 in -c..=c {
        for k3 in -c..=c {
            let k = Mode::new(k1, k2, k3);
            if k.is_zero() {
                continue;
            }
            let kidx = tables.lin(k);
            let wk_f = tables.omega_f[kidx];
            for m1 in -c..=c {
                let n1 = k1 + m1;
                if n1.abs() > c {
                    continue;
                }
                for m2 in -c..=c {
                    let n2 = k2 + m2;
                    if n2.abs() > c {
                        continue;
                    }
                    for m3 in -c..=c {
                        let n3 = k3 + m3;
                        if n3.abs() > c {
                            continue;
                        }
                        let m = Mode::new(m1, m2, m3);
                        if m.is_zero() {
                            continue;
                        }
                        let n = Mode::new(n1, n2, n3);
                        if n.is_zero() {
                            continue;
                        }
                        let midx = tables.lin(m);
                        let nidx = tables.lin(n);
                        let (a, b, d) =
                            (wk_f, tables.omega_f[midx], tables.omega_f[nidx]);
                        let mut fast = f64::INFINITY;
                        for &(sk, sm, sn) in &SIGN_COMBOS {
                            let v = (sk as f64) * a + (sm as f64) * b + (sn as f64) * d;
                            fast = fast.min(v.abs());
                        }
                        if fast > prefilter {
                            continue;
                        }
                        let combos = combos_dd(
                            tables.omega_dd[kidx],
                            tables.omega_dd[midx],
                            tables.omega_dd[nidx],
                        );
                        let (signs, div) = min_combo(&combos);
                        let divisor = div.to_f64();
                        if divisor.abs() > tol {
                            continue;
                        }
                        let class = classify_exact(
                            k,
                            m,
                            n,
                            &tables.norm_exact[kidx],
                            &tables.norm_exact[midx],
                            &tables.norm_exact[nidx],
                            divisor,
                        )?;
                        push(
                            acc,
                            ResonantTriad {
                                k: domain.wavevector(k),
                                m: domain.wavevector(m),
                                n: domain.wavevector(n),
                                signs,
                                divisor,
                                class,
                            },
                        );
                    }
                }
            }
        }
    }
    Ok(())
}

/// Enumerate the resonant set over the truncation cube. The scan is
/// quadratic in the mode count, so cutoffs above the guard are rejected
/// unless `force` is set.
pub fn enumerate_resonances(
    domain: &DomainParams,
    alpha: f64,
    cutoff: u32,
    tol: f64,
    force: bool,
) -> Result<ResonantTriadSet, ResonanceError> {
    check_scan_params(cutoff, tol, force)?;
    crate::lattice::check_alpha(alpha)?;
    let tables = FreqTables::build(domain, alpha, cutoff);
    let c = cutoff as i32;
    let slabs: Vec<Vec<ResonantTriad>> = (-c..=c)
        .into_par_iter()
        .map(|k1| {
            let mut out = Vec::new();
            scan_slab(domain, &tables, cutoff, tol, k1, &mut out, |v, t| {
                v.push(t)
            })?;
            Ok(out)
        })
        .collect::<Result<_, ResonanceError>>()?;
    let mut triads = Vec::new();
    let mut counts = ClassCounts::default();
    for slab in slabs {
        for t in slab {
            counts.bump(t.class);
            triads.push(t);
        }
    }
    Ok(ResonantTriadSet {
        domain: domain.clone(),
        alpha,
        cutoff,
        tolerance: tol,
        triads,
        counts,
    })
}

/// Class counts of the resonant set without storing the triads; same scan
/// and guards as [`enumerate_resonances`].
pub fn count_resonances(
    domain: &DomainParams,
    alpha: f64,
    cutoff: u32,
    tol: f64,
    force: bool,
) -> Result<ClassCounts, ResonanceError> {
    check_scan_params(cutoff, tol, force)?;
    crate::lattice::check_alpha(alpha)?;
    let tables = FreqTables::build(domain, alpha, cutoff);
    let c = cutoff as i32;
    let partials: Vec<ClassCounts> = (-c..=c)
        .into_par_iter()
        .map(|k1| {
            let mut counts = ClassCounts::default();
            scan_slab(domain, &tables, cutoff, tol, k1, &mut counts, |acc, t| {
                acc.bump(t.class)
            })?;
            Ok(counts)
        })
        .collect::<Result<_, ResonanceError>>()?;
    let mut counts = ClassCounts::default();
    for p in &partials {
        counts.merge(p);
    }
    Ok(counts)
}

/// Histogram of `min_l |D_l|` over every triad in the cube, with exact zeros
/// bucketed separately. The reported minimum nonzero gap justifies (or
/// refutes) a classification tolerance.
pub fn small_divisor_histogram(
    domain: &DomainParams,
    alpha: f64,
    cutoff: u32,
) -> Result<DivisorHistogram, ResonanceError> {
    if cutoff == 0 {
        return Err(ResonanceError::BadCutoff);
    }
    if cutoff > ENUMERATION_CUTOFF_LIMIT {
        return Err(ResonanceError::CutoffTooLarge {
            cutoff,
            limit: ENUMERATION_CUTOFF_LIMIT,
        });
    }
    crate::lattice::check_alpha(alpha)?;
    let tables = FreqTables::build(domain, alpha, cutoff);
    let c = cutoff as i32;

    #[derive(Clone)]
    struct Partial {
        total: u64,
        zero: u64,
        decades: [u64; DECADES],
        min_nonzero: f64,
    }
    const DECADES: usize = 19; // 1e-18 .. 1e1

    let partials: Vec<Partial> = (-c..=c)
        .into_par_iter()
        .map(|k1| {
            let mut p = Partial {
                total: 0,
                zero: 0,
                decades: [0; DECADES],
                min_nonzero: f64::INFINITY,
            };
            for k2 in -c..=c {
                for k3 in -c..=c {
                    let k = Mode::new(k1, k2, k3);
                    if k.is_zero() {
                        continue;
                    }
                    let kidx = tables.lin(k);
                    for m1 in -c..=c {
                        if (k1 + m1).abs() > c {
                            continue;
                        }
                        for m2 in -c..=c {
                            if (k2 + m2).abs() > c {
                                continue;
                            }
                            for m3 in -c..=c {
                                if (k3 + m3).abs() > c {
                                    continue;
                                }
                                let m = Mode::new(m1, m2, m3);
                                if m.is_zero() {
                                    continue;
                                }
                                let n = k + m;
                                if n.is_zero() {
                                    continue;
                                }
                                let combos = combos_dd(
                                    tables.omega_dd[kidx],
                                    tables.omega_dd[tables.lin(m)],
                                    tables.omega_dd[tables.lin(n)],
                                );
                                let (_, div) = min_combo(&combos);
                                let v = div.to_f64().abs();
                                p.total += 1;
                                if v == 0.0 {
                                    p.zero += 1;
                                } else {
                                    p.min_nonzero = p.min_nonzero.min(v);
                                    let e = v.log10().floor() as i32;
                                    let slot = (e + 18).clamp(0, DECADES as i32 - 1);
                                    p.decades[slot as usize] += 1;
                                }
                            }
                        }
                    }
                }
            }
            p
        })
        .collect();

    let mut total = 0;
    let mut zero = 0;
    let mut decades = [0u64; DECADES];
    let mut min_nonzero = f64::INFINITY;
    for p in &partials {
        total += p.total;
        zero += p.zero;
        for (d, s) in decades.iter_mut().zip(p.decades.iter()) {
            *d += s;
        }
        min_nonzero = min_nonzero.min(p.min_nonzero);
    }
    let bins = (0..DECADES)
        .map(|i| HistogramBin {
            lower: 10f64.powi(i as i32 - 18),
            upper: 10f64.powi(i as i32 - 17),
            count: decades[i],
        })
        .collect();
    Ok(DivisorHistogram {
        alpha,
        cutoff,
        total,
        zero_count: zero,
        bins,
        min_nonzero: if min_nonzero.is_finite() {
            Some(min_nonzero)
        } else {
            None
        },
    })
}

/// Sample `(a2, a3)` boxes, count strict three-wave resonances in each, and
/// return the results with the unit box prepended as a control, sorted by
/// count and then by the pair itself.
pub fn generic_domain_search(
    mut sampler: impl FnMut(u32) -> (f64, f64),
    alpha: f64,
    cutoff: u32,
    tol: f64,
    trials: u32,
) -> Result<Vec<SearchSample>, ResonanceError> {
    let mut boxes = vec![(1.0, 1.0)];
    for trial in 0..trials {
        boxes.push(sampler(trial));
    }
    let mut out = Vec::with_capacity(boxes.len());
    for (a2, a3) in boxes {
        let domain = DomainParams::new(a2, a3)?;
        let counts = count_resonances(&domain, alpha, cutoff, tol, false)?;
        out.push(SearchSample { a2, a3, counts });
    }
    out.sort_by(|x, y| {
        x.kstar()
            .cmp(&y.kstar())
            .then(x.a2.total_cmp(&y.a2))
            .then(x.a3.total_cmp(&y.a3))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    const GENERIC_A2: f64 = 1.8426034353481495;
    const GENERIC_A3: f64 = 0.5790901244252229;

    fn unit() -> DomainParams {
        DomainParams::unit()
    }

    fn generic_box() -> DomainParams {
        DomainParams::new(GENERIC_A2, GENERIC_A3).unwrap()
    }

    #[test]
    fn unit_box_counts_at_cutoff_one_and_two() {
        let set = enumerate_resonances(&unit(), 0.0, 1, 1e-9, false).unwrap();
        let c = set.counts();
        assert_eq!(
            (c.k2d, c.k14, c.k24, c.k34, c.kstar),
            (24, 16, 16, 16, 0)
        );
        assert_eq!(c.total(), 72);
        set.recheck().unwrap();

        let set = enumerate_resonances(&unit(), 0.0, 2, 1e-9, false).unwrap();
        let c = set.counts();
        assert_eq!(
            (c.k2d, c.k14, c.k24, c.k34, c.kstar),
            (288, 192, 192, 192, 48)
        );
        assert_eq!(set.len(), 912);
        set.recheck().unwrap();
    }

    #[test]
    fn counting_scan_matches_enumeration() {
        for alpha in [0.0, 0.7] {
            let set = enumerate_resonances(&unit(), alpha, 2, 1e-9, false).unwrap();
            let counts = count_resonances(&unit(), alpha, 2, 1e-9, false).unwrap();
            assert_eq!(set.counts(), counts);
        }
    }

    #[test]
    fn equal_norm_three_wave_exemplar_is_resonant_at_every_alpha() {
        let k = Mode::new(2, 1, 1);
        let m = Mode::new(-1, -2, 1);
        let n = Mode::new(1, -1, 2);
        let d = unit();
        for alpha in [0.0, 0.5, 1.0] {
            let combos = divisor_combos(&d, alpha, k, m, n).unwrap();
            let min = combos.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
            assert_eq!(min, 0.0);
            let class = classify_triad(
                d.wavevector(k),
                d.wavevector(m),
                d.wavevector(n),
                &d,
                alpha,
            )
            .unwrap();
            assert_eq!(class, TriadClass::KStar);
        }
        // All three weighted norms coincide, which is what makes the
        // frequencies collapse to multiples of a common factor.
        assert_eq!(d.norm_sq(k), 6.0);
        assert_eq!(d.norm_sq(m), 6.0);
        assert_eq!(d.norm_sq(n), 6.0);
    }

    #[test]
    fn two_wave_exemplar_from_each_cone() {
        let d = unit();
        let cases = [
            (Mode::new(1, 0, 1), Mode::new(1, 0, -1), TriadClass::K14),
            (Mode::new(2, 0, 0), Mode::new(-1, 1, 1), TriadClass::K24),
            (Mode::new(-1, 1, 1), Mode::new(2, 0, 0), TriadClass::K34),
        ];
        for (k, m, class) in cases {
            let n = k + m;
            let got = classify_triad(
                d.wavevector(k),
                d.wavevector(m),
                d.wavevector(n),
                &d,
                0.3,
            )
            .unwrap();
            assert_eq!(got, class, "triad ({k}, {m}, {n})");
        }
    }

    #[test]
    fn classify_rejects_malformed_input() {
        let d = unit();
        let w = |n: Mode| d.wavevector(n);
        assert!(matches!(
            classify_triad(
                w(Mode::new(1, 0, 0)),
                w(Mode::new(0, 1, 0)),
                w(Mode::new(2, 2, 0)),
                &d,
                0.0
            ),
            Err(ResonanceError::NotATriad { .. })
        ));
        assert!(matches!(
            classify_triad(
                w(Mode::new(1, 0, 0)),
                w(Mode::new(-1, 0, 0)),
                w(Mode::new(0, 0, 0)),
                &d,
                0.0
            ),
            Err(ResonanceError::ZeroMode)
        ));
    }

    #[test]
    fn near_resonance_that_fits_no_cone_is_flagged() {
        // On the unit box k and m have unequal norms, so with n3 = 0 the
        // combination never vanishes exactly; feeding it as "resonant"
        // must produce the misconfiguration error.
        let d = unit();
        let k = Mode::new(1, 0, 1);
        let m = Mode::new(2, 0, -1);
        let n = k + m;
        let got = classify_triad(d.wavevector(k), d.wavevector(m), d.wavevector(n), &d, 0.0);
        assert!(matches!(got, Err(ResonanceError::Unclassifiable { .. })));
    }

    #[test]
    fn scan_guard_and_force_flag() {
        assert!(matches!(
            enumerate_resonances(&unit(), 0.0, 25, 1e-9, false),
            Err(ResonanceError::CutoffTooLarge { cutoff: 25, .. })
        ));
        assert!(matches!(
            enumerate_resonances(&unit(), 0.0, 0, 1e-9, false),
            Err(ResonanceError::BadCutoff)
        ));
        assert!(matches!(
            enumerate_resonances(&unit(), 0.0, 2, 0.0, false),
            Err(ResonanceError::BadTolerance(_))
        ));
        // force only overrides the size guard, nothing else.
        let a = enumerate_resonances(&unit(), 0.0, 2, 1e-9, true).unwrap();
        let b = enumerate_resonances(&unit(), 0.0, 2, 1e-9, false).unwrap();
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn set_is_closed_under_swap_and_total_sign_flip() {
        let set = enumerate_resonances(&unit(), 0.5, 2, 1e-9, false).unwrap();
        let index: HashSet<(Mode, Mode)> =
            set.triads().iter().map(|t| (t.k.n, t.m.n)).collect();
        for t in set.triads() {
            assert!(index.contains(&(t.m.n, t.k.n)), "swap missing");
            assert!(index.contains(&(-t.k.n, -t.m.n)), "sign flip missing");
        }
    }

    #[test]
    fn two_wave_frequencies_cancel_identically_in_alpha() {
        let set = enumerate_resonances(&unit(), 0.0, 2, 1e-9, false).unwrap();
        let alphas = [0.0, 0.3, 0.7, 1.0, 2.0];
        for t in set.triads() {
            let (pair, zero_member) = match t.class {
                TriadClass::K14 => ((t.k.n, t.m.n), t.n.n),
                TriadClass::K24 => ((t.m.n, t.n.n), t.k.n),
                TriadClass::K34 => ((t.k.n, t.n.n), t.m.n),
                _ => continue,
            };
            assert!(zero_member.is_horizontal());
            for &alpha in &alphas {
                let combos = divisor_combos(&unit(), alpha, t.k.n, t.m.n, t.n.n).unwrap();
                let min = combos.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
                assert!(
                    min <= 1e-28,
                    "pair {:?} fails to cancel at alpha {}",
                    pair,
                    alpha
                );
            }
        }
    }

    #[test]
    fn exact_classes_are_tolerance_independent() {
        let coarse = enumerate_resonances(&unit(), 0.5, 2, 1e-9, false).unwrap();
        let fine = enumerate_resonances(&unit(), 0.5, 2, 0.5e-9, false).unwrap();
        let cc = coarse.counts();
        let fc = fine.counts();
        assert_eq!((cc.k2d, cc.k14, cc.k24, cc.k34), (fc.k2d, fc.k14, fc.k24, fc.k34));
        // The unit box is fully exact, so even the three-wave class is stable.
        assert_eq!(cc.kstar, fc.kstar);
    }

    #[test]
    fn two_wave_counts_are_alpha_invariant() {
        let mut seen = Vec::new();
        for alpha in [0.0, 0.5, 1.0] {
            let c = enumerate_resonances(&unit(), alpha, 2, 1e-9, false)
                .unwrap()
                .counts();
            seen.push((c.k2d, c.k14, c.k24, c.k34));
        }
        assert_eq!(seen[0], seen[1]);
        assert_eq!(seen[1], seen[2]);
    }

    #[test]
    fn generic_box_has_no_strict_three_wave_resonances() {
        let counts = count_resonances(&generic_box(), 0.0, 4, 1e-9, false).unwrap();
        assert_eq!(counts.kstar, 0);
        assert!(counts.k2d > 0);
        // Mirror-pair cones survive on any box.
        assert!(counts.k14 > 0);
    }

    #[test]
    fn histogram_smoke() {
        let h = small_divisor_histogram(&unit(), 0.0, 2).unwrap();
        // Every resonant triad of the enumeration shows up as exact zero.
        assert_eq!(h.zero_count, 912);
        let binned: u64 = h.bins.iter().map(|b| b.count).sum();
        assert_eq!(h.total, h.zero_count + binned);
        assert!(h.min_nonzero.unwrap() > 0.0);

        let hg = small_divisor_histogram(&generic_box(), 0.0, 3).unwrap();
        // The generic box still has exact zeros (2D and mirror cones), but
        // its nonzero gap is far above any sensible tolerance.
        assert!(hg.zero_count > 0);
        assert!(hg.min_nonzero.unwrap() > 1e-8);
    }

    #[test]
    fn histogram_minimum_gap_shrinks_with_cutoff() {
        let g2 = small_divisor_histogram(&unit(), 0.3, 2)
            .unwrap()
            .min_nonzero
            .unwrap();
        let g3 = small_divisor_histogram(&unit(), 0.3, 3)
            .unwrap()
            .min_nonzero
            .unwrap();
        assert!(g3 <= g2);
    }

    #[test]
    fn search_sorts_and_flags_the_unit_control() {
        let samples = [(GENERIC_A2, GENERIC_A3), (1.3847102943817345, 0.8572310984231709)];
        let mut iter = samples.iter();
        let out = generic_domain_search(
            |_| *iter.next().unwrap(),
            0.0,
            4,
            1e-9,
            2,
        )
        .unwrap();
        assert_eq!(out.len(), 3);
        for w in out.windows(2) {
            assert!(w[0].kstar() <= w[1].kstar());
        }
        let control = out
            .iter()
            .find(|s| s.a2 == 1.0 && s.a3 == 1.0)
            .expect("control present");
        assert!(control.kstar() > 0);
        for s in out.iter().filter(|s| s.a2 != 1.0) {
            assert_eq!(s.kstar(), 0);
        }
    }

    #[test]
    fn sign_combo_mapping_is_fixed() {
        assert_eq!(sign_combo(1), (1, 1, 1));
        assert_eq!(sign_combo(8), (-1, -1, -1));
        assert_eq!(sign_combo(5), (1, 1, -1));
    }
}
