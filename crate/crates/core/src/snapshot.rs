//! Binary field snapshots and the per-mode magnitude table.
//!
//! A snapshot is a self-describing little-endian file: the magic "RAF1",
//! a format version, the lattice periods, the filter parameter, the
//! truncation cutoff, the sample time, then two length-prefixed UTF-8
//! strings (normalization convention and run provenance), then the
//! coefficient triples as interleaved (re, im) f64 pairs in lexicographic
//! (n1, n2, n3) order over the full cube. Reading re-validates reality,
//! incompressibility, and the zero mean, so a tampered file is rejected
//! rather than propagated into a run.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::field::{FieldError, SpectralField};
use crate::lattice::{DomainParams, LatticeError};
use crate::{Coeff, Mode};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"RAF1";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Normalization tag recorded in every snapshot: inner products are plain
/// coefficient sums, and the physical-space transform carries the
/// `1/(8 pi^3 a2 a3)` volume factor.
pub const CONVENTION: &str = "l2-coefficient-sum; transform volume factor 1/(8 pi^3 a2 a3)";

const MAX_HEADER_STRING: u32 = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}; not a RAF1 snapshot")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported snapshot version {0}")]
    BadVersion(u32),
    #[error("first period is {0}; snapshots are normalized to a1 = 1")]
    BadFirstPeriod(f64),
    #[error("header string of {0} bytes exceeds the {MAX_HEADER_STRING} limit")]
    OversizedString(u32),
    #[error("header string is not valid UTF-8")]
    MalformedString,
    #[error("snapshot field value {0} is not finite")]
    NotFinite(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Header fields of a snapshot, returned alongside the field on read.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMeta {
    pub alpha: f64,
    pub time: f64,
    pub convention: String,
    pub provenance: String,
}

fn write_f64(w: &mut impl Write, x: f64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn write_u32(w: &mut impl Write, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn write_string(w: &mut impl Write, s: &str) -> Result<(), SnapshotError> {
    let len = u32::try_from(s.len()).map_err(|_| SnapshotError::OversizedString(u32::MAX))?;
    if len > MAX_HEADER_STRING {
        return Err(SnapshotError::OversizedString(len));
    }
    write_u32(w, len)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_finite_f64(r: &mut impl Read) -> Result<f64, SnapshotError> {
    let x = read_f64(r)?;
    if !x.is_finite() {
        return Err(SnapshotError::NotFinite(x));
    }
    Ok(x)
}

fn read_string(r: &mut impl Read) -> Result<String, SnapshotError> {
    let len = read_u32(r)?;
    if len > MAX_HEADER_STRING {
        return Err(SnapshotError::OversizedString(len));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| SnapshotError::MalformedString)
}

/// Serialize a field with its filter parameter, sample time, and a
/// provenance line (config hash, seed, code version as the caller sees
/// fit). The convention tag is written automatically.
pub fn write_snapshot(
    w: &mut impl Write,
    field: &SpectralField,
    alpha: f64,
    time: f64,
    provenance: &str,
) -> Result<(), SnapshotError> {
    let periods = field.domain().periods();
    w.write_all(&SNAPSHOT_MAGIC)?;
    write_u32(w, SNAPSHOT_VERSION)?;
    for p in periods {
        write_f64(w, p)?;
    }
    write_f64(w, alpha)?;
    write_u32(w, field.cutoff())?;
    write_f64(w, time)?;
    write_string(w, CONVENTION)?;
    write_string(w, provenance)?;
    for coeff in field.coeffs() {
        for component in coeff {
            write_f64(w, component.re)?;
            write_f64(w, component.im)?;
        }
    }
    Ok(())
}

/// Deserialize a snapshot, re-validating the field invariants. Truncated
/// payloads surface as i/o errors; coefficient tampering that breaks
/// reality or incompressibility surfaces as a field error.
pub fn read_snapshot(r: &mut impl Read) -> Result<(SpectralField, SnapshotMeta), SnapshotError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != SNAPSHOT_MAGIC {
        return Err(SnapshotError::BadMagic { found: magic });
    }
    let version = read_u32(r)?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::BadVersion(version));
    }
    let a1 = read_finite_f64(r)?;
    if a1 != 1.0 {
        return Err(SnapshotError::BadFirstPeriod(a1));
    }
    let a2 = read_finite_f64(r)?;
    let a3 = read_finite_f64(r)?;
    let domain = DomainParams::new(a2, a3)?;
    let alpha = read_finite_f64(r)?;
    let cutoff = read_u32(r)?;
    let time = read_finite_f64(r)?;
    let convention = read_string(r)?;
    let provenance = read_string(r)?;
    let mut field = SpectralField::zero(domain, cutoff)?;
    for idx in 0..field.coeffs().len() {
        let mut coeff: Coeff = [Complex64::new(0.0, 0.0); 3];
        for component in &mut coeff {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            *component = Complex64::new(re, im);
        }
        field.coeffs_mut()[idx] = coeff;
    }
    field.validate()?;
    Ok((
        field,
        SnapshotMeta {
            alpha,
            time,
            convention,
            provenance,
        },
    ))
}

/// Write the per-mode magnitude table as CSV: provenance comment lines,
/// a header row, then one row per lattice mode in lexicographic order
/// with the coefficient vector magnitude.
pub fn write_magnitudes_csv(
    w: &mut impl Write,
    field: &SpectralField,
    provenance_lines: &[impl AsRef<str>],
) -> Result<(), SnapshotError> {
    for line in provenance_lines {
        writeln!(w, "# {}", line.as_ref())?;
    }
    writeln!(w, "n1,n2,n3,norm_sq_check,magnitude")?;
    for (n, coeff) in field.iter() {
        let Mode([n1, n2, n3]) = n;
        let mag = coeff
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let nsq = if n.is_zero() {
            0.0
        } else {
            field.domain().norm_sq(n)
        };
        writeln!(w, "{n1},{n2},{n3},{nsq},{mag}")?;
    }
    Ok(())
}
