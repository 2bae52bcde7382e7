//! Persistence formats.
//!
//! Binary files are little-endian throughout: an 8-byte ASCII magic, `u64`
//! header fields, then IEEE-754 `f64` payload in column-major order.
//!
//! | magic | header | payload |
//! |---|---|---|
//! | `SPDICT01` | `N`, `M` | `N·M` atom entries, atom by atom |
//! | `SPOBS001` | `N`, `T` | `T·N` components, observation by observation |
//! | `SPICPA01` | `M`, steps processed | `Θ` (`M`), then `P` (`M·M`) |
//!
//! CSV files use 17 significant digits (`{:.16e}`), enough to round-trip every
//! `f64` exactly.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::baselines::MmvCoefficients;
use crate::cpa::PresenceVector;
use crate::dictionary::Dictionary;
use crate::icpa::IcpaState;
use crate::signal::ObservationSet;
use crate::{Error, Result};

pub const DICTIONARY_MAGIC: &[u8; 8] = b"SPDICT01";
pub const OBSERVATIONS_MAGIC: &[u8; 8] = b"SPOBS001";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SPICPA01";

pub const PRESENCE_CSV_HEADER: &str = "atom_index,theta";
pub const COEFFICIENTS_CSV_HEADER: &str = "atom_index,t,value";

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_reals<'a>(w: &mut impl Write, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_magic(r: &mut impl Read, expected: &[u8; 8]) -> Result<()> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != expected {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(expected),
            String::from_utf8_lossy(&magic)
        )));
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_len(r: &mut impl Read, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in memory")))
}

fn read_reals(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count.min(1 << 24));
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn checked_area(a: usize, b: usize) -> Result<usize> {
    a.checked_mul(b)
        .ok_or_else(|| Error::Format(format!("matrix size {a}x{b} overflows")))
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(())
}

pub fn write_dictionary(w: &mut impl Write, dict: &Dictionary) -> Result<()> {
    w.write_all(DICTIONARY_MAGIC)?;
    write_u64(w, dict.n_dims() as u64)?;
    write_u64(w, dict.n_atoms() as u64)?;
    write_reals(w, dict.atoms().as_slice())
}

pub fn read_dictionary(r: &mut impl Read) -> Result<Dictionary> {
    read_magic(r, DICTIONARY_MAGIC)?;
    let n = read_len(r, "N")?;
    let m = read_len(r, "M")?;
    let data = read_reals(r, checked_area(n, m)?)?;
    expect_eof(r)?;
    Dictionary::from_matrix(DMatrix::from_vec(n, m, data))
}

pub fn write_observations(w: &mut impl Write, obs: &ObservationSet) -> Result<()> {
    w.write_all(OBSERVATIONS_MAGIC)?;
    write_u64(w, obs.n_dims() as u64)?;
    write_u64(w, obs.n_steps() as u64)?;
    write_reals(w, obs.matrix().as_slice())
}

pub fn read_observations(r: &mut impl Read) -> Result<ObservationSet> {
    read_magic(r, OBSERVATIONS_MAGIC)?;
    let n = read_len(r, "N")?;
    let t = read_len(r, "T")?;
    let data = read_reals(r, checked_area(n, t)?)?;
    expect_eof(r)?;
    ObservationSet::from_matrix(DMatrix::from_vec(n, t, data))
}

/// One line per step, `N` comma-separated components, no header.
pub fn write_observations_csv(w: &mut impl Write, obs: &ObservationSet) -> Result<()> {
    for t in 0..obs.n_steps() {
        let line: Vec<String> = obs.observation(t).iter().map(|&x| fmt_real(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn parse_real(field: &str, line_no: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Format(format!("line {line_no}: bad number {field:?}: {e}")))
}

fn parse_index(field: &str, line_no: usize) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|e| Error::Format(format!("line {line_no}: bad index {field:?}: {e}")))
}

pub fn read_observations_csv(r: impl Read) -> Result<ObservationSet> {
    let mut columns = Vec::new();
    let mut n_dims = None;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|f| parse_real(f, i + 1))
            .collect::<Result<Vec<_>>>()?;
        match n_dims {
            None => n_dims = Some(values.len()),
            Some(n) if n != values.len() => {
                return Err(Error::Format(format!(
                    "line {}: {} columns, expected {n}",
                    i + 1,
                    values.len()
                )))
            }
            Some(_) => {}
        }
        columns.push(DVector::from_vec(values));
    }
    let n = n_dims.ok_or_else(|| Error::Format("no observations in CSV".into()))?;
    ObservationSet::from_vectors(n, &columns)
}

pub fn write_presence_csv(w: &mut impl Write, theta: &PresenceVector) -> Result<()> {
    writeln!(w, "{PRESENCE_CSV_HEADER}")?;
    for (i, &x) in theta.as_slice().iter().enumerate() {
        writeln!(w, "{i},{}", fmt_real(x))?;
    }
    Ok(())
}

fn data_lines(
    r: impl Read,
    header: &str,
) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let mut lines = BufReader::new(r).lines().enumerate();
    match lines.next() {
        Some((_, Ok(first))) if first.trim() == header => Ok(lines),
        Some((_, Err(e))) => Err(e.into()),
        _ => Err(Error::Format(format!("missing header {header:?}"))),
    }
}

pub fn read_presence_csv(r: impl Read) -> Result<PresenceVector> {
    let mut theta = Vec::new();
    for (i, line) in data_lines(r, PRESENCE_CSV_HEADER)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Format(format!("line {}: expected 2 fields", i + 1)));
        }
        let index = parse_index(fields[0], i + 1)?;
        if index != theta.len() {
            return Err(Error::Format(format!(
                "line {}: atom index {index} out of sequence",
                i + 1
            )));
        }
        theta.push(parse_real(fields[1], i + 1)?);
    }
    PresenceVector::new(DVector::from_vec(theta))
}

/// Sparse triplets; rows that are entirely zero are omitted.
pub fn write_coefficients_csv(w: &mut impl Write, coeffs: &MmvCoefficients) -> Result<()> {
    writeln!(w, "{COEFFICIENTS_CSV_HEADER}")?;
    for (i, row) in coeffs.values().row_iter().enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            continue;
        }
        for (t, &x) in row.iter().enumerate() {
            writeln!(w, "{i},{t},{}", fmt_real(x))?;
        }
    }
    Ok(())
}

/// Inverse of [`write_coefficients_csv`]; the shape is not stored in the file.
pub fn read_coefficients_csv(r: impl Read, n_atoms: usize, n_steps: usize) -> Result<MmvCoefficients> {
    let mut values = DMatrix::zeros(n_atoms, n_steps);
    for (i, line) in data_lines(r, COEFFICIENTS_CSV_HEADER)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!("line {}: expected 3 fields", i + 1)));
        }
        let atom = parse_index(fields[0], i + 1)?;
        let t = parse_index(fields[1], i + 1)?;
        if atom >= n_atoms || t >= n_steps {
            return Err(Error::Format(format!(
                "line {}: entry ({atom}, {t}) outside {n_atoms}x{n_steps}",
                i + 1
            )));
        }
        values[(atom, t)] = parse_real(fields[2], i + 1)?;
    }
    MmvCoefficients::new(values)
}

pub fn write_icpa_checkpoint(w: &mut impl Write, state: &IcpaState) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u64(w, state.n_atoms() as u64)?;
    write_u64(w, state.steps_processed())?;
    write_reals(w, state.theta().as_slice())?;
    write_reals(w, state.gain().matrix().as_slice())
}

pub fn read_icpa_checkpoint(r: &mut impl Read) -> Result<IcpaState> {
    read_magic(r, CHECKPOINT_MAGIC)?;
    let m = read_len(r, "M")?;
    let steps = read_u64(r)?;
    let theta = read_reals(r, m)?;
    let gain = read_reals(r, checked_area(m, m)?)?;
    expect_eof(r)?;
    IcpaState::from_parts(DVector::from_vec(theta), DMatrix::from_vec(m, m, gain), steps)
}
