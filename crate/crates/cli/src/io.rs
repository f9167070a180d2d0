//! Snapshot binaries and CSV tables, written atomically.
//!
//! Snapshot layout: the 8 bytes `ROMSNAP1`, then rows and cols as
//! little-endian `u64`, then `rows * cols` little-endian `f64` in column-major
//! order.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::CliError;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"ROMSNAP1";

pub fn encode_snapshots(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * m.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<DMatrix<f64>, String> {
    if bytes.len() < 24 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err("not a ROMSNAP1 snapshot file".into());
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let (rows, cols) = (word(8), word(16));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24))
        .ok_or("snapshot header overflows")?;
    if bytes.len() as u64 != expected {
        return Err(format!("header declares {rows} x {cols} values but the file holds {} bytes", bytes.len()));
    }
    let data: Vec<f64> = bytes[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
        return Err(format!("non-finite value at row {}, column {}", pos % rows as usize, pos / rows as usize));
    }
    Ok(DMatrix::from_vec(rows as usize, cols as usize, data))
}

pub fn write_snapshots(path: &Path, m: &DMatrix<f64>) -> Result<(), CliError> {
    write_atomic(path, &encode_snapshots(m))
}

pub fn read_snapshots(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    decode_snapshots(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

/// Shortest round-trip decimal text of `x`, in scientific notation outside
/// `[1e-4, 1e6)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// CSV text with a header row.
pub fn csv_text<I, R, S>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_csv<I, R, S>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    write_atomic(path, csv_text(header, rows).as_bytes())
}

/// Header and records of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, -0.0]);
        let bytes = encode_snapshots(&m);
        assert_eq!(&bytes[..8], b"ROMSNAP1");
        assert_eq!(bytes[8..16], 2u64.to_le_bytes());
        assert_eq!(bytes[16..24], 3u64.to_le_bytes());
        // column-major: (0,0), (1,0), (0,1), ...
        assert_eq!(bytes[24..32], 1.0f64.to_le_bytes());
        assert_eq!(bytes[32..40], 4.0f64.to_le_bytes());
        assert_eq!(bytes[40..48], 2.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 6 * 8);
        assert_eq!(decode_snapshots(&bytes).unwrap(), m);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let mut bytes = encode_snapshots(&m);
        assert!(decode_snapshots(&bytes[..30]).is_err());
        bytes[0] = b'X';
        assert!(decode_snapshots(&bytes).is_err());
        let mut nan = encode_snapshots(&m);
        nan[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_snapshots(&nan).unwrap_err().contains("non-finite"));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 1.0, -0.015625, 6.205413964793855e-29, 3.2e7, 1e-4, f64::MAX, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(6.25e-29), "6.25e-29");
        assert_eq!(fmt_f64(0.375), "0.375");
    }

    #[test]
    fn csv_quotes_only_when_needed() {
        let text = csv_text(&["a", "b"], [vec!["1".to_string(), "x,y".to_string()]]);
        assert_eq!(text, "a,b\n1,\"x,y\"\n");
    }
}
