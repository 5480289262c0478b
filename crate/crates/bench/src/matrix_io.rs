//! Dense matrices on disk: `u64` rows, `u64` cols (little endian), then the
//! entries row by row as little-endian `f64`. Vectors are `n x 1` matrices.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{BenchError, Result};

const HEADER: usize = 16;

pub fn encode(m: &DMatrix<f64>) -> Vec<u8> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(HEADER + 8 * r * c);
    out.extend_from_slice(&(r as u64).to_le_bytes());
    out.extend_from_slice(&(c as u64).to_le_bytes());
    for i in 0..r {
        for j in 0..c {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<DMatrix<f64>, String> {
    if bytes.len() < HEADER {
        return Err(format!("{} bytes, shorter than the header", bytes.len()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    let (r, c) = (word(0) as usize, word(1) as usize);
    let want = r
        .checked_mul(c)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER))
        .ok_or_else(|| format!("shape {r}x{c} overflows"))?;
    if bytes.len() != want {
        return Err(format!("shape {r}x{c} needs {want} bytes, found {}", bytes.len()));
    }
    let body = &bytes[HEADER..];
    Ok(DMatrix::from_fn(r, c, |i, j| {
        let k = 8 * (i * c + j);
        f64::from_le_bytes(body[k..k + 8].try_into().unwrap())
    }))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, encode(m)).map_err(BenchError::io(path))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(BenchError::io(path))?;
    decode(&bytes).map_err(|reason| BenchError::MatrixFormat {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(BenchError::MatrixFormat {
            path: path.to_path_buf(),
            reason: format!("expected a column vector, found {}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(m.column(0).into_owned())
}

/// Plain-text export, one row per line, shortest round-trip formatting.
pub fn write_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = fs::File::create(path).map_err(BenchError::io(path))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        writeln!(f, "{}", row.join(",")).map_err(BenchError::io(path))?;
    }
    Ok(())
}
