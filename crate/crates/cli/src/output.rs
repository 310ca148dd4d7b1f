//! Writers for CSV tables, JSON reports and failure manifests.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cqe_core::nalgebra::{DMatrix, Scalar};

use crate::error::CliResult;

/// Writes to `path`, or to stdout when `None`.
pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_json(path: Option<&Path>, value: &serde_json::Value) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

/// Shortest round-trip text of `x`, switching to exponent form outside [1e-4, 1e15).
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// CSV text from a header and rows of numbers.
pub fn csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Matrix as CSV without a header.
pub fn matrix_csv<T: Display + Scalar>(m: &DMatrix<T>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Path of the manifest accompanying a partially written output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Records the first failed sweep point next to `out` (or on stderr).
pub fn write_manifest(out: Option<&Path>, value: &serde_json::Value) -> CliResult<()> {
    match out {
        Some(p) => write_json(Some(&manifest_path(p)), value),
        None => {
            eprintln!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let t = csv(&["a".into(), "b".into()], &[vec![1.0, 0.5], vec![-2.0, 1e-20]]);
        assert_eq!(t, "a,b\n1,0.5\n-2,1e-20\n");
    }

    #[test]
    fn number_forms() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(3.25), "3.25");
        assert_eq!(num(-2.5e-7), "-2.5e-7");
        assert_eq!(num(4e20), "4e20");
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/spec.csv")), PathBuf::from("out/spec.csv.manifest.json"));
    }

    #[test]
    fn integer_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1, -1, 0, 2]);
        assert_eq!(matrix_csv(&m), "1,-1\n0,2\n");
    }
}
