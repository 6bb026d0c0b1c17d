//! Plain-text matrices: a `rows cols` header followed by row-major values.
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use klcert::linalg::Matrix;

pub fn parse_matrix(text: &str) -> Result<Matrix<f64>> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let mut dim = |what: &str| -> Result<usize> {
        let t = tokens
            .next()
            .with_context(|| format!("missing {what} in header"))?;
        t.parse().with_context(|| format!("bad {what} {t:?}"))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let data = tokens
        .map(|t| t.parse::<f64>().with_context(|| format!("bad value {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    if data.len() != rows * cols {
        bail!(
            "header says {rows}x{cols} = {} values, found {}",
            rows * cols,
            data.len()
        );
    }
    Ok(Matrix::new(rows, cols, data)?)
}

/// A vector is a matrix with one row or one column.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let m = parse_matrix(text)?;
    if m.rows() != 1 && m.cols() != 1 {
        bail!("expected a vector, got a {}x{} matrix", m.rows(), m.cols());
    }
    Ok(m.data().to_vec())
}

pub fn read_matrix(path: &Path) -> Result<Matrix<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_matrix(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_vector(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Values are written with 17 significant digits so they read back exactly.
pub fn format_matrix(m: &Matrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = Matrix::from_rows(&[
            vec![0.1, -2.0 / 3.0, 1e-300],
            vec![std::f64::consts::PI, 0.0, -7.5],
        ])
        .unwrap();
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn comments_and_errors() {
        let m = parse_matrix("# design\n2 1\n1.5 # first\n\n-2\n").unwrap();
        assert_eq!(m.data(), &[1.5, -2.0]);
        assert_eq!(parse_vector("1 3\n1 2 3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_matrix("2 2\n1 2 3").is_err());
        assert!(parse_matrix("2 x").is_err());
        assert!(parse_vector("2 2\n1 2 3 4").is_err());
    }
}
