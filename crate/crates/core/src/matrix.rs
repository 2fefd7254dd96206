//! Dense square matrices and the plain-text grid format shared by the
//! similarity and kernel artifacts.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major dense `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix by evaluating `f(i, j)` for every entry, rows in parallel.
    pub fn from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let mut data = vec![0.0; n * n];
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f(i, j);
                }
            });
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    /// Largest absolute asymmetry `|A[i][j] - A[j][i]|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    /// Matrix product. Each output entry sums over `k` in ascending order, so
    /// the result does not depend on how rows are scheduled across threads.
    pub fn matmul(&self, other: &SquareMatrix) -> Result<SquareMatrix> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.n, self.n, other.n, other.n
            )));
        }
        let n = self.n;
        let mut data = vec![0.0; n * n];
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
                let a = self.row(i);
                for (j, slot) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (k, &aik) in a.iter().enumerate() {
                        acc += aik * other.data[k * n + j];
                    }
                    *slot = acc;
                }
            });
        }
        Ok(SquareMatrix { n, data })
    }

    /// Averages the matrix with its transpose.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.rows()
            .zip(x)
            .map(|(row, &xi)| xi * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    /// Principal submatrix on the given indices, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> SquareMatrix {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        SquareMatrix { n: m, data }
    }

    /// Symmetric eigenvalues in ascending order.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data);
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl AsRef<SquareMatrix> for SquareMatrix {
    fn as_ref(&self) -> &SquareMatrix {
        self
    }
}

/// Writes `header` (without the leading `# `) followed by one comma-separated
/// line per row. Values use the shortest representation that parses back to
/// the same `f64`.
pub fn write_grid<W: Write>(mut w: W, header: &str, m: &SquareMatrix) -> Result<()> {
    writeln!(w, "# {header}")?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads a grid written by [`write_grid`]. Returns the header (without `# `)
/// and the matrix.
pub fn read_grid<R: BufRead>(r: R, delimiter: char) -> Result<(String, SquareMatrix)> {
    let mut header = None;
    let mut rows = Vec::new();
    for (line_no, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(h) = trimmed.strip_prefix('#') {
            if header.is_none() && rows.is_empty() {
                header = Some(h.trim().to_string());
            }
            continue;
        }
        let row = parse_numeric_line(trimmed, delimiter, line_no)?;
        rows.push(row);
    }
    let header = header.ok_or(Error::Parse {
        row: 0,
        message: "missing `#` header line".into(),
    })?;
    Ok((header, SquareMatrix::from_rows(&rows)?))
}

/// Parses a delimiter-separated grid of numbers with no header (rows may have
/// any consistent width).
pub fn read_numeric_rows<R: BufRead>(r: R, delimiter: char) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = parse_numeric_line(trimmed, delimiter, line_no)?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    row: line_no,
                    message: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_numeric_line(line: &str, delimiter: char, line_no: usize) -> Result<Vec<f64>> {
    line.split(delimiter)
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                row: line_no,
                message: format!("`{}` is not a number", tok.trim()),
            })
        })
        .collect()
}

/// Extracts `key=value` from a grid header such as `fairsim-kernel v1 kind=Ek n=4`.
pub fn header_field<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header.split_whitespace().find_map(|tok| {
        tok.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
    })
}
