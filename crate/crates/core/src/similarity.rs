//! Pairwise similarity between dataset entries: Gower similarity for mixed
//! types and rescaled cosine similarity for precomputed embeddings.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::dataset::{Cell, ColumnKind, ColumnSchema, TabularDataset};
use crate::error::{Error, Result};
use crate::matrix::{self, SquareMatrix};

/// Symmetric matrix with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(SquareMatrix);

impl SimilarityMatrix {
    /// Validates symmetry (exact), unit diagonal and range.
    pub fn new(m: SquareMatrix) -> Result<Self> {
        let n = m.n();
        for i in 0..n {
            if m.get(i, i) != 1.0 {
                return Err(Error::Parameter(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Parameter(format!(
                        "entry ({i},{j}) = {v} outside [0,1]"
                    )));
                }
                if v != m.get(j, i) {
                    return Err(Error::Parameter(format!(
                        "entry ({i},{j}) is not symmetric"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    /// `rho = 1 - S'` elementwise.
    pub fn distances(&self) -> SquareMatrix {
        SquareMatrix::from_fn(self.n(), |i, j| 1.0 - self.get(i, j))
    }

    pub fn header(&self) -> String {
        format!("fairsim-similarity v1 n={}", self.n())
    }

    pub fn write_grid<W: Write>(&self, w: W) -> Result<()> {
        matrix::write_grid(w, &self.header(), &self.0)
    }

    pub fn read_grid<R: BufRead>(r: R) -> Result<Self> {
        let (header, m) = matrix::read_grid(r, ',')?;
        if !header.starts_with("fairsim-similarity v1") {
            return Err(Error::Parse {
                row: 0,
                message: format!("unexpected header `{header}`"),
            });
        }
        check_header_n(&header, m.n())?;
        Self::new(m)
    }
}

pub(crate) fn check_header_n(header: &str, n: usize) -> Result<()> {
    match matrix::header_field(header, "n").map(str::parse::<usize>) {
        Some(Ok(h)) if h == n => Ok(()),
        _ => Err(Error::Parse {
            row: 0,
            message: format!("header `{header}` does not declare n={n}"),
        }),
    }
}

/// `N x dim` embedding vectors; no vector may be all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "embedding {i} has dimension {}",
                    v.len()
                )));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::Parameter(format!("embedding {i} is all zero")));
            }
        }
        Ok(Self { vectors })
    }

    pub fn read<R: BufRead>(r: R, delimiter: char) -> Result<Self> {
        Self::new(matrix::read_numeric_rows(r, delimiter)?)
    }

    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map(Vec::len).unwrap_or(0)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

#[derive(Debug, Clone)]
pub enum SimilarityMethod {
    Gower,
    Cosine(EmbeddingSet),
}

/// Gower similarity between two rows over the `features` columns.
///
/// Numeric features contribute `1 - |a - b| / (max - min)` using the column's
/// observed range, categorical ones `1` on equality and `0` otherwise. Features
/// missing in either row are left out of both the sum and the count. A
/// constant numeric column contributes 1 when the cells are equal and is left
/// out otherwise.
///
/// On failure the error names the rows as `a = 0`, `b = 1`.
pub fn gower_similarity(
    row_a: &[Cell],
    row_b: &[Cell],
    columns: &[ColumnSchema],
    features: &[usize],
) -> Result<f64> {
    gower_pair(row_a, row_b, columns, features).ok_or(Error::UndefinedSimilarity { a: 0, b: 1 })
}

fn gower_pair(
    row_a: &[Cell],
    row_b: &[Cell],
    columns: &[ColumnSchema],
    features: &[usize],
) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &g in features {
        let col = &columns[g];
        match (row_a[g], row_b[g], col.kind) {
            (Cell::Num(a), Cell::Num(b), ColumnKind::Numeric) => {
                let (lo, hi) = col.range.unwrap_or((a.min(b), a.max(b)));
                let span = hi - lo;
                if span > 0.0 {
                    let s = 1.0 - (a - b).abs() / span;
                    sum += s.clamp(0.0, 1.0);
                    count += 1;
                } else if a == b {
                    sum += 1.0;
                    count += 1;
                }
            }
            (Cell::Cat(a), Cell::Cat(b), ColumnKind::Categorical) => {
                if a == b {
                    sum += 1.0;
                }
                count += 1;
            }
            _ => {}
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Gower similarity matrix of the dataset's rows over its feature columns
/// (every column except the target).
pub fn similarity_matrix(
    ds: &TabularDataset,
    method: &SimilarityMethod,
) -> Result<SimilarityMatrix> {
    match method {
        SimilarityMethod::Gower => gower_matrix(ds.rows(), ds.columns(), &ds.feature_indices()),
        SimilarityMethod::Cosine(emb) => {
            if emb.n() != ds.n_rows() {
                return Err(Error::Dimension(format!(
                    "{} embeddings for {} rows",
                    emb.n(),
                    ds.n_rows()
                )));
            }
            Ok(cosine_matrix(emb))
        }
    }
}

/// Gower similarity matrix over arbitrary rows and feature columns. Each
/// entry is computed independently of every other.
pub fn gower_matrix(
    rows: &[Vec<Cell>],
    columns: &[ColumnSchema],
    features: &[usize],
) -> Result<SimilarityMatrix> {
    let n = rows.len();
    let upper: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    gower_pair(&rows[i], &rows[j], columns, features)
                        .map(|s| if i == j { 1.0 } else { s })
                        .ok_or(Error::UndefinedSimilarity { a: i, b: j })
                })
                .collect()
        })
        .collect();
    let mut m = SquareMatrix::zeros(n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            let j = i + off;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(SimilarityMatrix(m))
}

/// Cosine similarity rescaled from `[-1, 1]` to `[0, 1]` via `(c + 1) / 2`.
pub fn cosine_matrix(emb: &EmbeddingSet) -> SimilarityMatrix {
    let norms: Vec<f64> = emb
        .vectors()
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let v = emb.vectors();
    let m = SquareMatrix::from_fn(emb.n(), |i, j| {
        if i == j {
            return 1.0;
        }
        // Order the operands so (i, j) and (j, i) evaluate identically.
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let dot: f64 = v[a].iter().zip(&v[b]).map(|(x, y)| x * y).sum();
        let c = (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0);
        (c + 1.0) / 2.0
    });
    SimilarityMatrix(m)
}

/// Row `a` of the similarity matrix is the feature vector of entry `a`
/// (self-similarity included).
pub fn mapped_features(m: &SimilarityMatrix) -> Vec<Vec<f64>> {
    m.matrix().to_rows()
}
