//! Similarity tuning: the locally scaled exponential kernel (Ek) and the
//! random-walk kernel (RWk) built on top of it.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, SquareMatrix};
use crate::similarity::{check_header_n, SimilarityMatrix};

/// Smallest scale used by the exponential kernel.
pub const EPSILON_FLOOR: f64 = 1e-9;

/// Recommended range for `mu`.
pub const MU_RANGE: (f64, f64) = (0.3, 0.8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Exponential-kernel scale.
    pub mu: f64,
    /// Neighbour count for the local scale; `None` means `min(20, N - 1)`.
    pub k: Option<usize>,
    /// Random-walk offset, must exceed 2.
    pub m: f64,
    /// Random-walk steps.
    pub p: u32,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            mu: 0.5,
            k: None,
            m: 2.5,
            p: 1,
        }
    }
}

impl KernelParams {
    pub fn resolved_k(&self, n: usize) -> usize {
        self.k.unwrap_or_else(|| 20.min(n.saturating_sub(1)))
    }

    fn validate_ek(&self, n: usize) -> Result<usize> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Parameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.mu < MU_RANGE.0 || self.mu > MU_RANGE.1 {
            log::warn!(
                "mu = {} is outside the recommended range [{}, {}]",
                self.mu,
                MU_RANGE.0,
                MU_RANGE.1
            );
        }
        let k = self.resolved_k(n);
        if n >= 2 && !(1..n).contains(&k) {
            return Err(Error::Parameter(format!(
                "k must lie in [1, {}], got {k}",
                n - 1
            )));
        }
        Ok(k)
    }

    fn validate_rw(&self) -> Result<()> {
        if self.m.is_nan() || self.m <= 2.0 {
            return Err(Error::Parameter(format!("m must exceed 2, got {}", self.m)));
        }
        if self.p < 1 {
            return Err(Error::Parameter("p must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Ek,
    RWk,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Ek => "Ek",
            KernelKind::RWk => "RWk",
        })
    }
}

/// Output of one of the kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    matrix: SquareMatrix,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.matrix
    }

    pub fn header(&self) -> String {
        format!("fairsim-kernel v1 kind={} n={}", self.kind, self.n())
    }

    pub fn write_grid<W: Write>(&self, w: W) -> Result<()> {
        matrix::write_grid(w, &self.header(), &self.matrix)
    }

    pub fn read_grid<R: BufRead>(r: R) -> Result<Self> {
        let (header, m) = matrix::read_grid(r, ',')?;
        if !header.starts_with("fairsim-kernel v1") {
            return Err(Error::Parse {
                row: 0,
                message: format!("unexpected header `{header}`"),
            });
        }
        check_header_n(&header, m.n())?;
        let kind = match matrix::header_field(&header, "kind") {
            Some("Ek") => KernelKind::Ek,
            Some("RWk") => KernelKind::RWk,
            other => {
                return Err(Error::Parse {
                    row: 0,
                    message: format!("unknown kernel kind {other:?}"),
                })
            }
        };
        Ok(Self { kind, matrix: m })
    }
}

impl AsRef<SquareMatrix> for KernelMatrix {
    fn as_ref(&self) -> &SquareMatrix {
        &self.matrix
    }
}

impl AsRef<SquareMatrix> for SimilarityMatrix {
    fn as_ref(&self) -> &SquareMatrix {
        self.matrix()
    }
}

/// Mean distance from `x` to its `k` nearest other points. Ties in distance
/// go to the lower index.
pub fn knn_mean_distance(rho: &SquareMatrix, x: usize, k: usize) -> f64 {
    let mut others: Vec<(f64, usize)> = (0..rho.n())
        .filter(|&j| j != x)
        .map(|j| (rho.get(x, j), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = k.min(others.len());
    if k == 0 {
        return 0.0;
    }
    others[..k].iter().map(|&(d, _)| d).sum::<f64>() / k as f64
}

pub fn knn_mean_distances(rho: &SquareMatrix, k: usize) -> Vec<f64> {
    use rayon::prelude::*;
    (0..rho.n())
        .into_par_iter()
        .map(|x| knn_mean_distance(rho, x, k))
        .collect()
}

/// Local scale `(mean(rho(a, N_a)) + mean(rho(b, N_b)) + rho(a, b)) / 3`,
/// unfloored.
pub fn epsilon(a: usize, b: usize, rho: &SquareMatrix, k: usize) -> f64 {
    scale_from_means(
        knn_mean_distance(rho, a, k),
        knn_mean_distance(rho, b, k),
        rho.get(a, b),
    )
}

#[inline]
fn scale_from_means(mean_a: f64, mean_b: f64, rho_ab: f64) -> f64 {
    // Sum the two means in a fixed order so the scale is symmetric bit for bit.
    let (lo, hi) = if mean_a <= mean_b {
        (mean_a, mean_b)
    } else {
        (mean_b, mean_a)
    };
    (lo + hi + rho_ab) / 3.0
}

/// Exponential-kernel weight for a pair with distance `rho_ab` whose
/// endpoints have k-NN mean distances `mean_a`, `mean_b`.
pub fn ek_weight(rho_ab: f64, mean_a: f64, mean_b: f64, mu: f64) -> f64 {
    if rho_ab == 0.0 {
        return 1.0;
    }
    let eps = scale_from_means(mean_a, mean_b, rho_ab).max(EPSILON_FLOOR);
    (-(rho_ab * rho_ab) / (mu * eps))
        .exp()
        .max(f64::MIN_POSITIVE)
}

/// `W(a, b) = exp(-rho^2(a, b) / (mu * eps_{a,b}))` with `rho = 1 - S`.
pub fn exponential_kernel(s: &SimilarityMatrix, params: &KernelParams) -> Result<KernelMatrix> {
    let n = s.n();
    let k = params.validate_ek(n)?;
    let rho = s.distances();
    let means = knn_mean_distances(&rho, k);
    let w = SquareMatrix::from_fn(n, |a, b| {
        if a == b {
            1.0
        } else {
            ek_weight(rho.get(a, b), means[a], means[b], params.mu)
        }
    });
    Ok(KernelMatrix {
        kind: KernelKind::Ek,
        matrix: w,
    })
}

/// `D^{-1/2} W D^{-1/2}` with `d_ii = sum_j W_ij`.
pub fn normalized_weights(w: &SquareMatrix) -> Result<SquareMatrix> {
    let n = w.n();
    let mut inv_sqrt = Vec::with_capacity(n);
    for i in 0..n {
        let d: f64 = w.row(i).iter().sum();
        if d.is_nan() || d <= 0.0 {
            return Err(Error::ZeroDegree(i));
        }
        inv_sqrt.push(1.0 / d.sqrt());
    }
    Ok(SquareMatrix::from_fn(n, |i, j| {
        w.get(i, j) * (inv_sqrt[i] * inv_sqrt[j])
    }))
}

/// `K = (m - 1) I + D^{-1/2} W D^{-1/2}`, raised to the `p`-th power.
pub fn random_walk_kernel<M: AsRef<SquareMatrix>>(
    w: &M,
    params: &KernelParams,
) -> Result<KernelMatrix> {
    params.validate_rw()?;
    let w = w.as_ref();
    if !w.is_symmetric(1e-12) {
        return Err(Error::Parameter("weight matrix is not symmetric".into()));
    }
    if w.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Parameter(
            "weight matrix has negative or non-finite entries".into(),
        ));
    }
    let mut k = normalized_weights(w)?;
    for i in 0..k.n() {
        k.set(i, i, k.get(i, i) + (params.m - 1.0));
    }
    let base = k.clone();
    for step in 1..params.p {
        k = k.matmul(&base)?;
        if step >= 2 {
            k.symmetrize();
        }
    }
    Ok(KernelMatrix {
        kind: KernelKind::RWk,
        matrix: k,
    })
}
