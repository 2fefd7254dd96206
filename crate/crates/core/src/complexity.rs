//! Classification complexity measures: feature-based (F1-F4), neighbourhood
//! (N1-N3), dimensionality (T2-T4), class imbalance (C1, C2) and network
//! measures, with one-vs-one decomposition for multiclass labels.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::network::{network_measures, SimilarityNetwork};

/// Variance share retained by the principal components counted in T3/T4.
pub const PCA_VARIANCE_SHARE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureMeasures {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborhoodMeasures {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionalityMeasures {
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub pca_components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImbalanceMeasures {
    pub c1: f64,
    pub c2: f64,
    /// Only one class present; both measures are set to 1.
    pub single_class: bool,
}

/// Splits binary labels into the two class index lists, classes ordered by
/// label value.
fn binary_split(y: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let classes: BTreeSet<usize> = y.iter().copied().collect();
    match classes.len() {
        0 | 1 => Err(Error::SingleClass),
        2 => {
            let first = *classes.iter().next().unwrap();
            let (a, b): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| y[i] == first);
            Ok((a, b))
        }
        k => Err(Error::Parameter(format!(
            "binary measure called with {k} classes; use ovo_decompose"
        ))),
    }
}

fn column(x: &[Vec<f64>], f: usize, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| x[i][f]).collect()
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Fisher discriminant ratio of one feature:
/// `sum_c n_c (mu_c - mu)^2 / sum_c sum_{i in c} (x_i - mu_c)^2`.
pub fn fisher_ratio(a: &[f64], b: &[f64]) -> f64 {
    let all_mean = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (a.len() + b.len()) as f64;
    let (ma, mb) = (mean(a), mean(b));
    let between =
        a.len() as f64 * (ma - all_mean).powi(2) + b.len() as f64 * (mb - all_mean).powi(2);
    let within: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
        + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    if within == 0.0 {
        if between == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        between / within
    }
}

/// Overlap interval `[max of mins, min of maxes]` of one feature over the
/// two classes, or `None` when the class ranges are disjoint.
fn overlap_interval(x: &[Vec<f64>], f: usize, a: &[usize], b: &[usize]) -> Option<(f64, f64)> {
    let (a_lo, a_hi) = min_max(&column(x, f, a));
    let (b_lo, b_hi) = min_max(&column(x, f, b));
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    (lo <= hi).then_some((lo, hi))
}

fn count_in(x: &[Vec<f64>], f: usize, idx: &[usize], interval: Option<(f64, f64)>) -> usize {
    match interval {
        None => 0,
        Some((lo, hi)) => idx
            .iter()
            .filter(|&&i| x[i][f] >= lo && x[i][f] <= hi)
            .count(),
    }
}

/// F1 (maximum Fisher ratio), F2 (overlap volume), F3 (maximum individual
/// feature efficiency) and F4 (collective feature efficiency) for binary labels.
pub fn feature_based(x: &[Vec<f64>], y: &[usize]) -> Result<FeatureMeasures> {
    let (a, b) = binary_split(y)?;
    let n = y.len();
    let d = x.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(Error::Dimension("no features".into()));
    }

    let max_ratio = (0..d)
        .map(|f| fisher_ratio(&column(x, f, &a), &column(x, f, &b)))
        .fold(0.0, f64::max);
    let f1 = 1.0 / (1.0 + max_ratio);

    let mut f2 = 1.0;
    for f in 0..d {
        let (a_lo, a_hi) = min_max(&column(x, f, &a));
        let (b_lo, b_hi) = min_max(&column(x, f, &b));
        let span = a_hi.max(b_hi) - a_lo.min(b_lo);
        if span > 0.0 {
            let overlap = (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0);
            f2 *= overlap / span;
        }
    }

    let all: Vec<usize> = (0..n).collect();
    let min_overlap = (0..d)
        .map(|f| count_in(x, f, &all, overlap_interval(x, f, &a, &b)))
        .min()
        .unwrap();
    let f3 = min_overlap as f64 / n as f64;

    let mut remaining = all;
    let mut features: Vec<usize> = (0..d).collect();
    while !features.is_empty() && !remaining.is_empty() {
        let (ra, rb): (Vec<usize>, Vec<usize>) = remaining.iter().partition(|&&i| y[i] == y[a[0]]);
        if ra.is_empty() || rb.is_empty() {
            remaining.clear();
            break;
        }
        let (pos, best_f, interval) = features
            .iter()
            .enumerate()
            .map(|(p, &f)| {
                let iv = overlap_interval(x, f, &ra, &rb);
                (p, f, iv, count_in(x, f, &remaining, iv))
            })
            .min_by_key(|&(p, _, _, c)| (c, p))
            .map(|(p, f, iv, _)| (p, f, iv))
            .unwrap();
        remaining = match interval {
            None => Vec::new(),
            Some((lo, hi)) => remaining
                .into_iter()
                .filter(|&i| x[i][best_f] >= lo && x[i][best_f] <= hi)
                .collect(),
        };
        features.remove(pos);
    }
    let f4 = remaining.len() as f64 / n as f64;

    Ok(FeatureMeasures { f1, f2, f3, f4 })
}

/// Nearest other point to `i` within `candidates` (ties to the lower index).
fn nearest(
    dist: &SquareMatrix,
    i: usize,
    candidates: impl Iterator<Item = usize>,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for j in candidates {
        if j == i {
            continue;
        }
        let d = dist.get(i, j);
        if best.is_none_or(|(bj, bd)| d < bd || (d == bd && j < bj)) {
            best = Some((j, d));
        }
    }
    best
}

/// Minimum spanning tree by Prim's method. Returns `(parent, child)` edges.
/// Ties in distance go to the lower vertex index.
pub fn minimum_spanning_tree(dist: &SquareMatrix) -> Vec<(usize, usize)> {
    let n = dist.n();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = dist.get(0, j);
        parent[j] = 0;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((parent[next], next));
        for j in 0..n {
            if !in_tree[j] && dist.get(next, j) < best[j] {
                best[j] = dist.get(next, j);
                parent[j] = next;
            }
        }
    }
    edges
}

/// N1 (MST boundary fraction), N2 (intra/extra nearest-neighbour distance
/// ratio mapped by `r / (1 + r)`) and N3 (leave-one-out 1-NN error) from a
/// precomputed distance matrix.
pub fn neighborhood(dist: &SquareMatrix, y: &[usize]) -> Result<NeighborhoodMeasures> {
    let n = y.len();
    if dist.n() != n {
        return Err(Error::Dimension(
            "distance matrix does not match labels".into(),
        ));
    }
    let classes: BTreeSet<usize> = y.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }

    let mut boundary = vec![false; n];
    for (p, c) in minimum_spanning_tree(dist) {
        if y[p] != y[c] {
            boundary[p] = true;
            boundary[c] = true;
        }
    }
    let n1 = boundary.iter().filter(|&&b| b).count() as f64 / n as f64;

    let mut intra = 0.0;
    let mut extra = 0.0;
    for i in 0..n {
        let same = nearest(dist, i, (0..n).filter(|&j| y[j] == y[i]));
        let other = nearest(dist, i, (0..n).filter(|&j| y[j] != y[i]));
        if let (Some((_, ds)), Some((_, dd))) = (same, other) {
            intra += ds;
            extra += dd;
        }
    }
    let n2 = if extra > 0.0 {
        let r = intra / extra;
        r / (1.0 + r)
    } else {
        1.0
    };

    let errors = (0..n)
        .filter(|&i| match nearest(dist, i, 0..n) {
            Some((j, _)) => y[j] != y[i],
            None => false,
        })
        .count();
    let n3 = errors as f64 / n as f64;

    Ok(NeighborhoodMeasures { n1, n2, n3 })
}

/// Euclidean distance matrix of feature rows.
pub fn euclidean_distances(x: &[Vec<f64>]) -> SquareMatrix {
    SquareMatrix::from_fn(x.len(), |i, j| {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    })
}

/// Number of principal components needed to explain `share` of the variance.
pub fn pca_components(x: &[Vec<f64>], share: f64) -> usize {
    let n = x.len();
    let d = x.first().map(Vec::len).unwrap_or(0);
    if n < 2 || d == 0 {
        return 0;
    }
    let means: Vec<f64> = (0..d)
        .map(|f| x.iter().map(|r| r[f]).sum::<f64>() / n as f64)
        .collect();
    let mut centered = nalgebra::DMatrix::<f64>::zeros(n, d);
    for (i, r) in x.iter().enumerate() {
        for f in 0..d {
            centered[(i, f)] = r[f] - means[f];
        }
    }
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let mut ev: Vec<f64> = cov
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = ev.iter().sum();
    let scale = x
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    if total <= 1e-12 * scale * scale {
        return 0;
    }
    let mut acc = 0.0;
    for (k, v) in ev.iter().enumerate() {
        acc += v;
        if acc >= share * total * (1.0 - 1e-12) {
            return k + 1;
        }
    }
    d
}

/// T2 = d / n, T3 = d' / n, T4 = d' / d with `d'` the PCA component count.
pub fn dimensionality(x: &[Vec<f64>]) -> Result<DimensionalityMeasures> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: n,
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Dimension("no features".into()));
    }
    let dp = pca_components(x, PCA_VARIANCE_SHARE);
    Ok(DimensionalityMeasures {
        t2: d as f64 / n as f64,
        t3: dp as f64 / n as f64,
        t4: dp as f64 / d as f64,
        pca_components: dp,
    })
}

/// C1 (one minus normalised class entropy) and C2 (one minus the inverse
/// multiclass imbalance ratio). Classes with zero count are ignored.
pub fn class_imbalance(y: &[usize]) -> ImbalanceMeasures {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in y {
        *counts.entry(v).or_default() += 1;
    }
    let nc = counts.len();
    if nc < 2 {
        return ImbalanceMeasures {
            c1: 1.0,
            c2: 1.0,
            single_class: true,
        };
    }
    let n = y.len() as f64;
    let entropy_term: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum();
    let c1 = 1.0 + entropy_term / (nc as f64).ln();
    let ir = (nc as f64 - 1.0) / nc as f64
        * counts
            .values()
            .map(|&c| c as f64 / (n - c as f64))
            .sum::<f64>();
    let c2 = 1.0 - 1.0 / ir;
    ImbalanceMeasures {
        c1,
        c2,
        single_class: false,
    }
}

/// Measures for one class pair of a one-vs-one decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMeasures {
    pub classes: (usize, usize),
    pub measures: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OvoResult {
    pub mean: BTreeMap<String, f64>,
    pub per_pair: Vec<PairMeasures>,
    pub skipped: Vec<(usize, usize)>,
}

/// Evaluates `measure` on the rows of every unordered class pair and
/// averages each named value across pairs without weighting. The closure
/// receives the row indices of the pair and their labels.
pub fn ovo_decompose<F>(y: &[usize], measure: F) -> Result<OvoResult>
where
    F: Fn(&[usize], &[usize]) -> Result<BTreeMap<String, f64>> + Sync,
{
    let classes: Vec<usize> = y
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let pairs: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(p, &a)| classes[p + 1..].iter().map(move |&b| (a, b)))
        .collect();
    type PairResult = ((usize, usize), Option<Result<BTreeMap<String, f64>>>);
    let results: Vec<PairResult> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == a || y[i] == b).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            let has_both = labels.contains(&a) && labels.contains(&b);
            ((a, b), has_both.then(|| measure(&idx, &labels)))
        })
        .collect();
    let mut per_pair = Vec::new();
    let mut skipped = Vec::new();
    for (pair, r) in results {
        match r {
            Some(m) => per_pair.push(PairMeasures {
                classes: pair,
                measures: m?,
            }),
            None => {
                log::warn!("one-vs-one pair {pair:?} has an empty class; skipped");
                skipped.push(pair);
            }
        }
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for p in &per_pair {
        for (k, &v) in &p.measures {
            let e = sums.entry(k.clone()).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    let mean = sums
        .into_iter()
        .map(|(k, (s, c))| (k, s / c as f64))
        .collect();
    Ok(OvoResult {
        mean,
        per_pair,
        skipped,
    })
}

/// All measures for one dataset representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    /// Values clipped to `[0, 1]`.
    pub measures: BTreeMap<String, f64>,
    /// Values as computed.
    pub raw: BTreeMap<String, f64>,
    /// Measures whose raw value fell outside `[0, 1]`.
    pub out_of_range: Vec<String>,
    pub ovo: bool,
    pub per_pair: Vec<PairMeasures>,
}

fn pair_measures(
    x: &[Vec<f64>],
    dist: &SquareMatrix,
    idx: &[usize],
    labels: &[usize],
) -> Result<BTreeMap<String, f64>> {
    let sub_x: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
    let f = feature_based(&sub_x, labels)?;
    let nb = neighborhood(&dist.submatrix(idx), labels)?;
    Ok(BTreeMap::from([
        ("F1".to_string(), f.f1),
        ("F2".to_string(), f.f2),
        ("F3".to_string(), f.f3),
        ("F4".to_string(), f.f4),
        ("N1".to_string(), nb.n1),
        ("N2".to_string(), nb.n2),
        ("N3".to_string(), nb.n3),
    ]))
}

/// Computes the full report. F and N measures go through one-vs-one
/// decomposition when there are more than two classes; `dist` is the
/// distance used by the N family; network measures are included when a
/// network is supplied.
pub fn complexity_report(
    x: &[Vec<f64>],
    y: &[usize],
    dist: &SquareMatrix,
    net: Option<&SimilarityNetwork>,
) -> Result<ComplexityReport> {
    if x.len() != y.len() || dist.n() != y.len() {
        return Err(Error::Dimension(
            "features, labels and distances disagree".into(),
        ));
    }
    let n_classes = y.iter().collect::<BTreeSet<_>>().len();
    let ovo = n_classes > 2;
    let (mut raw, per_pair) = if ovo {
        let r = ovo_decompose(y, |idx, labels| pair_measures(x, dist, idx, labels))?;
        (r.mean, r.per_pair)
    } else {
        let idx: Vec<usize> = (0..y.len()).collect();
        (pair_measures(x, dist, &idx, y)?, Vec::new())
    };
    let t = dimensionality(x)?;
    raw.insert("T2".into(), t.t2);
    raw.insert("T3".into(), t.t3);
    raw.insert("T4".into(), t.t4);
    let c = class_imbalance(y);
    raw.insert("C1".into(), c.c1);
    raw.insert("C2".into(), c.c2);
    if let Some(net) = net {
        let m = network_measures(net);
        raw.insert("Density".into(), m.density);
        raw.insert("ClsCoef".into(), m.clustering_coefficient);
        raw.insert("Hubs".into(), m.hub_mean);
    }
    let mut out_of_range = Vec::new();
    let mut measures = BTreeMap::new();
    for (k, &v) in &raw {
        if !v.is_finite() {
            return Err(Error::Parameter(format!("measure {k} is not finite")));
        }
        if !(0.0..=1.0).contains(&v) {
            out_of_range.push(k.clone());
        }
        measures.insert(k.clone(), v.clamp(0.0, 1.0));
    }
    Ok(ComplexityReport {
        measures,
        raw,
        out_of_range,
        ovo,
        per_pair,
    })
}
