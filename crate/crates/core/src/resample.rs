//! Network-guided imputation, SMOTE and group-balancing oversampling, and
//! graph-based augmentation with vector-label propagation.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Cell, ColumnKind, ColumnSchema, TabularDataset};
use crate::error::{Error, Result};
use crate::kernels::{ek_weight, knn_mean_distances, KernelParams};
use crate::network::{components_by_size, SimilarityNetwork};
use crate::rng;
use crate::similarity::{gower_matrix, gower_similarity};

pub const ORIGIN_COLUMN: &str = "__fairsim_origin";
pub const SMOTE_NEIGHBORS: usize = 5;
/// Jitter standard deviation as a share of each numeric column's range.
pub const JITTER_SHARE: f64 = 0.01;
pub const PROPAGATION_TOL: f64 = 1e-6;
pub const PROPAGATION_MAX_ITERS: usize = 1000;
/// Links kept by each synthetic node of graph augmentation.
pub const SYNTHETIC_LINKS: usize = 2;
const MAX_AUGMENT_ROUNDS: usize = 50;

// ---------------------------------------------------------------- imputation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeSource {
    Neighbors,
    TwoHop,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputedCell {
    pub row: usize,
    pub column: String,
    pub source: ImputeSource,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct Imputation {
    pub dataset: TabularDataset,
    pub provenance: Vec<ImputedCell>,
}

/// Weighted mean clamped to the contributing values' range.
fn weighted_mean(votes: &[(f64, f64)]) -> f64 {
    let total: f64 = votes.iter().map(|v| v.1).sum();
    let lo = votes.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let hi = votes.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let mean = if total > 0.0 {
        votes.iter().map(|(x, w)| x * w).sum::<f64>() / total
    } else {
        votes.iter().map(|v| v.0).sum::<f64>() / votes.len() as f64
    };
    mean.clamp(lo, hi)
}

/// Level with the largest total weight; ties go to the smaller code.
fn weighted_majority(votes: &[(u32, f64)]) -> u32 {
    let mut totals: BTreeMap<u32, f64> = BTreeMap::new();
    for &(c, w) in votes {
        *totals.entry(c).or_default() += w;
    }
    let mut best: Option<(u32, f64)> = None;
    for (c, w) in totals {
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((c, w));
        }
    }
    best.unwrap().0
}

fn aggregate(cells: &[(Cell, f64)], kind: ColumnKind) -> Option<Cell> {
    if cells.is_empty() {
        return None;
    }
    Some(match kind {
        ColumnKind::Numeric => {
            let v: Vec<(f64, f64)> = cells
                .iter()
                .filter_map(|(c, w)| c.as_num().map(|x| (x, *w)))
                .collect();
            Cell::Num(weighted_mean(&v))
        }
        ColumnKind::Categorical => {
            let v: Vec<(u32, f64)> = cells
                .iter()
                .filter_map(|(c, w)| c.as_cat().map(|x| (x, *w)))
                .collect();
            Cell::Cat(weighted_majority(&v))
        }
    })
}

/// Two-hop neighbours of `i` (excluding `i` and its direct neighbours), each
/// weighted by the largest product of edge weights along a connecting path.
fn two_hop(net: &SimilarityNetwork, i: usize) -> Vec<(usize, f64)> {
    let direct: HashSet<usize> = net.neighbors(i).iter().map(|e| e.0).collect();
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for &(k, w1) in net.neighbors(i) {
        for &(j, w2) in net.neighbors(k) {
            if j == i || direct.contains(&j) {
                continue;
            }
            let w = w1 * w2;
            let e = best.entry(j).or_insert(w);
            if w > *e {
                *e = w;
            }
        }
    }
    best.into_iter().collect()
}

/// Fills every missing cell from the row's network neighbours: a weighted
/// mean for numeric columns, a weighted majority for categorical ones. When
/// no neighbour observes the column the two-hop neighbourhood is used, then
/// the global column statistic. Only originally observed values are ever
/// read, so the result does not depend on the order cells are filled.
pub fn impute(ds: &TabularDataset, net: &SimilarityNetwork) -> Result<Imputation> {
    if net.n_nodes() != ds.n_rows() {
        return Err(Error::Dimension(format!(
            "network over {} nodes for {} rows",
            net.n_nodes(),
            ds.n_rows()
        )));
    }
    let n_cols = ds.n_columns();
    let global: Vec<Option<Cell>> = (0..n_cols)
        .map(|c| {
            let cells: Vec<(Cell, f64)> = (0..ds.n_rows())
                .map(|i| (ds.cell(i, c), 1.0))
                .filter(|(x, _)| !x.is_missing())
                .collect();
            aggregate(&cells, ds.column(c).kind)
        })
        .collect();

    let missing: Vec<(usize, usize)> = (0..ds.n_rows())
        .flat_map(|i| (0..n_cols).map(move |c| (i, c)))
        .filter(|&(i, c)| ds.cell(i, c).is_missing())
        .collect();

    let filled: Vec<(usize, usize, Cell, ImputeSource)> = missing
        .par_iter()
        .map(|&(i, c)| {
            let kind = ds.column(c).kind;
            let observed = |list: &[(usize, f64)]| -> Vec<(Cell, f64)> {
                list.iter()
                    .map(|&(j, w)| (ds.cell(j, c), w))
                    .filter(|(x, _)| !x.is_missing())
                    .collect()
            };
            if let Some(v) = aggregate(&observed(net.neighbors(i)), kind) {
                return Ok((i, c, v, ImputeSource::Neighbors));
            }
            if let Some(v) = aggregate(&observed(&two_hop(net, i)), kind) {
                return Ok((i, c, v, ImputeSource::TwoHop));
            }
            match global[c] {
                Some(v) => Ok((i, c, v, ImputeSource::Global)),
                None => Err(Error::MissingCell {
                    row: i,
                    column: ds.column(c).name.clone(),
                }),
            }
        })
        .collect::<Result<_>>()?;

    let updates: Vec<(usize, usize, Cell)> = filled.iter().map(|&(i, c, v, _)| (i, c, v)).collect();
    let out = ds.replace_cells(&updates)?;
    let provenance = filled
        .into_iter()
        .map(|(row, c, v, source)| ImputedCell {
            row,
            column: ds.column(c).name.clone(),
            source,
            value: out.render(c, &v),
        })
        .collect();
    Ok(Imputation {
        dataset: out,
        provenance,
    })
}

// ------------------------------------------------------------- augmentation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Smote,
    Group,
    Graph,
}

impl Origin {
    pub fn label(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Smote => "smote",
            Origin::Group => "group",
            Origin::Graph => "graph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentMethod {
    Smote,
    GroupBalance { column: String },
    Graph,
}

/// Desired row counts per class (or per level of the balancing column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub method: AugmentMethod,
    pub target_counts: BTreeMap<String, usize>,
    pub seed: u64,
}

impl AugmentationPlan {
    /// Brings every class (or group level) up to the largest count.
    pub fn equalize(ds: &TabularDataset, method: AugmentMethod, seed: u64) -> Result<Self> {
        let (names, counts) = plan_axis(ds, &method)?;
        let max = counts.iter().copied().max().unwrap_or(0);
        Ok(Self {
            method,
            target_counts: names.into_iter().map(|n| (n, max)).collect(),
            seed,
        })
    }

    /// Rows to add per level, in level order. Unlisted levels need none.
    fn deficits(&self, names: &[String], counts: &[usize]) -> Result<Vec<usize>> {
        for key in self.target_counts.keys() {
            if !names.contains(key) {
                return Err(Error::Parameter(format!(
                    "plan names unknown level `{key}`"
                )));
            }
        }
        names
            .iter()
            .zip(counts)
            .map(|(name, &have)| match self.target_counts.get(name) {
                None => Ok(0),
                Some(&want) if want < have => Err(Error::Parameter(format!(
                    "plan asks {want} rows of `{name}` but {have} exist"
                ))),
                Some(&want) => Ok(want - have),
            })
            .collect()
    }
}

/// Level names and counts along which a plan is expressed.
fn plan_axis(ds: &TabularDataset, method: &AugmentMethod) -> Result<(Vec<String>, Vec<usize>)> {
    match method {
        AugmentMethod::GroupBalance { column } => {
            let c = ds.column_index(column)?;
            let col = ds.column(c);
            if col.kind != ColumnKind::Categorical || col.levels.len() < 2 {
                return Err(Error::Schema(format!(
                    "balancing column `{column}` must be categorical with at least two levels"
                )));
            }
            let mut counts = vec![0; col.levels.len()];
            for i in 0..ds.n_rows() {
                match ds.cell(i, c) {
                    Cell::Cat(v) => counts[v as usize] += 1,
                    _ => {
                        return Err(Error::MissingCell {
                            row: i,
                            column: column.clone(),
                        })
                    }
                }
            }
            Ok((col.levels.clone(), counts))
        }
        _ => {
            let l = ds.labels()?;
            let counts = l.counts();
            Ok((l.names, counts))
        }
    }
}

/// A dataset with the origin of every row.
#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    pub dataset: TabularDataset,
    pub origin: Vec<Origin>,
    pub warnings: Vec<String>,
    /// Graph augmentation only: `(synthetic row, real row, weight)` links.
    pub links: Vec<(usize, usize, f64)>,
    /// Graph augmentation only: every propagation round converged.
    pub propagation_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProvenanceSummary {
    pub original: usize,
    pub smote: usize,
    pub group: usize,
    pub graph: usize,
}

impl AugmentedDataset {
    fn unchanged(ds: &TabularDataset) -> Self {
        Self {
            dataset: ds.clone(),
            origin: vec![Origin::Original; ds.n_rows()],
            warnings: Vec::new(),
            links: Vec::new(),
            propagation_converged: true,
        }
    }

    pub fn summary(&self) -> ProvenanceSummary {
        let count = |o: Origin| self.origin.iter().filter(|&&x| x == o).count();
        ProvenanceSummary {
            original: count(Origin::Original),
            smote: count(Origin::Smote),
            group: count(Origin::Group),
            graph: count(Origin::Graph),
        }
    }

    /// Dataset CSV plus the origin column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let col: Vec<String> = self.origin.iter().map(|o| o.label().to_string()).collect();
        self.dataset.write_csv_with(w, Some((ORIGIN_COLUMN, &col)))
    }
}

fn append(ds: &TabularDataset, rows: Vec<Vec<Cell>>, origin: Origin) -> Result<AugmentedDataset> {
    let added = rows.len();
    let mut out = AugmentedDataset::unchanged(ds);
    out.dataset = ds.with_rows_appended(rows)?;
    out.origin.extend(std::iter::repeat_n(origin, added));
    Ok(out)
}

/// `a + lambda (b - a)` on numeric feature cells, clamped to the segment;
/// categorical cells and cells missing in either row are copied from `a`.
pub fn smote_point(a: &[Cell], b: &[Cell], columns: &[ColumnSchema], lambda: f64) -> Vec<Cell> {
    a.iter()
        .zip(b)
        .zip(columns)
        .map(|((&x, &y), col)| match (x, y, col.kind) {
            (Cell::Num(p), Cell::Num(q), ColumnKind::Numeric) => {
                Cell::Num((p + lambda * (q - p)).clamp(p.min(q), p.max(q)))
            }
            _ => x,
        })
        .collect()
}

/// SMOTE: each synthetic row interpolates a random class member towards one
/// of its `SMOTE_NEIGHBORS` most Gower-similar class members.
pub fn smote_oversample(ds: &TabularDataset, plan: &AugmentationPlan) -> Result<AugmentedDataset> {
    let labels = ds.labels()?;
    let deficits = plan.deficits(&labels.names, &labels.counts())?;
    let features = ds.feature_indices();
    let target = ds.target_index();
    let per_class: Vec<Result<Vec<Vec<Cell>>>> = deficits
        .par_iter()
        .enumerate()
        .map(|(c, &need)| {
            if need == 0 {
                return Ok(Vec::new());
            }
            let members: Vec<usize> = (0..ds.n_rows())
                .filter(|&i| labels.values[i] == c)
                .collect();
            if members.len() < 2 {
                return Err(Error::Parameter(format!(
                    "class `{}` has {} member(s); SMOTE needs at least 2",
                    labels.names[c],
                    members.len()
                )));
            }
            let rows: Vec<Vec<Cell>> = members.iter().map(|&i| ds.row(i).to_vec()).collect();
            let s = gower_matrix(&rows, ds.columns(), &features)?;
            let k = SMOTE_NEIGHBORS.min(members.len() - 1);
            let neighbours: Vec<Vec<usize>> = (0..members.len())
                .map(|a| {
                    let mut others: Vec<usize> = (0..members.len()).filter(|&b| b != a).collect();
                    others.sort_by(|&x, &y| s.get(a, y).total_cmp(&s.get(a, x)).then(x.cmp(&y)));
                    others.truncate(k);
                    others
                })
                .collect();
            let mut r = rng::stream(plan.seed, c as u64);
            Ok((0..need)
                .map(|_| {
                    let a = r.random_range(0..members.len());
                    let b = neighbours[a][r.random_range(0..k)];
                    let lambda: f64 = r.random();
                    let mut row = smote_point(&rows[a], &rows[b], ds.columns(), lambda);
                    row[target] = rows[a][target];
                    row
                })
                .collect())
        })
        .collect();
    let mut extra = Vec::new();
    for rows in per_class {
        extra.extend(rows?);
    }
    append(ds, extra, Origin::Smote)
}

/// Oversamples the smaller levels of a categorical column by copying random
/// members and jittering numeric feature cells with Gaussian noise of
/// standard deviation `JITTER_SHARE` times the column range (clamped to the
/// range). Categorical cells and the target are copied verbatim.
pub fn group_balance_oversample(
    ds: &TabularDataset,
    column: &str,
    plan: &AugmentationPlan,
) -> Result<AugmentedDataset> {
    let method = AugmentMethod::GroupBalance {
        column: column.to_string(),
    };
    let (names, counts) = plan_axis(ds, &method)?;
    let deficits = plan.deficits(&names, &counts)?;
    let c = ds.column_index(column)?;
    let target = ds.target_index();
    let mut extra = Vec::new();
    for (level, &need) in deficits.iter().enumerate() {
        if need == 0 {
            continue;
        }
        let members: Vec<usize> = (0..ds.n_rows())
            .filter(|&i| ds.cell(i, c) == Cell::Cat(level as u32))
            .collect();
        if members.is_empty() {
            return Err(Error::Parameter(format!(
                "group `{}` of `{column}` is empty",
                names[level]
            )));
        }
        let mut r = rng::stream(plan.seed, level as u64);
        for _ in 0..need {
            let src = members[r.random_range(0..members.len())];
            let mut row = ds.row(src).to_vec();
            for (g, cell) in row.iter_mut().enumerate() {
                let col = ds.column(g);
                if let (Cell::Num(v), Some((lo, hi))) = (*cell, col.range) {
                    if g == target || hi <= lo {
                        continue;
                    }
                    let noise = Normal::new(0.0, JITTER_SHARE * (hi - lo)).expect("positive sigma");
                    *cell = Cell::Num((v + noise.sample(&mut r)).clamp(lo, hi));
                }
            }
            extra.push(row);
        }
    }
    append(ds, extra, Origin::Group)
}

// --------------------------------------------------------------- propagation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    Observed,
    SyntheticUnlabeled,
    Propagated,
}

/// A node's label vector, one entry per class (a distribution) or per
/// numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorLabel {
    pub values: Vec<f64>,
    pub status: LabelStatus,
}

impl VectorLabel {
    pub fn observed(values: Vec<f64>) -> Self {
        Self {
            values,
            status: LabelStatus::Observed,
        }
    }

    pub fn one_hot(class: usize, n_classes: usize) -> Self {
        let mut v = vec![0.0; n_classes];
        v[class] = 1.0;
        Self::observed(v)
    }

    pub fn unlabeled(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            status: LabelStatus::SyntheticUnlabeled,
        }
    }

    /// Largest entry; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Propagation {
    pub labels: Vec<VectorLabel>,
    pub argmax: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest absolute change of each iteration.
    pub max_changes: Vec<f64>,
}

/// Clamped weighted-average propagation with synchronous updates: every
/// non-observed node becomes the edge-weight-normalised mean of its
/// neighbours' previous vectors. Non-observed nodes start at the mean of
/// the observed vectors. Stops once the largest change drops below `tol`.
pub fn vector_label_propagation(
    net: &SimilarityNetwork,
    labels: &[VectorLabel],
    tol: f64,
    max_iters: usize,
) -> Result<Propagation> {
    let n = net.n_nodes();
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} nodes",
            labels.len()
        )));
    }
    let dim = labels.first().map_or(0, |l| l.values.len());
    if labels.iter().any(|l| l.values.len() != dim) {
        return Err(Error::Dimension("label vectors differ in length".into()));
    }
    let observed: Vec<usize> = (0..n)
        .filter(|&i| labels[i].status == LabelStatus::Observed)
        .collect();
    let free: Vec<usize> = (0..n)
        .filter(|&i| labels[i].status != LabelStatus::Observed)
        .collect();
    if let Some(&i) = free.iter().find(|&&i| net.degree(i) == 0) {
        return Err(Error::ZeroDegree(i));
    }
    if !free.is_empty() && observed.is_empty() {
        return Err(Error::Parameter(
            "propagation needs at least one observed node".into(),
        ));
    }
    let mut prior = vec![0.0; dim];
    for &i in &observed {
        for (p, v) in prior.iter_mut().zip(&labels[i].values) {
            *p += v;
        }
    }
    for p in &mut prior {
        *p /= observed.len().max(1) as f64;
    }
    let mut x: Vec<Vec<f64>> = labels.iter().map(|l| l.values.clone()).collect();
    for &i in &free {
        x[i] = prior.clone();
    }

    let mut max_changes = Vec::new();
    let mut converged = free.is_empty();
    let mut iterations = 0;
    while !converged && iterations < max_iters {
        let updates: Vec<Vec<f64>> = free
            .par_iter()
            .map(|&i| {
                let mut acc = vec![0.0; dim];
                let mut total = 0.0;
                for &(j, w) in net.neighbors(i) {
                    total += w;
                    for (a, v) in acc.iter_mut().zip(&x[j]) {
                        *a += w * v;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= total);
                acc
            })
            .collect();
        let mut change: f64 = 0.0;
        for (&i, new) in free.iter().zip(updates) {
            for (a, b) in x[i].iter().zip(&new) {
                change = change.max((a - b).abs());
            }
            x[i] = new;
        }
        iterations += 1;
        max_changes.push(change);
        converged = change < tol;
    }
    if !converged {
        log::warn!("label propagation stopped after {max_iters} iterations without converging");
    }
    let out: Vec<VectorLabel> = x
        .into_iter()
        .zip(labels)
        .map(|(values, l)| VectorLabel {
            values,
            status: match l.status {
                LabelStatus::Observed => LabelStatus::Observed,
                _ => LabelStatus::Propagated,
            },
        })
        .collect();
    Ok(Propagation {
        argmax: out.iter().map(VectorLabel::argmax).collect(),
        labels: out,
        iterations,
        converged,
        max_changes,
    })
}

// ---------------------------------------------------------- graph augmenting

/// Feature-wise average of two parents: numeric mean; categorical value when
/// equal, otherwise one parent's value chosen with probability proportional
/// to its network strength. A cell missing in one parent takes the other's.
pub fn average_rows<R: Rng>(
    a: &[Cell],
    b: &[Cell],
    columns: &[ColumnSchema],
    strength: (f64, f64),
    rng: &mut R,
) -> Vec<Cell> {
    let total = strength.0 + strength.1;
    let p_a = if total > 0.0 { strength.0 / total } else { 0.5 };
    a.iter()
        .zip(b)
        .zip(columns)
        .map(|((&x, &y), col)| match (x, y) {
            (Cell::Missing, other) | (other, Cell::Missing) => other,
            (Cell::Num(p), Cell::Num(q)) if col.kind == ColumnKind::Numeric => {
                Cell::Num(0.5 * (p + q))
            }
            _ if x == y => x,
            _ => {
                if rng.random::<f64>() < p_a {
                    x
                } else {
                    y
                }
            }
        })
        .collect()
}

/// Graph-based augmentation. Components are visited from the smallest up;
/// within each, unused pairs of members of a class that is short of its
/// planned count are averaged into a synthetic node. The node is linked to
/// its `SYNTHETIC_LINKS` real rows of largest exponential-kernel weight and
/// labelled by vector-label propagation. Synthetic nodes whose label class is
/// already full are dropped. Rounds repeat until the plan is met or no pairs
/// remain, in which case the partial result carries a warning.
pub fn graph_augment(
    ds: &TabularDataset,
    net: &SimilarityNetwork,
    params: &KernelParams,
    plan: &AugmentationPlan,
) -> Result<AugmentedDataset> {
    let n = ds.n_rows();
    if net.n_nodes() != n {
        return Err(Error::Dimension(format!(
            "network over {} nodes for {n} rows",
            net.n_nodes()
        )));
    }
    let labels = ds.labels()?;
    let n_classes = labels.n_classes();
    let mut deficits = plan.deficits(&labels.names, &labels.counts())?;
    let components: Vec<Vec<usize>> = components_by_size(net)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();
    if components.is_empty() {
        return Err(Error::Parameter(
            "network has no component with two or more nodes".into(),
        ));
    }
    if deficits.iter().all(|&d| d == 0) {
        return Ok(AugmentedDataset::unchanged(ds));
    }

    let features = ds.feature_indices();
    let target = ds.target_index();
    let rho = gower_matrix(ds.rows(), ds.columns(), &features)?.distances();
    let k = params.resolved_k(n).clamp(1, n - 1);
    let means = knn_mean_distances(&rho, k);

    // Unused same-class pairs per (component, class), in a seeded order.
    let mut r = rng::stream(plan.seed, 0);
    let mut pools: Vec<Vec<Vec<(usize, usize)>>> = components
        .iter()
        .map(|comp| {
            (0..n_classes)
                .map(|c| {
                    let members: Vec<usize> = comp
                        .iter()
                        .copied()
                        .filter(|&i| labels.values[i] == c)
                        .collect();
                    let mut pairs: Vec<(usize, usize)> = members
                        .iter()
                        .enumerate()
                        .flat_map(|(x, &a)| members[x + 1..].iter().map(move |&b| (a, b)))
                        .collect();
                    pairs.shuffle(&mut r);
                    pairs
                })
                .collect()
        })
        .collect();

    let mut rows: Vec<Vec<Cell>> = Vec::new();
    let mut links: Vec<(usize, usize, f64)> = Vec::new();
    let mut converged = true;
    let mut round = 0;
    while deficits.iter().any(|&d| d > 0) && round < MAX_AUGMENT_ROUNDS {
        round += 1;
        let mut candidates: Vec<Vec<Cell>> = Vec::new();
        for (c, &need) in deficits.iter().enumerate() {
            let mut taken = 0;
            for pool in pools.iter_mut() {
                while taken < need {
                    let Some((a, b)) = pool[c].pop() else { break };
                    let mut row = average_rows(
                        ds.row(a),
                        ds.row(b),
                        ds.columns(),
                        (net.strength(a), net.strength(b)),
                        &mut r,
                    );
                    row[target] = Cell::Cat(c as u32);
                    candidates.push(row);
                    taken += 1;
                }
            }
        }
        if candidates.is_empty() {
            break;
        }

        // Links from each candidate to real rows by exponential-kernel weight.
        let cand_links: Vec<Vec<(usize, f64)>> = candidates
            .par_iter()
            .map(|row| {
                let d: Vec<f64> = (0..n)
                    .map(|j| {
                        1.0 - gower_similarity(row, ds.row(j), ds.columns(), &features)
                            .unwrap_or(0.0)
                    })
                    .collect();
                let mean_new = knn_from_slice(&d, k);
                let mut w: Vec<(usize, f64)> = (0..n)
                    .map(|j| (j, ek_weight(d[j], mean_new, means[j], params.mu)))
                    .collect();
                w.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
                w.truncate(SYNTHETIC_LINKS);
                w
            })
            .collect();

        let mut edges = net.edges().to_vec();
        let mut vl: Vec<VectorLabel> = labels
            .values
            .iter()
            .map(|&c| VectorLabel::one_hot(c, n_classes))
            .collect();
        for (s, l) in cand_links.iter().enumerate() {
            for &(j, w) in l {
                edges.push(crate::network::Edge {
                    i: j,
                    j: n + s,
                    weight: w,
                });
            }
            vl.push(VectorLabel::unlabeled(n_classes));
        }
        let graph = SimilarityNetwork::from_edges(n + candidates.len(), edges)?;
        let prop = vector_label_propagation(&graph, &vl, PROPAGATION_TOL, PROPAGATION_MAX_ITERS)?;
        converged &= prop.converged;

        for (s, mut row) in candidates.into_iter().enumerate() {
            let c = prop.argmax[n + s];
            if deficits[c] == 0 {
                continue;
            }
            deficits[c] -= 1;
            row[target] = Cell::Cat(c as u32);
            let id = n + rows.len();
            for &(j, w) in &cand_links[s] {
                links.push((id, j, w));
            }
            rows.push(row);
        }
    }

    let mut warnings = Vec::new();
    for (c, &d) in deficits.iter().enumerate() {
        if d > 0 {
            let msg = format!(
                "class `{}` is {d} row(s) short of its planned count",
                labels.names[c]
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let mut out = append(ds, rows, Origin::Graph)?;
    out.warnings = warnings;
    out.links = links;
    out.propagation_converged = converged;
    Ok(out)
}

/// Mean of the `k` smallest values of `d`.
fn knn_from_slice(d: &[f64], k: usize) -> f64 {
    let mut v = d.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().take(k).sum::<f64>() / k as f64
}
