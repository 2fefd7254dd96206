//! Thresholded similarity networks, their connected components and the
//! network-based complexity measures.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, SquareMatrix};

/// Rule deciding which off-diagonal weights become edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum EdgePolicy {
    /// Keep weights strictly above the `q`-quantile of all off-diagonal
    /// weights.
    Quantile(f64),
    /// Each node keeps its `t` strongest edges.
    TopK(usize),
    /// Keep weights at or above the threshold.
    Absolute(f64),
}

impl Default for EdgePolicy {
    fn default() -> Self {
        EdgePolicy::Quantile(0.9)
    }
}

impl fmt::Display for EdgePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgePolicy::Quantile(q) => write!(f, "quantile:{q}"),
            EdgePolicy::TopK(t) => write!(f, "top_k:{t}"),
            EdgePolicy::Absolute(t) => write!(f, "absolute:{t}"),
        }
    }
}

impl std::str::FromStr for EdgePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s.split_once(':').ok_or_else(|| {
            Error::Parameter(format!("policy `{s}` should look like quantile:0.9"))
        })?;
        let bad = || Error::Parameter(format!("bad policy value in `{s}`"));
        match kind.trim() {
            "quantile" => {
                let q: f64 = value.trim().parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&q) {
                    return Err(bad());
                }
                Ok(EdgePolicy::Quantile(q))
            }
            "top_k" => {
                let t: usize = value.trim().parse().map_err(|_| bad())?;
                if t == 0 {
                    return Err(bad());
                }
                Ok(EdgePolicy::TopK(t))
            }
            "absolute" => Ok(EdgePolicy::Absolute(
                value.trim().parse().map_err(|_| bad())?,
            )),
            _ => Err(Error::Parameter(format!("unknown policy `{kind}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Undirected weighted graph; each edge stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityNetwork {
    n_nodes: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    components: Vec<Vec<usize>>,
    policy: Option<EdgePolicy>,
}

impl SimilarityNetwork {
    /// Builds a network from an explicit edge list. Duplicate edges and
    /// self-loops are rejected.
    pub fn from_edges(n_nodes: usize, mut edges: Vec<Edge>) -> Result<Self> {
        for e in edges.iter_mut() {
            if e.i == e.j {
                return Err(Error::Parameter(format!("self-loop on node {}", e.i)));
            }
            if e.i.max(e.j) >= n_nodes {
                return Err(Error::Parameter(format!(
                    "edge ({}, {}) out of range",
                    e.i, e.j
                )));
            }
            if e.weight.is_nan() || e.weight <= 0.0 {
                return Err(Error::Parameter(format!(
                    "edge ({}, {}) has weight {}",
                    e.i, e.j, e.weight
                )));
            }
            if e.i > e.j {
                std::mem::swap(&mut e.i, &mut e.j);
            }
        }
        edges.sort_by_key(|e| (e.i, e.j));
        if edges
            .windows(2)
            .any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j))
        {
            return Err(Error::Parameter("duplicate edge".into()));
        }
        let mut adjacency = vec![Vec::new(); n_nodes];
        for e in &edges {
            adjacency[e.i].push((e.j, e.weight));
            adjacency[e.j].push((e.i, e.weight));
        }
        for list in adjacency.iter_mut() {
            list.sort_by_key(|&(j, _)| j);
        }
        let components = find_components(n_nodes, &edges);
        Ok(Self {
            n_nodes,
            edges,
            adjacency,
            components,
            policy: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Neighbours of `i` with edge weights, by ascending index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Sum of incident edge weights.
    pub fn strength(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .is_ok()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .ok()
            .map(|p| self.adjacency[i][p].1)
    }

    /// Components, each sorted ascending, ordered by smallest member.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Component id per node (index into [`Self::components`]).
    pub fn component_of(&self) -> Vec<usize> {
        let mut id = vec![0; self.n_nodes];
        for (c, members) in self.components.iter().enumerate() {
            for &v in members {
                id[v] = c;
            }
        }
        id
    }

    pub fn policy(&self) -> Option<EdgePolicy> {
        self.policy
    }

    pub fn header(&self) -> String {
        match self.policy {
            Some(p) => format!("fairsim-network v1 n={} policy={p}", self.n_nodes),
            None => format!("fairsim-network v1 n={} policy=explicit", self.n_nodes),
        }
    }

    /// Edge list export: header line then `i j weight` per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", self.header())?;
        for e in &self.edges {
            writeln!(w, "{} {} {}", e.i, e.j, e.weight)?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut n = None;
        let mut policy = None;
        let mut edges = Vec::new();
        for (line_no, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(h) = t.strip_prefix('#') {
                if !h.trim().starts_with("fairsim-network v1") {
                    return Err(Error::Parse {
                        row: line_no,
                        message: format!("unexpected header `{}`", h.trim()),
                    });
                }
                n = matrix::header_field(h, "n").and_then(|v| v.parse().ok());
                policy =
                    matrix::header_field(h, "policy").and_then(|v| v.parse::<EdgePolicy>().ok());
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            let parse_err = || Error::Parse {
                row: line_no,
                message: format!("bad edge line `{t}`"),
            };
            if parts.len() != 3 {
                return Err(parse_err());
            }
            edges.push(Edge {
                i: parts[0].parse().map_err(|_| parse_err())?,
                j: parts[1].parse().map_err(|_| parse_err())?,
                weight: parts[2].parse().map_err(|_| parse_err())?,
            });
        }
        let n = n.ok_or(Error::Parse {
            row: 0,
            message: "missing network header".into(),
        })?;
        let mut net = Self::from_edges(n, edges)?;
        net.policy = policy;
        Ok(net)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn find_components(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    for e in edges {
        let a = find(&mut parent, e.i);
        let b = find(&mut parent, e.j);
        if a != b {
            // Attach the larger root under the smaller to keep roots canonical.
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        let r = find(&mut parent, v);
        by_root[r].push(v);
    }
    let mut comps: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Strongest positive off-diagonal neighbour of `i`; ties go to the lower index.
fn strongest_neighbor(w: &SquareMatrix, i: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..w.n() {
        if j == i {
            continue;
        }
        let v = w.get(i, j);
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

/// Thresholds a symmetric nonnegative weight matrix into a network.
///
/// Under the quantile and absolute policies every node also keeps its single
/// strongest incident edge, so only nodes with no positive weights at all can
/// end up isolated.
pub fn build_network<M: AsRef<SquareMatrix>>(
    w: &M,
    policy: EdgePolicy,
) -> Result<SimilarityNetwork> {
    let w = w.as_ref();
    let n = w.n();
    if n < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: n,
        });
    }
    if !w.is_symmetric(1e-12) {
        return Err(Error::Parameter("weight matrix is not symmetric".into()));
    }
    if w.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Parameter(
            "weight matrix has negative or non-finite entries".into(),
        ));
    }
    let mut keep = vec![false; n * n];
    let mut mark = |i: usize, j: usize| {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        keep[a * n + b] = true;
    };
    match policy {
        EdgePolicy::Quantile(_) | EdgePolicy::Absolute(_) => {
            let threshold_pass: Box<dyn Fn(f64) -> bool> = match policy {
                EdgePolicy::Quantile(q) => {
                    let mut upper: Vec<f64> = (0..n)
                        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                        .map(|(i, j)| w.get(i, j))
                        .collect();
                    upper.sort_by(f64::total_cmp);
                    let t = quantile_sorted(&upper, q);
                    Box::new(move |v| v > t)
                }
                EdgePolicy::Absolute(t) => Box::new(move |v| v >= t),
                EdgePolicy::TopK(_) => unreachable!(),
            };
            for i in 0..n {
                for j in i + 1..n {
                    let v = w.get(i, j);
                    if v > 0.0 && threshold_pass(v) {
                        mark(i, j);
                    }
                }
            }
            for i in 0..n {
                if let Some(j) = strongest_neighbor(w, i) {
                    mark(i, j);
                }
            }
        }
        EdgePolicy::TopK(t) => {
            for i in 0..n {
                let mut cand: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i && w.get(i, j) > 0.0)
                    .map(|j| (w.get(i, j), j))
                    .collect();
                cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, j) in cand.iter().take(t) {
                    mark(i, j);
                }
            }
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if keep[i * n + j] {
                edges.push(Edge {
                    i,
                    j,
                    weight: w.get(i, j),
                });
            }
        }
    }
    let mut net = SimilarityNetwork::from_edges(n, edges)?;
    net.policy = Some(policy);
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkMeasures {
    pub density: f64,
    pub clustering_coefficient: f64,
    pub hub_scores: Vec<f64>,
    pub hub_mean: f64,
    pub hub_converged: bool,
}

pub const HUB_TOLERANCE: f64 = 1e-8;
pub const HUB_MAX_ITERS: usize = 1000;

/// Density, mean local clustering coefficient and eigenvector-centrality hub
/// scores of the unweighted graph.
pub fn network_measures(net: &SimilarityNetwork) -> NetworkMeasures {
    let n = net.n_nodes();
    let density = if n < 2 {
        0.0
    } else {
        2.0 * net.n_edges() as f64 / (n as f64 * (n as f64 - 1.0))
    };

    let mut clustering_sum = 0.0;
    for v in 0..n {
        let nb = net.neighbors(v);
        let d = nb.len();
        if d < 2 {
            continue;
        }
        let mut links = 0usize;
        for a in 0..d {
            for b in a + 1..d {
                if net.has_edge(nb[a].0, nb[b].0) {
                    links += 1;
                }
            }
        }
        clustering_sum += links as f64 / (d * (d - 1) / 2) as f64;
    }
    let clustering_coefficient = if n == 0 {
        0.0
    } else {
        clustering_sum / n as f64
    };

    let (hub_scores, hub_converged) = eigenvector_centrality(net);
    let hub_mean = if n == 0 {
        0.0
    } else {
        hub_scores.iter().sum::<f64>() / n as f64
    };
    NetworkMeasures {
        density,
        clustering_coefficient,
        hub_scores,
        hub_mean,
        hub_converged,
    }
}

/// Power iteration on `A + I` (same eigenvectors as `A`, but the dominant
/// eigenvalue is unique in magnitude even for bipartite graphs), normalised
/// to a maximum of 1. A graph without edges scores 0 everywhere.
fn eigenvector_centrality(net: &SimilarityNetwork) -> (Vec<f64>, bool) {
    let n = net.n_nodes();
    if net.n_edges() == 0 {
        return (vec![0.0; n], true);
    }
    let mut x = vec![1.0; n];
    let mut converged = false;
    for _ in 0..HUB_MAX_ITERS {
        let mut next: Vec<f64> = (0..n)
            .map(|v| x[v] + net.neighbors(v).iter().map(|&(u, _)| x[u]).sum::<f64>())
            .collect();
        let max = next.iter().copied().fold(0.0, f64::max);
        for v in next.iter_mut() {
            *v /= max;
        }
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if change < HUB_TOLERANCE {
            converged = true;
            break;
        }
    }
    (x, converged)
}

/// Components sorted ascending by size; ties by smallest member.
pub fn components_by_size(net: &SimilarityNetwork) -> Vec<Vec<usize>> {
    let mut comps = net.components().to_vec();
    comps.sort_by_key(|c| (c.len(), c[0]));
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pairs() -> SquareMatrix {
        let mut w = SquareMatrix::filled(4, 0.1);
        for i in 0..4 {
            w.set(i, i, 1.0);
        }
        for (a, b) in [(0, 1), (2, 3)] {
            w.set(a, b, 0.9);
            w.set(b, a, 0.9);
        }
        w
    }

    #[test]
    fn absolute_threshold_complete_graph() {
        let mut w = SquareMatrix::filled(4, 0.9);
        for i in 0..4 {
            w.set(i, i, 1.0);
        }
        let net = build_network(&w, EdgePolicy::Absolute(0.5)).unwrap();
        assert_eq!(net.n_edges(), 6);
        assert_eq!(net.components().len(), 1);
    }

    #[test]
    fn quantile_splits_two_pairs() {
        let net = build_network(&two_pairs(), EdgePolicy::Quantile(0.5)).unwrap();
        assert_eq!(net.components(), &[vec![0, 1], vec![2, 3]]);
        let sorted = components_by_size(&net);
        assert_eq!(sorted, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn top_one_keeps_strongest_neighbor() {
        let net = build_network(&two_pairs(), EdgePolicy::TopK(1)).unwrap();
        assert_eq!(net.n_edges(), 2);
        assert!(net.has_edge(0, 1) && net.has_edge(2, 3));
    }

    #[test]
    fn isolated_node_sorts_first() {
        let mut w = two_pairs();
        // node 3 gets no positive weights
        for j in 0..4 {
            if j != 3 {
                w.set(3, j, 0.0);
                w.set(j, 3, 0.0);
            }
        }
        let net = build_network(&w, EdgePolicy::TopK(1)).unwrap();
        let sorted = components_by_size(&net);
        assert_eq!(sorted[0], vec![3]);
    }

    #[test]
    fn single_node_rejected() {
        assert!(build_network(&SquareMatrix::identity(1), EdgePolicy::default()).is_err());
    }

    #[test]
    fn measures_of_complete_graph() {
        let mut w = SquareMatrix::filled(4, 0.9);
        for i in 0..4 {
            w.set(i, i, 1.0);
        }
        let m = network_measures(&build_network(&w, EdgePolicy::Absolute(0.5)).unwrap());
        assert_eq!(m.density, 1.0);
        assert_eq!(m.clustering_coefficient, 1.0);
        assert!(m.hub_scores.iter().all(|&h| (h - 1.0).abs() < 1e-12));
    }

    #[test]
    fn measures_of_path() {
        let net = SimilarityNetwork::from_edges(
            3,
            vec![
                Edge {
                    i: 0,
                    j: 1,
                    weight: 1.0,
                },
                Edge {
                    i: 1,
                    j: 2,
                    weight: 1.0,
                },
            ],
        )
        .unwrap();
        let m = network_measures(&net);
        assert!((m.density - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.clustering_coefficient, 0.0);
        assert!(m.hub_converged);
        // centre node is the hub
        assert_eq!(m.hub_scores[1], 1.0);
        assert!((m.hub_scores[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn measures_of_empty_graph() {
        let net = SimilarityNetwork::from_edges(3, vec![]).unwrap();
        let m = network_measures(&net);
        assert_eq!(m.density, 0.0);
        assert_eq!(m.clustering_coefficient, 0.0);
    }

    #[test]
    fn edge_list_round_trip() {
        let net = build_network(&two_pairs(), EdgePolicy::Quantile(0.5)).unwrap();
        let mut buf = Vec::new();
        net.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# fairsim-network v1 n=4 policy=quantile:0.5\n0 1 0.9\n"));
        assert_eq!(
            SimilarityNetwork::read_edge_list(buf.as_slice()).unwrap(),
            net
        );
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(
            "quantile:0.9".parse::<EdgePolicy>().unwrap(),
            EdgePolicy::Quantile(0.9)
        );
        assert_eq!(
            "top_k:3".parse::<EdgePolicy>().unwrap(),
            EdgePolicy::TopK(3)
        );
        assert!("quantile:2".parse::<EdgePolicy>().is_err());
        assert!("nope".parse::<EdgePolicy>().is_err());
    }
}
