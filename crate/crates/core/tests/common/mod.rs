#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

use fairsim_core::network::Edge;
use fairsim_core::{
    rng, Cell, ColumnSchema, SimilarityMatrix, SimilarityNetwork, SquareMatrix, TabularDataset,
    VectorLabel,
};

/// Mixed-type table: three numeric and two categorical features, a
/// three-class categorical target that is never missing.
pub fn mixed(n: usize, missing: f64, seed: u64) -> TabularDataset {
    let mut r = rng::stream(seed, 0);
    let mut cols = vec![
        ColumnSchema::numeric("a"),
        ColumnSchema::categorical("c"),
        ColumnSchema::numeric("b"),
        ColumnSchema::categorical("d"),
        ColumnSchema::numeric("e"),
        ColumnSchema::categorical("y"),
    ];
    for c in [1, 3, 5] {
        for l in ["p", "q", "r"] {
            cols[c].intern(l);
        }
    }
    let rows = (0..n)
        .map(|_| {
            (0..cols.len())
                .map(|c| {
                    if c != 5 && r.random::<f64>() < missing {
                        Cell::Missing
                    } else if cols[c].is_numeric() {
                        Cell::Num((r.random_range(-50.0..50.0f64) * 100.0).round() / 100.0)
                    } else {
                        Cell::Cat(r.random_range(0..3))
                    }
                })
                .collect()
        })
        .collect();
    TabularDataset::new(cols, rows, 5).unwrap()
}

pub fn all_columns(ds: &TabularDataset) -> Vec<usize> {
    (0..ds.n_columns()).collect()
}

pub fn random_similarity(n: usize, seed: u64) -> SimilarityMatrix {
    let mut r = rng::stream(seed, 1);
    let mut m = SquareMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = r.random();
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    SimilarityMatrix::new(m).unwrap()
}

/// Random connected graph with node 0 observed, further nodes observed with
/// probability 0.3, so every free node reaches an observed one.
pub fn clamped_graph(n: usize, dim: usize, seed: u64) -> (SimilarityNetwork, Vec<VectorLabel>) {
    let mut r = rng::stream(seed, 2);
    let mut pairs = BTreeSet::new();
    for i in 1..n {
        pairs.insert((r.random_range(0..i), i));
    }
    for _ in 0..n {
        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| Edge {
            i,
            j,
            weight: r.random_range(0.05..1.0),
        })
        .collect();
    let net = SimilarityNetwork::from_edges(n, edges).unwrap();
    let labels = (0..n)
        .map(|i| {
            if i == 0 || r.random::<f64>() < 0.3 {
                VectorLabel::one_hot(r.random_range(0..dim), dim)
            } else {
                VectorLabel::unlabeled(dim)
            }
        })
        .collect();
    (net, labels)
}

pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng::stream(seed, 3));
    p
}
