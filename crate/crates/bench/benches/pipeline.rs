use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fairsim_core::similarity::gower_matrix;
use fairsim_core::{
    build_network, complexity_report, cross_validate, discretize_target, exponential_kernel,
    random_walk_kernel, synth, ClassifierSpec, EdgePolicy, KernelParams, ModelKind, Representation,
    Representations, SimilarityMethod, SimilarityScope, TabularDataset,
};

fn employees(n: usize) -> TabularDataset {
    discretize_target(
        &synth::employee_records(n, synth::EMPLOYEE_SEED).unwrap(),
        "PayRate",
        &synth::PAY_CUTS,
    )
    .unwrap()
}

fn similarity_and_kernels(c: &mut Criterion) {
    let params = KernelParams::default();
    let mut g = c.benchmark_group("similarity");
    for n in [100, 301] {
        let ds = employees(n);
        let cols: Vec<usize> = (0..ds.n_columns()).collect();
        g.bench_with_input(BenchmarkId::new("gower", n), &ds, |b, ds| {
            b.iter(|| gower_matrix(ds.rows(), ds.columns(), black_box(&cols)).unwrap())
        });
        let s = gower_matrix(ds.rows(), ds.columns(), &cols).unwrap();
        g.bench_with_input(BenchmarkId::new("ek", n), &s, |b, s| {
            b.iter(|| exponential_kernel(black_box(s), &params).unwrap())
        });
        let w = exponential_kernel(&s, &params).unwrap();
        g.bench_with_input(BenchmarkId::new("rwk_p2", n), &w, |b, w| {
            b.iter(|| random_walk_kernel(black_box(w), &KernelParams { p: 2, ..params }).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("network", n), &w, |b, w| {
            b.iter(|| build_network(black_box(w), EdgePolicy::default()).unwrap())
        });
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let ds = employees(301);
    let reps = Representations::build(
        &ds,
        &SimilarityMethod::Gower,
        SimilarityScope::AllColumns,
        &KernelParams::default(),
    )
    .unwrap();
    let y = ds.labels().unwrap().values;
    let spec = ClassifierSpec {
        kind: ModelKind::RandomForest {
            n_trees: 50,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
        },
        seed: 0,
    };
    let mut g = c.benchmark_group("evaluation");
    g.sample_size(10);
    for r in [Representation::Original, Representation::SgdRwk] {
        let x = reps.features(r);
        g.bench_function(BenchmarkId::new("rf50_5fold", r.label()), |b| {
            b.iter(|| cross_validate(&spec, black_box(&x), &y, 5, 0).unwrap())
        });
        let dist = reps.distances(r);
        g.bench_function(BenchmarkId::new("complexity", r.label()), |b| {
            b.iter(|| complexity_report(black_box(&x), &y, &dist, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, similarity_and_kernels, evaluation);
criterion_main!(benches);
