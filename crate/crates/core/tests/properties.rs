mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{all_columns, clamped_graph, mixed, permutation, random_similarity};
use fairsim_core::complexity::class_imbalance;
use fairsim_core::kernels::ek_weight;
use fairsim_core::resample::{ImputeSource, PROPAGATION_MAX_ITERS, PROPAGATION_TOL};
use fairsim_core::similarity::gower_matrix;
use fairsim_core::{
    assign_groups, binarize_target, build_network, complexity_report, cross_validate,
    equal_misopportunity, equal_opportunity, exponential_kernel, gower_similarity, impute,
    random_walk_kernel, smote_oversample, vector_label_propagation, AugmentMethod,
    AugmentationPlan, BinarizeRule, BinaryTargetRule, Cell, ClassifierSpec, CmpOp, Condition,
    EdgePolicy, GroupSpec, KernelParams, LoadOptions, SimilarityMatrix, SquareMatrix,
    TabularDataset,
};

fn edge_set(net: &fairsim_core::SimilarityNetwork) -> BTreeSet<(usize, usize)> {
    net.edges().iter().map(|e| (e.i, e.j)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gower_is_symmetric_and_bounded(seed in any::<u64>(), n in 2usize..25) {
        let ds = mixed(n, 0.2, seed);
        let cols = all_columns(&ds);
        for i in 0..n {
            for j in 0..n {
                let a = gower_similarity(ds.row(i), ds.row(j), ds.columns(), &cols).unwrap();
                let b = gower_similarity(ds.row(j), ds.row(i), ds.columns(), &cols).unwrap();
                prop_assert_eq!(a, b);
                prop_assert!((0.0..=1.0).contains(&a));
            }
            prop_assert_eq!(gower_similarity(ds.row(i), ds.row(i), ds.columns(), &cols).unwrap(), 1.0);
        }
    }

    #[test]
    fn feature_removal_is_monotone(seed in any::<u64>()) {
        // With a feature on which the rows agree removed, the similarity can
        // only fall; with a maximally differing one removed, it can only rise.
        let ds = mixed(6, 0.0, seed);
        let cols = all_columns(&ds);
        for i in 0..6 {
            for j in 0..6 {
                let full = gower_similarity(ds.row(i), ds.row(j), ds.columns(), &cols).unwrap();
                for drop in 0..cols.len() {
                    let rest: Vec<usize> = cols.iter().copied().filter(|&c| c != drop).collect();
                    let part = gower_similarity(ds.row(i), ds.row(j), ds.columns(), &rest).unwrap();
                    let single = gower_similarity(ds.row(i), ds.row(j), ds.columns(), &[drop]).unwrap();
                    if single == 1.0 {
                        prop_assert!(part <= full + 1e-12);
                    }
                    if single == 0.0 {
                        prop_assert!(part >= full - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn similarity_matrix_permutes_with_rows(seed in any::<u64>(), n in 2usize..20) {
        let ds = mixed(n, 0.1, seed);
        let p = permutation(n, seed);
        let shuffled = ds.select_rows(&p).unwrap();
        let cols = all_columns(&ds);
        let s = gower_matrix(ds.rows(), ds.columns(), &cols).unwrap();
        let t = gower_matrix(shuffled.rows(), shuffled.columns(), &cols).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(t.get(i, j), s.get(p[i], p[j]));
            }
        }
    }

    #[test]
    fn dataset_csv_round_trip(seed in any::<u64>(), n in 2usize..30) {
        let ds = mixed(n, 0.2, seed);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = TabularDataset::from_reader(buf.as_slice(), &ds.load_options()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn similarity_grid_round_trip(seed in any::<u64>(), n in 1usize..20) {
        let s = random_similarity(n, seed);
        let mut buf = Vec::new();
        s.write_grid(&mut buf).unwrap();
        let back = SimilarityMatrix::read_grid(buf.as_slice()).unwrap();
        prop_assert_eq!(back.matrix(), s.matrix());
    }

    #[test]
    fn kernels_are_symmetric_and_bounded(seed in any::<u64>(), n in 2usize..40, mu in 0.3f64..0.8, m in 2.01f64..5.0) {
        let params = KernelParams { mu, m, ..KernelParams::default() };
        let w = exponential_kernel(&random_similarity(n, seed), &params).unwrap();
        let k = random_walk_kernel(&w, &params).unwrap();
        for i in 0..n {
            prop_assert_eq!(w.get(i, i), 1.0);
            for j in 0..n {
                prop_assert!(w.get(i, j) > 0.0 && w.get(i, j) <= 1.0);
                prop_assert!((w.get(i, j) - w.get(j, i)).abs() <= 1e-12);
                prop_assert!((k.get(i, j) - k.get(j, i)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn random_walk_quadratic_form_exceeds_bound(seed in any::<u64>(), n in 2usize..30, m in 2.01f64..4.0) {
        use rand::Rng;
        let params = KernelParams { m, ..KernelParams::default() };
        let w = exponential_kernel(&random_similarity(n, seed), &params).unwrap();
        let k = random_walk_kernel(&w, &params).unwrap();
        let mut r = fairsim_core::rng::stream(seed, 9);
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let norm: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!(k.matrix().quadratic_form(&x) > (m - 2.0) * norm);
        }
    }

    #[test]
    fn exponential_weight_decreases_with_distance(a in 0.0f64..1.0, b in 0.0f64..1.0, ma in 0.0f64..1.0, mb in 0.0f64..1.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assume!(hi - lo > 1e-9);
        let (wl, wh) = (ek_weight(lo, ma, mb, 0.5), ek_weight(hi, ma, mb, 0.5));
        prop_assume!(wh > 1e-300);
        prop_assert!(wh < wl);
    }

    #[test]
    fn raising_the_threshold_never_adds_edges(seed in any::<u64>(), n in 2usize..30, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let s = random_similarity(n, seed);
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let dense = edge_set(&build_network(s.matrix(), EdgePolicy::Absolute(lo)).unwrap());
        let sparse = edge_set(&build_network(s.matrix(), EdgePolicy::Absolute(hi)).unwrap());
        prop_assert!(sparse.is_subset(&dense));
    }

    #[test]
    fn network_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..25, q in 0.5f64..0.95) {
        let s = random_similarity(n, seed);
        let p = permutation(n, seed);
        let t = SquareMatrix::from_fn(n, |i, j| s.get(p[i], p[j]));
        for policy in [EdgePolicy::Quantile(q), EdgePolicy::TopK(2), EdgePolicy::Absolute(q)] {
            let a = edge_set(&build_network(s.matrix(), policy).unwrap());
            let b: BTreeSet<(usize, usize)> = edge_set(&build_network(&t, policy).unwrap())
                .into_iter()
                .map(|(i, j)| (p[i].min(p[j]), p[i].max(p[j])))
                .collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn complexity_measures_are_bounded_and_order_free(seed in any::<u64>(), n in 12usize..40) {
        let ds = mixed(n, 0.0, seed);
        let y = ds.labels().unwrap().values;
        prop_assume!(y.iter().collect::<BTreeSet<_>>().len() == 3);
        let enc = fairsim_core::representation::encode_tabular(&ds, &ds.feature_indices()).features;
        let dist = gower_matrix(ds.rows(), ds.columns(), &ds.feature_indices()).unwrap().distances();
        let w = exponential_kernel(&gower_matrix(ds.rows(), ds.columns(), &all_columns(&ds)).unwrap(), &KernelParams::default()).unwrap();
        let net = build_network(&w, EdgePolicy::default()).unwrap();
        let rep = complexity_report(&enc, &y, &dist, Some(&net)).unwrap();
        for v in rep.measures.values() {
            prop_assert!((0.0..=1.0).contains(v));
        }

        let p = permutation(n, seed);
        let enc_p: Vec<Vec<f64>> = p.iter().map(|&i| enc[i].clone()).collect();
        let y_p: Vec<usize> = p.iter().map(|&i| y[i]).collect();
        let dist_p = SquareMatrix::from_fn(n, |i, j| dist.get(p[i], p[j]));
        let rep_p = complexity_report(&enc_p, &y_p, &dist_p, None).unwrap();
        for (name, v) in &rep_p.measures {
            prop_assert!((v - rep.measures[name]).abs() < 1e-9, "{} {} vs {}", name, v, rep.measures[name]);
        }
    }

    #[test]
    fn fairness_gaps_are_bounded_and_order_free(seed in any::<u64>(), n in 8usize..60) {
        use rand::Rng;
        let mut r = fairsim_core::rng::stream(seed, 4);
        let mut y: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let p: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let mut s: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        // Every (group, label) cell inhabited.
        y[..4].copy_from_slice(&[0, 1, 0, 1]);
        s[..4].copy_from_slice(&[0, 0, 1, 1]);
        let eo = equal_opportunity(&y, &p, &s).unwrap();
        let emo = equal_misopportunity(&y, &p, &s).unwrap();
        prop_assert!(eo.abs() <= 1.0 && emo.abs() <= 1.0);
        let perm = permutation(n, seed);
        let pick = |v: &[usize]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let sp: Vec<u8> = perm.iter().map(|&i| s[i]).collect();
        prop_assert_eq!(equal_opportunity(&pick(&y), &pick(&p), &sp).unwrap(), eo);
        prop_assert_eq!(equal_misopportunity(&pick(&y), &pick(&p), &sp).unwrap(), emo);
    }

    #[test]
    fn propagation_change_never_grows(seed in any::<u64>(), n in 2usize..100) {
        let (net, labels) = clamped_graph(n, 3, seed);
        let p = vector_label_propagation(&net, &labels, PROPAGATION_TOL, PROPAGATION_MAX_ITERS).unwrap();
        prop_assert!(p.converged);
        for w in p.max_changes.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
        for (l, out) in labels.iter().zip(&p.labels) {
            let sum: f64 = out.values.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            if l.status == fairsim_core::resample::LabelStatus::Observed {
                prop_assert_eq!(&l.values, &out.values);
            }
        }
    }

    #[test]
    fn imputation_keeps_observed_cells_and_stays_in_range(seed in any::<u64>(), n in 5usize..40) {
        let ds = mixed(n, 0.2, seed);
        let w = exponential_kernel(&gower_matrix(ds.rows(), ds.columns(), &all_columns(&ds)).unwrap(), &KernelParams::default()).unwrap();
        let net = build_network(&w, EdgePolicy::default()).unwrap();
        let out = impute(&ds, &net).unwrap();
        prop_assert_eq!(out.dataset.missing_count(), 0);
        for i in 0..n {
            for c in 0..ds.n_columns() {
                if !ds.cell(i, c).is_missing() {
                    prop_assert_eq!(out.dataset.cell(i, c), ds.cell(i, c));
                }
            }
        }
        for cell in out.provenance.iter().filter(|c| c.source == ImputeSource::Neighbors) {
            let c = ds.column_index(&cell.column).unwrap();
            if !ds.column(c).is_numeric() {
                continue;
            }
            let seen: Vec<f64> = net.neighbors(cell.row).iter().filter_map(|&(j, _)| ds.cell(j, c).as_num()).collect();
            let v = out.dataset.cell(cell.row, c).as_num().unwrap();
            let lo = seen.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = seen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= v && v <= hi);
        }
        prop_assert_eq!(impute(&out.dataset, &net).unwrap().dataset, out.dataset);
    }

    #[test]
    fn smote_rows_stay_inside_their_class(seed in any::<u64>(), n in 10usize..40) {
        let ds = mixed(n, 0.0, seed);
        let counts = ds.labels().unwrap().counts();
        prop_assume!(counts.iter().all(|&c| c >= 2));
        let plan = AugmentationPlan::equalize(&ds, AugmentMethod::Smote, seed).unwrap();
        let aug = smote_oversample(&ds, &plan).unwrap();
        let y = aug.dataset.labels().unwrap().values;
        let max = *counts.iter().max().unwrap();
        prop_assert!(aug.dataset.labels().unwrap().counts().iter().all(|&c| c == max));
        prop_assert_eq!(class_imbalance(&y).c2, 0.0);
        for i in n..aug.dataset.n_rows() {
            for c in ds.feature_indices().into_iter().filter(|&c| ds.column(c).is_numeric()) {
                let v = aug.dataset.cell(i, c).as_num().unwrap();
                let class: Vec<f64> = (0..n).filter(|&j| y[j] == y[i]).filter_map(|j| ds.cell(j, c).as_num()).collect();
                prop_assert!(class.iter().any(|&x| x <= v) && class.iter().any(|&x| x >= v));
            }
        }
    }

    #[test]
    fn groups_partition_rows(seed in any::<u64>(), n in 2usize..40, threshold in -50.0f64..50.0) {
        let ds = mixed(n, 0.0, seed);
        let spec = GroupSpec::new(vec![Condition { column: "a".into(), op: CmpOp::Le, value: serde_json::json!(threshold) }]);
        let g = assign_groups(&ds, &spec).unwrap();
        prop_assert_eq!(g.n_privileged + g.n_unprivileged, n);
        prop_assert_eq!(g.s.iter().filter(|&&v| v == 1).count(), g.n_privileged);
        prop_assert_eq!(assign_groups(&ds, &spec).unwrap().s, g.s);
    }

    #[test]
    fn median_split_yields_two_classes(values in proptest::collection::vec(-5i32..5, 2..40)) {
        prop_assume!(values.iter().collect::<BTreeSet<_>>().len() >= 2);
        let mut csv = String::from("x,v\n");
        for (i, v) in values.iter().enumerate() {
            csv.push_str(&format!("{i},{v}\n"));
        }
        let ds = TabularDataset::from_reader(csv.as_bytes(), &LoadOptions::default()).unwrap();
        let bin = binarize_target(&ds, &BinaryTargetRule { source_column: "v".into(), rule: BinarizeRule::MedianSplit }).unwrap();
        let counts = bin.labels().unwrap().counts();
        prop_assert!(counts.len() == 2 && counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn out_of_fold_predictions_cover_every_row(seed in any::<u64>(), n in 20usize..50, folds in 2usize..6) {
        let ds = mixed(n, 0.0, seed);
        let y = ds.labels().unwrap().values;
        let counts = ds.labels().unwrap().counts();
        prop_assume!(counts.iter().all(|&c| c >= folds));
        let x = fairsim_core::representation::encode_tabular(&ds, &ds.feature_indices()).features;
        let cv = cross_validate(&ClassifierSpec::knn(3, seed), &x, &y, folds, seed).unwrap();
        let mut seen = vec![0; n];
        for f in &cv.per_fold {
            for &i in &f.test_indices {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(cv.oof_predictions.len(), n);
    }
}

#[test]
fn c2_grows_with_majority_share() {
    let mut last = -1.0;
    for majority in 50..100 {
        let mut y = vec![0usize; majority];
        y.extend(vec![1; 100 - majority]);
        let c2 = class_imbalance(&y).c2;
        assert!(c2 > last || (majority == 50 && c2 == 0.0));
        last = c2;
    }
}

#[test]
fn fixed_cells_survive_imputation_rounds() {
    // A table whose only missing cell sits in a row linked to one neighbour.
    let ds = TabularDataset::from_reader(
        "x,c,y\n1,p,a\nNA,p,a\n9,q,b\n".as_bytes(),
        &LoadOptions::default(),
    )
    .unwrap();
    let w = exponential_kernel(
        &gower_matrix(ds.rows(), ds.columns(), &[1, 2]).unwrap(),
        &KernelParams::default(),
    )
    .unwrap();
    let net = build_network(&w, EdgePolicy::TopK(1)).unwrap();
    let out = impute(&ds, &net).unwrap();
    assert_eq!(out.dataset.cell(1, 0), Cell::Num(1.0));
}
