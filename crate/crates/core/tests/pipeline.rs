mod common;

use rand::Rng;

use fairsim_core::models::{fit, FeatureGroup};
use fairsim_core::{
    certify, cross_validate, graph_augment, permutation_importance, rng, synth, AugmentMethod,
    AugmentationPlan, BinarizeRule, BinaryTargetRule, ClassifierSpec, CmpOp, Condition, EdgePolicy,
    GroupSpec, KernelParams, ModelKind, Origin, Representation, Representations, SimilarityMethod,
    SimilarityScope,
};

fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

fn forest(n_trees: usize, seed: u64) -> ClassifierSpec {
    ClassifierSpec {
        kind: ModelKind::RandomForest {
            n_trees,
            max_depth: Some(3),
            min_leaf: 1,
            features_per_split: None,
        },
        seed,
    }
}

#[test]
fn ensemble_fits_training_data_at_least_as_well_as_one_tree() {
    let mut wins = 0;
    for seed in 0..50u64 {
        let mut r = rng::stream(seed, 0);
        let n = r.random_range(30..80);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| r.random()).collect())
            .collect();
        let y: Vec<usize> = x
            .iter()
            .map(|row| ((row[0] + row[1] * row[2] + 0.3 * r.random::<f64>()) > 0.8) as usize)
            .collect();
        let single = accuracy(&fit(&forest(1, seed), &x, &y).unwrap().predict(&x), &y);
        let many = accuracy(&fit(&forest(100, seed), &x, &y).unwrap().predict(&x), &y);
        wins += (many >= single) as usize;
    }
    assert!(
        wins >= 45,
        "ensemble at least as accurate on {wins}/50 datasets"
    );
}

fn signal_and_noise(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, Vec<FeatureGroup>) {
    let mut r = rng::stream(seed, 0);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random(), r.random()]).collect();
    let y = x.iter().map(|row| (row[0] > 0.5) as usize).collect();
    let groups = ["signal", "noise"]
        .iter()
        .enumerate()
        .map(|(c, name)| FeatureGroup {
            name: name.to_string(),
            columns: vec![c],
        })
        .collect();
    (x, y, groups)
}

#[test]
fn pure_noise_feature_has_no_importance() {
    let (x, y, groups) = signal_and_noise(300, 1);
    let imp =
        permutation_importance(&ClassifierSpec::random_forest(1), &x, &y, &groups, 20, 1).unwrap();
    let noise = imp.iter().find(|f| f.name == "noise").unwrap();
    assert!(
        noise.importance.abs() < 0.02,
        "noise importance {}",
        noise.importance
    );
    assert_eq!(imp[0].name, "signal");
}

#[test]
fn copied_label_is_the_top_feature() {
    let (mut x, y, mut groups) = signal_and_noise(200, 2);
    for (row, &label) in x.iter_mut().zip(&y) {
        row[0] = 0.5;
        row.push(label as f64);
    }
    groups.push(FeatureGroup {
        name: "label".into(),
        columns: vec![2],
    });
    let imp =
        permutation_importance(&ClassifierSpec::random_forest(2), &x, &y, &groups, 5, 2).unwrap();
    assert_eq!(imp[0].name, "label");
    assert!(imp[0].importance > 0.3);
}

fn group_a() -> GroupSpec {
    GroupSpec::new(vec![Condition {
        column: "group".into(),
        op: CmpOp::Eq,
        value: serde_json::json!("a"),
    }])
}

fn label_rule() -> BinaryTargetRule {
    BinaryTargetRule {
        source_column: "label".into(),
        rule: BinarizeRule::CategoryPartition {
            positive: vec!["1".into()],
        },
    }
}

#[test]
fn unbiased_data_certifies_at_original() {
    let ds = synth::unbiased(200, 1).unwrap();
    let out = certify(
        &ds,
        &group_a(),
        &label_rule(),
        &ClassifierSpec::random_forest(1),
        0.1,
        &KernelParams::default(),
        SimilarityScope::AllColumns,
        5,
    )
    .unwrap();
    assert!(out.certified);
    assert_eq!(out.chosen_representation, Some(Representation::Original));
    assert_eq!(out.trail.len(), 4);
}

#[test]
fn planted_bias_certifies_after_mapping() {
    let ds = synth::planted_bias(300, 1).unwrap();
    let out = certify(
        &ds,
        &group_a(),
        &label_rule(),
        &ClassifierSpec::random_forest(1),
        0.1,
        &KernelParams::default(),
        SimilarityScope::AllColumns,
        5,
    )
    .unwrap();
    let eo: Vec<f64> = out
        .trail
        .iter()
        .map(|t| t.fairness.equal_opportunity.abs())
        .collect();
    assert!(out.certified, "trail {eo:?}");
    assert_ne!(out.chosen_representation, Some(Representation::Original));
    let chosen = out.chosen_representation.unwrap();
    let at = Representation::ALL
        .iter()
        .position(|&r| r == chosen)
        .unwrap();
    assert!(eo[at] < eo[0], "trail {eo:?}");
}

#[test]
fn graph_augment_preserves_rows_and_marks_provenance() {
    let ds = fairsim_core::discretize_target(
        &synth::employee_records(120, 11).unwrap(),
        "PayRate",
        &synth::PAY_CUTS,
    )
    .unwrap();
    let params = KernelParams::default();
    let reps = Representations::build(
        &ds,
        &SimilarityMethod::Gower,
        SimilarityScope::AllColumns,
        &params,
    )
    .unwrap();
    let net = fairsim_core::build_network(&reps.ek, EdgePolicy::default()).unwrap();
    let plan = AugmentationPlan::equalize(&ds, AugmentMethod::Graph, 3).unwrap();
    let aug = graph_augment(&ds, &net, &params, &plan).unwrap();
    for i in 0..ds.n_rows() {
        assert_eq!(aug.dataset.row(i), ds.row(i));
        assert_eq!(aug.origin[i], Origin::Original);
    }
    assert_eq!(aug.origin.len(), aug.dataset.n_rows());
    assert!(aug.origin[ds.n_rows()..]
        .iter()
        .all(|&o| o == Origin::Graph));
    let before = ds.labels().unwrap().counts();
    let after = aug.dataset.labels().unwrap().counts();
    let max = *before.iter().max().unwrap();
    assert!(before.iter().zip(&after).all(|(b, a)| a >= b && *a <= max));
    assert!(aug.warnings.is_empty() || after.iter().any(|&a| a < max));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ds = fairsim_core::discretize_target(
        &synth::employee_records(90, 5).unwrap(),
        "PayRate",
        &synth::PAY_CUTS,
    )
    .unwrap();
    let y = ds.labels().unwrap().values;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let reps = Representations::build(
                    &ds,
                    &SimilarityMethod::Gower,
                    SimilarityScope::AllColumns,
                    &KernelParams::default(),
                )
                .unwrap();
                let cv = cross_validate(
                    &forest(30, 4),
                    &reps.features(Representation::SgdRwk),
                    &y,
                    3,
                    4,
                )
                .unwrap();
                (reps.rwk.matrix().clone(), cv.oof_predictions, cv.mean)
            })
    };
    assert_eq!(run(1), run(4));
}
