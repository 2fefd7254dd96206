//! Complexity of the bundled employee table under the random-walk mapping
//! compared with the encoded original. Kept in its own target because the
//! ordering it asserts does not hold for collective feature efficiency on
//! kernel-row representations: column j of K has its strict maximum at row
//! j (K_jj >= m - 1 > 1 >= K_ij), so every row is separated by its own
//! column and F4 reaches 0 whatever the data.

use fairsim_core::{
    build_network, complexity_report, discretize_target, synth, EdgePolicy, KernelParams,
    Representation, Representations, SimilarityMethod, SimilarityScope,
};

#[test]
fn random_walk_mapping_raises_collective_feature_efficiency() {
    let ds = discretize_target(
        &synth::employee_records(synth::EMPLOYEE_ROWS, synth::EMPLOYEE_SEED).unwrap(),
        "PayRate",
        &synth::PAY_CUTS,
    )
    .unwrap();
    let reps = Representations::build(
        &ds,
        &SimilarityMethod::Gower,
        SimilarityScope::AllColumns,
        &KernelParams::default(),
    )
    .unwrap();
    let y = ds.labels().unwrap().values;
    let f4 = |r: Representation| {
        let net = build_network(reps.weights(r).unwrap(), EdgePolicy::default()).unwrap();
        complexity_report(&reps.features(r), &y, &reps.distances(r), Some(&net))
            .unwrap()
            .measures["F4"]
    };
    let (original, rwk) = (f4(Representation::Original), f4(Representation::SgdRwk));
    assert!(
        rwk >= original,
        "F4 original {original:.4}, SGD+RWk {rwk:.4}"
    );
}
