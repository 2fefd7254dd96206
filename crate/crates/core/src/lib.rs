//! Similarity networks over mixed-type tabular data, kernel tuning of the
//! pairwise weights, and the classification, complexity, fairness and
//! resampling analyses built on them.

pub mod complexity;
pub mod dataset;
pub mod error;
pub mod fairness;
pub mod kernels;
pub mod matrix;
pub mod models;
pub mod network;
pub mod representation;
pub mod resample;
pub mod rng;
pub mod similarity;
pub mod synth;

pub use complexity::{complexity_report, ComplexityReport};
pub use dataset::{
    assign_groups, binarize_target, discretize_target, BinarizeRule, BinaryTargetRule, Cell, CmpOp,
    ColumnKind, ColumnSchema, Condition, GroupAssignment, GroupSpec, Labels, LoadOptions,
    TabularDataset,
};
pub use error::{Error, Result};
pub use fairness::{
    certify, certify_representations, equal_misopportunity, equal_opportunity, fairness_report,
    CertificationOutcome, CertificationStep, FairnessReport,
};
pub use kernels::{exponential_kernel, random_walk_kernel, KernelKind, KernelMatrix, KernelParams};
pub use matrix::SquareMatrix;
pub use models::{
    cross_validate, permutation_importance, train_predict, weighted_f1, ClassificationResult,
    ClassifierSpec, ModelKind,
};
pub use network::{
    build_network, network_measures, EdgePolicy, NetworkMeasures, SimilarityNetwork,
};
pub use representation::{Representation, Representations, SimilarityScope};
pub use resample::{
    graph_augment, group_balance_oversample, impute, smote_oversample, vector_label_propagation,
    AugmentMethod, AugmentationPlan, AugmentedDataset, Origin, VectorLabel,
};
pub use similarity::{
    gower_similarity, similarity_matrix, EmbeddingSet, SimilarityMatrix, SimilarityMethod,
};
