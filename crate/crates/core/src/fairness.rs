//! Group fairness metrics (true- and false-positive-rate gaps) and the
//! certification loop over dataset representations.

use serde::Serialize;

use crate::dataset::{assign_groups, binarize_target, BinaryTargetRule, GroupSpec, TabularDataset};
use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::models::{cross_validate, ClassifierSpec};
use crate::representation::{Representation, Representations, SimilarityScope};
use crate::similarity::SimilarityMethod;

pub const DEFAULT_DELTA: f64 = 0.1;

fn group_name(g: u8) -> &'static str {
    if g == 1 {
        "privileged"
    } else {
        "unprivileged"
    }
}

/// `Pr(pred = 1 | s = group, truth = label)`.
fn positive_rate(
    y_true: &[usize],
    y_pred: &[usize],
    s: &[u8],
    group: u8,
    label: usize,
) -> Result<f64> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for i in 0..y_true.len() {
        if s[i] == group && y_true[i] == label {
            total += 1;
            hits += (y_pred[i] == 1) as usize;
        }
    }
    if total == 0 {
        return Err(Error::UndefinedRate {
            group: group_name(group),
            label: if label == 1 { "positive" } else { "negative" },
        });
    }
    Ok(hits as f64 / total as f64)
}

fn check_lengths(y_true: &[usize], y_pred: &[usize], s: &[u8]) -> Result<()> {
    if y_true.len() != y_pred.len() || y_true.len() != s.len() {
        return Err(Error::Dimension(format!(
            "{} labels, {} predictions, {} group labels",
            y_true.len(),
            y_pred.len(),
            s.len()
        )));
    }
    if y_true.iter().chain(y_pred).any(|&v| v > 1) {
        return Err(Error::Parameter(
            "fairness metrics need binary labels".into(),
        ));
    }
    Ok(())
}

/// True-positive-rate gap, privileged minus unprivileged (`s = 1` is privileged).
pub fn equal_opportunity(y_true: &[usize], y_pred: &[usize], s: &[u8]) -> Result<f64> {
    check_lengths(y_true, y_pred, s)?;
    Ok(positive_rate(y_true, y_pred, s, 1, 1)? - positive_rate(y_true, y_pred, s, 0, 1)?)
}

/// False-positive-rate gap, privileged minus unprivileged.
pub fn equal_misopportunity(y_true: &[usize], y_pred: &[usize], s: &[u8]) -> Result<f64> {
    check_lengths(y_true, y_pred, s)?;
    Ok(positive_rate(y_true, y_pred, s, 1, 0)? - positive_rate(y_true, y_pred, s, 0, 0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub tpr_priv: f64,
    pub tpr_unpriv: f64,
    pub fpr_priv: f64,
    pub fpr_unpriv: f64,
    pub equal_opportunity: f64,
    pub equal_misopportunity: f64,
    /// `(privileged, unprivileged)`.
    pub group_sizes: (usize, usize),
    pub representation: String,
}

impl FairnessReport {
    pub fn within(&self, delta: f64) -> bool {
        self.equal_opportunity.abs() <= delta && self.equal_misopportunity.abs() <= delta
    }
}

pub fn fairness_report(
    y_true: &[usize],
    y_pred: &[usize],
    s: &[u8],
    representation: &str,
) -> Result<FairnessReport> {
    check_lengths(y_true, y_pred, s)?;
    let tpr_priv = positive_rate(y_true, y_pred, s, 1, 1)?;
    let tpr_unpriv = positive_rate(y_true, y_pred, s, 0, 1)?;
    let fpr_priv = positive_rate(y_true, y_pred, s, 1, 0)?;
    let fpr_unpriv = positive_rate(y_true, y_pred, s, 0, 0)?;
    let n_priv = s.iter().filter(|&&g| g == 1).count();
    Ok(FairnessReport {
        tpr_priv,
        tpr_unpriv,
        fpr_priv,
        fpr_unpriv,
        equal_opportunity: tpr_priv - tpr_unpriv,
        equal_misopportunity: fpr_priv - fpr_unpriv,
        group_sizes: (n_priv, s.len() - n_priv),
        representation: representation.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationStep {
    pub representation: Representation,
    pub fairness: FairnessReport,
    pub weighted_f1: f64,
    pub weighted_f1_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationOutcome {
    pub certified: bool,
    pub chosen_representation: Option<Representation>,
    /// Every representation, in evaluation order.
    pub trail: Vec<CertificationStep>,
    pub delta: f64,
}

impl CertificationOutcome {
    pub fn step(&self, r: Representation) -> Option<&CertificationStep> {
        self.trail.iter().find(|s| s.representation == r)
    }
}

/// Evaluates each representation in the fixed order with out-of-fold
/// cross-validated predictions and picks the first whose gaps are both
/// within `delta`. All four are always evaluated so the trail is complete.
pub fn certify_representations(
    reps: &Representations,
    y: &[usize],
    s: &[u8],
    spec: &ClassifierSpec,
    delta: f64,
    folds: usize,
) -> Result<CertificationOutcome> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Parameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let mut trail = Vec::with_capacity(Representation::ALL.len());
    for r in Representation::ALL {
        let cv = cross_validate(spec, &reps.features(r), y, folds, spec.seed)?;
        let fairness = fairness_report(y, &cv.oof_predictions, s, r.label())?;
        log::info!(
            "{r}: weighted F1 {:.3}, EO {:.3}, EMO {:.3}",
            cv.mean,
            fairness.equal_opportunity,
            fairness.equal_misopportunity
        );
        trail.push(CertificationStep {
            representation: r,
            fairness,
            weighted_f1: cv.mean,
            weighted_f1_std: cv.std,
        });
    }
    let chosen = trail
        .iter()
        .find(|t| t.fairness.within(delta))
        .map(|t| t.representation);
    Ok(CertificationOutcome {
        certified: chosen.is_some(),
        chosen_representation: chosen,
        trail,
        delta,
    })
}

/// Binarizes the target, assigns groups, builds the representations with
/// Gower similarity and runs the certification loop.
#[allow(clippy::too_many_arguments)]
pub fn certify(
    ds: &TabularDataset,
    groups: &GroupSpec,
    rule: &BinaryTargetRule,
    spec: &ClassifierSpec,
    delta: f64,
    params: &KernelParams,
    scope: SimilarityScope,
    folds: usize,
) -> Result<CertificationOutcome> {
    let bin = binarize_target(ds, rule)?;
    let s = assign_groups(&bin, groups)?;
    let y = bin.labels()?.values;
    let reps = Representations::build(&bin, &SimilarityMethod::Gower, scope, params)?;
    certify_representations(&reps, &y, &s.s, spec, delta, folds)
}
