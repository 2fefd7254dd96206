//! Pipeline stages. Each stage writes its artifacts into the output
//! directory and returns the JSON section it contributes to the report.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use fairsim_core::complexity::complexity_report;
use fairsim_core::dataset::{discretize_target, BinarizeRule, BinaryTargetRule};
use fairsim_core::network::components_by_size;
use fairsim_core::representation::{encode_tabular, Representations};
use fairsim_core::resample::AugmentMethod;
use fairsim_core::{
    assign_groups, binarize_target, build_network, certify_representations, cross_validate,
    exponential_kernel, fairness_report, graph_augment, group_balance_oversample, impute,
    network_measures, permutation_importance, smote_oversample, synth, AugmentationPlan,
    AugmentedDataset, CertificationOutcome, ColumnKind, EmbeddingSet, GroupSpec, LoadOptions,
    Representation, SimilarityMethod, SimilarityNetwork, TabularDataset,
};

use crate::{CliError, Config};

pub const IMPORTANCE_REPEATS: usize = 10;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

/// Loaded input shared by the stages.
pub struct Context {
    pub cfg: Config,
    pub raw: TabularDataset,
    pub data_path: PathBuf,
    pub data_sha256: String,
    embeddings: Option<EmbeddingSet>,
}

impl Context {
    pub fn load(cfg: &Config) -> Result<Self, CliError> {
        let path = cfg
            .data
            .clone()
            .ok_or_else(|| CliError::Usage("--data is required".into()))?;
        let bytes = std::fs::read(&path)?;
        let data_sha256 = hex::encode(Sha256::digest(&bytes));
        let mut opts = match &cfg.schema {
            Some(p) => LoadOptions::from_json_file(p)?,
            None => LoadOptions::default(),
        };
        if let Some(t) = &cfg.target {
            opts = opts.with_target(t.clone());
        }
        let raw = TabularDataset::from_reader(bytes.as_slice(), &opts)?;
        let embeddings = match &cfg.embeddings {
            Some(p) if cfg.method == "cosine" => {
                Some(EmbeddingSet::read(BufReader::new(File::open(p)?), ',')?)
            }
            _ => None,
        };
        log::info!(
            "loaded {} rows, {} columns from {}",
            raw.n_rows(),
            raw.n_columns(),
            path.display()
        );
        Ok(Self {
            cfg: cfg.clone(),
            raw,
            data_path: path,
            data_sha256,
            embeddings,
        })
    }

    fn target_rule(&self, rule: BinarizeRule) -> BinaryTargetRule {
        BinaryTargetRule {
            source_column: self.raw.target_name().to_string(),
            rule,
        }
    }

    /// Dataset with a categorical target for classification, complexity and
    /// augmentation: a categorical target as is, else the `--bins` classes,
    /// else the `--binarize` rule, else a median split.
    pub fn classes(&self) -> Result<TabularDataset, CliError> {
        if self.raw.column(self.raw.target_index()).kind == ColumnKind::Categorical {
            return Ok(self.raw.clone());
        }
        if let Some(cuts) = self.cfg.bin_cuts()? {
            return Ok(discretize_target(&self.raw, self.raw.target_name(), &cuts)?);
        }
        let rule = self
            .cfg
            .binarize_rule()?
            .unwrap_or(BinarizeRule::MedianSplit);
        Ok(binarize_target(&self.raw, &self.target_rule(rule))?)
    }

    /// Dataset with a two-class target for the fairness metrics.
    pub fn binary(&self) -> Result<TabularDataset, CliError> {
        if let Some(rule) = self.cfg.binarize_rule()? {
            return Ok(binarize_target(&self.raw, &self.target_rule(rule))?);
        }
        let target = self.raw.column(self.raw.target_index());
        if target.kind == ColumnKind::Numeric {
            return Ok(binarize_target(
                &self.raw,
                &self.target_rule(BinarizeRule::MedianSplit),
            )?);
        }
        if target.levels.len() == 2 {
            return Ok(self.raw.clone());
        }
        Err(CliError::Usage(format!(
            "target `{}` has {} classes; fairness metrics need --binarize",
            target.name,
            target.levels.len()
        )))
    }

    pub fn group_spec(&self) -> Result<GroupSpec, CliError> {
        let path =
            self.cfg.groups.as_ref().ok_or_else(|| {
                CliError::Usage("--groups is required for fairness metrics".into())
            })?;
        Ok(GroupSpec::from_json_file(path)?)
    }

    pub fn method(&self) -> SimilarityMethod {
        match &self.embeddings {
            Some(e) => SimilarityMethod::Cosine(e.clone()),
            None => SimilarityMethod::Gower,
        }
    }

    pub fn representations(&self, ds: &TabularDataset) -> Result<Representations, CliError> {
        Ok(Representations::build(
            ds,
            &self.method(),
            self.cfg.scope()?,
            &self.cfg.kernel_params(),
        )?)
    }

    /// Representation whose weights define the network (default SGD+Ek).
    pub fn network_representation(&self) -> Result<Representation, CliError> {
        match &self.cfg.repr {
            None => Ok(Representation::SgdEk),
            Some(_) => Ok(self.cfg.representations()?[0]),
        }
    }

    pub fn network(
        &self,
        reps: &Representations,
        r: Representation,
    ) -> Result<SimilarityNetwork, CliError> {
        let w = reps.weights(r).expect("every representation has weights");
        Ok(build_network(w, self.cfg.policy()?)?)
    }

    pub fn dataset_summary(&self) -> Value {
        let columns: Vec<Value> = self
            .raw
            .columns()
            .iter()
            .map(|c| json!({"name": c.name, "kind": c.kind, "sensitive": c.sensitive}))
            .collect();
        json!({
            "path": self.data_path.display().to_string(),
            "sha256": self.data_sha256,
            "n_rows": self.raw.n_rows(),
            "n_columns": self.raw.n_columns(),
            "target": self.raw.target_name(),
            "missing_cells": self.raw.missing_count(),
            "columns": columns,
        })
    }
}

fn off_diagonal_stats(m: &fairsim_core::SquareMatrix) -> Value {
    let n = m.n();
    let (mut lo, mut hi, mut sum, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m.get(i, j);
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return json!({"min": null, "max": null, "mean": null});
    }
    json!({"min": lo, "max": hi, "mean": sum / count as f64})
}

pub fn similarity(ctx: &Context, out: &Path) -> Result<Value, CliError> {
    let ds = ctx.classes()?;
    let reps = ctx.representations(&ds)?;
    reps.similarity.write_grid(create(out, "similarity.csv")?)?;
    let scope = ctx.cfg.scope()?;
    let columns: Vec<&str> = scope
        .columns(&ds)
        .iter()
        .map(|&c| ds.column(c).name.as_str())
        .collect();
    Ok(json!({
        "artifact": "similarity.csv",
        "method": ctx.cfg.method,
        "scope": scope,
        "columns": if ctx.cfg.method == "gower" { json!(columns) } else { Value::Null },
        "n": reps.similarity.n(),
        "off_diagonal": off_diagonal_stats(reps.similarity.matrix()),
    }))
}

pub fn kernel(ctx: &Context, out: &Path) -> Result<Value, CliError> {
    let ds = ctx.classes()?;
    let reps = ctx.representations(&ds)?;
    reps.ek.write_grid(create(out, "kernel_ek.csv")?)?;
    reps.rwk.write_grid(create(out, "kernel_rwk.csv")?)?;
    let params = ctx.cfg.kernel_params();
    let eig = reps.rwk.matrix().symmetric_eigenvalues();
    Ok(json!({
        "artifacts": ["kernel_ek.csv", "kernel_rwk.csv"],
        "params": params,
        "k_resolved": params.resolved_k(ds.n_rows()),
        "ek_off_diagonal": off_diagonal_stats(reps.ek.matrix()),
        "rwk_off_diagonal": off_diagonal_stats(reps.rwk.matrix()),
        "rwk_min_eigenvalue": eig.first().copied(),
    }))
}

fn network_value(net: &SimilarityNetwork, r: Representation) -> Value {
    let m = network_measures(net);
    let sizes: Vec<usize> = components_by_size(net).iter().map(Vec::len).collect();
    json!({
        "representation": r,
        "policy": net.policy().map(|p| p.to_string()),
        "n_nodes": net.n_nodes(),
        "n_edges": net.n_edges(),
        "component_sizes": sizes,
        "density": m.density,
        "clustering_coefficient": m.clustering_coefficient,
        "hub_mean": m.hub_mean,
        "hub_converged": m.hub_converged,
    })
}

pub fn network(ctx: &Context, out: &Path) -> Result<Value, CliError> {
    let ds = ctx.classes()?;
    let reps = ctx.representations(&ds)?;
    let r = ctx.network_representation()?;
    let net = ctx.network(&reps, r)?;
    net.write_edge_list(create(out, "network.edges")?)?;
    let mut v = network_value(&net, r);
    v["artifact"] = json!("network.edges");
    Ok(v)
}

pub fn complexity(ctx: &Context, _out: &Path) -> Result<Value, CliError> {
    let ds = ctx.classes()?;
    let reps = ctx.representations(&ds)?;
    let y = ds.labels()?.values;
    let mut section = BTreeMap::new();
    for r in ctx.cfg.representations()? {
        let net = ctx.network(&reps, r)?;
        let rep = complexity_report(&reps.features(r), &y, &reps.distances(r), Some(&net))?;
        section.insert(r.label().to_string(), to_value(&rep));
    }
    Ok(to_value(&section))
}

pub fn classify(ctx: &Context, _out: &Path) -> Result<Value, CliError> {
    let ds = ctx.classes()?;
    let reps = ctx.representations(&ds)?;
    let labels = ds.labels()?;
    let spec = ctx.cfg.classifier()?;
    let mut per_repr = BTreeMap::new();
    for r in ctx.cfg.representations()? {
        let cv = cross_validate(
            &spec,
            &reps.features(r),
            &labels.values,
            ctx.cfg.folds,
            ctx.cfg.seed,
        )?;
        let folds: Vec<f64> = cv.per_fold.iter().map(|f| f.weighted_f1).collect();
        per_repr.insert(
            r.label().to_string(),
            json!({
                "weighted_f1_mean": cv.mean,
                "weighted_f1_std": cv.std,
                "per_fold": folds,
                "fold_assignment": cv.fold_assignment,
                "oof_predictions": cv.oof_predictions,
            }),
        );
    }
    let importance = permutation_importance(
        &spec,
        &reps.tabular.features,
        &labels.values,
        &reps.tabular.groups,
        IMPORTANCE_REPEATS,
        ctx.cfg.seed,
    )?;
    Ok(json!({
        "classes": labels.names,
        "class_counts": labels.counts(),
        "preprocessing": "numeric columns min-max scaled, categorical columns one-hot encoded",
        "representations": per_repr,
        "importance": {"representation": "original", "repeats": IMPORTANCE_REPEATS, "features": importance},
    }))
}

/// Certification over all four representations of the binary-target data.
pub fn certification(ctx: &Context) -> Result<CertificationOutcome, CliError> {
    let ds = ctx.binary()?;
    let groups = assign_groups(&ds, &ctx.group_spec()?)?;
    if groups.degenerate {
        return Err(CliError::Data(fairsim_core::Error::Parameter(
            "group predicate leaves one group empty".into(),
        )));
    }
    let reps = ctx.representations(&ds)?;
    let y = ds.labels()?.values;
    Ok(certify_representations(
        &reps,
        &y,
        &groups.s,
        &ctx.cfg.classifier()?,
        ctx.cfg.delta,
        ctx.cfg.folds,
    )?)
}

pub fn fairness_from(ctx: &Context, outcome: &CertificationOutcome) -> Result<Value, CliError> {
    let selected = ctx.cfg.representations()?;
    let mut section = BTreeMap::new();
    for step in outcome
        .trail
        .iter()
        .filter(|s| selected.contains(&s.representation))
    {
        let mut v = to_value(&step.fairness);
        v["weighted_f1_mean"] = json!(step.weighted_f1);
        v["weighted_f1_std"] = json!(step.weighted_f1_std);
        section.insert(step.representation.label().to_string(), v);
    }
    Ok(to_value(&section))
}

pub fn fairness(ctx: &Context, _out: &Path) -> Result<Value, CliError> {
    let outcome = certification(ctx)?;
    fairness_from(ctx, &outcome)
}

pub fn impute_stage(ctx: &Context, out: &Path) -> Result<Value, CliError> {
    let ds = &ctx.raw;
    let s = match ctx.method() {
        SimilarityMethod::Gower => fairsim_core::similarity::gower_matrix(
            ds.rows(),
            ds.columns(),
            &ctx.cfg.scope()?.columns(ds),
        )?,
        m => fairsim_core::similarity_matrix(ds, &m)?,
    };
    let ek = exponential_kernel(&s, &ctx.cfg.kernel_params())?;
    let net = build_network(&ek, ctx.cfg.policy()?)?;
    let imputed = impute(ds, &net)?;
    imputed.dataset.write_csv(create(out, "imputed.csv")?)?;
    let mut by_source: BTreeMap<String, usize> = BTreeMap::new();
    for cell in &imputed.provenance {
        *by_source
            .entry(
                to_value(&cell.source)
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
            )
            .or_default() += 1;
    }
    Ok(json!({
        "artifact": "imputed.csv",
        "network": "SGD+Ek",
        "missing_cells": imputed.provenance.len(),
        "by_source": by_source,
        "cells": imputed.provenance,
    }))
}

fn parse_augment(ctx: &Context) -> Result<AugmentMethod, CliError> {
    match ctx.cfg.augment.as_str() {
        "graph" => Ok(AugmentMethod::Graph),
        "smote" => Ok(AugmentMethod::Smote),
        s => match s.strip_prefix("group:") {
            Some(c) if !c.is_empty() => Ok(AugmentMethod::GroupBalance {
                column: c.to_string(),
            }),
            _ => Err(CliError::Usage(format!(
                "unknown augmentation `{s}` (expected graph, smote or group:<column>)"
            ))),
        },
    }
}

/// Balance and feature-efficiency measures of the original representation.
fn balance_measures(ds: &TabularDataset) -> Result<Value, CliError> {
    let labels = ds.labels()?;
    let x = encode_tabular(ds, &ds.feature_indices()).features;
    let dist =
        fairsim_core::similarity::gower_matrix(ds.rows(), ds.columns(), &ds.feature_indices())?
            .distances();
    let rep = complexity_report(&x, &labels.values, &dist, None)?;
    Ok(json!({
        "class_counts": labels.counts(),
        "C2": rep.measures["C2"],
        "F4": rep.measures["F4"],
        "measures": rep.measures,
    }))
}

/// Group gaps of the classifier on the original representation, with the
/// upper half of the class levels as the favorable outcome.
fn tabular_fairness(ctx: &Context, ds: &TabularDataset) -> Result<Value, CliError> {
    let levels = &ds.column(ds.target_index()).levels;
    let positive = levels[levels.len() / 2..].to_vec();
    let bin = binarize_target(
        ds,
        &BinaryTargetRule {
            source_column: ds.target_name().to_string(),
            rule: BinarizeRule::CategoryPartition {
                positive: positive.clone(),
            },
        },
    )?;
    let s = assign_groups(&bin, &ctx.group_spec()?)?;
    let y = bin.labels()?.values;
    let x = encode_tabular(&bin, &bin.feature_indices()).features;
    let cv = cross_validate(&ctx.cfg.classifier()?, &x, &y, ctx.cfg.folds, ctx.cfg.seed)?;
    let mut v = to_value(&fairness_report(&y, &cv.oof_predictions, &s.s, "original")?);
    v["positive_levels"] = json!(positive);
    v["weighted_f1_mean"] = json!(cv.mean);
    Ok(v)
}

pub fn augment(ctx: &Context, out: &Path) -> Result<Value, CliError> {
    let ds = ctx.classes()?;
    let method = parse_augment(ctx)?;
    let plan = AugmentationPlan::equalize(&ds, method.clone(), ctx.cfg.seed)?;
    let aug: AugmentedDataset = match &method {
        AugmentMethod::Smote => smote_oversample(&ds, &plan)?,
        AugmentMethod::GroupBalance { column } => group_balance_oversample(&ds, column, &plan)?,
        AugmentMethod::Graph => {
            let reps = ctx.representations(&ds)?;
            let net = ctx.network(&reps, ctx.network_representation()?)?;
            graph_augment(&ds, &net, &ctx.cfg.kernel_params(), &plan)?
        }
    };
    aug.write_csv(create(out, "augmented.csv")?)?;
    let mut v = json!({
        "artifact": "augmented.csv",
        "plan": plan,
        "provenance": aug.summary(),
        "warnings": aug.warnings,
        "propagation_converged": aug.propagation_converged,
        "before": balance_measures(&ds)?,
        "after": balance_measures(&aug.dataset)?,
    });
    if ctx.cfg.groups.is_some() {
        v["fairness"] = json!({
            "before": tabular_fairness(ctx, &ds)?,
            "after": tabular_fairness(ctx, &aug.dataset)?,
        });
    }
    Ok(v)
}

/// Plot-ready tables: complexity measures and fairness by representation.
pub fn write_plots(
    out: &Path,
    complexity: &Value,
    fairness: &Value,
) -> Result<Vec<String>, CliError> {
    let reprs: Vec<&str> = Representation::ALL.iter().map(|r| r.label()).collect();
    let mut w = create(out, "measures_by_representation.csv")?;
    writeln!(w, "measure,{}", reprs.join(","))?;
    let names: Vec<String> = complexity
        .get("original")
        .and_then(|v| v["measures"].as_object())
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default();
    for name in names {
        let cells: Vec<String> = reprs
            .iter()
            .map(|r| {
                let v = &complexity[r]["measures"][&name];
                if v.is_number() {
                    v.to_string()
                } else {
                    String::new()
                }
            })
            .collect();
        writeln!(w, "{name},{}", cells.join(","))?;
    }
    w.flush()?;

    let mut w = create(out, "fairness_by_representation.csv")?;
    writeln!(
        w,
        "representation,tpr_priv,tpr_unpriv,fpr_priv,fpr_unpriv,equal_opportunity,equal_misopportunity,weighted_f1"
    )?;
    for r in &reprs {
        let f = &fairness[r];
        if f.is_null() {
            continue;
        }
        let keys = [
            "tpr_priv",
            "tpr_unpriv",
            "fpr_priv",
            "fpr_unpriv",
            "equal_opportunity",
            "equal_misopportunity",
            "weighted_f1_mean",
        ];
        let cells: Vec<String> = keys.iter().map(|k| f[k].to_string()).collect();
        writeln!(w, "{r},{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(vec![
        "measures_by_representation.csv".into(),
        "fairness_by_representation.csv".into(),
    ])
}

/// Writes the synthetic employee table and a matching group predicate.
pub fn generate(cfg: &Config, out: &Path) -> Result<Value, CliError> {
    let ds = synth::employee_records(cfg.rows, cfg.seed)?;
    ds.write_csv(create(out, "employees.csv")?)?;
    let groups = json!([
        {"column": "Gender", "op": "eq", "value": "male"},
        {"column": "Age", "op": "le", "value": 40}
    ]);
    for (name, value) in [
        ("groups.json", groups),
        ("schema.json", to_value(&ds.load_options())),
    ] {
        let mut w = create(out, name)?;
        writeln!(w, "{}", serde_json::to_string_pretty(&value).expect("json"))?;
        w.flush()?;
    }
    Ok(json!({
        "artifacts": ["employees.csv", "groups.json", "schema.json"],
        "rows": cfg.rows,
        "seed": cfg.seed,
        "pay_cuts": synth::PAY_CUTS,
        "suggested_flags": format!("--schema schema.json --groups groups.json --bins {}", synth::PAY_CUTS.map(|c| c.to_string()).join(",")),
    }))
}
