use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use fairsim_core::dataset::BinarizeRule;
use fairsim_core::{
    ClassifierSpec, EdgePolicy, KernelParams, ModelKind, Representation, SimilarityScope,
};

use crate::CliError;

/// Flags shared by every subcommand. Everything except `threads` and `out`
/// is echoed into the report, which is enough to re-run the subcommand.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Input table (delimiter-separated, header row).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Load options as JSON (delimiter, missing tokens, column hints).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Privileged-group predicate as JSON.
    #[arg(long, global = true)]
    pub groups: Option<PathBuf>,
    /// Target column (defaults to the schema's, else the last column).
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Binary target rule: median, threshold:<x> or levels:<a,b>.
    #[arg(long, global = true)]
    pub binarize: Option<String>,
    /// Cut points binning a numeric target into classes, e.g. 25,40,55.
    #[arg(long, global = true)]
    pub bins: Option<String>,
    /// gower or cosine.
    #[arg(long, global = true, default_value = "gower")]
    pub method: String,
    /// Embedding vectors for cosine similarity, one row per entry.
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    /// Gower columns: all (target included) or features.
    #[arg(long, global = true, default_value = "all")]
    pub scope: String,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub mu: f64,
    /// Neighbours for the exponential-kernel scale (default min(20, N-1)).
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true, default_value_t = 2.5)]
    pub m: f64,
    #[arg(long, global = true, default_value_t = 1)]
    pub p: u32,
    /// quantile:<q>, top_k:<t> or absolute:<theta>.
    #[arg(long, global = true, default_value = "quantile:0.9")]
    pub policy: String,
    /// rf, rf:<trees>, knn or knn:<k>.
    #[arg(long, global = true, default_value = "rf")]
    pub model: String,
    #[arg(long, global = true, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, global = true, default_value_t = 0.1)]
    pub delta: f64,
    /// Restrict to one representation (original, SGD, SGD+Ek, SGD+RWk).
    #[arg(long, global = true)]
    pub repr: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Augmentation method: graph, smote or group:<column>.
    #[arg(long, global = true, default_value = "graph")]
    pub augment: String,
    /// Rows produced by `generate`.
    #[arg(long, global = true, default_value_t = 301)]
    pub rows: usize,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory for artifacts and report.json.
    #[arg(long, global = true, default_value = "fairsim-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

impl Config {
    pub fn kernel_params(&self) -> KernelParams {
        KernelParams {
            mu: self.mu,
            k: self.k,
            m: self.m,
            p: self.p,
        }
    }

    pub fn policy(&self) -> Result<EdgePolicy, CliError> {
        self.policy.parse().map_err(usage)
    }

    pub fn classifier(&self) -> Result<ClassifierSpec, CliError> {
        let kind: ModelKind = self.model.parse().map_err(usage)?;
        Ok(ClassifierSpec {
            kind,
            seed: self.seed,
        })
    }

    pub fn scope(&self) -> Result<SimilarityScope, CliError> {
        self.scope.parse().map_err(usage)
    }

    pub fn binarize_rule(&self) -> Result<Option<BinarizeRule>, CliError> {
        self.binarize
            .as_deref()
            .map(str::parse)
            .transpose()
            .map_err(usage)
    }

    pub fn bin_cuts(&self) -> Result<Option<Vec<f64>>, CliError> {
        self.bins
            .as_deref()
            .map(|s| {
                s.split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| usage(format!("bad cut point `{t}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Representations selected by `--repr`, all four by default.
    pub fn representations(&self) -> Result<Vec<Representation>, CliError> {
        match &self.repr {
            None => Ok(Representation::ALL.to_vec()),
            Some(r) => Ok(vec![r.parse().map_err(usage)?]),
        }
    }

    /// Validates every flag that can be checked without reading data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.policy()?;
        self.classifier()?;
        self.scope()?;
        self.binarize_rule()?;
        self.bin_cuts()?;
        self.representations()?;
        if !matches!(self.method.as_str(), "gower" | "cosine") {
            return Err(usage(format!(
                "unknown method `{}` (expected gower or cosine)",
                self.method
            )));
        }
        if self.method == "cosine" && self.embeddings.is_none() {
            return Err(usage("--method cosine needs --embeddings"));
        }
        if self.folds < 2 {
            return Err(usage("--folds must be at least 2"));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(usage("--delta must be positive"));
        }
        if self.threads == Some(0) {
            return Err(usage("--threads must be at least 1"));
        }
        Ok(())
    }

    /// Command-line flags reproducing this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = Vec::new();
        let mut push = |flag: &str, v: String| {
            a.push(format!("--{flag}"));
            a.push(v);
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (flag, v) in [
            ("data", path(&self.data)),
            ("schema", path(&self.schema)),
            ("groups", path(&self.groups)),
            ("target", self.target.clone()),
            ("binarize", self.binarize.clone()),
            ("bins", self.bins.clone()),
            ("embeddings", path(&self.embeddings)),
            ("k", self.k.map(|k| k.to_string())),
            ("repr", self.repr.clone()),
        ] {
            if let Some(v) = v {
                push(flag, v);
            }
        }
        push("method", self.method.clone());
        push("scope", self.scope.clone());
        push("mu", self.mu.to_string());
        push("m", self.m.to_string());
        push("p", self.p.to_string());
        push("policy", self.policy.clone());
        push("model", self.model.clone());
        push("folds", self.folds.to_string());
        push("delta", self.delta.to_string());
        push("seed", self.seed.to_string());
        push("augment", self.augment.clone());
        push("rows", self.rows.to_string());
        a
    }
}
