//! The four dataset representations evaluated downstream: the encoded
//! tabular data and the rows of the similarity, exponential-kernel and
//! random-walk-kernel matrices.

use serde::{Deserialize, Serialize};

use crate::complexity::euclidean_distances;
use crate::dataset::{Cell, ColumnKind, TabularDataset};
use crate::error::{Error, Result};
use crate::kernels::{exponential_kernel, random_walk_kernel, KernelMatrix, KernelParams};
use crate::matrix::SquareMatrix;
use crate::models::FeatureGroup;
use crate::similarity::{gower_matrix, similarity_matrix, SimilarityMatrix, SimilarityMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Representation {
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "SGD")]
    Sgd,
    #[serde(rename = "SGD+Ek")]
    SgdEk,
    #[serde(rename = "SGD+RWk")]
    SgdRwk,
}

impl Representation {
    /// Evaluation order used by certification.
    pub const ALL: [Representation; 4] = [
        Representation::Original,
        Representation::Sgd,
        Representation::SgdEk,
        Representation::SgdRwk,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Representation::Original => "original",
            Representation::Sgd => "SGD",
            Representation::SgdEk => "SGD+Ek",
            Representation::SgdRwk => "SGD+RWk",
        }
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" | "orig" => Ok(Representation::Original),
            "sgd" => Ok(Representation::Sgd),
            "sgd+ek" | "ek" => Ok(Representation::SgdEk),
            "sgd+rwk" | "rwk" => Ok(Representation::SgdRwk),
            _ => Err(Error::Parameter(format!(
                "unknown representation `{s}` (expected original, SGD, SGD+Ek or SGD+RWk)"
            ))),
        }
    }
}

/// Columns entering the Gower similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityScope {
    /// Every column except the target.
    Features,
    /// Every column, target included, so the mapped rows carry label
    /// information that is unavailable for genuinely unseen rows.
    #[default]
    AllColumns,
}

impl SimilarityScope {
    pub fn columns(self, ds: &TabularDataset) -> Vec<usize> {
        match self {
            SimilarityScope::Features => ds.feature_indices(),
            SimilarityScope::AllColumns => (0..ds.n_columns()).collect(),
        }
    }
}

impl std::str::FromStr for SimilarityScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "features" => Ok(SimilarityScope::Features),
            "all" | "all_columns" => Ok(SimilarityScope::AllColumns),
            _ => Err(Error::Parameter(format!(
                "unknown similarity scope `{s}` (expected features or all)"
            ))),
        }
    }
}

/// Numeric encoding of tabular columns: numerics min-max scaled to `[0, 1]`,
/// categoricals one-hot over their levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularEncoding {
    pub features: Vec<Vec<f64>>,
    pub names: Vec<String>,
    /// Encoded columns per source column, for permutation importance.
    pub groups: Vec<FeatureGroup>,
}

/// Encodes the `columns` of `ds`. A missing numeric cell takes the column's
/// scaled observed mean; a missing categorical cell encodes as all zeros.
pub fn encode_tabular(ds: &TabularDataset, columns: &[usize]) -> TabularEncoding {
    let n = ds.n_rows();
    let mut features = vec![Vec::new(); n];
    let mut names = Vec::new();
    let mut groups = Vec::new();
    for &c in columns {
        let col = ds.column(c);
        let start = names.len();
        match col.kind {
            ColumnKind::Numeric => {
                let (lo, hi) = col.range.unwrap_or((0.0, 0.0));
                let scale = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                let observed: Vec<f64> = (0..n)
                    .filter_map(|i| ds.cell(i, c).as_num())
                    .map(scale)
                    .collect();
                let fill = if observed.is_empty() {
                    0.0
                } else {
                    observed.iter().sum::<f64>() / observed.len() as f64
                };
                for (i, row) in features.iter_mut().enumerate() {
                    row.push(ds.cell(i, c).as_num().map_or(fill, scale));
                }
                names.push(col.name.clone());
            }
            ColumnKind::Categorical => {
                for (code, level) in col.levels.iter().enumerate() {
                    for (i, row) in features.iter_mut().enumerate() {
                        let hot = matches!(ds.cell(i, c), Cell::Cat(v) if v as usize == code);
                        row.push(if hot { 1.0 } else { 0.0 });
                    }
                    names.push(format!("{}={}", col.name, level));
                }
            }
        }
        groups.push(FeatureGroup {
            name: col.name.clone(),
            columns: (start..names.len()).collect(),
        });
    }
    TabularEncoding {
        features,
        names,
        groups,
    }
}

/// All four representations of one dataset.
#[derive(Debug, Clone)]
pub struct Representations {
    pub tabular: TabularEncoding,
    /// Distances used by neighbourhood measures on the original data (Gower).
    pub original_distances: SquareMatrix,
    pub similarity: SimilarityMatrix,
    pub ek: KernelMatrix,
    /// Random-walk kernel applied to the exponential-kernel weights.
    pub rwk: KernelMatrix,
}

impl Representations {
    /// Builds every representation. `scope` selects the Gower columns and is
    /// ignored for cosine similarity; the original representation always
    /// encodes the feature columns only.
    pub fn build(
        ds: &TabularDataset,
        method: &SimilarityMethod,
        scope: SimilarityScope,
        params: &KernelParams,
    ) -> Result<Self> {
        let s = match method {
            SimilarityMethod::Gower => gower_matrix(ds.rows(), ds.columns(), &scope.columns(ds))?,
            SimilarityMethod::Cosine(_) => similarity_matrix(ds, method)?,
        };
        Self::from_similarity(ds, &ds.feature_indices(), s, params)
    }

    /// `tabular_columns` are the columns encoded for the original representation.
    pub fn from_similarity(
        ds: &TabularDataset,
        tabular_columns: &[usize],
        similarity: SimilarityMatrix,
        params: &KernelParams,
    ) -> Result<Self> {
        if similarity.n() != ds.n_rows() {
            return Err(Error::Dimension(format!(
                "similarity over {} entries for {} rows",
                similarity.n(),
                ds.n_rows()
            )));
        }
        let ek = exponential_kernel(&similarity, params)?;
        let rwk = random_walk_kernel(&ek, params)?;
        let original_distances =
            gower_matrix(ds.rows(), ds.columns(), &ds.feature_indices())?.distances();
        Ok(Self {
            tabular: encode_tabular(ds, tabular_columns),
            original_distances,
            similarity,
            ek,
            rwk,
        })
    }

    /// Feature rows handed to classifiers.
    pub fn features(&self, r: Representation) -> Vec<Vec<f64>> {
        match r {
            Representation::Original => self.tabular.features.clone(),
            _ => self
                .weights(r)
                .map(SquareMatrix::to_rows)
                .unwrap_or_default(),
        }
    }

    /// Pairwise weights from which the representation's network is built.
    /// The original representation uses the similarity itself.
    pub fn weights(&self, r: Representation) -> Option<&SquareMatrix> {
        match r {
            Representation::Original | Representation::Sgd => Some(self.similarity.matrix()),
            Representation::SgdEk => Some(self.ek.matrix()),
            Representation::SgdRwk => Some(self.rwk.matrix()),
        }
    }

    /// Distances for neighbourhood measures: Gower on the original data,
    /// Euclidean between feature rows otherwise.
    pub fn distances(&self, r: Representation) -> SquareMatrix {
        match r {
            Representation::Original => self.original_distances.clone(),
            _ => euclidean_distances(&self.features(r)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LoadOptions;

    #[test]
    fn encoding_scales_and_one_hots() {
        let ds = TabularDataset::from_reader(
            "x,c,y\n0,red,a\n5,blue,b\n10,red,a\n".as_bytes(),
            &LoadOptions::default(),
        )
        .unwrap();
        let e = encode_tabular(&ds, &ds.feature_indices());
        assert_eq!(e.names, vec!["x", "c=red", "c=blue"]);
        assert_eq!(e.features[1], vec![0.5, 0.0, 1.0]);
        assert_eq!(e.groups[1].columns, vec![1, 2]);
    }

    #[test]
    fn missing_numeric_takes_scaled_mean() {
        let ds = TabularDataset::from_reader(
            "x,y\n0,a\nNA,b\n10,a\n".as_bytes(),
            &LoadOptions::default(),
        )
        .unwrap();
        let e = encode_tabular(&ds, &[0]);
        assert_eq!(e.features[1], vec![0.5]);
    }

    #[test]
    fn representation_names_round_trip() {
        for r in Representation::ALL {
            assert_eq!(r.label().parse::<Representation>().unwrap(), r);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(json, format!("\"{}\"", r.label()));
        }
    }
}
