//! Random forest classifier: bootstrap-aggregated CART trees with random
//! feature subsets at each split.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::sensorsim::mix_seed;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means `floor(sqrt(dim))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Parameter("n_trees must be > 0".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Parameter("min_samples_split must be >= 2".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Parameter("max_features must be > 0".into()));
        }
        Ok(())
    }

    pub fn features_per_split(&self, dim: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (dim as f64).sqrt().floor() as usize)
            .clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub n_classes: usize,
    pub feature_dim: usize,
    pub seed: u64,
    /// Class names by index, when trained from labeled features.
    pub classes: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<DecisionTree>,
}

/// Trains on rows with class indices in `0..n_classes`.
///
/// Tree `t` draws its bootstrap sample and feature subsets from a generator
/// seeded with `mix_seed(seed, t)`, so the model does not depend on how
/// trees are scheduled across threads.
pub fn train_forest_indexed(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    params.validate()?;
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::Shape(format!("{} rows and {} labels", rows.len(), labels.len())));
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(Error::Shape("feature dimension is zero".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::Shape(format!(
                "row {i} has {} features, expected {dim}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature row {i}")));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Parameter(format!("label {bad} outside 0..{n_classes}")));
    }
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Parameter(
            "training data must contain at least two classes".into(),
        ));
    }

    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        max_features: params.features_per_split(dim),
    };
    let n = rows.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
            let samples: Vec<usize> = if params.bootstrap {
                use rand::Rng;
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit(rows, labels, n_classes, samples, tree_params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        n_classes,
        feature_dim: dim,
        seed,
        classes: Vec::new(),
        params: *params,
        trees,
    })
}

/// Trains on a labeled feature matrix; classes are the sorted distinct labels.
pub fn train_forest(features: &FeatureMatrix, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let mut classes = features.labels.clone();
    classes.sort();
    classes.dedup();
    let labels: Vec<usize> = features
        .labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label from the same list"))
        .collect();
    let mut model = train_forest_indexed(&features.rows, &labels, classes.len(), params, seed)?;
    model.classes = classes;
    Ok(model)
}

impl ForestModel {
    /// Class-probability vector: the mean over trees of each reached leaf's
    /// normalized histogram.
    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_counts(row);
            let total: u32 = counts.iter().sum();
            if total == 0 {
                continue;
            }
            for (a, &c) in acc.iter_mut().zip(counts) {
                *a += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Arg-max class per row, ties to the lowest class index.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != self.feature_dim) {
            return Err(Error::Shape(format!(
                "row {i} has {} features, model expects {}",
                r.len(),
                self.feature_dim
            )));
        }
        Ok(rows.iter().map(|r| argmax(&self.predict_proba_row(r))).collect())
    }

    pub fn predict_labels(&self, features: &FeatureMatrix) -> Result<Vec<String>> {
        if self.classes.len() != self.n_classes {
            return Err(Error::Parameter("model has no class names".into()));
        }
        Ok(self
            .predict(&features.rows)?
            .into_iter()
            .map(|c| self.classes[c].clone())
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parameter(format!(
                "unsupported model version {}",
                model.format_version
            )));
        }
        for tree in &model.trees {
            for node in &tree.nodes {
                match node {
                    super::Node::Split {
                        feature, left, right, ..
                    } => {
                        if *feature >= model.feature_dim || *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                            return Err(Error::Parameter("model tree references out of range".into()));
                        }
                    }
                    super::Node::Leaf { counts } => {
                        if counts.len() != model.n_classes || counts.iter().all(|&c| c == 0) {
                            return Err(Error::Parameter("model leaf histogram is malformed".into()));
                        }
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
