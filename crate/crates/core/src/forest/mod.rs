//! Random-forest classifier.
//!
//! Trees are grown CART-style on bootstrap samples; each node searches a
//! random subset of features for the threshold with the largest decrease in
//! Gini impurity. Thresholds sit halfway between consecutive distinct values.
//!
//! Feature importances are the mean decrease in impurity: each split credits
//! its feature with the impurity decrease weighted by the fraction of the
//! tree's samples reaching the node. Per-tree importances are normalized,
//! averaged over trees and normalized again.
//!
//! Tree `i` draws from its own random stream derived from `(seed, i)`, so
//! training in parallel gives the same model as training sequentially.

mod tree;

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tree::{Node, Tree};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    Sqrt,
    All,
    Fixed(usize),
}

impl FeatureSubset {
    fn resolve(self, n_features: usize) -> usize {
        match self {
            FeatureSubset::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            FeatureSubset::All => n_features,
            FeatureSubset::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeatureSubset,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: FeatureSubset::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidForestConfig("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidForestConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidForestConfig("max_depth must be positive".into()));
        }
        if let FeatureSubset::Fixed(k) = self.features_per_split {
            if k == 0 || k > n_features {
                return Err(Error::InvalidForestConfig(format!(
                    "features_per_split {k} must lie in [1, {n_features}]"
                )));
            }
        }
        Ok(())
    }
}

/// A trained forest for one label attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: u32,
    pub attribute: String,
    pub classes: Vec<String>,
    pub n_features: usize,
    pub importances: Vec<f64>,
    pub trees: Vec<Tree>,
}

pub fn train(dataset: &Dataset, attribute: &str, cfg: &ForestConfig) -> Result<ClassifierModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = dataset.n_features();
    cfg.validate(d)?;
    let labels = dataset.labels(attribute)?;
    if labels.n_classes() < 2 {
        return Err(Error::SingleClass(attribute.to_string()));
    }
    let x: Vec<Vec<f64>> = dataset.records().iter().map(|r| r.features.clone()).collect();
    let matrix = tree::Matrix {
        x: &x,
        y: &labels.codes,
        n_classes: labels.n_classes(),
        n_features: d,
    };
    let params = tree::GrowParams {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        features_per_split: cfg.features_per_split.resolve(d),
    };
    let n = dataset.len();

    let grown: Vec<(Tree, Vec<f64>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(cfg.seed, t as u64);
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut imp = vec![0.0; d];
            let tree = tree::grow(&matrix, samples, &params, &mut rng, &mut imp);
            normalize(&mut imp);
            (tree, imp)
        })
        .collect();

    let mut importances = vec![0.0; d];
    for (_, imp) in &grown {
        for (acc, v) in importances.iter_mut().zip(imp) {
            *acc += v;
        }
    }
    normalize(&mut importances);
    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        attribute: attribute.to_string(),
        classes: labels.classes,
        n_features: d,
        importances,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
    })
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    }
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl ClassifierModel {
    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: features.len(),
            });
        }
        Ok(())
    }

    /// Index into `classes` of the majority vote of the trees' leaf-majority
    /// classes. Ties (within a leaf or between votes) go to the earlier class.
    pub fn predict_index(&self, features: &[f64]) -> Result<usize> {
        self.check_dim(features)?;
        let mut votes = vec![0usize; self.classes.len()];
        for tree in &self.trees {
            votes[argmax(tree.leaf(features))] += 1;
        }
        Ok(argmax(&votes))
    }

    pub fn predict(&self, features: &[f64]) -> Result<&str> {
        Ok(&self.classes[self.predict_index(features)?])
    }

    /// Mean over trees of the normalized leaf class histograms.
    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        let mut proba = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            let counts = tree.leaf(features);
            let total: u32 = counts.iter().sum();
            for (p, &c) in proba.iter_mut().zip(counts) {
                *p += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        proba.iter_mut().for_each(|p| *p /= n);
        Ok(proba)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ClassifierModel = serde_json::from_str(&text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(model.format_version));
        }
        Ok(model)
    }
}

/// Fraction of records whose predicted class equals their label.
pub fn accuracy(model: &ClassifierModel, dataset: &Dataset) -> Result<f64> {
    if !dataset.schema().has_attribute(&model.attribute) {
        return Err(Error::UnknownAttribute(model.attribute.clone()));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = dataset
        .records()
        .par_iter()
        .map(|r| -> Result<usize> {
            let predicted = model.predict(&r.features)?;
            Ok(usize::from(predicted == r.labels[&model.attribute]))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / dataset.len() as f64)
}
