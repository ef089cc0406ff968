//! Feature relevance scores and the selection mask.
//!
//! Relevance for an attribute is either the Gini importance of a forest
//! trained on it, or the mutual information between each (binned) feature
//! and the attribute labels. Selection keeps the top-ranked features for the
//! attribute of interest and any additional attributes, then removes the
//! top-ranked features for the sensitive attribute.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::ClassifierModel;

pub const DEFAULT_MI_BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceMethod {
    GiniImportance,
    MutualInformation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScores {
    pub attribute: String,
    pub method: RelevanceMethod,
    pub scores: Vec<f64>,
}

impl RelevanceScores {
    /// Indices of the `count` highest scores, ties toward lower indices.
    pub fn top_k(&self, count: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        order.truncate(count);
        order
    }
}

/// Equal-width bin index of every value over `[min, max]`; a constant
/// input lands in a single bin.
fn bin_values(values: &[f64], n_bins: usize) -> Vec<usize> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = (max - min) / n_bins as f64;
    if !(width > 0.0) || !width.is_finite() {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|&v| (((v - min) / width).floor() as usize).min(n_bins - 1))
        .collect()
}

/// Plug-in mutual information (nats) from a contingency table of counts.
pub fn mutual_information_from_table(table: &[Vec<usize>]) -> f64 {
    let n: usize = table.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let n_cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col: Vec<f64> = (0..n_cols)
        .map(|c| table.iter().map(|r| r.get(c).copied().unwrap_or(0)).sum::<usize>() as f64)
        .collect();
    let mut mi = 0.0;
    for (b, r) in table.iter().enumerate() {
        for (c, &count) in r.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let joint = count as f64;
            mi += joint / n * (joint * n / (row[b] * col[c])).ln();
        }
    }
    mi.max(0.0)
}

/// Mutual information between a feature discretized into `n_bins`
/// equal-width bins and categorical labels.
pub fn mutual_information<L: Eq + Hash>(values: &[f64], labels: &[L], n_bins: usize) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: labels.len(),
        });
    }
    if values.len() < 2 {
        return Err(Error::InvalidArgument(
            "mutual information needs at least two samples".into(),
        ));
    }
    if n_bins < 2 {
        return Err(Error::InvalidArgument("n_bins must be at least 2".into()));
    }
    let mut codes: HashMap<&L, usize> = HashMap::new();
    let label_codes: Vec<usize> = labels
        .iter()
        .map(|l| {
            let next = codes.len();
            *codes.entry(l).or_insert(next)
        })
        .collect();
    let bins = bin_values(values, n_bins);
    let mut table = vec![vec![0usize; codes.len()]; n_bins];
    for (&b, &c) in bins.iter().zip(&label_codes) {
        table[b][c] += 1;
    }
    Ok(mutual_information_from_table(&table))
}

pub fn relevance_mi(dataset: &Dataset, attribute: &str, n_bins: usize) -> Result<RelevanceScores> {
    let labels = dataset.labels(attribute)?;
    let scores = (0..dataset.n_features())
        .into_par_iter()
        .map(|j| mutual_information(&dataset.column(j), &labels.codes, n_bins))
        .collect::<Result<Vec<_>>>()?;
    Ok(RelevanceScores {
        attribute: attribute.to_string(),
        method: RelevanceMethod::MutualInformation,
        scores,
    })
}

pub fn relevance_model(model: &ClassifierModel, attribute: &str) -> Result<RelevanceScores> {
    if model.attribute != attribute {
        return Err(Error::ModelAttributeMismatch {
            model: model.attribute.clone(),
            requested: attribute.to_string(),
        });
    }
    if model.importances.len() != model.n_features
        || model.importances.iter().any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(Error::ModelLacksImportances(attribute.to_string()));
    }
    Ok(RelevanceScores {
        attribute: attribute.to_string(),
        method: RelevanceMethod::GiniImportance,
        scores: model.importances.clone(),
    })
}

/// Retention ratios for [`select_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Fraction of top features kept for the attribute of interest.
    pub retention_interest: f64,
    /// Fraction of top features kept per additional attribute.
    pub retention_additional: BTreeMap<String, f64>,
    /// Fraction of top sensitive-relevant features that are rejected.
    pub retention_sensitive: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            retention_interest: 0.01,
            retention_additional: BTreeMap::new(),
            retention_sensitive: 0.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| (0.0..=1.0).contains(&r);
        if !ok(self.retention_interest) {
            return Err(Error::InvalidArgument(format!(
                "retention_interest {} outside [0, 1]",
                self.retention_interest
            )));
        }
        if !ok(self.retention_sensitive) {
            return Err(Error::InvalidArgument(format!(
                "retention_sensitive {} outside [0, 1]",
                self.retention_sensitive
            )));
        }
        for (attr, &r) in &self.retention_additional {
            if !ok(r) {
                return Err(Error::InvalidArgument(format!(
                    "retention for `{attr}` ({r}) outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Number of features kept for a ratio: `ceil(ratio * d)`.
///
/// The product is nudged down slightly first so that ratios like 0.1 * 30,
/// which evaluates to 3.0000000000000004, still give 3.
pub fn retained_count(ratio: f64, d: usize) -> usize {
    ((ratio * d as f64 - 1e-9).ceil().max(0.0) as usize).min(d)
}

/// Indicator vector over feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "MaskRepr", try_from = "MaskRepr")]
pub struct SelectionMask {
    pub included: Vec<bool>,
    pub selected_count: usize,
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    length: usize,
    selected_indices: Vec<usize>,
}

impl From<SelectionMask> for MaskRepr {
    fn from(m: SelectionMask) -> Self {
        MaskRepr {
            length: m.included.len(),
            selected_indices: m.selected_indices(),
        }
    }
}

impl TryFrom<MaskRepr> for SelectionMask {
    type Error = String;

    fn try_from(r: MaskRepr) -> Result<Self, String> {
        if let Some(&bad) = r.selected_indices.iter().find(|&&i| i >= r.length) {
            return Err(format!("selected index {bad} >= length {}", r.length));
        }
        Ok(SelectionMask::from_indices(r.length, &r.selected_indices))
    }
}

impl SelectionMask {
    pub fn from_indices(length: usize, indices: &[usize]) -> Self {
        let mut included = vec![false; length];
        for &i in indices {
            included[i] = true;
        }
        Self::from_bools(included)
    }

    pub fn from_bools(included: Vec<bool>) -> Self {
        let selected_count = included.iter().filter(|&&b| b).count();
        SelectionMask {
            included,
            selected_count,
        }
    }

    pub fn all(length: usize) -> Self {
        Self::from_bools(vec![true; length])
    }

    pub fn none(length: usize) -> Self {
        Self::from_bools(vec![false; length])
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.included
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub mask: SelectionMask,
    /// Features removed because they rank high for the sensitive attribute.
    pub rejected: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn select_features(
    interest: &RelevanceScores,
    additional: &[RelevanceScores],
    sensitive: Option<&RelevanceScores>,
    cfg: &SelectionConfig,
) -> Result<Selection> {
    cfg.validate()?;
    let d = interest.scores.len();
    for other in additional.iter().chain(sensitive) {
        if other.scores.len() != d {
            return Err(Error::LengthMismatch {
                left: d,
                right: other.scores.len(),
            });
        }
    }
    let mut warnings = Vec::new();
    let mut included = vec![false; d];
    for j in interest.top_k(retained_count(cfg.retention_interest, d)) {
        included[j] = true;
    }
    for scores in additional {
        let ratio = match cfg.retention_additional.get(&scores.attribute) {
            Some(&r) => r,
            None => {
                warnings.push(format!(
                    "no retention ratio for additional attribute `{}`; using 0",
                    scores.attribute
                ));
                0.0
            }
        };
        for j in scores.top_k(retained_count(ratio, d)) {
            included[j] = true;
        }
    }
    let mut rejected = Vec::new();
    if let Some(sensitive) = sensitive {
        let before = included.iter().filter(|&&b| b).count();
        rejected = sensitive.top_k(retained_count(cfg.retention_sensitive, d));
        for &j in &rejected {
            included[j] = false;
        }
        if before > 0 && !included.contains(&true) {
            warnings.push(
                "sensitive rejection removed every selected feature; the transform is a plain mean"
                    .into(),
            );
        }
    }
    Ok(Selection {
        mask: SelectionMask::from_bools(included),
        rejected,
        warnings,
    })
}
