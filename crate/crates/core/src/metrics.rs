//! Utility, mixture, re-identification and KL metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{self, ClassifierModel};

/// Probabilities are clipped to this floor before taking logarithms.
pub const PROBA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityWeights {
    pub alphas: BTreeMap<String, f64>,
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<()> {
        match self.alphas.iter().find(|(_, a)| !(a.is_finite() && **a >= 0.0)) {
            Some((attr, a)) => Err(Error::InvalidArgument(format!(
                "utility weight for `{attr}` must be finite and >= 0, got {a}"
            ))),
            None => Ok(()),
        }
    }
}

/// `acc_p + sum alpha_i acc_q[i]`. Attributes without a weight count with
/// alpha = 0 and produce a warning.
pub fn utility(
    acc_p: f64,
    acc_q: &BTreeMap<String, f64>,
    weights: &UtilityWeights,
) -> (f64, Vec<String>) {
    let mut warnings = Vec::new();
    let mut u = acc_p;
    for (attr, acc) in acc_q {
        match weights.alphas.get(attr) {
            Some(alpha) => u += alpha * acc,
            None => warnings.push(format!("no utility weight for `{attr}`; using 0")),
        }
    }
    (u, warnings)
}

pub fn mixture(sensitive_accuracy: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&sensitive_accuracy) {
        return Err(Error::OutOfRange(sensitive_accuracy));
    }
    Ok(1.0 - sensitive_accuracy)
}

/// Cosine distances from `query` to every gallery vector.
struct Gallery<'a> {
    vectors: Vec<&'a [f64]>,
    norms: Vec<f64>,
}

impl<'a> Gallery<'a> {
    fn new(originals: &'a Dataset) -> Result<Self> {
        if originals.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let vectors: Vec<&[f64]> = originals.records().iter().map(|r| &r.features[..]).collect();
        let norms = vectors.iter().map(|v| norm(v)).collect::<Vec<_>>();
        if let Some(i) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::ZeroNormVector(originals.records()[i].id.clone()));
        }
        Ok(Gallery { vectors, norms })
    }

    fn distances(&self, query: &[f64], query_norm: f64) -> Vec<f64> {
        self.vectors
            .iter()
            .zip(&self.norms)
            .map(|(v, n)| 1.0 - dot(query, v) / (query_norm * n))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_queries(anonymized: &Dataset, originals: &Dataset) -> Result<Vec<f64>> {
    if anonymized.n_features() != originals.n_features() {
        return Err(Error::DimensionMismatch {
            expected: originals.n_features(),
            found: anonymized.n_features(),
        });
    }
    let norms: Vec<f64> = anonymized.records().iter().map(|r| norm(&r.features)).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroNormVector(anonymized.records()[i].id.clone()));
    }
    Ok(norms)
}

/// For every anonymized record, all original record indices ordered by
/// increasing cosine distance; ties keep the original order.
pub fn reidentify_cosine(anonymized: &Dataset, originals: &Dataset) -> Result<Vec<Vec<usize>>> {
    let gallery = Gallery::new(originals)?;
    let query_norms = check_queries(anonymized, originals)?;
    Ok(anonymized
        .records()
        .par_iter()
        .zip(&query_norms)
        .map(|(r, &qn)| {
            let dist = gallery.distances(&r.features, qn);
            let mut order: Vec<usize> = (0..dist.len()).collect();
            order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            order
        })
        .collect())
}

/// 1-based rank of `truth[i]` among the cosine candidates of anonymized
/// record `i`, with the same tie rule as [`reidentify_cosine`].
pub fn cosine_true_ranks(
    anonymized: &Dataset,
    originals: &Dataset,
    truth: &[usize],
) -> Result<Vec<usize>> {
    if truth.len() != anonymized.len() {
        return Err(Error::LengthMismatch {
            left: anonymized.len(),
            right: truth.len(),
        });
    }
    if let Some(&t) = truth.iter().find(|&&t| t >= originals.len()) {
        return Err(Error::InvalidArgument(format!(
            "true index {t} out of range for {} originals",
            originals.len()
        )));
    }
    let gallery = Gallery::new(originals)?;
    let query_norms = check_queries(anonymized, originals)?;
    Ok(anonymized
        .records()
        .par_iter()
        .zip(&query_norms)
        .zip(truth)
        .map(|((r, &qn), &t)| {
            let dist = gallery.distances(&r.features, qn);
            let own = dist[t];
            1 + dist
                .iter()
                .enumerate()
                .filter(|&(j, &d)| d < own || (d == own && j < t))
                .count()
        })
        .collect())
}

/// Fraction of records whose true index is among their first `k` candidates.
pub fn topk_hit_rate(ranked: &[Vec<usize>], truth: &[usize], k: usize) -> Result<f64> {
    if ranked.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: ranked.len(),
            right: truth.len(),
        });
    }
    if ranked.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = ranked[0].len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let hits = ranked
        .iter()
        .zip(truth)
        .filter(|(r, t)| r[..k].contains(t))
        .count();
    Ok(hits as f64 / ranked.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopkPoint {
    pub k: usize,
    pub hit_rate: f64,
    pub random_baseline: f64,
}

/// Top-k curve from 1-based true ranks over a gallery of `n` candidates.
pub fn topk_curve(ranks: &[usize], n: usize, ks: &[usize]) -> Result<Vec<TopkPoint>> {
    if ranks.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ks.iter()
        .map(|&k| {
            if k == 0 || k > n {
                return Err(Error::KOutOfRange { k, n });
            }
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            Ok(TopkPoint {
                k,
                hit_rate: hits as f64 / ranks.len() as f64,
                random_baseline: k as f64 / n as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(predicted || uniform)`.
    #[default]
    PredictedToUniform,
    /// `KL(uniform || predicted)`.
    UniformToPredicted,
}

pub fn kl_from_uniform(proba: &[f64]) -> Result<f64> {
    kl_uniform(proba, KlDirection::PredictedToUniform)
}

pub fn kl_uniform(proba: &[f64], direction: KlDirection) -> Result<f64> {
    if proba.is_empty() {
        return Err(Error::NotADistribution("empty vector".into()));
    }
    if let Some(p) = proba.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::NotADistribution(format!("entry {p}")));
    }
    let sum: f64 = proba.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::NotADistribution(format!("entries sum to {sum}")));
    }
    let n = proba.len() as f64;
    let kl: f64 = match direction {
        KlDirection::PredictedToUniform => proba
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * (p.max(PROBA_FLOOR) * n).ln())
            .sum(),
        KlDirection::UniformToPredicted => proba
            .iter()
            .map(|&p| -(p.max(PROBA_FLOOR) * n).ln() / n)
            .sum(),
    };
    Ok(kl.max(0.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    /// Nearest original record by cosine distance; every record is its
    /// own identity.
    CosineMatch,
    /// The trained sensitive-attribute classifiers.
    #[default]
    ClassifierAttack,
}

/// Recognition models, all trained on original data.
#[derive(Debug, Clone)]
pub struct Models {
    pub interest: ClassifierModel,
    pub additional: BTreeMap<String, ClassifierModel>,
    pub sensitive: BTreeMap<String, ClassifierModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationOptions {
    pub attack: Attack,
    /// Cut-offs of the top-k curve; the gallery size is always appended.
    pub topk: Vec<usize>,
    pub kl_direction: KlDirection,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        EvaluationOptions {
            attack: Attack::ClassifierAttack,
            topk: vec![1, 5, 10, 20, 50, 100],
            kl_direction: KlDirection::PredictedToUniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub attack: Attack,
    pub records_evaluated: usize,
    pub gallery_size: usize,
    pub accuracy_interest: f64,
    pub accuracy_additional: BTreeMap<String, f64>,
    pub utility: f64,
    pub utility_weights: UtilityWeights,
    pub sensitive_accuracy: BTreeMap<String, f64>,
    pub mixture: BTreeMap<String, f64>,
    pub primary_sensitive: Option<String>,
    pub topk_curve: Vec<TopkPoint>,
    pub kl_direction: KlDirection,
    /// Mean per-record KL of the primary sensitive classifier on the
    /// anonymized records; only computed for the classifier attack.
    pub mean_kl_nats: Option<f64>,
    /// The same quantity on the original versions of those records.
    pub original_kl_nats: Option<f64>,
    pub warnings: Vec<String>,
    pub params_digest: String,
}

/// Key under which the cosine attack reports its rank-1 accuracy.
pub fn record_identity_key(dataset: &Dataset) -> String {
    dataset
        .schema()
        .id_column
        .clone()
        .unwrap_or_else(|| "id".to_string())
}

fn model_for<'a>(attr: &str, map: &'a BTreeMap<String, ClassifierModel>) -> Result<&'a ClassifierModel> {
    map.get(attr)
        .ok_or_else(|| Error::UntrainedModel(attr.to_string()))
}

fn mean_kl(model: &ClassifierModel, data: &Dataset, direction: KlDirection) -> Result<f64> {
    let total = data
        .records()
        .par_iter()
        .map(|r| kl_uniform(&model.predict_proba(&r.features)?, direction))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<f64>();
    Ok(total / data.len() as f64)
}

/// Evaluate `anonymized` records against `original`.
///
/// Every anonymized record must have an original with the same id and
/// labels. The original dataset doubles as the cosine attacker's gallery,
/// so it may hold more records than were anonymized-and-evaluated.
pub fn evaluate(
    original: &Dataset,
    anonymized: &Dataset,
    models: &Models,
    weights: &UtilityWeights,
    options: &EvaluationOptions,
) -> Result<EvaluationReport> {
    weights.validate()?;
    if anonymized.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if anonymized.schema() != original.schema() {
        return Err(Error::MisalignedDatasets("schemas differ".into()));
    }
    let index = original.id_index();
    let truth = anonymized
        .records()
        .iter()
        .map(|r| match index.get(r.id.as_str()) {
            Some(&i) if original.records()[i].labels == r.labels => Ok(i),
            Some(_) => Err(Error::MisalignedDatasets(format!(
                "labels of `{}` differ",
                r.id
            ))),
            None => Err(Error::MisalignedDatasets(format!(
                "`{}` has no original record",
                r.id
            ))),
        })
        .collect::<Result<Vec<_>>>()?;

    let schema = anonymized.schema();
    if models.interest.attribute != schema.attribute_of_interest {
        return Err(Error::UntrainedModel(schema.attribute_of_interest.clone()));
    }
    let accuracy_interest = forest::accuracy(&models.interest, anonymized)?;
    let mut accuracy_additional = BTreeMap::new();
    for attr in &schema.additional_attributes {
        let model = model_for(attr, &models.additional)?;
        accuracy_additional.insert(attr.clone(), forest::accuracy(model, anonymized)?);
    }
    let (utility, mut warnings) = utility(accuracy_interest, &accuracy_additional, weights);

    let ranks = cosine_true_ranks(anonymized, original, &truth)?;
    let n = original.len();
    let mut ks: Vec<usize> = options.topk.iter().copied().filter(|&k| k >= 1 && k < n).collect();
    ks.push(n);
    ks.sort_unstable();
    ks.dedup();
    let topk_curve = topk_curve(&ranks, n, &ks)?;

    let mut sensitive_accuracy = BTreeMap::new();
    let mut mean_kl_nats = None;
    let mut original_kl_nats = None;
    let primary_sensitive;
    match options.attack {
        Attack::CosineMatch => {
            let key = record_identity_key(anonymized);
            let rank1 = ranks.iter().filter(|&&r| r == 1).count() as f64 / ranks.len() as f64;
            sensitive_accuracy.insert(key.clone(), rank1);
            primary_sensitive = Some(key);
        }
        Attack::ClassifierAttack => {
            for attr in &schema.sensitive_attributes {
                let model = model_for(attr, &models.sensitive)?;
                sensitive_accuracy.insert(attr.clone(), forest::accuracy(model, anonymized)?);
            }
            primary_sensitive = schema.primary_sensitive().map(str::to_string);
            if let Some(primary) = &primary_sensitive {
                let model = model_for(primary, &models.sensitive)?;
                mean_kl_nats = Some(mean_kl(model, anonymized, options.kl_direction)?);
                let originals = original.subset(&truth);
                original_kl_nats = Some(mean_kl(model, &originals, options.kl_direction)?);
            } else {
                warnings.push("schema has no sensitive attribute; no KL computed".into());
            }
        }
    }
    let mixture = sensitive_accuracy
        .iter()
        .map(|(k, &a)| Ok((k.clone(), mixture(a)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(EvaluationReport {
        attack: options.attack,
        records_evaluated: anonymized.len(),
        gallery_size: n,
        accuracy_interest,
        accuracy_additional,
        utility,
        utility_weights: weights.clone(),
        sensitive_accuracy,
        mixture,
        primary_sensitive,
        topk_curve,
        kl_direction: options.kl_direction,
        mean_kl_nats,
        original_kl_nats,
        warnings,
        params_digest: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_examples() {
        let none = BTreeMap::new();
        assert_eq!(utility(0.8, &none, &UtilityWeights::default()).0, 0.8);
        let acc: BTreeMap<_, _> = [("m".to_string(), 0.9)].into_iter().collect();
        let w = UtilityWeights {
            alphas: [("m".to_string(), 1.0)].into_iter().collect(),
        };
        assert!((utility(0.8, &acc, &w).0 - 1.7).abs() < 1e-12);
        let acc: BTreeMap<_, _> = [("mouth".to_string(), 0.75)].into_iter().collect();
        let w = UtilityWeights {
            alphas: [("mouth".to_string(), 0.5)].into_iter().collect(),
        };
        assert!((utility(0.788, &acc, &w).0 - 1.163).abs() < 1e-12);
        let (u, warn) = utility(0.5, &acc, &UtilityWeights::default());
        assert_eq!(u, 0.5);
        assert_eq!(warn.len(), 1);
    }

    #[test]
    fn mixture_examples() {
        assert_eq!(mixture(0.0).unwrap(), 1.0);
        assert_eq!(mixture(1.0).unwrap(), 0.0);
        assert!((mixture(0.03).unwrap() - 0.97).abs() < 1e-15);
        assert!(matches!(mixture(1.2), Err(Error::OutOfRange(_))));
        assert!(mixture(f64::NAN).is_err());
    }

    #[test]
    fn kl_examples() {
        assert!(kl_from_uniform(&[0.25; 4]).unwrap().abs() < 1e-12);
        assert!((kl_from_uniform(&[0.0, 1.0, 0.0, 0.0]).unwrap() - 4f64.ln()).abs() < 1e-12);
        let v = kl_from_uniform(&[0.5, 0.25, 0.25, 0.0]).unwrap();
        assert!((v - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert!((v - 0.346574).abs() < 1e-6);
        assert!(matches!(kl_from_uniform(&[0.5, 0.4]), Err(Error::NotADistribution(_))));
        assert!(kl_from_uniform(&[1.5, -0.5]).is_err());
        assert!(kl_from_uniform(&[]).is_err());
        let reverse = kl_uniform(&[0.5, 0.5], KlDirection::UniformToPredicted).unwrap();
        assert!(reverse.abs() < 1e-12);
        // Zero entries are floored rather than sending the reverse KL to infinity.
        assert!(kl_uniform(&[1.0, 0.0], KlDirection::UniformToPredicted).unwrap().is_finite());
    }

    #[test]
    fn topk_errors() {
        let ranked = vec![vec![0, 1, 2]];
        assert!(matches!(topk_hit_rate(&ranked, &[2], 0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(topk_hit_rate(&ranked, &[2], 4), Err(Error::KOutOfRange { .. })));
        assert_eq!(topk_hit_rate(&ranked, &[2], 2).unwrap(), 0.0);
        assert_eq!(topk_hit_rate(&ranked, &[2], 3).unwrap(), 1.0);
    }
}
