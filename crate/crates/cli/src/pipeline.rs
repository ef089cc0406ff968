//! End-to-end run: data, models, relevance, selection, anonymization and
//! evaluation on the held-out records.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anonymix::data::{self, Dataset, SchemaSpec};
use anonymix::forest::{self, ClassifierModel, ForestConfig};
use anonymix::metrics::{self, EvaluationReport, Models, UtilityWeights};
use anonymix::relevance::{self, RelevanceScores, Selection, SelectionConfig, SelectionMask};
use anonymix::transform::{self, AnonymizationParams, Anonymized};
use serde::{Deserialize, Serialize};

use crate::config::{digest_json, DataSource, RelevanceConfig, RelevanceSource, RunConfig};
use crate::error::{CliError, Result};

pub fn load_dataset(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Synthetic { synth } => Ok(data::generate_synthetic(synth)?),
        DataSource::Csv { path, schema } => {
            let spec = SchemaSpec::from_json_file(schema)?;
            Ok(data::load_csv(path, &spec)?)
        }
    }
}

/// Load a CSV laid out like `like` (same schema).
pub fn load_like(path: &Path, like: &Dataset) -> Result<Dataset> {
    let spec = SchemaSpec::from(like.schema().clone());
    Ok(data::load_csv(path, &spec)?)
}

#[derive(Debug, Clone)]
pub struct Relevance {
    pub interest: RelevanceScores,
    pub additional: Vec<RelevanceScores>,
    pub sensitive: Option<RelevanceScores>,
}

impl Relevance {
    pub fn select(&self, cfg: &SelectionConfig) -> Result<Selection> {
        Ok(relevance::select_features(
            &self.interest,
            &self.additional,
            self.sensitive.as_ref(),
            cfg,
        )?)
    }
}

/// Everything that does not depend on the anonymization parameters.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub train: Dataset,
    /// Indices into `dataset` of the evaluation records.
    pub test_indices: Vec<usize>,
    pub models: Models,
    pub relevance: Relevance,
    pub warnings: Vec<String>,
}

pub fn train_split(dataset: &Dataset, cfg: &RunConfig) -> Result<(Dataset, Vec<usize>, Vec<String>)> {
    let split = data::split(dataset, cfg.split.train_fraction, cfg.split.seed)?;
    let mut warnings = Vec::new();
    if !split.stratified {
        warnings.push("split could not be stratified; used a plain random split".into());
    }
    let index = dataset.id_index();
    let test = split
        .test
        .records()
        .iter()
        .map(|r| index[r.id.as_str()])
        .collect();
    Ok((split.train, test, warnings))
}

fn model_for(
    attribute: &str,
    train: &Dataset,
    forest_cfg: &ForestConfig,
    paths: &BTreeMap<String, std::path::PathBuf>,
) -> Result<ClassifierModel> {
    match paths.get(attribute) {
        Some(path) => {
            let model = ClassifierModel::from_json_file(path)?;
            if model.attribute != attribute {
                return Err(anonymix::Error::ModelAttributeMismatch {
                    model: model.attribute,
                    requested: attribute.to_string(),
                }
                .into());
            }
            Ok(model)
        }
        None => Ok(forest::train(train, attribute, forest_cfg)?),
    }
}

pub fn build_models(train: &Dataset, cfg: &RunConfig) -> Result<Models> {
    let schema = train.schema();
    let get = |attr: &str| model_for(attr, train, &cfg.forest, &cfg.models);
    Ok(Models {
        interest: get(&schema.attribute_of_interest)?,
        additional: schema
            .additional_attributes
            .iter()
            .map(|a| Ok((a.clone(), get(a)?)))
            .collect::<Result<_>>()?,
        sensitive: schema
            .sensitive_attributes
            .iter()
            .map(|a| Ok((a.clone(), get(a)?)))
            .collect::<Result<_>>()?,
    })
}

pub fn compute_relevance(train: &Dataset, models: &Models, cfg: &RelevanceConfig) -> Result<Relevance> {
    let schema = train.schema();
    let score = |attr: &str, model: &ClassifierModel| -> Result<RelevanceScores> {
        Ok(match cfg.method {
            RelevanceSource::Model => relevance::relevance_model(model, attr)?,
            RelevanceSource::MutualInfo => relevance::relevance_mi(train, attr, cfg.mi_bins)?,
        })
    };
    let sensitive = match schema.primary_sensitive() {
        Some(attr) => Some(score(attr, &models.sensitive[attr])?),
        None => None,
    };
    Ok(Relevance {
        interest: score(&schema.attribute_of_interest, &models.interest)?,
        additional: schema
            .additional_attributes
            .iter()
            .map(|a| score(a, &models.additional[a]))
            .collect::<Result<_>>()?,
        sensitive,
    })
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.data)?;
    prepare_with(dataset, cfg)
}

pub fn prepare_with(dataset: Dataset, cfg: &RunConfig) -> Result<Prepared> {
    let degenerate = dataset.degenerate_attributes();
    if !degenerate.is_empty() {
        return Err(anonymix::Error::SingleClass(degenerate.join(", ")).into());
    }
    let (train, test_indices, warnings) = train_split(&dataset, cfg)?;
    let models = build_models(&train, cfg)?;
    let relevance = compute_relevance(&train, &models, &cfg.relevance)?;
    Ok(Prepared {
        dataset,
        train,
        test_indices,
        models,
        relevance,
        warnings,
    })
}

/// Weights with alpha = 1 for every additional attribute the config does
/// not mention.
pub fn effective_weights(dataset: &Dataset, weights: &UtilityWeights) -> (UtilityWeights, Vec<String>) {
    let mut out = weights.clone();
    let mut warnings = Vec::new();
    for attr in &dataset.schema().additional_attributes {
        if !out.alphas.contains_key(attr) {
            out.alphas.insert(attr.clone(), 1.0);
            warnings.push(format!("no utility weight for `{attr}`; using 1"));
        }
    }
    (out, warnings)
}

/// Evaluate the held-out records of an anonymized copy of `prepared.dataset`.
pub fn evaluate_run(
    prepared: &Prepared,
    anonymized: &Dataset,
    cfg: &RunConfig,
) -> Result<EvaluationReport> {
    if anonymized.len() != prepared.dataset.len() {
        return Err(anonymix::Error::MisalignedDatasets(format!(
            "{} anonymized records for {} originals",
            anonymized.len(),
            prepared.dataset.len()
        ))
        .into());
    }
    // Held-out indices are positional, so records must line up one to one.
    for (a, o) in anonymized.records().iter().zip(prepared.dataset.records()) {
        if a.id != o.id || a.labels != o.labels {
            return Err(anonymix::Error::MisalignedDatasets(format!(
                "record `{}` does not match original `{}`",
                a.id, o.id
            ))
            .into());
        }
    }
    let (weights, mut warnings) = effective_weights(&prepared.dataset, &cfg.weights);
    let held_out = anonymized.subset(&prepared.test_indices);
    let mut report = metrics::evaluate(
        &prepared.dataset,
        &held_out,
        &prepared.models,
        &weights,
        &cfg.evaluation,
    )?;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    report.params_digest = cfg.digest();
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub config_digest: String,
    pub params: AnonymizationParams,
    pub selection: SelectionConfig,
    pub relevance: RelevanceConfig,
    pub mask: SelectionMask,
    pub mask_digest: String,
    pub rejected: Vec<usize>,
    pub clamped_records: usize,
    pub warnings: Vec<String>,
    pub timings_ms: BTreeMap<String, u128>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub selection: Selection,
    pub anonymized: Anonymized,
    pub report: EvaluationReport,
    pub sidecar: Sidecar,
}

/// Anonymize the whole dataset with `cfg.params` and `cfg.selection`, then
/// evaluate the held-out records.
pub fn run(prepared: &Prepared, cfg: &RunConfig) -> Result<RunOutcome> {
    let started = Instant::now();
    let selection = prepared.relevance.select(&cfg.selection)?;
    let selected = started.elapsed();
    let anonymized = transform::anonymize(&prepared.dataset, &cfg.params, &selection.mask)?;
    let transformed = started.elapsed();
    let mut report = evaluate_run(prepared, &anonymized.dataset, cfg)?;
    let evaluated = started.elapsed();

    let mut warnings = prepared.warnings.clone();
    warnings.extend(selection.warnings.iter().cloned());
    warnings.extend(anonymized.warnings.iter().cloned());
    let mut all = warnings.clone();
    all.append(&mut report.warnings);
    report.warnings = all;

    let sidecar = Sidecar {
        config_digest: cfg.digest(),
        params: cfg.params,
        selection: cfg.selection.clone(),
        relevance: cfg.relevance.clone(),
        mask: selection.mask.clone(),
        mask_digest: digest_json(&selection.mask),
        rejected: selection.rejected.clone(),
        clamped_records: anonymized.clamped_records,
        warnings,
        timings_ms: [
            ("selection", selected.as_millis()),
            ("anonymize", (transformed - selected).as_millis()),
            ("evaluate", (evaluated - transformed).as_millis()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
    };
    Ok(RunOutcome {
        selection,
        anonymized,
        report,
        sidecar,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    create_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}

pub fn write_topk_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "hit_rate", "random_baseline"])?;
    for p in &report.topk_curve {
        w.write_record([
            p.k.to_string(),
            p.hit_rate.to_string(),
            p.random_baseline.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
