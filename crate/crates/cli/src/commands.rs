//! Command-line parsing and the six subcommands.

use std::path::{Path, PathBuf};

use anonymix::data::{self, SchemaSpec, SynthConfig};
use anonymix::forest::{self, ForestConfig};
use anonymix::metrics;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::config::{self, RunConfig, SweepGrid};
use crate::error::{CliError, Result};
use crate::pipeline::{self, write_json, write_topk_csv, Relevance};
use crate::sweep::{self, SweepOptions};

#[derive(Debug, Parser)]
#[command(name = "anonymix", version, about = "Selective weighted-mean anonymization of feature vectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Override a config value, e.g. `--set params.set_size=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic benchmark as CSV plus a schema file.
    Synth {
        /// Synthetic-data config (JSON); defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the schema; defaults to `<out>.schema.json`.
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
    /// Train a random-forest classifier for one attribute.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        attribute: String,
        /// Forest config (JSON); defaults when absent.
        #[arg(long)]
        forest: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Share of records used for training; the rest give the reported accuracy.
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute relevance scores and the resulting selection mask.
    Relevance {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Anonymize a dataset; also evaluates when a report path is given.
    Anonymize {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Anonymized CSV; overrides `outputs.dataset`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run metadata; defaults to `<out>.sidecar.json`.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate an anonymized CSV against the original data.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        anonymized: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        topk_csv: Option<PathBuf>,
    },
    /// Run a parameter grid and write one CSV row per cell and repetition.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        workers: Option<usize>,
        /// Stop after this many uncached runs; rerun to resume.
        #[arg(long)]
        max_new_runs: Option<usize>,
    },
}

fn load_or_default<T: serde::de::DeserializeOwned>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    match path {
        Some(p) => config::load(p, overrides),
        None => {
            let mut doc = Value::Object(Default::default());
            for spec in overrides {
                config::apply_override(&mut doc, spec)?;
            }
            config::from_value(doc)
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn load_run(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let cfg: RunConfig = config::load(path, &overrides.set)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct RelevanceOutput<'a> {
    interest: &'a anonymix::relevance::RelevanceScores,
    additional: &'a [anonymix::relevance::RelevanceScores],
    sensitive: Option<&'a anonymix::relevance::RelevanceScores>,
    mask: &'a anonymix::relevance::SelectionMask,
    rejected: &'a [usize],
    warnings: &'a [String],
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            overrides,
            out,
            schema_out,
        } => {
            let cfg: SynthConfig = load_or_default(config.as_deref(), &overrides.set)?;
            let ds = data::generate_synthetic(&cfg)?;
            pipeline::create_parent(&out)?;
            data::save_csv(&ds, &out)?;
            let schema_path = schema_out.unwrap_or_else(|| with_suffix(&out, ".schema.json"));
            write_json(&schema_path, &SchemaSpec::from(ds.schema().clone()))?;
            println!("wrote {} records to {}", ds.len(), out.display());
        }
        Command::Train {
            data: data_path,
            schema,
            attribute,
            forest: forest_path,
            overrides,
            train_fraction,
            split_seed,
            out,
        } => {
            let cfg: ForestConfig = load_or_default(forest_path.as_deref(), &overrides.set)?;
            let spec = SchemaSpec::from_json_file(&schema)?;
            let ds = data::load_csv(&data_path, &spec)?;
            if !ds.schema().has_attribute(&attribute) {
                return Err(anonymix::Error::UnknownAttribute(attribute).into());
            }
            let split = data::split(&ds, train_fraction, split_seed)?;
            let model = forest::train(&split.train, &attribute, &cfg)?;
            pipeline::create_parent(&out)?;
            model.to_json_file(&out)?;
            let acc = forest::accuracy(&model, &split.test)?;
            println!("held-out accuracy for {attribute}: {acc:.4}");
        }
        Command::Relevance {
            config,
            overrides,
            out,
        } => {
            let cfg = load_run(&config, &overrides)?;
            let prepared = pipeline::prepare(&cfg)?;
            let Relevance {
                interest,
                additional,
                sensitive,
            } = &prepared.relevance;
            let selection = prepared.relevance.select(&cfg.selection)?;
            write_json(
                &out,
                &RelevanceOutput {
                    interest,
                    additional,
                    sensitive: sensitive.as_ref(),
                    mask: &selection.mask,
                    rejected: &selection.rejected,
                    warnings: &selection.warnings,
                },
            )?;
            println!(
                "selected {} of {} features",
                selection.mask.selected_count,
                selection.mask.len()
            );
        }
        Command::Anonymize {
            config,
            overrides,
            out,
            sidecar,
            report,
        } => {
            let mut cfg = load_run(&config, &overrides)?;
            let out = out
                .or(cfg.outputs.dataset.take())
                .ok_or_else(|| CliError::Config("no output path: pass --out or set outputs.dataset".into()))?;
            let sidecar = sidecar
                .or(cfg.outputs.sidecar.take())
                .unwrap_or_else(|| with_suffix(&out, ".sidecar.json"));
            let report_path = report.or(cfg.outputs.report.take());
            let prepared = pipeline::prepare(&cfg)?;
            let outcome = pipeline::run(&prepared, &cfg)?;
            pipeline::create_parent(&out)?;
            data::save_csv(&outcome.anonymized.dataset, &out)?;
            write_json(&sidecar, &outcome.sidecar)?;
            if let Some(path) = report_path {
                write_json(&path, &outcome.report)?;
            }
            if let Some(path) = &cfg.outputs.topk_csv {
                write_topk_csv(path, &outcome.report)?;
            }
            for w in &outcome.sidecar.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "anonymized {} records ({} features selected) into {}",
                outcome.anonymized.dataset.len(),
                outcome.selection.mask.selected_count,
                out.display()
            );
        }
        Command::Evaluate {
            config,
            overrides,
            anonymized,
            out,
            topk_csv,
        } => {
            let cfg = load_run(&config, &overrides)?;
            let prepared = pipeline::prepare(&cfg)?;
            let anon = pipeline::load_like(&anonymized, &prepared.dataset)?;
            let report = if anon.len() == prepared.dataset.len() {
                pipeline::evaluate_run(&prepared, &anon, &cfg)?
            } else {
                let (weights, mut warnings) = pipeline::effective_weights(&prepared.dataset, &cfg.weights);
                warnings.push(format!(
                    "{} records supplied for {} originals; evaluating all supplied records",
                    anon.len(),
                    prepared.dataset.len()
                ));
                let mut report = metrics::evaluate(&prepared.dataset, &anon, &prepared.models, &weights, &cfg.evaluation)?;
                warnings.append(&mut report.warnings);
                report.warnings = warnings;
                report.params_digest = cfg.digest();
                report
            };
            match out.or(cfg.outputs.report.clone()) {
                Some(path) => write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            if let Some(path) = topk_csv.or(cfg.outputs.topk_csv.clone()) {
                write_topk_csv(&path, &report)?;
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Sweep {
            grid,
            overrides,
            workers,
            max_new_runs,
        } => {
            let mut grid: SweepGrid = config::load(&grid, &overrides.set)?;
            if workers.is_some() {
                grid.workers = workers;
            }
            let summary = sweep::run_sweep(&grid, &SweepOptions { max_new_runs })?;
            if summary.complete {
                println!(
                    "wrote {} rows to {} ({} computed, {} cached)",
                    summary.rows,
                    grid.output.display(),
                    summary.computed,
                    summary.cached
                );
            } else {
                println!(
                    "stopped after {} new runs ({} of {} done); rerun to resume",
                    summary.computed,
                    summary.computed + summary.cached,
                    summary.rows
                );
            }
        }
    }
    Ok(())
}
