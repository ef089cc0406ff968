//! Parameter sweeps over a base run configuration.
//!
//! Cells are the cartesian product of the axes in the fixed order
//! t, g, w, r_p, r_q, r_s; every cell is repeated `repetitions` times and
//! the repetition index varies fastest. Each finished (cell, repetition)
//! report is cached under its config digest, so an interrupted sweep
//! resumes where it stopped and still writes the same CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anonymix::metrics::EvaluationReport;
use anonymix::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DataSource, RunConfig, SweepGrid};
use crate::error::{CliError, Result};
use crate::pipeline::{self, create_parent};

/// One point of the grid; `None` leaves the base value in place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Cell {
    pub t: Option<f64>,
    pub g: Option<usize>,
    pub w: Option<f64>,
    pub r_p: Option<f64>,
    pub r_q: Option<f64>,
    pub r_s: Option<f64>,
}

fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

impl SweepGrid {
    /// Cells in row order (lexicographic over the axes).
    pub fn cells(&self) -> Vec<Cell> {
        let a = &self.axes;
        let mut cells = Vec::new();
        for t in axis(&a.t) {
            for g in axis(&a.g) {
                for w in axis(&a.w) {
                    for r_p in axis(&a.r_p) {
                        for r_q in axis(&a.r_q) {
                            for r_s in axis(&a.r_s) {
                                cells.push(Cell { t, g, w, r_p, r_q, r_s });
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn run_count(&self) -> usize {
        let a = &self.axes;
        [a.t.len(), a.g.len(), a.w.len(), a.r_p.len(), a.r_q.len(), a.r_s.len()]
            .iter()
            .map(|&n| n.max(1))
            .product::<usize>()
            * self.repetitions
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(CliError::Config("repetitions must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let runs = self.run_count();
        if runs > self.max_cells {
            return Err(CliError::GridTooLarge {
                cells: runs,
                cap: self.max_cells,
            });
        }
        self.base.validate()?;
        let a = &self.axes;
        let ratios = [("t", &a.t), ("r_p", &a.r_p), ("r_q", &a.r_q), ("r_s", &a.r_s)];
        for (name, values) in ratios {
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CliError::Config(format!("axis {name}: {v} outside [0, 1]")));
            }
        }
        if a.g.contains(&0) {
            return Err(CliError::Config("axis g: set size must be at least 1".into()));
        }
        if let Some(w) = a.w.iter().find(|w| !(w.is_finite() && **w >= 1.0)) {
            return Err(CliError::Config(format!("axis w: weight {w} must be >= 1")));
        }
        Ok(())
    }

    /// Base config with the data, split and forest seeds of repetition `rep`.
    /// Repetition 0 keeps the base seeds.
    pub fn repetition_base(&self, rep: usize) -> RunConfig {
        let mut cfg = self.base.clone();
        if rep > 0 {
            let key = [rep as u64];
            cfg.split.seed = derive_seed(cfg.split.seed, &key);
            cfg.forest.seed = derive_seed(cfg.forest.seed, &key);
            if let DataSource::Synthetic { synth } = &mut cfg.data {
                synth.seed = derive_seed(synth.seed, &key);
            }
        }
        cfg
    }

    /// Config of one run, except that r_q is not yet spread over the
    /// additional attributes. The anonymization seed depends on the cell
    /// index and the repetition.
    pub fn cell_run(&self, cell: &Cell, index: usize, rep: usize) -> RunConfig {
        let mut cfg = self.repetition_base(rep);
        cfg.params.seed = derive_seed(self.base.params.seed, &[index as u64, rep as u64]);
        if let Some(t) = cell.t {
            cfg.params.purity = t;
        }
        if let Some(g) = cell.g {
            cfg.params.set_size = g;
        }
        if let Some(w) = cell.w {
            cfg.params.weight = w;
        }
        if let Some(r) = cell.r_p {
            cfg.selection.retention_interest = r;
        }
        if let Some(r) = cell.r_s {
            cfg.selection.retention_sensitive = r;
        }
        cfg.outputs = Default::default();
        cfg
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| {
            let mut name = self.output.as_os_str().to_owned();
            name.push(".cache");
            PathBuf::from(name)
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Stop after this many runs that were not already cached; the CSV is
    /// only written once every run is done.
    pub max_new_runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: usize,
    pub computed: usize,
    pub cached: usize,
    /// False when `max_new_runs` cut the sweep short.
    pub complete: bool,
}

struct Job {
    row: usize,
    cell: Cell,
    index: usize,
    rep: usize,
}

fn cache_path(dir: &Path, digest: &str) -> PathBuf {
    dir.join(format!("{digest}.json"))
}

fn read_cached(path: &Path) -> Option<EvaluationReport> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Run the grid and write the long-form CSV.
pub fn run_sweep(grid: &SweepGrid, options: &SweepOptions) -> Result<SweepSummary> {
    grid.validate()?;
    match grid.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(|| sweep_inner(grid, options)),
        None => sweep_inner(grid, options),
    }
}

fn sweep_inner(grid: &SweepGrid, options: &SweepOptions) -> Result<SweepSummary> {
    let cells = grid.cells();
    let cache = grid.cache_dir();
    fs::create_dir_all(&cache).map_err(|e| CliError::io(&cache, e))?;

    let jobs: Vec<Job> = cells
        .iter()
        .enumerate()
        .flat_map(|(index, cell)| {
            (0..grid.repetitions).map(move |rep| (index, *cell, rep))
        })
        .enumerate()
        .map(|(row, (index, cell, rep))| Job { row, cell, index, rep })
        .collect();

    // Digests need r_q spread over the additional attributes, so the
    // schema is read once per repetition.
    let mut reports: Vec<Option<EvaluationReport>> = vec![None; jobs.len()];
    let mut computed = 0;
    let mut cached = 0;
    let mut budget = options.max_new_runs;
    for rep in 0..grid.repetitions {
        let rep_jobs: Vec<&Job> = jobs.iter().filter(|j| j.rep == rep).collect();
        let schema_only = pipeline::load_dataset(&grid.repetition_base(rep).data)?;
        let additional = schema_only.schema().additional_attributes.clone();
        drop(schema_only);
        let configs: Vec<RunConfig> = rep_jobs
            .iter()
            .map(|j| {
                let mut cfg = grid.cell_run(&j.cell, j.index, j.rep);
                if let Some(r) = j.cell.r_q {
                    for attr in &additional {
                        cfg.selection.retention_additional.insert(attr.clone(), r);
                    }
                }
                cfg
            })
            .collect();
        let mut todo = Vec::new();
        for (job, cfg) in rep_jobs.iter().zip(configs) {
            match read_cached(&cache_path(&cache, &cfg.digest())) {
                Some(report) => {
                    reports[job.row] = Some(report);
                    cached += 1;
                }
                None => todo.push((job, cfg)),
            }
        }
        if let Some(left) = budget {
            todo.truncate(left);
            budget = Some(left - todo.len());
        }
        if todo.is_empty() {
            continue;
        }
        let prepared = pipeline::prepare(&grid.repetition_base(rep))?;
        let done: Vec<(usize, EvaluationReport)> = todo
            .par_iter()
            .map(|(job, cfg)| {
                let outcome = pipeline::run(&prepared, cfg)?;
                pipeline::write_json(&cache_path(&cache, &cfg.digest()), &outcome.report)?;
                Ok((job.row, outcome.report))
            })
            .collect::<Result<_>>()?;
        computed += done.len();
        for (row, report) in done {
            reports[row] = Some(report);
        }
    }

    let complete = reports.iter().all(Option::is_some);
    if complete {
        let reports: Vec<EvaluationReport> = reports.into_iter().flatten().collect();
        write_csv(&grid.output, grid, &jobs, &reports)?;
    }
    Ok(SweepSummary {
        rows: jobs.len(),
        computed,
        cached,
        complete,
    })
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, grid: &SweepGrid, jobs: &[Job], reports: &[EvaluationReport]) -> Result<()> {
    let additional: BTreeSet<&String> = reports
        .iter()
        .flat_map(|r| r.accuracy_additional.keys())
        .collect();
    let sensitive: BTreeSet<&String> = reports.iter().flat_map(|r| r.mixture.keys()).collect();

    let mut header: Vec<String> = ["cell", "repetition", "t", "g", "w", "r_p", "r_q", "r_s", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.push("accuracy_interest".into());
    header.extend(additional.iter().map(|a| format!("accuracy_{a}")));
    header.push("utility".into());
    header.extend(sensitive.iter().map(|s| format!("mixture_{s}")));
    header.extend(["mean_kl_nats", "original_kl_nats", "config_digest"].map(String::from));

    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for (job, report) in jobs.iter().zip(reports) {
        let cfg = grid.cell_run(&job.cell, job.index, job.rep);
        let r_q = job.cell.r_q;
        let mut row = vec![
            job.index.to_string(),
            job.rep.to_string(),
            cfg.params.purity.to_string(),
            cfg.params.set_size.to_string(),
            cfg.params.weight.to_string(),
            cfg.selection.retention_interest.to_string(),
            fmt_opt(r_q),
            cfg.selection.retention_sensitive.to_string(),
            cfg.params.seed.to_string(),
            report.accuracy_interest.to_string(),
        ];
        row.extend(additional.iter().map(|a| fmt_opt(report.accuracy_additional.get(*a))));
        row.push(report.utility.to_string());
        row.extend(sensitive.iter().map(|s| fmt_opt(report.mixture.get(*s))));
        row.push(fmt_opt(report.mean_kl_nats));
        row.push(fmt_opt(report.original_kl_nats));
        row.push(report.params_digest.clone());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Rows of a sweep CSV keyed by column name, for tests and tooling.
pub fn read_rows(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(header.iter().map(String::from).zip(rec.iter().map(String::from)).collect())
        })
        .collect()
}
