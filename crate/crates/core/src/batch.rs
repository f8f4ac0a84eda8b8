//! Batch experiments: instance manifests, replicated seeded runs per
//! (instance, variant) cell, and the aggregate tables built from them.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::acceptance::Variant;
use crate::driver::{replicate_seed, run_hh, RunConfig};
use crate::instance::{parse_toronto, InstanceError, ParseWarning, ProblemInstance, SourceFile};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("manifest lists no instances")]
    Empty,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: InstanceError },
}

/// One instance of a batch: `name crs stu k [slot_capacity]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub crs: PathBuf,
    pub stu: PathBuf,
    pub num_timeslots: usize,
    pub slot_capacity: Option<u64>,
}

impl ManifestEntry {
    pub fn load(&self) -> Result<(ProblemInstance, Vec<ParseWarning>), LoadError> {
        load_toronto(&self.name, &self.crs, &self.stu, self.num_timeslots, self.slot_capacity)
    }
}

/// Reads a `.crs`/`.stu` pair from disk.
pub fn load_toronto(
    name: &str,
    crs: &Path,
    stu: &Path,
    num_timeslots: usize,
    slot_capacity: Option<u64>,
) -> Result<(ProblemInstance, Vec<ParseWarning>), LoadError> {
    let read = |path: &Path| {
        fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let crs_text = read(crs)?;
    let stu_text = read(stu)?;
    let parsed = parse_toronto(name, &crs_text, &stu_text, num_timeslots).map_err(|source| {
        let from_stu = matches!(
            source,
            InstanceError::Malformed {
                file: SourceFile::Stu,
                ..
            } | InstanceError::ExamOutOfRange {
                file: SourceFile::Stu,
                ..
            } | InstanceError::NoStudents
        );
        LoadError::Parse {
            path: if from_stu { stu } else { crs }.to_path_buf(),
            source,
        }
    })?;
    Ok((parsed.instance.with_slot_capacity(slot_capacity), parsed.warnings))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses manifest text. Relative paths are resolved against `base_dir`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ManifestError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if !(4..=5).contains(&fields.len()) {
                return Err(ManifestError::Malformed {
                    line,
                    reason: format!("expected `name crs stu k [slot_capacity]`, got {} fields", fields.len()),
                });
            }
            let num_timeslots =
                fields[3]
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k > 0)
                    .ok_or_else(|| ManifestError::Malformed {
                        line,
                        reason: format!("timeslot count {:?} is not a positive integer", fields[3]),
                    })?;
            let slot_capacity = fields
                .get(4)
                .map(|c| {
                    c.parse::<u64>().map_err(|_| ManifestError::Malformed {
                        line,
                        reason: format!("slot capacity {c:?} is not an integer"),
                    })
                })
                .transpose()?;
            entries.push(ManifestEntry {
                name: fields[0].to_string(),
                crs: base_dir.join(fields[1]),
                stu: base_dir.join(fields[2]),
                num_timeslots,
                slot_capacity,
            });
        }
        if entries.is_empty() {
            return Err(ManifestError::Empty);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Manifest text for the given entries, paths written as given.
    pub fn render(&self) -> String {
        let mut out = String::from("# name crs stu timeslots [slot_capacity]\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {} {}",
                e.name,
                e.crs.display(),
                e.stu.display(),
                e.num_timeslots
            ));
            if let Some(c) = e.slot_capacity {
                out.push_str(&format!(" {c}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub variants: Vec<Variant>,
    pub replicates: usize,
    /// Template for every run; `variant` and `seed` are overridden per run,
    /// with `seed` acting as the base seed.
    pub run: RunConfig,
    pub jobs: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Egd, Variant::Fd, Variant::Nlgd],
            replicates: 10,
            run: RunConfig::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub instance: String,
    pub variant: Variant,
    pub replicate: usize,
    pub seed: u64,
    pub best_cost: f64,
    pub initial_cost: f64,
    pub iterations_to_best: usize,
    pub wall_ms: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub instance: String,
    pub variant: Variant,
    pub runs: usize,
    pub lowest_best_cost: f64,
    pub mean_best_cost: f64,
    pub std_dev_best_cost: f64,
    pub mean_iterations_to_best: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchFailure {
    pub instance: String,
    pub variant: Option<Variant>,
    pub replicate: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub instances: Vec<String>,
    pub variants: Vec<Variant>,
    pub replicates: usize,
    pub iterations: usize,
    pub base_seed: u64,
    pub rows: Vec<BatchRow>,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<BatchFailure>,
}

enum Outcome {
    Row(BatchRow),
    Failed(BatchFailure),
}

/// Runs `replicates` seeded runs of every variant on every instance. Runs
/// are independent; with `jobs > 1` they execute on a thread pool, and the
/// output order is the same as for a sequential run.
pub fn run_batch(instances: &[ProblemInstance], cfg: &BatchConfig) -> BatchReport {
    let mut tasks = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for &variant in &cfg.variants {
            for replicate in 0..cfg.replicates {
                tasks.push((i, variant, replicate));
            }
        }
    }

    let run_one = |&(i, variant, replicate): &(usize, Variant, usize)| {
        let inst = &instances[i];
        let seed = replicate_seed(cfg.run.seed, replicate);
        let run_cfg = RunConfig {
            variant,
            seed,
            ..cfg.run.clone()
        };
        match run_hh(inst, &run_cfg) {
            Ok(run) => Outcome::Row(BatchRow {
                instance: inst.name().to_string(),
                variant,
                replicate,
                seed,
                best_cost: run.best_cost.value(),
                initial_cost: run.initial_cost.value(),
                iterations_to_best: run.iteration_of_best,
                wall_ms: run.wall_time.as_secs_f64() * 1000.0,
                feasible: run.best.check_feasibility(inst).feasible,
            }),
            Err(e) => Outcome::Failed(BatchFailure {
                instance: inst.name().to_string(),
                variant: Some(variant),
                replicate: Some(replicate),
                error: e.to_string(),
            }),
        }
    };

    let outcomes: Vec<Outcome> = if cfg.jobs <= 1 {
        tasks.iter().map(run_one).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build() {
            Ok(pool) => pool.install(|| tasks.par_iter().map(run_one).collect()),
            Err(_) => tasks.iter().map(run_one).collect(),
        }
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Row(r) => rows.push(r),
            Outcome::Failed(f) => failures.push(f),
        }
    }

    let mut cells = Vec::new();
    for inst in instances {
        for &variant in &cfg.variants {
            let costs: Vec<&BatchRow> = rows
                .iter()
                .filter(|r| r.instance == inst.name() && r.variant == variant)
                .collect();
            if let Some(cell) = summarize(inst.name(), variant, &costs) {
                cells.push(cell);
            }
        }
    }

    BatchReport {
        instances: instances.iter().map(|i| i.name().to_string()).collect(),
        variants: cfg.variants.clone(),
        replicates: cfg.replicates,
        iterations: cfg.run.max_iterations,
        base_seed: cfg.run.seed,
        rows,
        cells,
        failures,
    }
}

fn summarize(instance: &str, variant: Variant, rows: &[&BatchRow]) -> Option<CellSummary> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&BatchRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    let mean_best = mean(&|r| r.best_cost);
    let variance = if rows.len() > 1 {
        rows.iter().map(|r| (r.best_cost - mean_best).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(CellSummary {
        instance: instance.to_string(),
        variant,
        runs: rows.len(),
        lowest_best_cost: rows.iter().map(|r| r.best_cost).fold(f64::INFINITY, f64::min),
        mean_best_cost: mean_best,
        std_dev_best_cost: variance.sqrt(),
        mean_iterations_to_best: mean(&|r| r.iterations_to_best as f64),
        mean_wall_ms: mean(&|r| r.wall_ms),
    })
}

/// Which per-cell statistic a comparison table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    LowestBest,
    AverageBest,
}

impl BatchReport {
    pub fn cell(&self, instance: &str, variant: Variant) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.instance == instance && c.variant == variant)
    }

    pub fn write_raw_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "instance",
                "variant",
                "replicate",
                "seed",
                "best_cost",
                "initial_cost",
                "iterations_to_best",
                "wall_ms",
                "feasible",
            ])?;
        }
        w.flush()
    }

    pub fn summary_json(&self) -> serde_json::Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            instances: &'a [String],
            variants: &'a [Variant],
            replicates: usize,
            iterations: usize,
            base_seed: u64,
            cells: &'a [CellSummary],
            failures: &'a [BatchFailure],
        }
        serde_json::to_string_pretty(&Summary {
            instances: &self.instances,
            variants: &self.variants,
            replicates: self.replicates,
            iterations: self.iterations,
            base_seed: self.base_seed,
            cells: &self.cells,
            failures: &self.failures,
        })
    }

    fn metric(&self, instance: &str, variant: Variant, metric: TableMetric) -> Option<f64> {
        self.cell(instance, variant).map(|c| match metric {
            TableMetric::LowestBest => c.lowest_best_cost,
            TableMetric::AverageBest => c.mean_best_cost,
        })
    }

    /// Variant(s) attaining the minimum of `metric` on `instance`.
    pub fn winners(&self, instance: &str, metric: TableMetric) -> Vec<Variant> {
        let values: Vec<(Variant, f64)> = self
            .variants
            .iter()
            .filter_map(|&v| self.metric(instance, v, metric).map(|m| (v, m)))
            .collect();
        let best = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        values.into_iter().filter(|v| v.1 == best).map(|v| v.0).collect()
    }

    /// Instance-by-variant table of `metric`, with the winning method(s) in
    /// the last column.
    pub fn write_table_csv<W: Write>(&self, metric: TableMetric, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["instance".to_string()];
        header.extend(self.variants.iter().map(|v| v.method_name()));
        header.push("lowest".to_string());
        w.write_record(&header)?;
        for inst in &self.instances {
            let mut record = vec![inst.clone()];
            for &v in &self.variants {
                record.push(self.metric(inst, v, metric).map(|m| m.to_string()).unwrap_or_default());
            }
            record.push(
                self.winners(inst, metric)
                    .iter()
                    .map(|v| v.method_name())
                    .collect::<Vec<_>>()
                    .join("|"),
            );
            w.write_record(&record)?;
        }
        w.flush()
    }

    /// Fixed-width text rendering of a comparison table; the lowest value in
    /// each row is starred.
    pub fn render_table(&self, metric: TableMetric) -> String {
        let mut out = format!("{:<12}", "instance");
        for v in &self.variants {
            out.push_str(&format!(" {:>14}", v.method_name()));
        }
        out.push('\n');
        for inst in &self.instances {
            out.push_str(&format!("{inst:<12}"));
            let winners = self.winners(inst, metric);
            for &v in &self.variants {
                let cell = match self.metric(inst, v, metric) {
                    Some(m) if winners.contains(&v) => format!("{m:.4}*"),
                    Some(m) => format!("{m:.4} "),
                    None => "- ".to_string(),
                };
                out.push_str(&format!(" {cell:>14}"));
            }
            out.push('\n');
        }
        out
    }
}
