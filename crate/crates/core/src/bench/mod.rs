// SPDX-License-Identifier: MIT OR Apache-2.0

//! Benchmark protocol.
//!
//! Two modes are supported. `default` runs one fixed configuration per
//! dataset. `best` evaluates every configuration of a grid and, per dataset and
//! per target metric, keeps the configuration scoring highest (ties go to the
//! earlier grid entry). The ZERO baseline predicts no change points.
//!
//! Tasks run on a rayon pool; results are always collected in dataset order,
//! then grid order, so thread count never changes the output.

mod grid;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, LoadOptions, TimeSeriesDataset};
use crate::detector::{process_series_until, WatchConfig};
use crate::error::{Error, LoadError, Result};
use crate::metrics;

pub use grid::{default_grid, load_grid, parse_grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Default,
    Best,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Default => "default",
            Self::Best => "best",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::Default),
            "best" => Ok(Self::Best),
            other => Err(Error::invalid_config(format!(
                "unknown mode {other:?}; expected default or best"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    Cover,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::F1, Metric::Cover];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::Cover => "cover",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Watch,
    Zero,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Watch => "watch",
            Self::Zero => "zero",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "watch" => Ok(Self::Watch),
            "zero" => Ok(Self::Zero),
            other => Err(Error::invalid_config(format!(
                "unknown method {other:?}; expected watch or zero"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Timeout,
    Failure,
}

/// What to run on one dataset.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub method: Method,
    pub mode: Mode,
    /// A single configuration in default mode; the search grid in best mode.
    pub grid: Vec<WatchConfig>,
    /// Metric maximized in best mode.
    pub target: Metric,
    pub margin: usize,
    /// Wall-clock budget per configuration.
    pub timeout: Duration,
}

impl RunSpec {
    pub fn default_mode(method: Method, cfg: WatchConfig) -> Self {
        Self {
            method,
            mode: Mode::Default,
            grid: vec![cfg],
            target: Metric::F1,
            margin: metrics::DEFAULT_MARGIN,
            timeout: Duration::from_secs(600),
        }
    }

    pub fn best_mode(method: Method, grid: Vec<WatchConfig>, target: Metric) -> Self {
        Self {
            mode: Mode::Best,
            grid,
            target,
            ..Self::default_mode(method, WatchConfig::default())
        }
    }

    fn validate(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::invalid_config(format!(
                "spec is for {} mode, not {}",
                self.mode.as_str(),
                mode.as_str()
            )));
        }
        if self.timeout.is_zero() {
            return Err(Error::invalid_config("timeout must be > 0"));
        }
        match (mode, self.grid.len()) {
            (_, 0) => return Err(Error::invalid_config("configuration grid is empty")),
            (Mode::Default, n) if n > 1 => {
                return Err(Error::invalid_config(format!(
                    "default mode takes one configuration; got {n}"
                )))
            }
            _ => {}
        }
        for cfg in &self.grid {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Outcome of one run. Metrics are present iff `status` is `Ok`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub n_dim: usize,
    pub method: Method,
    pub mode: Mode,
    /// Metric the configuration was selected for (best mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<WatchConfig>,
    pub change_points: Vec<usize>,
    pub f1: Option<f64>,
    pub cover: Option<f64>,
    pub status: Status,
    /// Kept out of serialized results so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunResult {
    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::F1 => self.f1,
            Metric::Cover => self.cover,
        }
    }
}

fn truth_of(ds: &TimeSeriesDataset) -> Result<&metrics::AnnotationSet> {
    ds.truth().ok_or_else(|| {
        Error::EvalImpossible(format!("dataset {:?} has no ground truth", ds.name))
    })
}

/// Runs one configuration. Predictions at or beyond the series end are
/// dropped before scoring.
fn evaluate_one(
    ds: &TimeSeriesDataset,
    method: Method,
    cfg: &WatchConfig,
    margin: usize,
    timeout: Duration,
) -> Result<RunResult> {
    let truth = truth_of(ds)?;
    let started = Instant::now();
    let detected = match method {
        Method::Zero => Ok(Vec::new()),
        Method::Watch => ds.to_point_set::<f64>().and_then(|series| {
            process_series_until(&series, cfg, Some(started + timeout))
                .map(|cps| cps.into_iter().map(|c| c.index).collect::<Vec<_>>())
        }),
    };
    let mut result = RunResult {
        dataset: ds.name.clone(),
        n_dim: ds.n_dim(),
        method,
        mode: Mode::Default,
        target: None,
        grid_index: None,
        config: (method == Method::Watch).then(|| cfg.clone()),
        change_points: Vec::new(),
        f1: None,
        cover: None,
        status: Status::Failure,
        wall_time: Duration::ZERO,
    };
    match detected {
        Ok(cps) => {
            let cps: Vec<usize> = cps.into_iter().filter(|&c| c < ds.n_obs()).collect();
            let scores = metrics::evaluate(&cps, truth, margin)?;
            result.change_points = cps;
            result.f1 = Some(scores.f1);
            result.cover = Some(scores.cover);
            result.status = Status::Ok;
        }
        Err(Error::Timeout { .. }) => result.status = Status::Timeout,
        Err(_) => result.status = Status::Failure,
    }
    result.wall_time = started.elapsed();
    Ok(result)
}

/// Default mode: the single configuration of `spec` on `ds`.
pub fn run_default(ds: &TimeSeriesDataset, spec: &RunSpec) -> Result<RunResult> {
    spec.validate(Mode::Default)?;
    evaluate_one(ds, spec.method, &spec.grid[0], spec.margin, spec.timeout)
}

fn evaluate_grid(ds: &TimeSeriesDataset, spec: &RunSpec) -> Result<Vec<RunResult>> {
    truth_of(ds)?;
    let grid: &[WatchConfig] = match spec.method {
        // Every configuration predicts nothing; one evaluation suffices.
        Method::Zero => &spec.grid[..1],
        Method::Watch => &spec.grid,
    };
    grid.par_iter()
        .map(|cfg| evaluate_one(ds, spec.method, cfg, spec.margin, spec.timeout))
        .collect()
}

fn select(evaluated: &[RunResult], target: Metric) -> RunResult {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in evaluated.iter().enumerate() {
        if let Some(v) = r.metric(target) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    let wall_time = evaluated.iter().map(|r| r.wall_time).sum();
    match best {
        Some((i, _)) => RunResult {
            mode: Mode::Best,
            target: Some(target),
            grid_index: Some(i),
            wall_time,
            ..evaluated[i].clone()
        },
        None => {
            let all_timed_out = evaluated.iter().all(|r| r.status == Status::Timeout);
            RunResult {
                mode: Mode::Best,
                target: Some(target),
                grid_index: None,
                config: None,
                change_points: Vec::new(),
                f1: None,
                cover: None,
                status: if all_timed_out { Status::Timeout } else { Status::Failure },
                wall_time,
                ..evaluated[0].clone()
            }
        }
    }
}

/// Best mode: evaluates the whole grid and keeps the configuration that
/// maximizes `spec.target`.
pub fn run_best(ds: &TimeSeriesDataset, spec: &RunSpec) -> Result<RunResult> {
    spec.validate(Mode::Best)?;
    Ok(select(&evaluate_grid(ds, spec)?, spec.target))
}

/// Best mode for every target metric from a single pass over the grid.
pub fn run_best_all_targets(ds: &TimeSeriesDataset, spec: &RunSpec) -> Result<Vec<RunResult>> {
    spec.validate(Mode::Best)?;
    let evaluated = evaluate_grid(ds, spec)?;
    Ok(Metric::ALL.iter().map(|&m| select(&evaluated, m)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Univariate,
    Multivariate,
}

impl Group {
    pub fn of(n_dim: usize) -> Self {
        if n_dim <= 1 {
            Self::Univariate
        } else {
            Self::Multivariate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Univariate => "univariate",
            Self::Multivariate => "multivariate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub group: Group,
    pub mode: Mode,
    pub metric: Metric,
    /// `None` when no run of the group finished.
    pub mean: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn get(&self, method: Method, group: Group, mode: Mode, metric: Metric) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.group == group && r.mode == mode && r.metric == metric)
    }

    /// CSV with columns `group,mode,metric,mean,count` for one method.
    pub fn to_csv(&self, method: Method) -> String {
        let mut out = String::from("group,mode,metric,mean,count\n");
        for r in self.rows.iter().filter(|r| r.method == method) {
            let mean = r.mean.map(|m| format!("{m:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{mean},{}", r.group.as_str(), r.mode.as_str(), r.metric.as_str(), r.count);
        }
        out
    }
}

/// Means of F1 and Cover per method, dataset group and mode, over runs with
/// status `Ok`. In best mode each metric is read from the run selected for it.
pub fn summarize(results: &[RunResult]) -> Summary {
    let mut buckets: BTreeMap<(Method, Group, Mode, Metric), Vec<f64>> = BTreeMap::new();
    for r in results {
        for metric in Metric::ALL {
            if r.mode == Mode::Best && r.target != Some(metric) {
                continue;
            }
            let values = buckets
                .entry((r.method, Group::of(r.n_dim), r.mode, metric))
                .or_default();
            if let (Status::Ok, Some(v)) = (r.status, r.metric(metric)) {
                values.push(v);
            }
        }
    }
    let rows = buckets
        .into_iter()
        .map(|((method, group, mode, metric), mut values)| {
            // Summing in sorted order keeps the mean independent of input order.
            values.sort_by(f64::total_cmp);
            let count = values.len();
            let mean = (count > 0).then(|| values.iter().sum::<f64>() / count as f64);
            SummaryRow {
                method,
                group,
                mode,
                metric,
                mean,
                count,
            }
        })
        .collect();
    Summary { rows }
}

/// Settings for a whole benchmark run.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub mode: Mode,
    pub methods: Vec<Method>,
    /// Configuration used in default mode.
    pub default_config: WatchConfig,
    /// Search grid for best mode; `None` selects [`default_grid`] per dataset.
    pub grid: Option<Vec<WatchConfig>>,
    pub margin: usize,
    pub timeout: Duration,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Default,
            methods: vec![Method::Watch, Method::Zero],
            default_config: WatchConfig::default(),
            grid: None,
            margin: metrics::DEFAULT_MARGIN,
            timeout: Duration::from_secs(600),
            threads: None,
        }
    }
}

/// Loads every `*.json` dataset in `dir` (sorted by file name) with its
/// `<stem>.annotations.json` ground truth.
pub fn load_bench_dir(dir: impl AsRef<Path>) -> Result<Vec<TimeSeriesDataset>> {
    let dir = dir.as_ref();
    let io = |source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()).map_err(io))
        .collect::<Result<Vec<_>, _>>()?;
    paths.retain(|p| {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        p.is_file() && name.ends_with(".json") && !name.ends_with(".annotations.json")
    });
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid_input(format!(
            "no dataset files found in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let ds = data::load_dataset_json(p, LoadOptions::default())?;
            let (_, truth) = data::load_annotations_json(data::annotation_path_for(p.as_path()))?;
            ds.with_truth(truth)
        })
        .collect()
}

/// Runs every method on every dataset. Results are ordered by dataset, then
/// method, then target metric.
pub fn run_bench(datasets: &[TimeSeriesDataset], cfg: &BenchConfig) -> Result<Vec<RunResult>> {
    if datasets.is_empty() {
        return Err(Error::invalid_input("no datasets to benchmark"));
    }
    if let Some(grid) = &cfg.grid {
        if grid.is_empty() {
            return Err(Error::invalid_config("configuration grid is empty"));
        }
    }
    cfg.default_config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid_config(format!("thread pool: {e}")))?;

    let tasks: Vec<(&TimeSeriesDataset, Method)> = datasets
        .iter()
        .flat_map(|ds| cfg.methods.iter().map(move |&m| (ds, m)))
        .collect();
    let per_task: Vec<Vec<RunResult>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ds, method)| -> Result<Vec<RunResult>> {
                match cfg.mode {
                    Mode::Default => {
                        let spec = RunSpec {
                            margin: cfg.margin,
                            timeout: cfg.timeout,
                            ..RunSpec::default_mode(method, cfg.default_config.clone())
                        };
                        Ok(vec![run_default(ds, &spec)?])
                    }
                    Mode::Best => {
                        let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(ds.n_obs()));
                        let spec = RunSpec {
                            margin: cfg.margin,
                            timeout: cfg.timeout,
                            ..RunSpec::best_mode(method, grid, Metric::F1)
                        };
                        run_best_all_targets(ds, &spec)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_task.into_iter().flatten().collect())
}

pub fn results_to_json(results: &[RunResult]) -> String {
    let mut out = serde_json::to_string_pretty(results).expect("results serialize");
    out.push('\n');
    out
}

/// Dataset-by-method score table for one metric, as used for ranking.
/// Datasets with fewer than two finished methods are left out.
pub fn score_table(results: &[RunResult], methods: &[Method], metric: Metric) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut by_dataset: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for r in results {
        if r.mode == Mode::Best && r.target != Some(metric) {
            continue;
        }
        let Some(col) = methods.iter().position(|&m| m == r.method) else {
            continue;
        };
        let row = by_dataset
            .entry(&r.dataset)
            .or_insert_with(|| vec![None; methods.len()]);
        row[col] = if r.status == Status::Ok { r.metric(metric) } else { None };
    }
    by_dataset
        .into_iter()
        .filter(|(_, row)| row.iter().flatten().count() >= 2)
        .map(|(name, row)| (name.to_string(), row))
        .unzip()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub metric: Metric,
    pub methods: Vec<Method>,
    pub datasets: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub friedman: stats::FriedmanTest,
    pub posthoc: &'static str,
    #[serde(skip)]
    pub pairwise: Vec<stats::PairwiseComparison>,
}

impl RankReport {
    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("method,mean_rank\n");
        for (m, r) in self.methods.iter().zip(&self.mean_ranks) {
            let _ = writeln!(out, "{},{r:.6}", m.as_str());
        }
        out
    }

    pub fn pairwise_csv(&self) -> String {
        let mut out = String::from("method_a,method_b,p_raw,p_holm\n");
        for p in &self.pairwise {
            let _ = writeln!(
                out,
                "{},{},{:.6e},{:.6e}",
                self.methods[p.method_a].as_str(),
                self.methods[p.method_b].as_str(),
                p.p_raw,
                p.p_holm
            );
        }
        out
    }
}

/// Mean ranks, Friedman test and Holm-adjusted pairwise comparisons for one
/// metric. `None` when fewer than two methods or no comparable dataset.
pub fn rank_report(results: &[RunResult], methods: &[Method], metric: Metric) -> Result<Option<RankReport>> {
    if methods.len() < 2 {
        return Ok(None);
    }
    let (datasets, table) = score_table(results, methods, metric);
    if table.is_empty() {
        return Ok(None);
    }
    let mean_ranks = stats::average_ranks(&table)?;
    Ok(Some(RankReport {
        metric,
        methods: methods.to_vec(),
        friedman: stats::friedman_test(&mean_ranks, table.len())?,
        pairwise: stats::pairwise_rank_tests(&mean_ranks, table.len())?,
        datasets,
        mean_ranks,
        posthoc: stats::POSTHOC_METHOD,
    }))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| {
        LoadError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

/// Writes `results.json`, `summary_<method>.csv`, rank files per metric and
/// `timings.csv` into `out_dir`. Everything except `timings.csv` is a pure
/// function of `results`.
pub fn write_outputs(out_dir: impl AsRef<Path>, results: &[RunResult], methods: &[Method]) -> Result<()> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|source| LoadError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_file(&out_dir.join("results.json"), &results_to_json(results))?;
    let summary = summarize(results);
    for &m in methods {
        write_file(&out_dir.join(format!("summary_{}.csv", m.as_str())), &summary.to_csv(m))?;
    }
    for metric in Metric::ALL {
        if let Some(report) = rank_report(results, methods, metric)? {
            let m = metric.as_str();
            write_file(&out_dir.join(format!("ranks_{m}.csv")), &report.ranks_csv())?;
            write_file(&out_dir.join(format!("pairwise_{m}.csv")), &report.pairwise_csv())?;
            let meta = serde_json::to_string_pretty(&report).expect("report serializes");
            write_file(&out_dir.join(format!("friedman_{m}.json")), &(meta + "\n"))?;
        }
    }
    let mut timings = String::from("dataset,method,mode,target,wall_time_s\n");
    for r in results {
        let target = r.target.map(Metric::as_str).unwrap_or("");
        let _ = writeln!(
            timings,
            "{},{},{},{target},{:.6}",
            r.dataset,
            r.method.as_str(),
            r.mode.as_str(),
            r.wall_time.as_secs_f64()
        );
    }
    write_file(&out_dir.join("timings.csv"), &timings)
}
