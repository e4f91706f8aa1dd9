// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use watch_core::bench::{self, BenchConfig, Method, Mode};
use watch_core::data::{self, synth_mean_shift, LoadOptions, SynthSpec};
use watch_core::metrics::{self, AnnotationSet};
use watch_core::{DistanceConfig, Error, Eviction, LoadError, WatchConfig};

const EXIT_INPUT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "watch", version, about = "Wasserstein change point detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over one dataset.
    Detect(DetectArgs),
    /// Score predicted change points against annotations.
    Eval(EvalArgs),
    /// Write a synthetic mean-shift dataset and its annotations.
    Synth(SynthArgs),
    /// Run the benchmark over a directory of datasets.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Dataset file (.json or .csv).
    #[arg(long)]
    input: PathBuf,
    /// The CSV input starts with a header row.
    #[arg(long)]
    has_header: bool,
    /// Minimum buffered points before detection [default: 3·omega].
    #[arg(long)]
    kappa: Option<usize>,
    /// Maximum buffered points [default: 30·omega].
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long, default_value_t = WatchConfig::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = WatchConfig::DEFAULT_OMEGA)]
    omega: usize,
    /// Wasserstein order.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Number of random projections.
    #[arg(long, default_value_t = 128)]
    slices: usize,
    /// Seed for projection directions.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// stop_adding or fifo.
    #[arg(long, default_value = "stop_adding")]
    eviction: String,
    /// Min-max normalize each dimension over the whole series.
    #[arg(long)]
    normalize: bool,
    /// Fill missing values with the previous sample.
    #[arg(long)]
    forward_fill: bool,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Detect output, or a JSON array of indices.
    #[arg(long)]
    pred: PathBuf,
    /// Annotation file.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_MARGIN)]
    margin: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Series length.
    #[arg(long = "T")]
    n_obs: usize,
    /// Dimension.
    #[arg(long = "d", default_value_t = 1)]
    n_dim: usize,
    /// Comma-separated change indices.
    #[arg(long, value_delimiter = ',')]
    cps: Vec<usize>,
    #[arg(long, default_value_t = 5.0)]
    shift: f64,
    #[arg(long, default_value_t = 1.0)]
    sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Dataset name; also the file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of `<name>.json` datasets with `<name>.annotations.json`.
    #[arg(long)]
    datasets: PathBuf,
    #[arg(long, default_value = "default")]
    mode: String,
    /// JSON list of configurations for best mode.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Per-configuration budget in seconds.
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "watch,zero")]
    methods: Vec<String>,
    #[arg(long, default_value_t = metrics::DEFAULT_MARGIN)]
    margin: usize,
}

/// An error paired with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) => EXIT_CONFIG,
            Error::Timeout { .. } => EXIT_TIMEOUT,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Error::from(e).into()
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn timeout_from_secs(secs: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(secs)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| config_error(format!("timeout must be a positive number of seconds; got {secs}")))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| input_error(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn emit<S: Serialize>(value: &S, output: Option<&Path>) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    match output {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    dataset: &'a str,
    n_obs: usize,
    config: &'a WatchConfig,
    changepoints: Vec<watch_core::ChangePoint64>,
}

fn cmd_detect(args: DetectArgs) -> CmdResult {
    let eviction: Eviction = args.eviction.parse()?;
    let base = WatchConfig::with_omega(args.omega.max(1));
    let cfg = WatchConfig {
        kappa: args.kappa.unwrap_or(base.kappa),
        mu: args.mu.unwrap_or(base.mu),
        epsilon: args.epsilon,
        omega: args.omega,
        distance: DistanceConfig {
            p: args.p,
            n_projections: args.slices,
            seed: args.seed,
        },
        eviction,
    };
    cfg.validate()?;
    let deadline = args.timeout.map(timeout_from_secs).transpose()?;

    let opts = LoadOptions {
        forward_fill: args.forward_fill,
    };
    let mut ds = data::load_dataset(&args.input, args.has_header, opts)?;
    if args.normalize {
        ds = data::minmax_normalize(&ds, ds.n_obs())?;
    }
    let series = ds.to_point_set::<f64>()?;
    let deadline = deadline.map(|d| Instant::now() + d);
    let changepoints = watch_core::process_series_until(&series, &cfg, deadline)?;
    emit(
        &DetectOutput {
            dataset: &ds.name,
            n_obs: ds.n_obs(),
            config: &cfg,
            changepoints,
        },
        args.output.as_deref(),
    )
}

/// Reads predictions: either detect output or a bare index array. Returns the
/// indices and, for detect output, the series length it was run on.
fn read_predictions(path: &Path) -> Result<(Vec<usize>, Option<usize>), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(LoadError::from)?;
    let bad = || input_error(format!("{}: expected detect output or an array of indices", path.display()));
    let as_index = |v: &Value| v.as_u64().and_then(|i| usize::try_from(i).ok());
    match &value {
        Value::Array(items) => {
            let idx = items.iter().map(as_index).collect::<Option<Vec<_>>>().ok_or_else(bad)?;
            Ok((idx, None))
        }
        Value::Object(map) => {
            let cps = map.get("changepoints").and_then(Value::as_array).ok_or_else(bad)?;
            let idx = cps
                .iter()
                .map(|c| c.get("index").and_then(as_index))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(bad)?;
            let n_obs = map.get("n_obs").and_then(as_index);
            Ok((idx, n_obs))
        }
        _ => Err(bad()),
    }
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let (mut pred, n_obs) = read_predictions(&args.pred)?;
    let (_, truth): (String, AnnotationSet) = data::load_annotations_json(&args.truth)?;
    let t = truth.series_length();
    if let Some(n) = n_obs.filter(|&n| n != t) {
        return Err(input_error(format!(
            "prediction was made on {n} samples but the annotations cover {t}"
        )));
    }
    pred.sort_unstable();
    pred.dedup();
    // A change reported exactly at the end of the series has no segment after it.
    if n_obs.is_some() {
        pred.retain(|&c| c < t);
    }
    let scores = metrics::evaluate(&pred, &truth, args.margin)?;
    emit(&scores, args.output.as_deref())
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let spec = SynthSpec {
        n_obs: args.n_obs,
        n_dim: args.n_dim,
        change_indices: args.cps,
        shift_magnitude: args.shift,
        noise_sd: args.sd,
        seed: args.seed,
    };
    let mut ds = synth_mean_shift(&spec)?;
    if let Some(name) = args.name {
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(input_error(format!("invalid dataset name {name:?}")));
        }
        ds.name = name;
    }
    std::fs::create_dir_all(&args.out).map_err(|e| input_error(format!("{}: {e}", args.out.display())))?;
    let path = args.out.join(format!("{}.json", ds.name));
    data::save_dataset_json(&ds, &path)?;
    let truth = ds.truth().expect("synthetic data is annotated");
    data::save_annotations_json(&ds.name, truth, data::annotation_path_for(&path))?;
    println!("{}", path.display());
    Ok(())
}

fn bench_threads() -> Result<Option<usize>, Failure> {
    match std::env::var("WATCH_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| config_error(format!("WATCH_THREADS must be a positive integer; got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let mode: Mode = args.mode.parse()?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(config_error("no methods selected"));
    }
    let grid = match &args.grid {
        None => None,
        Some(path) => Some(bench::load_grid(path).map_err(|e| match e {
            Error::Load(LoadError::Io { .. }) => Failure::from(e),
            other => config_error(format!("invalid grid {}: {other}", path.display())),
        })?),
    };
    if grid.is_some() && mode == Mode::Default {
        return Err(config_error("--grid only applies to --mode best"));
    }
    let cfg = BenchConfig {
        mode,
        methods: methods.clone(),
        grid,
        margin: args.margin,
        timeout: timeout_from_secs(args.timeout)?,
        threads: bench_threads()?,
        ..BenchConfig::default()
    };
    let datasets = bench::load_bench_dir(&args.datasets)?;
    let results = bench::run_bench(&datasets, &cfg)?;
    bench::write_outputs(&args.out, &results, &methods)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
