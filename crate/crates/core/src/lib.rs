// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

pub mod bench;
pub mod data;
pub mod detector;
pub mod error;
pub mod metrics;
pub mod scalar;
pub mod wasserstein;

pub use bench::{
    load_bench_dir, run_bench, run_best, run_default, summarize, BenchConfig, Method, Metric, Mode,
    RunResult, RunSpec, Status,
};
pub use detector::{
    compute_threshold, process_series, process_series_until, ChangePoint, DistributionBuffer,
    Eviction, WatchConfig, WatchDetector,
};
pub use data::{LoadOptions, SynthSpec, TimeSeriesDataset};
pub use error::{Error, LoadError, Result};
pub use metrics::{AnnotationSet, Partition, Scores, DEFAULT_MARGIN};
pub use scalar::Scalar;
pub use wasserstein::{
    exact_1d_wasserstein, exact_ot_distance, sliced_wasserstein, DistanceConfig, PointSet, Slicer,
};

pub type PointSet64 = PointSet<f64>;
pub type PointSet32 = PointSet<f32>;
pub type Detector64 = WatchDetector<f64>;
pub type Detector32 = WatchDetector<f32>;
pub type ChangePoint64 = ChangePoint<f64>;
pub type Buffer64 = DistributionBuffer<f64>;
