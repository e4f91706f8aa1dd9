// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dataset ingestion and preprocessing.
//!
//! Datasets are stored as JSON
//! (`{"name", "n_obs", "n_dim", "series": [[f64; n_dim]; n_obs]}`) or as plain
//! numeric CSV, one time step per line. Ground truth lives in a separate
//! annotation file (`{"dataset", "n_obs", "annotations": {"<id>": [..]}}`).
//! Missing values are `null` in JSON and empty, `NA` or `NaN` cells in CSV; they
//! are rejected unless forward filling is requested.

mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, LoadError, Result};
use crate::metrics::AnnotationSet;
use crate::scalar::Scalar;
use crate::wasserstein::PointSet;

pub use synth::{synth_cluster_sequence, synth_mean_shift, SynthSpec, SYNTH_ANNOTATOR};

/// A multivariate time series, row-major, in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    pub name: String,
    n_obs: usize,
    n_dim: usize,
    values: Vec<f64>,
    truth: Option<AnnotationSet>,
}

impl TimeSeriesDataset {
    pub fn new(name: impl Into<String>, n_dim: usize, values: Vec<f64>) -> Result<Self> {
        if n_dim == 0 || values.is_empty() || !values.len().is_multiple_of(n_dim) {
            return Err(LoadError::ShapeMismatch(format!(
                "{} values cannot form rows of dimension {n_dim}",
                values.len()
            ))
            .into());
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(LoadError::NonFinite {
                row: pos / n_dim,
                col: pos % n_dim,
            }
            .into());
        }
        Ok(Self {
            name: name.into(),
            n_obs: values.len() / n_dim,
            n_dim,
            values,
            truth: None,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_dim..(t + 1) * self.n_dim]
    }

    pub fn truth(&self) -> Option<&AnnotationSet> {
        self.truth.as_ref()
    }

    /// Attaches ground truth; its series length must equal `n_obs`.
    pub fn with_truth(mut self, truth: AnnotationSet) -> Result<Self> {
        if truth.series_length() != self.n_obs {
            return Err(LoadError::ShapeMismatch(format!(
                "annotations cover {} samples but dataset {:?} has {}",
                truth.series_length(),
                self.name,
                self.n_obs
            ))
            .into());
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn to_point_set<T: Scalar>(&self) -> Result<PointSet<T>> {
        PointSet::from_flat(self.values.iter().map(|&v| T::from_f64_lossy(v)).collect(), self.n_dim)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Replace missing values with the last observed value of the same
    /// dimension (leading gaps take the first observed value).
    pub forward_fill: bool,
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), LoadError> {
    fs::write(path, contents).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves missing cells, row-major with `n_dim` columns.
fn fill_missing(cells: Vec<Option<f64>>, n_dim: usize, opts: LoadOptions) -> Result<Vec<f64>, LoadError> {
    let missing = |pos: usize| LoadError::NonFinite {
        row: pos / n_dim,
        col: pos % n_dim,
    };
    if !opts.forward_fill {
        return cells
            .iter()
            .enumerate()
            .map(|(pos, v)| v.ok_or_else(|| missing(pos)))
            .collect();
    }
    let n_obs = cells.len() / n_dim;
    let mut out = vec![0.0; cells.len()];
    for col in 0..n_dim {
        let first = (0..n_obs)
            .find_map(|t| cells[t * n_dim + col])
            .ok_or_else(|| missing(col))?;
        let mut last = first;
        for t in 0..n_obs {
            if let Some(v) = cells[t * n_dim + col] {
                last = v;
            }
            out[t * n_dim + col] = last;
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    name: String,
    n_obs: usize,
    n_dim: usize,
    series: Vec<Vec<Option<f64>>>,
}

pub fn parse_dataset_json(text: &str, opts: LoadOptions) -> Result<TimeSeriesDataset> {
    let file: DatasetFile = serde_json::from_str(text).map_err(LoadError::from)?;
    if file.series.len() != file.n_obs {
        return Err(LoadError::ShapeMismatch(format!(
            "n_obs is {} but series has {} rows",
            file.n_obs,
            file.series.len()
        ))
        .into());
    }
    let mut cells = Vec::with_capacity(file.n_obs * file.n_dim);
    for (t, row) in file.series.into_iter().enumerate() {
        if row.len() != file.n_dim {
            return Err(LoadError::ShapeMismatch(format!(
                "n_dim is {} but row {t} has {} values",
                file.n_dim,
                row.len()
            ))
            .into());
        }
        cells.extend(row);
    }
    let values = fill_missing(cells, file.n_dim.max(1), opts)?;
    TimeSeriesDataset::new(file.name, file.n_dim, values)
}

pub fn load_dataset_json(path: impl AsRef<Path>, opts: LoadOptions) -> Result<TimeSeriesDataset> {
    parse_dataset_json(&read(path.as_ref())?, opts)
}

/// Canonical JSON form of a dataset, without its annotations.
pub fn dataset_to_json(ds: &TimeSeriesDataset) -> String {
    let file = DatasetFile {
        name: ds.name.clone(),
        n_obs: ds.n_obs,
        n_dim: ds.n_dim,
        series: (0..ds.n_obs)
            .map(|t| ds.row(t).iter().map(|&v| Some(v)).collect())
            .collect(),
    };
    let mut out = serde_json::to_string(&file).expect("dataset serializes");
    out.push('\n');
    out
}

pub fn save_dataset_json(ds: &TimeSeriesDataset, path: impl AsRef<Path>) -> Result<()> {
    Ok(write(path.as_ref(), &dataset_to_json(ds))?)
}

fn parse_cell(raw: &str, row: usize, col: usize) -> Result<Option<f64>, LoadError> {
    let cell = raw.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Err(LoadError::NonFinite { row, col }),
        Err(e) => Err(LoadError::Parse {
            row,
            col,
            msg: format!("{cell:?}: {e}"),
        }),
    }
}

/// Parses numeric CSV: one time step per record, one dimension per column.
/// Reported rows and columns are 1-based positions in the file.
pub fn parse_dataset_csv(
    name: &str,
    text: &str,
    has_header: bool,
    opts: LoadOptions,
) -> Result<TimeSeriesDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(text.as_bytes());
    let offset = usize::from(has_header) + 1;
    let mut n_dim = None;
    let mut cells = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(LoadError::from)?;
        let row = r + offset;
        match n_dim {
            None => n_dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(LoadError::ShapeMismatch(format!(
                    "row {row} has {} columns, expected {d}",
                    record.len()
                ))
                .into())
            }
            Some(_) => {}
        }
        for (c, raw) in record.iter().enumerate() {
            cells.push(parse_cell(raw, row, c + 1)?);
        }
    }
    let n_dim = n_dim.ok_or_else(|| LoadError::ShapeMismatch("CSV holds no data rows".into()))?;
    let values = fill_missing(cells, n_dim, opts)?;
    TimeSeriesDataset::new(name, n_dim, values)
}

pub fn load_dataset_csv(
    path: impl AsRef<Path>,
    has_header: bool,
    opts: LoadOptions,
) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset_csv(&name, &read(path)?, has_header, opts)
}

/// Loads a `.csv` or `.json` dataset by extension.
pub fn load_dataset(path: impl AsRef<Path>, has_header: bool, opts: LoadOptions) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_dataset_csv(path, has_header, opts),
        _ => load_dataset_json(path, opts),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    dataset: String,
    n_obs: usize,
    annotations: BTreeMap<String, Vec<usize>>,
}

/// Parses an annotation file into `(dataset name, annotations)`. Each
/// annotator's list is sorted and deduplicated.
pub fn parse_annotations_json(text: &str) -> Result<(String, AnnotationSet)> {
    let mut file: AnnotationFile = serde_json::from_str(text).map_err(LoadError::from)?;
    for cps in file.annotations.values_mut() {
        cps.sort_unstable();
        cps.dedup();
    }
    let set = AnnotationSet::new(file.annotations, file.n_obs)
        .map_err(|e| LoadError::Annotations(e.to_string()))?;
    Ok((file.dataset, set))
}

pub fn load_annotations_json(path: impl AsRef<Path>) -> Result<(String, AnnotationSet)> {
    parse_annotations_json(&read(path.as_ref())?)
}

pub fn annotations_to_json(dataset: &str, truth: &AnnotationSet) -> String {
    let file = AnnotationFile {
        dataset: dataset.to_string(),
        n_obs: truth.series_length(),
        annotations: truth.annotators().clone(),
    };
    let mut out = serde_json::to_string(&file).expect("annotations serialize");
    out.push('\n');
    out
}

pub fn save_annotations_json(dataset: &str, truth: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    Ok(write(path.as_ref(), &annotations_to_json(dataset, truth))?)
}

/// Annotation file paired with a dataset file: `<stem>.annotations.json`.
pub fn annotation_path_for(dataset_path: &Path) -> PathBuf {
    let stem = dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    dataset_path.with_file_name(format!("{stem}.annotations.json"))
}

/// Maps each dimension affinely so that the first `fit_prefix` samples span
/// `[0, 1]`. Dimensions that are constant over the prefix map to 0.
pub fn minmax_normalize(ds: &TimeSeriesDataset, fit_prefix: usize) -> Result<TimeSeriesDataset> {
    if fit_prefix < 2 {
        return Err(Error::invalid_input(format!("fit_prefix must be >= 2; got {fit_prefix}")));
    }
    if fit_prefix > ds.n_obs {
        return Err(Error::invalid_input(format!(
            "fit_prefix {fit_prefix} exceeds series length {}",
            ds.n_obs
        )));
    }
    let d = ds.n_dim;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for t in 0..fit_prefix {
        for (k, &v) in ds.row(t).iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let values = ds
        .values
        .iter()
        .enumerate()
        .map(|(pos, &v)| {
            let k = pos % d;
            let span = hi[k] - lo[k];
            if span > 0.0 {
                (v - lo[k]) / span
            } else {
                0.0
            }
        })
        .collect();
    Ok(TimeSeriesDataset {
        values,
        ..ds.clone()
    })
}
