// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic series with known change points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::metrics::AnnotationSet;

/// Annotator id used for generated ground truth.
pub const SYNTH_ANNOTATOR: &str = "synthetic";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_obs: usize,
    pub n_dim: usize,
    /// Strictly increasing, inside `(0, n_obs)`.
    pub change_indices: Vec<usize>,
    pub shift_magnitude: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_obs == 0 || self.n_dim == 0 {
            return Err(Error::invalid_input("n_obs and n_dim must be >= 1"));
        }
        if self.change_indices.first() == Some(&0) {
            return Err(Error::invalid_input("change indices must lie in (0, n_obs)"));
        }
        if !(self.shift_magnitude.is_finite() && self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::invalid_input(
                "shift must be finite and noise_sd finite and >= 0",
            ));
        }
        // Range and ordering checks are shared with annotation validation.
        AnnotationSet::single(SYNTH_ANNOTATOR, self.change_indices.clone(), self.n_obs)?;
        Ok(())
    }

    fn noise(&self) -> Normal<f64> {
        Normal::new(0.0, self.noise_sd).expect("noise_sd validated")
    }
}

/// Gaussian noise around a piecewise-constant mean: segment `k` (0-based) has
/// mean `k * shift_magnitude` on every dimension.
pub fn synth_mean_shift(spec: &SynthSpec) -> Result<TimeSeriesDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = spec.noise();
    let mut values = Vec::with_capacity(spec.n_obs * spec.n_dim);
    let mut segment = 0usize;
    for t in 0..spec.n_obs {
        while segment < spec.change_indices.len() && spec.change_indices[segment] <= t {
            segment += 1;
        }
        let mean = segment as f64 * spec.shift_magnitude;
        values.extend((0..spec.n_dim).map(|_| mean + noise.sample(&mut rng)));
    }
    let name = format!("mean_shift_d{}_seed{}", spec.n_dim, spec.seed);
    TimeSeriesDataset::new(name, spec.n_dim, values)?.with_truth(AnnotationSet::single(
        SYNTH_ANNOTATOR,
        spec.change_indices.clone(),
        spec.n_obs,
    )?)
}

/// Consecutive segments of noisy samples around fixed centers.
///
/// `segment_lengths` must sum to `spec.n_obs`. `spec.change_indices` may be
/// empty; otherwise it must equal the cumulative segment boundaries.
/// `spec.shift_magnitude` is unused.
pub fn synth_cluster_sequence(
    spec: &SynthSpec,
    centers: &[Vec<f64>],
    segment_lengths: &[usize],
) -> Result<TimeSeriesDataset> {
    spec.validate()?;
    if centers.len() != segment_lengths.len() || centers.is_empty() {
        return Err(Error::invalid_input(format!(
            "{} centers for {} segments",
            centers.len(),
            segment_lengths.len()
        )));
    }
    if segment_lengths.contains(&0) {
        return Err(Error::invalid_input("segment lengths must be positive"));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != spec.n_dim || c.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid_input(format!(
            "center of dimension {} does not match n_dim {}",
            c.len(),
            spec.n_dim
        )));
    }
    let total: usize = segment_lengths.iter().sum();
    if total != spec.n_obs {
        return Err(Error::invalid_input(format!(
            "segment lengths sum to {total}, expected n_obs {}",
            spec.n_obs
        )));
    }
    let boundaries: Vec<usize> = segment_lengths
        .iter()
        .scan(0, |acc, &len| {
            *acc += len;
            Some(*acc)
        })
        .take(segment_lengths.len() - 1)
        .collect();
    if !spec.change_indices.is_empty() && spec.change_indices != boundaries {
        return Err(Error::invalid_input(format!(
            "change indices {:?} disagree with segment boundaries {boundaries:?}",
            spec.change_indices
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = spec.noise();
    let mut values = Vec::with_capacity(spec.n_obs * spec.n_dim);
    for (center, &len) in centers.iter().zip(segment_lengths) {
        for _ in 0..len {
            values.extend(center.iter().map(|&c| c + noise.sample(&mut rng)));
        }
    }
    let name = format!("clusters_d{}_seed{}", spec.n_dim, spec.seed);
    TimeSeriesDataset::new(name, spec.n_dim, values)?.with_truth(AnnotationSet::single(
        SYNTH_ANNOTATOR,
        boundaries,
        spec.n_obs,
    )?)
}
