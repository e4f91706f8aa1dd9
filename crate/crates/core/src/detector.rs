// SPDX-License-Identifier: MIT OR Apache-2.0

//! Streaming mini-batch change point detector.
//!
//! The detector keeps a buffer `D` of recent mini-batches that represents the
//! current distribution. While `|D| < kappa` every batch is absorbed. Once the
//! buffer is warm, each new batch `B` is compared against `D` with the sliced
//! Wasserstein distance. If that distance exceeds the threshold
//!
//! ```text
//! eta = epsilon * max_{B' in D} W(B', D)
//! ```
//!
//! a change point is emitted at `i * omega` (`i` the 1-based batch ordinal) and
//! `D` restarts from `B` alone. Otherwise `B` joins `D` subject to the capacity
//! `mu` and `eta` is recomputed.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::wasserstein::{DistanceConfig, PointSet, Slicer};

/// What happens to a batch that passes the test once the buffer holds `mu` points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eviction {
    /// The batch is not absorbed; the buffer stays as it is.
    #[default]
    StopAdding,
    /// The batch is absorbed and the oldest batches are dropped to fit `mu`.
    Fifo,
}

impl std::str::FromStr for Eviction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stop_adding" | "stop-adding" => Ok(Self::StopAdding),
            "fifo" => Ok(Self::Fifo),
            other => Err(Error::invalid_config(format!(
                "unknown eviction policy {other:?}; expected stop_adding or fifo"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchConfig {
    /// Minimum number of buffered points before detection activates.
    pub kappa: usize,
    /// Maximum number of buffered points.
    pub mu: usize,
    /// Threshold ratio.
    pub epsilon: f64,
    /// Mini-batch size.
    pub omega: usize,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub eviction: Eviction,
}

impl WatchConfig {
    pub const DEFAULT_OMEGA: usize = 20;
    pub const DEFAULT_EPSILON: f64 = 1.5;

    /// Default configuration for a given batch size: `kappa = 3ω`, `mu = 30ω`.
    pub fn with_omega(omega: usize) -> Self {
        Self {
            kappa: 3 * omega,
            mu: 30 * omega,
            epsilon: Self::DEFAULT_EPSILON,
            omega,
            distance: DistanceConfig::default(),
            eviction: Eviction::default(),
        }
    }

    /// Checks every parameter constraint.
    ///
    /// Besides `kappa >= 2·omega` and `mu >= kappa`, `mu` must hold the
    /// `ceil(kappa / omega)` whole batches needed to activate detection.
    pub fn validate(&self) -> Result<()> {
        if self.omega == 0 {
            return Err(Error::invalid_config("omega must be >= 1; got 0"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid_config(format!(
                "epsilon must be finite and > 0; got {}",
                self.epsilon
            )));
        }
        if self.kappa < 2 * self.omega {
            return Err(Error::invalid_config(format!(
                "kappa must be >= 2·omega = {}; got {}",
                2 * self.omega,
                self.kappa
            )));
        }
        if self.mu < self.kappa {
            return Err(Error::invalid_config(format!(
                "mu must be >= kappa = {}; got {}",
                self.kappa, self.mu
            )));
        }
        let warm = self.kappa.div_ceil(self.omega) * self.omega;
        if self.mu < warm {
            return Err(Error::invalid_config(format!(
                "mu must hold ceil(kappa/omega) whole batches ({warm} points); got {}",
                self.mu
            )));
        }
        self.distance.validate()
    }
}

impl Default for WatchConfig {
    fn default() -> Self {
        Self::with_omega(Self::DEFAULT_OMEGA)
    }
}

/// A detected change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint<T> {
    /// Sample index, `batch * omega`.
    pub index: usize,
    /// 1-based ordinal of the batch that triggered the change.
    pub batch: usize,
    pub distance: T,
    pub threshold: T,
}

/// Sorted projections, one vector per slice.
type SortedSlices<T> = Vec<Vec<T>>;

#[derive(Clone, Debug)]
struct BufferedBatch<T> {
    points: PointSet<T>,
    // Sorted projections under the owning buffer's slicer, when one is attached.
    sorted: Option<Vec<Vec<T>>>,
}

/// The current distribution `D`, an ordered sequence of mini-batches.
#[derive(Clone, Debug)]
pub struct DistributionBuffer<T> {
    batches: VecDeque<BufferedBatch<T>>,
    total_points: usize,
}

impl<T> Default for DistributionBuffer<T> {
    fn default() -> Self {
        Self {
            batches: VecDeque::new(),
            total_points: 0,
        }
    }
}

impl<T: Scalar> DistributionBuffer<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_batches(batches: impl IntoIterator<Item = PointSet<T>>) -> Result<Self> {
        let mut buffer = Self::new();
        for batch in batches {
            buffer.push(batch, None)?;
        }
        Ok(buffer)
    }

    pub fn total_points(&self) -> usize {
        self.total_points
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.batches.front().map(|b| b.points.dim())
    }

    pub fn batches(&self) -> impl ExactSizeIterator<Item = &PointSet<T>> + '_ {
        self.batches.iter().map(|b| &b.points)
    }

    /// All buffered points, oldest first.
    pub fn union(&self) -> Result<PointSet<T>> {
        PointSet::concat(self.batches())
    }

    fn push(&mut self, points: PointSet<T>, slicer: Option<&Slicer<T>>) -> Result<()> {
        if let Some(d) = self.dim() {
            if d != points.dim() {
                return Err(Error::invalid_input(format!(
                    "batch dimension {} does not match buffer dimension {d}",
                    points.dim()
                )));
            }
        }
        let sorted = slicer.map(|s| s.project_sorted(&points)).transpose()?;
        self.total_points += points.len();
        self.batches.push_back(BufferedBatch { points, sorted });
        Ok(())
    }

    fn pop_oldest(&mut self) {
        if let Some(b) = self.batches.pop_front() {
            self.total_points -= b.points.len();
        }
    }

    fn clear(&mut self) {
        self.batches.clear();
        self.total_points = 0;
    }

    /// Sorted projections of every batch and of their union under `slicer`.
    /// Cached projections are only valid for the slicer that produced them.
    fn sorted_projections(
        &self,
        slicer: &Slicer<T>,
        use_cache: bool,
    ) -> Result<(Vec<SortedSlices<T>>, SortedSlices<T>)> {
        let per_batch = self
            .batches
            .iter()
            .map(|b| match (&b.sorted, use_cache) {
                (Some(s), true) => Ok(s.clone()),
                _ => slicer.project_sorted(&b.points),
            })
            .collect::<Result<Vec<_>>>()?;
        let union = (0..slicer.n_projections())
            .map(|k| {
                let mut merged: Vec<T> = per_batch.iter().flat_map(|p| p[k].iter().copied()).collect();
                merged.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                merged
            })
            .collect();
        Ok((per_batch, union))
    }

    fn union_sorted(&self, slicer: &Slicer<T>) -> Result<Vec<Vec<T>>> {
        self.sorted_projections(slicer, true).map(|(_, union)| union)
    }

    fn threshold_with(&self, epsilon: f64, slicer: &Slicer<T>, use_cache: bool) -> Result<T> {
        if self.batches.len() < 2 {
            return Err(Error::DegenerateBuffer(format!(
                "threshold needs at least two batches; buffer holds {}",
                self.batches.len()
            )));
        }
        let (per_batch, union) = self.sorted_projections(slicer, use_cache)?;
        let max = per_batch
            .iter()
            .map(|b| slicer.distance_from_sorted(b, &union))
            .fold(T::zero(), T::max);
        Ok(T::from_f64_lossy(epsilon) * max)
    }
}

/// `epsilon · max_{B in D} W(B, D)`, where `D` is the union of all buffered
/// points and includes `B` itself.
pub fn compute_threshold<T: Scalar>(
    buffer: &DistributionBuffer<T>,
    epsilon: f64,
    dcfg: &DistanceConfig,
) -> Result<T> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid_config(format!(
            "epsilon must be finite and > 0; got {epsilon}"
        )));
    }
    let dim = buffer
        .dim()
        .ok_or_else(|| Error::DegenerateBuffer("buffer is empty".into()))?;
    let slicer = Slicer::new(dim, dcfg)?;
    buffer.threshold_with(epsilon, &slicer, false)
}

/// Sequential detector state. One instance per stream.
#[derive(Clone, Debug)]
pub struct WatchDetector<T> {
    cfg: WatchConfig,
    buffer: DistributionBuffer<T>,
    eta: Option<T>,
    emitted: Vec<ChangePoint<T>>,
    batches_seen: usize,
    slicer: Option<Slicer<T>>,
}

impl<T: Scalar> WatchDetector<T> {
    pub fn new(cfg: WatchConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            buffer: DistributionBuffer::new(),
            eta: None,
            emitted: Vec::new(),
            batches_seen: 0,
            slicer: None,
        })
    }

    pub fn config(&self) -> &WatchConfig {
        &self.cfg
    }

    pub fn buffer(&self) -> &DistributionBuffer<T> {
        &self.buffer
    }

    /// Current threshold; `None` until the buffer holds `kappa` points.
    pub fn eta(&self) -> Option<T> {
        self.eta
    }

    pub fn change_points(&self) -> &[ChangePoint<T>] {
        &self.emitted
    }

    pub fn into_change_points(self) -> Vec<ChangePoint<T>> {
        self.emitted
    }

    pub fn samples_seen(&self) -> usize {
        self.batches_seen * self.cfg.omega
    }

    pub fn batches_seen(&self) -> usize {
        self.batches_seen
    }

    fn slicer_for(&mut self, dim: usize) -> Result<&Slicer<T>> {
        match &self.slicer {
            Some(s) if s.dim() != dim => Err(Error::invalid_input(format!(
                "batch dimension {dim} does not match stream dimension {}",
                s.dim()
            ))),
            Some(_) => Ok(self.slicer.as_ref().expect("checked above")),
            None => {
                self.slicer = Some(Slicer::new(dim, &self.cfg.distance)?);
                Ok(self.slicer.as_ref().expect("just set"))
            }
        }
    }

    /// Feeds one mini-batch of exactly `omega` points. Returns the change point
    /// emitted by this batch, if any.
    pub fn step(&mut self, batch: &PointSet<T>) -> Result<Option<ChangePoint<T>>> {
        if batch.len() != self.cfg.omega {
            return Err(Error::invalid_input(format!(
                "batch holds {} points, expected omega = {}",
                batch.len(),
                self.cfg.omega
            )));
        }
        let slicer = self.slicer_for(batch.dim())?.clone();
        let ordinal = self.batches_seen + 1;

        if self.buffer.total_points() < self.cfg.kappa {
            self.buffer.push(batch.clone(), Some(&slicer))?;
            if self.buffer.total_points() >= self.cfg.kappa {
                self.eta = Some(self.buffer.threshold_with(self.cfg.epsilon, &slicer, true)?);
            }
            self.batches_seen = ordinal;
            return Ok(None);
        }

        let eta = self.eta.expect("eta is set whenever the buffer is warm");
        let batch_sorted = slicer.project_sorted(batch)?;
        let distance = slicer.distance_from_sorted(&batch_sorted, &self.buffer.union_sorted(&slicer)?);

        let emitted = if distance > eta {
            let cp = ChangePoint {
                index: ordinal * self.cfg.omega,
                batch: ordinal,
                distance,
                threshold: eta,
            };
            self.buffer.clear();
            self.buffer.push(batch.clone(), Some(&slicer))?;
            // kappa >= 2·omega, so a single batch never re-activates detection.
            self.eta = None;
            self.emitted.push(cp.clone());
            Some(cp)
        } else {
            match self.cfg.eviction {
                Eviction::StopAdding => {
                    if self.buffer.total_points() + batch.len() <= self.cfg.mu {
                        self.buffer.push(batch.clone(), Some(&slicer))?;
                        self.eta = Some(self.buffer.threshold_with(self.cfg.epsilon, &slicer, true)?);
                    }
                }
                Eviction::Fifo => {
                    self.buffer.push(batch.clone(), Some(&slicer))?;
                    while self.buffer.total_points() > self.cfg.mu {
                        self.buffer.pop_oldest();
                    }
                    self.eta = Some(self.buffer.threshold_with(self.cfg.epsilon, &slicer, true)?);
                }
            }
            None
        };
        self.batches_seen = ordinal;
        Ok(emitted)
    }

    /// Feeds every complete batch of `series` in order, checking `deadline`
    /// between batches.
    pub fn run(&mut self, series: &PointSet<T>, deadline: Option<Instant>) -> Result<()> {
        let started = Instant::now();
        let omega = self.cfg.omega;
        for k in 0..series.len() / omega {
            if let Some(limit) = deadline {
                if Instant::now() >= limit {
                    return Err(Error::Timeout {
                        elapsed_secs: started.elapsed().as_secs_f64(),
                    });
                }
            }
            self.step(&series.slice(k * omega, (k + 1) * omega)?)?;
        }
        Ok(())
    }
}

/// Runs a fresh detector over `series`, split into `floor(T / omega)`
/// consecutive batches. A trailing partial batch is dropped.
pub fn process_series<T: Scalar>(series: &PointSet<T>, cfg: &WatchConfig) -> Result<Vec<ChangePoint<T>>> {
    process_series_until(series, cfg, None)
}

/// [`process_series`] with a wall-clock deadline checked between batches.
pub fn process_series_until<T: Scalar>(
    series: &PointSet<T>,
    cfg: &WatchConfig,
    deadline: Option<Instant>,
) -> Result<Vec<ChangePoint<T>>> {
    let mut detector = WatchDetector::new(cfg.clone())?;
    detector.run(series, deadline)?;
    Ok(detector.into_change_points())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wasserstein::{exact_1d_wasserstein, sliced_wasserstein};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cfg(kappa: usize, mu: usize, epsilon: f64, omega: usize) -> WatchConfig {
        WatchConfig {
            kappa,
            mu,
            epsilon,
            omega,
            distance: DistanceConfig::default(),
            eviction: Eviction::StopAdding,
        }
    }

    fn values(v: &[f64]) -> PointSet<f64> {
        PointSet::from_values(v).unwrap()
    }

    fn gaussian_stream(means: &[(usize, f64)], seed: u64) -> PointSet<f64> {
        gaussian_stream_d(means, 1, seed)
    }

    fn gaussian_stream_d(means: &[(usize, f64)], dim: usize, seed: u64) -> PointSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for &(len, mean) in means {
            let normal = Normal::new(mean, 1.0).unwrap();
            out.extend((0..len * dim).map(|_| normal.sample(&mut rng)));
        }
        PointSet::from_flat(out, dim).unwrap()
    }

    #[test]
    fn new_detector_validates_config() {
        let d = WatchDetector::<f64>::new(WatchConfig::default()).unwrap();
        assert_eq!(d.samples_seen(), 0);
        assert!(d.eta().is_none());
        assert!(d.change_points().is_empty());

        for bad in [
            cfg(60, 40, 1.0, 20),
            cfg(39, 600, 1.0, 20),
            cfg(60, 600, 0.0, 20),
            cfg(60, 600, -1.0, 20),
            cfg(60, 600, f64::NAN, 20),
            cfg(0, 0, 1.0, 0),
            cfg(50, 50, 1.0, 20),
        ] {
            assert!(
                matches!(WatchDetector::<f64>::new(bad.clone()), Err(Error::InvalidConfig(_))),
                "{bad:?} should be rejected"
            );
        }
        assert!(WatchDetector::<f64>::new(cfg(40, 40, 1.0, 20)).is_ok());
    }

    #[test]
    fn threshold_example() {
        let buffer =
            DistributionBuffer::from_batches([values(&[0.0, 0.0]), values(&[1.0, 1.0])]).unwrap();
        let dcfg = DistanceConfig {
            p: 1.0,
            ..DistanceConfig::default()
        };
        let eta: f64 = compute_threshold(&buffer, 2.0, &dcfg).unwrap();
        assert!((eta - 1.0).abs() < 1e-12);
        // Independent route: exact 1-D distance of each batch to the union.
        let union = [0.0, 0.0, 1.0, 1.0];
        let oracle = [0.0, 1.0]
            .iter()
            .map(|&v| exact_1d_wasserstein(&[v, v], &union, 1.0).unwrap())
            .fold(0.0, f64::max);
        assert!((eta - 2.0 * oracle).abs() < 1e-12);
    }

    #[test]
    fn threshold_of_identical_batches_is_zero_and_linear_in_epsilon() {
        let b = PointSet::from_rows(&[[0.5, 1.0], [2.0, -1.0], [3.0, 0.0]]).unwrap();
        let buffer = DistributionBuffer::from_batches(vec![b.clone(); 4]).unwrap();
        let dcfg = DistanceConfig::default();
        assert_eq!(compute_threshold(&buffer, 3.0, &dcfg).unwrap(), 0.0);

        let mixed = DistributionBuffer::from_batches([b.clone(), b.map(|v| v + 1.0).unwrap()]).unwrap();
        let base: f64 = compute_threshold(&mixed, 1.0, &dcfg).unwrap();
        assert!(base > 0.0);
        let scaled: f64 = compute_threshold(&mixed, 2.5, &dcfg).unwrap();
        assert!((scaled - 2.5 * base).abs() <= 1e-12 * scaled);
    }

    #[test]
    fn threshold_matches_direct_sliced_distances() {
        let stream = gaussian_stream(&[(12, 0.0), (6, 2.0)], 5);
        let stream = PointSet::from_flat(stream.as_flat().to_vec(), 3).unwrap();
        let batches: Vec<_> = (0..3).map(|k| stream.slice(2 * k, 2 * k + 2).unwrap()).collect();
        let buffer = DistributionBuffer::from_batches(batches.clone()).unwrap();
        let dcfg = DistanceConfig::default();
        let union = buffer.union().unwrap();
        let direct = batches
            .iter()
            .map(|b| sliced_wasserstein(b, &union, &dcfg).unwrap())
            .fold(0.0, f64::max);
        assert_eq!(compute_threshold(&buffer, 1.0, &dcfg).unwrap(), direct);
    }

    #[test]
    fn single_batch_threshold_is_degenerate() {
        let buffer = DistributionBuffer::from_batches([values(&[0.0, 1.0])]).unwrap();
        assert!(matches!(
            compute_threshold(&buffer, 1.0, &DistanceConfig::default()),
            Err(Error::DegenerateBuffer(_))
        ));
    }

    #[test]
    fn step_rejects_wrong_shapes() {
        let mut d = WatchDetector::<f64>::new(cfg(4, 8, 1.0, 2)).unwrap();
        assert!(matches!(d.step(&values(&[1.0])), Err(Error::InvalidInput(_))));
        d.step(&values(&[1.0, 2.0])).unwrap();
        let wide = PointSet::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert!(matches!(d.step(&wide), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constant_series_never_fires() {
        let series = values(&[3.25; 500]);
        for c in [cfg(4, 8, 0.1, 2), cfg(60, 200, 2.0, 20), cfg(40, 40, 1.0, 20)] {
            assert!(process_series(&series, &c).unwrap().is_empty());
        }
    }

    #[test]
    fn short_series_never_fires() {
        let series = gaussian_stream(&[(30, 0.0), (29, 50.0)], 1);
        assert!(process_series(&series, &cfg(60, 200, 0.5, 20)).unwrap().is_empty());
    }

    #[test]
    fn partial_trailing_batch_is_dropped() {
        let series = gaussian_stream(&[(59, 0.0)], 2);
        let mut d = WatchDetector::new(cfg(40, 200, 1.0, 20)).unwrap();
        d.run(&series, None).unwrap();
        assert_eq!(d.batches_seen(), 2);
        assert_eq!(d.samples_seen(), 40);
    }

    #[test]
    fn single_shift_detected_once() {
        let series = gaussian_stream_d(&[(200, 0.0), (200, 5.0)], 10, 11);
        let cps = process_series(&series, &cfg(60, 200, 2.0, 20)).unwrap();
        assert_eq!(cps.len(), 1, "{cps:?}");
        assert!((200..=240).contains(&cps[0].index));
    }

    #[test]
    fn first_trigger_matches_exact_1d_distance() {
        let series = gaussian_stream(&[(200, 0.0), (200, 5.0)], 11);
        let c = cfg(60, 200, 2.0, 20);
        let cps = process_series(&series, &c).unwrap();
        let cp = &cps[0];
        assert!((200..=240).contains(&cp.index));
        assert_eq!(cp.index, cp.batch * 20);
        assert!(cp.distance > cp.threshold);

        // The triggering batch's distance agrees with the exact 1-D route.
        let mut d = WatchDetector::new(c).unwrap();
        for k in 0..cp.batch - 1 {
            d.step(&series.slice(20 * k, 20 * k + 20).unwrap()).unwrap();
        }
        let buffered = d.buffer().union().unwrap();
        let trigger = series.slice(cp.index - 20, cp.index).unwrap();
        let oracle = exact_1d_wasserstein(trigger.as_flat(), buffered.as_flat(), 2.0).unwrap();
        assert!((cp.distance - oracle).abs() < 1e-9);
        let fired = d.step(&trigger).unwrap().unwrap();
        assert_eq!(&fired, cp);
        assert_eq!(d.buffer().n_batches(), 1);
        assert_eq!(d.buffer().batches().next().unwrap(), &trigger);
        assert!(d.eta().is_none());
    }

    #[test]
    fn two_shifts_detected() {
        let series = gaussian_stream_d(&[(200, 0.0), (200, 5.0), (200, 0.0)], 10, 11);
        let cps = process_series(&series, &cfg(60, 200, 2.0, 20)).unwrap();
        let idx: Vec<_> = cps.iter().map(|c| c.index).collect();
        assert_eq!(idx.len(), 2, "{idx:?}");
        assert!((200..=240).contains(&idx[0]));
        assert!((400..=440).contains(&idx[1]));
    }

    #[test]
    fn stop_adding_caps_buffer() {
        let series = gaussian_stream(&[(1000, 0.0)], 3);
        let c = cfg(60, 130, 50.0, 20);
        let mut d = WatchDetector::new(c).unwrap();
        let mut last = 0;
        for k in 0..50 {
            d.step(&series.slice(20 * k, 20 * k + 20).unwrap()).unwrap();
            let total = d.buffer().total_points();
            assert!(total <= 130);
            assert!(total >= last);
            last = total;
        }
        assert_eq!(last, 120);
    }

    #[test]
    fn fifo_keeps_most_recent_batches() {
        let series = gaussian_stream(&[(600, 0.0)], 4);
        let c = WatchConfig {
            eviction: Eviction::Fifo,
            ..cfg(40, 100, 50.0, 20)
        };
        let mut d = WatchDetector::new(c).unwrap();
        for k in 0..30 {
            d.step(&series.slice(20 * k, 20 * k + 20).unwrap()).unwrap();
            assert!(d.buffer().total_points() <= 100);
        }
        assert!(d.change_points().is_empty());
        let expected: Vec<_> = (25..30).map(|k| series.slice(20 * k, 20 * k + 20).unwrap()).collect();
        let held: Vec<_> = d.buffer().batches().cloned().collect();
        assert_eq!(held, expected);
    }

    #[test]
    fn deadline_in_the_past_times_out() {
        let series = gaussian_stream(&[(100, 0.0)], 4);
        let err = process_series_until(&series, &cfg(40, 100, 1.0, 20), Some(Instant::now()));
        assert!(matches!(err, Err(Error::Timeout { .. })));
    }

    #[test]
    fn runs_in_f32() {
        let series = gaussian_stream_d(&[(200, 0.0), (200, 5.0)], 10, 11);
        let series32 =
            PointSet::<f32>::from_flat(series.as_flat().iter().map(|&v| v as f32).collect(), 10).unwrap();
        let c = cfg(60, 200, 2.0, 20);
        let cps32 = process_series(&series32, &c).unwrap();
        let cps64 = process_series(&series, &c).unwrap();
        assert_eq!(cps32.len(), 1);
        assert_eq!(cps32[0].index, cps64[0].index);
        assert!(((cps32[0].distance as f64) - cps64[0].distance).abs() < 1e-4);
    }

    #[test]
    fn eviction_parses() {
        assert_eq!("fifo".parse::<Eviction>().unwrap(), Eviction::Fifo);
        assert_eq!("stop_adding".parse::<Eviction>().unwrap(), Eviction::StopAdding);
        assert!("lru".parse::<Eviction>().is_err());
        let json = serde_json::to_string(&Eviction::StopAdding).unwrap();
        assert_eq!(json, "\"stop_adding\"");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn emitted_points_are_spaced_and_aligned(
            seed in any::<u64>(),
            shift in 0.0f64..8.0,
            epsilon in 0.5f64..3.0,
            fifo in any::<bool>(),
        ) {
            let series = gaussian_stream(&[(100, 0.0), (100, shift), (100, 0.0)], seed);
            let c = WatchConfig {
                eviction: if fifo { Eviction::Fifo } else { Eviction::StopAdding },
                distance: DistanceConfig { n_projections: 4, ..DistanceConfig::default() },
                ..cfg(30, 60, epsilon, 10)
            };
            let cps = process_series(&series, &c).unwrap();
            for cp in &cps {
                prop_assert_eq!(cp.index % 10, 0);
                prop_assert!(cp.distance > cp.threshold);
            }
            for w in cps.windows(2) {
                // Refill to kappa (3 batches) before eta exists again.
                prop_assert!(w[1].batch - w[0].batch >= 3);
            }
            prop_assert_eq!(process_series(&series, &c).unwrap(), cps);
        }

        #[test]
        fn first_change_point_moves_later_with_epsilon(seed in any::<u64>(), e1 in 0.3f64..3.0, e2 in 0.3f64..3.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let series = gaussian_stream(&[(120, 0.0), (120, 1.5)], seed);
            let first = |eps| {
                let c = WatchConfig {
                    distance: DistanceConfig { n_projections: 4, ..DistanceConfig::default() },
                    ..cfg(30, 90, eps, 10)
                };
                process_series(&series, &c).unwrap().first().map(|c| c.index).unwrap_or(usize::MAX)
            };
            prop_assert!(first(lo) <= first(hi));
        }
    }
}
