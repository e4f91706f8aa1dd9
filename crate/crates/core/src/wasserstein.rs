// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wasserstein distances between empirical point sets.
//!
//! Three routes are provided:
//!
//! | Function | Inputs | Method |
//! |----------|--------|--------|
//! | [`exact_1d_wasserstein`] | 1-D samples, any sizes | quantile-function integration |
//! | [`sliced_wasserstein`] | d-dimensional sets | mean of exact 1-D distances over random unit directions |
//! | [`exact_ot_distance`] | equal-size sets, n ≤ 10 | permutation brute force |
//!
//! The sliced distance is the approximation used by the detector. The other two
//! are exact and serve as references for it.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest set size accepted by [`exact_ot_distance`].
pub const MAX_EXACT_OT_POINTS: usize = 10;

/// `n` points of dimension `d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T> {
    data: Vec<T>,
    n: usize,
    d: usize,
}

impl<T: Scalar> PointSet<T> {
    /// Builds a set from a flat row-major buffer of `n * dim` values.
    pub fn from_flat(data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid_input("point dimension must be >= 1"));
        }
        if data.is_empty() {
            return Err(Error::invalid_input("point set must contain at least one point"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid_input(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid_input(format!(
                "non-finite coordinate at point {}, dimension {}",
                pos / dim,
                pos % dim
            )));
        }
        let n = data.len() / dim;
        Ok(Self { data, n, d: dim })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::invalid_input(format!(
                    "point {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim)
    }

    /// One-dimensional set, one point per value.
    pub fn from_values(values: &[T]) -> Result<Self> {
        Self::from_flat(values.to_vec(), 1)
    }

    /// Concatenates sets of equal dimension, preserving order.
    pub fn concat<'a, I>(sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a PointSet<T>>,
    {
        let mut data = Vec::new();
        let mut dim = None;
        for set in sets {
            match dim {
                None => dim = Some(set.d),
                Some(d) if d != set.d => {
                    return Err(Error::invalid_input(format!(
                        "cannot concatenate sets of dimension {d} and {}",
                        set.d
                    )))
                }
                Some(_) => {}
            }
            data.extend_from_slice(&set.data);
        }
        Self::from_flat(data, dim.unwrap_or(0))
    }

    /// Contiguous rows `[start, end)` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(Error::invalid_input(format!(
                "row range [{start}, {end}) is empty or exceeds {} points",
                self.n
            )));
        }
        Ok(Self {
            data: self.data[start * self.d..end * self.d].to_vec(),
            n: end - start,
            d: self.d,
        })
    }

    /// Returns a copy with every coordinate mapped through `f`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_flat(self.data.iter().map(|&v| f(v)).collect(), self.d)
    }
}

impl<T> PointSet<T> {
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false: a point set holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }
}

/// Settings for the sliced approximation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceConfig {
    /// Order of the distance, `p >= 1`.
    #[serde(default = "DistanceConfig::default_p")]
    pub p: f64,
    #[serde(default = "DistanceConfig::default_n_projections")]
    pub n_projections: usize,
    #[serde(default = "DistanceConfig::default_seed")]
    pub seed: u64,
}

impl DistanceConfig {
    pub const DEFAULT_P: f64 = 2.0;
    pub const DEFAULT_N_PROJECTIONS: usize = 128;
    pub const DEFAULT_SEED: u64 = 42;

    fn default_p() -> f64 {
        Self::DEFAULT_P
    }

    fn default_n_projections() -> usize {
        Self::DEFAULT_N_PROJECTIONS
    }

    fn default_seed() -> u64 {
        Self::DEFAULT_SEED
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::invalid_config(format!(
                "distance order p must be finite and >= 1; got {}",
                self.p
            )));
        }
        if self.n_projections == 0 {
            return Err(Error::invalid_config("n_projections must be >= 1; got 0"));
        }
        Ok(())
    }
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self {
            p: Self::DEFAULT_P,
            n_projections: Self::DEFAULT_N_PROJECTIONS,
            seed: Self::DEFAULT_SEED,
        }
    }
}

fn validate_order<T: Scalar>(p: T) -> Result<()> {
    if p.is_finite() && p >= T::one() {
        Ok(())
    } else {
        Err(Error::invalid_input(format!("order p must be finite and >= 1; got {p}")))
    }
}

fn validate_samples<T: Scalar>(name: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid_input(format!("{name} is empty")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid_input(format!("{name}[{i}] is not finite")));
    }
    Ok(())
}

fn sort_finite<T: Scalar>(values: &mut [T]) {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
}

#[inline]
fn pow_abs<T: Scalar>(gap: T, p: T) -> T {
    let gap = gap.abs();
    if p == T::one() {
        gap
    } else if p == T::from_count(2) {
        gap * gap
    } else {
        gap.powf(p)
    }
}

#[inline]
fn root<T: Scalar>(value: T, p: T) -> T {
    if p == T::one() {
        value
    } else if p == T::from_count(2) {
        value.sqrt()
    } else {
        value.powf(p.recip())
    }
}

/// `∫₀¹ |F⁻¹(u) − G⁻¹(u)|ᵖ du` for two sorted, nonempty samples.
///
/// Quantile breakpoints `i/n` and `j/m` are compared as the integers `i·m` and
/// `j·n`, so the merged grid is exact for any pair of sizes.
pub(crate) fn sorted_cost<T: Scalar>(xs: &[T], ys: &[T], p: T) -> T {
    let (n, m) = (xs.len() as u64, ys.len() as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0u64;
    let mut acc = T::zero();
    while i < xs.len() && j < ys.len() {
        let next_x = (i as u64 + 1) * m;
        let next_y = (j as u64 + 1) * n;
        let next = next_x.min(next_y);
        acc = acc + T::from_count(next - prev) * pow_abs(xs[i] - ys[j], p);
        prev = next;
        if next_x == next {
            i += 1;
        }
        if next_y == next {
            j += 1;
        }
    }
    acc / T::from_count(n * m)
}

/// Exact p-Wasserstein distance between two 1-D empirical distributions.
///
/// Inputs need not be sorted or of equal size.
pub fn exact_1d_wasserstein<T: Scalar>(xs: &[T], ys: &[T], p: T) -> Result<T> {
    validate_samples("xs", xs)?;
    validate_samples("ys", ys)?;
    validate_order(p)?;
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    sort_finite(&mut xs);
    sort_finite(&mut ys);
    Ok(root(sorted_cost(&xs, &ys, p), p))
}

/// A fixed set of unit directions drawn from a [`DistanceConfig`].
///
const DIRECTION_STREAM: u64 = 0x5357_4c49_4345;

/// Every slicer built from the same `(dim, cfg)` holds bit-identical
/// directions, so projections cached under one slicer are valid for any other.
#[derive(Clone, Debug)]
pub struct Slicer<T> {
    directions: Vec<T>,
    dim: usize,
    p: T,
}

impl<T: Scalar> Slicer<T> {
    pub fn new(dim: usize, cfg: &DistanceConfig) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::invalid_input("slicer dimension must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // A dedicated stream keeps directions independent of data drawn from
        // a ChaCha8 generator with the same seed.
        rng.set_stream(DIRECTION_STREAM);
        let mut directions = Vec::with_capacity(cfg.n_projections * dim);
        let mut draw = vec![T::zero(); dim];
        for _ in 0..cfg.n_projections {
            loop {
                for v in draw.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *v = T::from_f64_lossy(g);
                }
                let norm = draw.iter().map(|&v| v * v).sum::<T>().sqrt();
                // A zero draw has probability zero, but would leave no direction.
                if norm > T::zero() && norm.is_finite() {
                    directions.extend(draw.iter().map(|&v| v / norm));
                    break;
                }
            }
        }
        Ok(Self {
            directions,
            dim,
            p: T::from_f64_lossy(cfg.p),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_projections(&self) -> usize {
        self.directions.len() / self.dim
    }

    pub fn direction(&self, k: usize) -> &[T] {
        &self.directions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn order(&self) -> T {
        self.p
    }

    fn check_dim(&self, set: &PointSet<T>) -> Result<()> {
        if set.dim() != self.dim {
            return Err(Error::invalid_input(format!(
                "dimension mismatch: slicer has {}, point set has {}",
                self.dim,
                set.dim()
            )));
        }
        Ok(())
    }

    /// Unsorted projections, one vector per direction.
    pub fn project(&self, set: &PointSet<T>) -> Result<Vec<Vec<T>>> {
        self.check_dim(set)?;
        Ok((0..self.n_projections())
            .map(|k| {
                let u = self.direction(k);
                set.rows()
                    .map(|x| x.iter().zip(u).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
                    .collect()
            })
            .collect())
    }

    /// Sorted projections, one vector per direction.
    pub fn project_sorted(&self, set: &PointSet<T>) -> Result<Vec<Vec<T>>> {
        let mut projections = self.project(set)?;
        for slice in projections.iter_mut() {
            sort_finite(slice);
        }
        Ok(projections)
    }

    /// Mean slice distance between two sets given their sorted projections.
    pub fn distance_from_sorted(&self, a: &[Vec<T>], b: &[Vec<T>]) -> T {
        debug_assert_eq!(a.len(), self.n_projections());
        debug_assert_eq!(b.len(), self.n_projections());
        let total = a
            .iter()
            .zip(b)
            .fold(T::zero(), |acc, (sa, sb)| acc + root(sorted_cost(sa, sb, self.p), self.p));
        total / T::from_count(a.len() as u64)
    }

    pub fn distance(&self, a: &PointSet<T>, b: &PointSet<T>) -> Result<T> {
        let pa = self.project_sorted(a)?;
        let pb = self.project_sorted(b)?;
        Ok(self.distance_from_sorted(&pa, &pb))
    }
}

/// Sliced p-Wasserstein distance: the mean over `cfg.n_projections` seeded
/// random unit directions of the exact 1-D distance between the projections.
pub fn sliced_wasserstein<T: Scalar>(
    a: &PointSet<T>,
    b: &PointSet<T>,
    cfg: &DistanceConfig,
) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::invalid_input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Slicer::new(a.dim(), cfg)?.distance(a, b)
}

fn euclidean<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt()
}

/// Exact p-Wasserstein distance between equal-size sets by enumerating every
/// matching. Exponential; meant as a reference for small instances only.
pub fn exact_ot_distance<T: Scalar>(a: &PointSet<T>, b: &PointSet<T>, p: T) -> Result<T> {
    validate_order(p)?;
    if a.dim() != b.dim() {
        return Err(Error::invalid_input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.len() != b.len() {
        return Err(Error::UnsupportedInstance(format!(
            "brute-force transport needs equal sizes; got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() > MAX_EXACT_OT_POINTS {
        return Err(Error::UnsupportedInstance(format!(
            "brute-force transport supports at most {MAX_EXACT_OT_POINTS} points; got {}",
            a.len()
        )));
    }
    let n = a.len();
    let cost: Vec<T> = (0..n * n)
        .map(|k| pow_abs(euclidean(a.row(k / n), b.row(k % n)), p))
        .collect();

    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = T::infinity();
    permute(&mut perm, 0, &mut |perm| {
        let total = perm
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &j)| acc + cost[i * n + j]);
        if total < best {
            best = total;
        }
    });
    Ok(root(best / T::from_count(n as u64), p))
}

fn permute(perm: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}
