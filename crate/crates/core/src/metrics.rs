// SPDX-License-Identifier: MIT OR Apache-2.0

//! Segmentation metrics against one or more annotators: margin-matched
//! precision/recall/F1 and the covering metric.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance, in samples, for matching a prediction to a true change.
pub const DEFAULT_MARGIN: usize = 5;

fn check_increasing(name: &str, cps: &[usize], upper: usize) -> Result<()> {
    for w in cps.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::invalid_input(format!(
                "{name} must be strictly increasing; found {} before {}",
                w[0], w[1]
            )));
        }
    }
    if let Some(&last) = cps.last() {
        if last >= upper {
            return Err(Error::invalid_input(format!(
                "{name} index {last} is outside [0, {upper})"
            )));
        }
    }
    Ok(())
}

/// Ground-truth change points from one or more annotators over a series of
/// length `series_length`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    annotators: BTreeMap<String, Vec<usize>>,
    series_length: usize,
}

impl AnnotationSet {
    pub fn new(annotators: BTreeMap<String, Vec<usize>>, series_length: usize) -> Result<Self> {
        if series_length == 0 {
            return Err(Error::invalid_input("series length must be >= 1"));
        }
        for (id, cps) in &annotators {
            check_increasing(&format!("annotator {id:?}"), cps, series_length)?;
        }
        Ok(Self {
            annotators,
            series_length,
        })
    }

    /// A single annotator named `id`.
    pub fn single(id: impl Into<String>, cps: Vec<usize>, series_length: usize) -> Result<Self> {
        Self::new(BTreeMap::from([(id.into(), cps)]), series_length)
    }

    pub fn series_length(&self) -> usize {
        self.series_length
    }

    pub fn annotators(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.annotators
    }

    pub fn len(&self) -> usize {
        self.annotators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotators.is_empty()
    }

    fn require_annotators(&self) -> Result<()> {
        if self.annotators.is_empty() {
            return Err(Error::invalid_input("annotation set has no annotators"));
        }
        Ok(())
    }
}

/// Contiguous, disjoint, nonempty half-open segments covering `[0, T)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    segments: Vec<Range<usize>>,
}

impl Partition {
    pub fn segments(&self) -> &[Range<usize>] {
        &self.segments
    }

    pub fn series_length(&self) -> usize {
        self.segments.last().map(|s| s.end).unwrap_or(0)
    }
}

/// Cuts `[0, T)` at every change point. Change points must be strictly
/// increasing and lie in `(0, T)`.
pub fn partition_from_changepoints(cps: &[usize], series_length: usize) -> Result<Partition> {
    if series_length == 0 {
        return Err(Error::invalid_input("series length must be >= 1"));
    }
    check_increasing("change points", cps, series_length)?;
    if cps.first() == Some(&0) {
        return Err(Error::invalid_input("change points must lie in (0, T); got 0"));
    }
    let mut segments = Vec::with_capacity(cps.len() + 1);
    let mut start = 0;
    for &cp in cps.iter().chain(std::iter::once(&series_length)) {
        segments.push(start..cp);
        start = cp;
    }
    Ok(Partition { segments })
}

/// Intersection over union of two index intervals.
pub fn jaccard(a: &Range<usize>, b: &Range<usize>) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::invalid_input("jaccard of two empty sets is undefined"));
    }
    let inter = a.end.min(b.end).saturating_sub(a.start.max(b.start));
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// How well `predicted` covers `truth`:
/// `(1/T) Σ_{A in truth} |A| · max_{A' in predicted} J(A, A')`.
pub fn cover_partition(predicted: &Partition, truth: &Partition) -> Result<f64> {
    let t = truth.series_length();
    if predicted.series_length() != t {
        return Err(Error::invalid_input(format!(
            "partitions cover different lengths: {} vs {t}",
            predicted.series_length()
        )));
    }
    let mut total = 0.0;
    // Both segment lists are sorted; only overlapping segments have J > 0.
    let mut first = 0;
    for a in truth.segments() {
        while predicted.segments[first].end <= a.start {
            first += 1;
        }
        let mut best = 0.0f64;
        for b in predicted.segments[first..].iter().take_while(|b| b.start < a.end) {
            best = best.max(jaccard(a, b)?);
        }
        total += a.len() as f64 * best;
    }
    Ok(total / t as f64)
}

fn annotator_partition(cps: &[usize], series_length: usize) -> Result<Partition> {
    let inner: Vec<usize> = cps.iter().copied().filter(|&c| c != 0).collect();
    partition_from_changepoints(&inner, series_length)
}

/// Mean over annotators of the covering of each annotator's partition by
/// `predicted`.
pub fn covering(predicted: &Partition, truth: &AnnotationSet) -> Result<f64> {
    truth.require_annotators()?;
    if predicted.series_length() != truth.series_length() {
        return Err(Error::invalid_input(format!(
            "prediction covers {} samples but annotations cover {}",
            predicted.series_length(),
            truth.series_length()
        )));
    }
    let mut sum = 0.0;
    for cps in truth.annotators.values() {
        sum += cover_partition(predicted, &annotator_partition(cps, truth.series_length)?)?;
    }
    Ok(sum / truth.len() as f64)
}

/// [`covering`] for a predicted change point list.
pub fn covering_from_changepoints(predicted: &[usize], truth: &AnnotationSet) -> Result<f64> {
    let inner: Vec<usize> = predicted.iter().copied().filter(|&c| c != 0).collect();
    covering(&partition_from_changepoints(&inner, truth.series_length())?, truth)
}

fn with_origin(cps: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(cps.len() + 1);
    out.push(0);
    out.extend(cps.iter().copied().filter(|&c| c != 0));
    out
}

/// One-to-one matching of sorted `predicted` to sorted `truth`, where a pair
/// matches when `|x - t| <= margin`. Returns the matched prediction positions.
///
/// Each true point takes the earliest still-unmatched prediction inside its
/// window. With equal-width windows over sorted points this yields a maximum
/// matching.
pub fn match_within_margin(predicted: &[usize], truth: &[usize], margin: usize) -> Vec<usize> {
    let mut matched = Vec::new();
    let mut j = 0;
    for &t in truth {
        while j < predicted.len() && predicted[j] + margin < t {
            j += 1;
        }
        if j < predicted.len() && predicted[j] <= t + margin {
            matched.push(j);
            j += 1;
        }
    }
    matched
}

/// Margin-matched precision and recall against every annotator.
///
/// Index 0 is added to the prediction and to every annotator before matching.
/// A prediction is a true positive when some annotator matches it; recall is
/// the mean over annotators of the fraction of that annotator's points matched.
pub fn precision_recall(predicted: &[usize], truth: &AnnotationSet, margin: usize) -> Result<(f64, f64)> {
    truth.require_annotators()?;
    check_increasing("predicted change points", predicted, truth.series_length())?;
    let preds = with_origin(predicted);
    let mut is_tp = vec![false; preds.len()];
    let mut recall_sum = 0.0;
    for cps in truth.annotators.values() {
        let truth_cps = with_origin(cps);
        let matched = match_within_margin(&preds, &truth_cps, margin);
        for &k in &matched {
            is_tp[k] = true;
        }
        recall_sum += matched.len() as f64 / truth_cps.len() as f64;
    }
    let tp = is_tp.iter().filter(|&&m| m).count();
    Ok((tp as f64 / preds.len() as f64, recall_sum / truth.len() as f64))
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f1: f64,
    pub cover: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Every metric for one prediction.
pub fn evaluate(predicted: &[usize], truth: &AnnotationSet, margin: usize) -> Result<Scores> {
    let (precision, recall) = precision_recall(predicted, truth, margin)?;
    Ok(Scores {
        f1: f1(precision, recall),
        cover: covering_from_changepoints(predicted, truth)?,
        precision,
        recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(cps: &[usize], t: usize) -> AnnotationSet {
        AnnotationSet::single("a", cps.to_vec(), t).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn partition_examples() {
        let seg = |cps: &[usize]| partition_from_changepoints(cps, 10).unwrap().segments().to_vec();
        assert_eq!(seg(&[]), vec![0..10]);
        assert_eq!(seg(&[5]), vec![0..5, 5..10]);
        assert_eq!(seg(&[3, 7]), vec![0..3, 3..7, 7..10]);
        assert!(partition_from_changepoints(&[7, 3], 10).is_err());
        assert!(partition_from_changepoints(&[10], 10).is_err());
        assert!(partition_from_changepoints(&[0], 10).is_err());
        assert!(partition_from_changepoints(&[4, 4], 10).is_err());
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&(0..50), &(0..50)).unwrap(), 1.0);
        assert_eq!(jaccard(&(0..50), &(50..100)).unwrap(), 0.0);
        assert!(close(jaccard(&(0..50), &(0..60)).unwrap(), 50.0 / 60.0));
        assert!(jaccard(&(3..3), &(5..5)).is_err());
    }

    #[test]
    fn covering_examples() {
        let truth = one(&[50], 100);
        let cover = |cps: &[usize]| {
            covering(&partition_from_changepoints(cps, 100).unwrap(), &truth).unwrap()
        };
        assert_eq!(cover(&[50]), 1.0);
        assert!(close(cover(&[60]), 0.5 * 50.0 / 60.0 + 0.5 * 40.0 / 50.0));
        assert!((cover(&[60]) - 0.816667).abs() < 5e-7);
        assert!(close(cover(&[]), 0.5));
    }

    #[test]
    fn covering_averages_annotators_and_checks_length() {
        let truth = AnnotationSet::new(
            BTreeMap::from([("a".into(), vec![50]), ("b".into(), vec![])]),
            100,
        )
        .unwrap();
        let pred = partition_from_changepoints(&[50], 100).unwrap();
        // Annotator b's single segment is best covered by a half: J = 0.5.
        assert!(close(covering(&pred, &truth).unwrap(), 0.75));
        let short = partition_from_changepoints(&[50], 90).unwrap();
        assert!(covering(&short, &truth).is_err());
    }

    #[test]
    fn precision_recall_examples() {
        assert_eq!(precision_recall(&[100], &one(&[102], 200), 5).unwrap(), (1.0, 1.0));
        assert_eq!(precision_recall(&[], &one(&[50], 200), 5).unwrap(), (1.0, 0.5));
        let two = AnnotationSet::new(
            BTreeMap::from([("1".into(), vec![100]), ("2".into(), vec![])]),
            200,
        )
        .unwrap();
        assert_eq!(precision_recall(&[100], &two, 5).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn margin_zero_rejects_off_by_one() {
        let truth = one(&[50], 100);
        assert_eq!(precision_recall(&[51], &truth, 0).unwrap(), (0.5, 0.5));
        assert_eq!(precision_recall(&[51], &truth, 1).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(1.0, 1.0), 1.0);
        assert!((f1(1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn matching_prefers_count_over_nearest_pair() {
        // Nearest-pair greedy would take (5, 6) and strand both 0 and 11.
        assert_eq!(match_within_margin(&[5, 11], &[0, 6], 5).len(), 2);
        assert_eq!(match_within_margin(&[2, 7], &[5, 12], 5).len(), 2);
    }

    #[test]
    fn invalid_annotations_rejected() {
        assert!(AnnotationSet::single("a", vec![5, 3], 10).is_err());
        assert!(AnnotationSet::single("a", vec![10], 10).is_err());
        assert!(AnnotationSet::new(BTreeMap::new(), 0).is_err());
        let empty = AnnotationSet::new(BTreeMap::new(), 10).unwrap();
        assert!(precision_recall(&[], &empty, 5).is_err());
        assert!(precision_recall(&[12], &one(&[], 10), 5).is_err());
    }

    fn subset(max: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::btree_set(1..max, 0..6).prop_map(|s| s.into_iter().collect())
    }

    // Maximum bipartite matching by trying every assignment.
    fn brute_max_matching(preds: &[usize], truth: &[usize], margin: usize) -> usize {
        fn go(i: usize, preds: &[usize], truth: &[usize], used: &mut Vec<bool>, margin: usize) -> usize {
            if i == preds.len() {
                return 0;
            }
            let mut best = go(i + 1, preds, truth, used, margin);
            for k in 0..truth.len() {
                if !used[k] && preds[i].abs_diff(truth[k]) <= margin {
                    used[k] = true;
                    best = best.max(1 + go(i + 1, preds, truth, used, margin));
                    used[k] = false;
                }
            }
            best
        }
        go(0, preds, truth, &mut vec![false; truth.len()], margin)
    }

    proptest! {
        #[test]
        fn matching_is_maximum(p in subset(40), t in subset(40), margin in 0usize..8) {
            prop_assert_eq!(match_within_margin(&p, &t, margin).len(), brute_max_matching(&p, &t, margin));
        }

        #[test]
        fn metrics_in_unit_interval(p in subset(60), t1 in subset(60), t2 in subset(60), margin in 0usize..6) {
            let truth = AnnotationSet::new(BTreeMap::from([("x".into(), t1), ("y".into(), t2)]), 60).unwrap();
            let s = evaluate(&p, &truth, margin).unwrap();
            for v in [s.f1, s.cover, s.precision, s.recall] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn self_cover_is_one(cps in subset(80)) {
            let part = partition_from_changepoints(&cps, 80).unwrap();
            prop_assert_eq!(covering(&part, &one(&cps, 80)).unwrap(), 1.0);
        }

        #[test]
        fn f1_symmetric_and_monotone(p in 0.0f64..=1.0, r in 0.0f64..=1.0, dp in 0.0f64..0.5) {
            prop_assert_eq!(f1(p, r), f1(r, p));
            prop_assert!(f1((p + dp).min(1.0), r) >= f1(p, r) - 1e-15);
        }

        #[test]
        fn unmatched_prediction_lowers_precision_only(p in subset(50), t in subset(50), margin in 0usize..4) {
            let truth = one(&t, 200);
            let (p0, r0) = precision_recall(&p, &truth, margin).unwrap();
            let mut extra = p.clone();
            extra.push(150);
            let (p1, r1) = precision_recall(&extra, &truth, margin).unwrap();
            prop_assert!(p1 < p0);
            prop_assert_eq!(r1, r0);
        }
    }
}
