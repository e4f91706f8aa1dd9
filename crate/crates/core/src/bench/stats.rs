// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rank aggregation and multiple-comparison statistics.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Ranks one row of scores, higher is better. Ties share the mean of their
/// ranks; missing entries tie for last place.
pub fn rank_row(scores: &[Option<f64>]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Present scores descending, then missing.
    order.sort_by(|&a, &b| match (scores[a], scores[b]) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) hold ranks i+1..=j.
        let shared = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = shared;
        }
        i = j;
    }
    ranks
}

/// Mean rank of each method (column) over datasets (rows).
pub fn average_ranks(table: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
    let width = table
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid_input("score table is empty"))?;
    let mut sums = vec![0.0; width];
    for (r, row) in table.iter().enumerate() {
        if row.len() != width {
            return Err(Error::invalid_input(format!(
                "row {r} has {} entries, expected {width}",
                row.len()
            )));
        }
        let finite = row.iter().filter(|v| v.is_some_and(f64::is_finite)).count();
        if finite < 2 {
            return Err(Error::invalid_input(format!(
                "row {r} has {finite} finite scores; at least 2 are required"
            )));
        }
        if row.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input(format!("row {r} holds a non-finite score")));
        }
        for (s, r) in sums.iter_mut().zip(rank_row(row)) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / table.len() as f64).collect())
}

/// Holm step-down adjustment. Output is in input order.
pub fn holm_adjust(pvalues: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid_input(format!("p-value {p} is outside [0, 1]")));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &k) in order.iter().enumerate() {
        let scaled = ((m - j) as f64 * pvalues[k]).min(1.0);
        running = running.max(scaled);
        adjusted[k] = running;
    }
    Ok(adjusted)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FriedmanTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub n_datasets: usize,
    pub n_methods: usize,
}

/// Friedman chi-square statistic computed from mean ranks over `n_datasets`.
pub fn friedman_test(mean_ranks: &[f64], n_datasets: usize) -> Result<FriedmanTest> {
    let k = mean_ranks.len();
    if k < 2 || n_datasets == 0 {
        return Err(Error::invalid_input(
            "Friedman test needs at least two methods and one dataset",
        ));
    }
    let (kf, nf) = (k as f64, n_datasets as f64);
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new((k - 1) as f64).expect("df >= 1");
    Ok(FriedmanTest {
        statistic,
        df: k - 1,
        p_value: (1.0 - chi.cdf(statistic)).clamp(0.0, 1.0),
        n_datasets,
        n_methods: k,
    })
}

/// Name recorded alongside pairwise p-values.
pub const POSTHOC_METHOD: &str =
    "two-sided z-test on mean-rank differences, z = |Ri - Rj| / sqrt(k(k+1)/(6N)), Holm-adjusted";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub method_a: usize,
    pub method_b: usize,
    pub p_raw: f64,
    pub p_holm: f64,
}

/// All-pairs post-hoc comparison of mean ranks, Holm-adjusted.
pub fn pairwise_rank_tests(mean_ranks: &[f64], n_datasets: usize) -> Result<Vec<PairwiseComparison>> {
    let k = mean_ranks.len();
    if k < 2 || n_datasets == 0 {
        return Err(Error::invalid_input(
            "pairwise tests need at least two methods and one dataset",
        ));
    }
    let se = ((k * (k + 1)) as f64 / (6.0 * n_datasets as f64)).sqrt();
    let normal = Normal::standard();
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let z = (mean_ranks[a] - mean_ranks[b]).abs() / se;
            let p = (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0);
            pairs.push((a, b));
            raw.push(p);
        }
    }
    let adjusted = holm_adjust(&raw)?;
    Ok(pairs
        .into_iter()
        .zip(raw.into_iter().zip(adjusted))
        .map(|((method_a, method_b), (p_raw, p_holm))| PairwiseComparison {
            method_a,
            method_b,
            p_raw,
            p_holm,
        })
        .collect())
}
