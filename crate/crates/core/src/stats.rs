//! Summary statistics and the two-sample rank-sum test.

use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest pooled sample size for which p-values are enumerated exactly.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least 2 values (got {a} and {b})")]
    SampleTooSmall { a: usize, b: usize },
    #[error("samples contain non-finite values")]
    NonFinite,
}

/// Mid-ranks (1-based, ties averaged) of `values`.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            out.push(run);
            run = 1;
        }
    }
    out.push(run);
    out
}

/// Two-sided Wilcoxon-Mann-Whitney rank-sum p-value.
///
/// Pooled samples of up to [`EXACT_LIMIT`] values use the exact
/// permutation distribution of the mid-rank sum; larger samples use the
/// normal approximation with tie and continuity corrections. Samples that
/// are all identical give `p = 1`.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::SampleTooSmall {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().all(|&v| v == pooled[0]) {
        return Ok(1.0);
    }
    let ranks = mid_ranks(&pooled);
    if pooled.len() <= EXACT_LIMIT {
        Ok(exact_p(&ranks, a.len()))
    } else {
        Ok(normal_p(&pooled, &ranks, a.len()))
    }
}

/// Counts, by dynamic programming over doubled (hence integral) mid-ranks,
/// how many size-`na` subsets have a rank sum at least as far from its mean
/// as the observed one.
fn exact_p(ranks: &[f64], na: usize) -> f64 {
    let n = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; na + 1];
    counts[0][0] = 1;
    for &r in &doubled {
        for k in (1..=na).rev() {
            for s in (r..=max_sum).rev() {
                counts[k][s] += counts[k - 1][s - r];
            }
        }
    }
    // mean of the doubled sum is na (n + 1)
    let mean = (na * (n + 1)) as i64;
    let observed: i64 = doubled[..na].iter().sum::<usize>() as i64;
    let dev = (observed - mean).abs();
    let total: u64 = counts[na].iter().sum();
    let extreme: u64 = counts[na]
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - mean).abs() >= dev)
        .map(|(_, c)| c)
        .sum();
    (extreme as f64 / total as f64).min(1.0)
}

fn normal_p(pooled: &[f64], ranks: &[f64], na: usize) -> f64 {
    let n = pooled.len() as f64;
    let (na_f, nb_f) = (na as f64, n - na as f64);
    let rank_sum: f64 = ranks[..na].iter().sum();
    let u = rank_sum - na_f * (na_f + 1.0) / 2.0;
    let mean = na_f * nb_f / 2.0;
    let ties: f64 = tie_sizes(pooled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = na_f * nb_f / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
