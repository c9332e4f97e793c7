//! Brute-force reference computations.
//!
//! Everything here enumerates rankings directly and recomputes distances pair
//! by pair; nothing goes through the partition cache or the class tables.
#![allow(dead_code)]

use partial_mallows::rankings::PartialRanking;

/// All stage vectors of `{1..l}^n` in lexicographic order.
pub fn all_rankings(n: usize, l: u8) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u8>| {
                (1..=l).map(move |s| {
                    let mut v = prefix.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    out
}

/// Pairwise distance; `None` entries drop their pairs.
pub fn distance(x: &[Option<u8>], y: &[Option<u8>], p: f64) -> f64 {
    let mut d = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (Some(xi), Some(xj), Some(yi), Some(yj)) = (x[i], x[j], y[i], y[j]) else {
                continue;
            };
            let a = xi as i32 - xj as i32;
            let b = yi as i32 - yj as i32;
            if a == 0 && b == 0 {
                continue;
            }
            if a == 0 || b == 0 {
                d += p;
            } else if a.signum() != b.signum() {
                d += 1.0;
            }
        }
    }
    d
}

pub fn complete_distance(x: &[u8], y: &[u8], p: f64) -> f64 {
    let wrap = |v: &[u8]| v.iter().map(|&s| Some(s)).collect::<Vec<_>>();
    distance(&wrap(x), &wrap(y), p)
}

pub fn psi(center: &[u8], l: u8, lambda: f64, p: f64) -> f64 {
    all_rankings(center.len(), l)
        .iter()
        .map(|x| (-complete_distance(x, center, p) / lambda).exp())
        .sum()
}

pub fn log_pmf(x: &[u8], center: &[u8], l: u8, lambda: f64, p: f64) -> f64 {
    -complete_distance(x, center, p) / lambda - psi(center, l, lambda, p).ln()
}

/// Restricted-normalization log-likelihood of one respondent.
pub fn respondent_log_lik(x: &PartialRanking, center: &[u8], l: u8, lambda: f64, p: f64) -> f64 {
    let observed = x.observed();
    let obs: Vec<u8> = observed.iter().map(|&i| x.stages()[i].unwrap()).collect();
    let sub: Vec<u8> = observed.iter().map(|&i| center[i]).collect();
    log_pmf(&obs, &sub, l, lambda, p)
}

pub fn log_lik(data: &[PartialRanking], center: &[u8], l: u8, lambda: f64, p: f64) -> f64 {
    data.iter()
        .map(|x| respondent_log_lik(x, center, l, lambda, p))
        .sum()
}

/// Log density of Normal(0, 1) truncated to (0, inf).
pub fn log_half_normal(lambda: f64) -> f64 {
    (2.0f64).ln() - 0.5 * lambda * lambda - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Joint log-posterior with coupled prior spread.
pub fn log_post(
    data: &[PartialRanking],
    center: &[u8],
    prior_center: &[u8],
    l: u8,
    lambda: f64,
    p: f64,
) -> f64 {
    log_lik(data, center, l, lambda, p) + log_half_normal(lambda) + log_pmf(center, prior_center, l, lambda, p)
}

/// Posterior over centers with lambda integrated out by the trapezoid rule on
/// `points` equally spaced values in `(0, upper]` (plus 0, where the density vanishes).
pub fn center_posterior(
    data: &[PartialRanking],
    prior_center: &[u8],
    n: usize,
    l: u8,
    p: f64,
    upper: f64,
    points: usize,
) -> Vec<(Vec<u8>, f64)> {
    let h = upper / points as f64;
    let centers = all_rankings(n, l);
    let mut logs: Vec<Vec<f64>> = Vec::new();
    let mut global_max = f64::NEG_INFINITY;
    for c in &centers {
        let row: Vec<f64> = (1..=points)
            .map(|k| log_post(data, c, prior_center, l, k as f64 * h, p))
            .collect();
        global_max = row.iter().copied().fold(global_max, f64::max);
        logs.push(row);
    }
    let masses: Vec<f64> = logs
        .iter()
        .map(|row| {
            let mut s = 0.0;
            for (k, &v) in row.iter().enumerate() {
                let w = if k + 1 == points { 0.5 } else { 1.0 };
                s += w * (v - global_max).exp();
            }
            s * h
        })
        .collect();
    let total: f64 = masses.iter().sum();
    centers
        .into_iter()
        .zip(masses)
        .map(|(c, m)| (c, m / total))
        .collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pearson chi-square statistic of observed counts against expected probabilities.
pub fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

/// Upper 0.001 quantile of the chi-square distribution with 26 degrees of freedom.
pub const CHI2_999_DF26: f64 = 54.05196238857664;
