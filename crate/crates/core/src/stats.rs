//! Goodness-of-fit statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// `sqrt(-ln(level/2)/2)`, the asymptotic Kolmogorov critical value.
pub fn ks_critical_value(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// One-sample KS threshold at the given level.
pub fn ks_threshold(n: usize, level: f64) -> f64 {
    ks_critical_value(level) / (n as f64).sqrt()
}

/// Two-sample KS threshold at the given level.
pub fn ks_threshold_two(n: usize, m: usize, level: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_critical_value(level) * ((n + m) / (n * m)).sqrt()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_x |F_emp(x) − F(x)|`, evaluated at the jump points of `F_emp`.
/// The sample need not be sorted.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = if sample.windows(2).all(|w| w[0] <= w[1]) { sample.to_vec() } else { sorted(sample) };
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `sup_x |F_a(x) − F_b(x)|` over the pooled sample, ties handled jointly.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic p-value of a KS distance `d` at effective size `n_eff`
/// (`n` for one sample, `nm/(n+m)` for two).
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    let lambda = (s + 0.12 + 0.11 / s) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against cell probabilities (which
/// must sum to one, within rounding).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} observed cells but {} probabilities",
            observed.len(),
            probs.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::domain("chi-square needs at least two cells"));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    if probs.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::domain("chi-square cell probabilities must be positive"));
    }
    let n = total as f64;
    let statistic: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// Merges cells from the right until every expected count is at least `min_expected`.
/// Returns the pooled observed counts and probabilities.
pub fn pool_cells(observed: &[u64], probs: &[f64], total: u64, min_expected: f64) -> (Vec<u64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut pr = Vec::new();
    let (mut o_acc, mut p_acc) = (0u64, 0.0f64);
    for (&o, &p) in observed.iter().zip(probs).rev() {
        o_acc += o;
        p_acc += p;
        if p_acc * total as f64 >= min_expected {
            obs.push(o_acc);
            pr.push(p_acc);
            o_acc = 0;
            p_acc = 0.0;
        }
    }
    if p_acc > 0.0 {
        match (obs.last_mut(), pr.last_mut()) {
            (Some(o), Some(p)) => {
                *o += o_acc;
                *p += p_acc;
            }
            _ => {
                obs.push(o_acc);
                pr.push(p_acc);
            }
        }
    }
    obs.reverse();
    pr.reverse();
    (obs, pr)
}

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Empirical CDF of `sample` at `z`.
pub fn ecdf(sorted_sample: &[f64], z: f64) -> f64 {
    sorted_sample.partition_point(|&x| x <= z) as f64 / sorted_sample.len() as f64
}
