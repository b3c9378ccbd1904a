//! Goodness-of-fit tests used by the validation checks.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::DiagnosticsError;

/// Smallest expected count per cell in a goodness-of-fit test.
pub const MIN_EXPECTED: f64 = 5.0;

/// Smallest combined count per cell in a two-sample test.
pub const MIN_COMBINED: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Pooled cells as half-open ranges `[start, end)` of the original index.
    pub cells: Vec<(usize, usize)>,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .expect("dof is positive")
        .sf(statistic)
}

/// Histogram of nonnegative integer values, indexed by value.
pub fn tabulate(values: &[usize]) -> Vec<u64> {
    let len = values.iter().max().map_or(0, |&m| m + 1);
    let mut hist = vec![0u64; len];
    for &v in values {
        hist[v] += 1;
    }
    hist
}

/// Pearson test of `observed` against `probabilities`, pooling adjacent cells
/// until every expected count reaches [`MIN_EXPECTED`].
///
/// Observed entries past the end of `probabilities` are an error since they
/// have probability zero.
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64]) -> Result<ChiSquareTest, DiagnosticsError> {
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(DiagnosticsError::InsufficientData("no observations".into()));
    }
    if let Some(i) = (probabilities.len()..observed.len()).find(|&i| observed[i] > 0) {
        return Err(DiagnosticsError::Parameter(format!(
            "observed value {i} has zero probability"
        )));
    }
    let n = total as f64;
    let len = probabilities.len();
    let mut cells: Vec<(usize, usize, f64, u64)> = Vec::new();
    let (mut start, mut expected, mut count) = (0usize, 0.0f64, 0u64);
    for (i, p) in probabilities.iter().enumerate() {
        expected += p * n;
        count += observed.get(i).copied().unwrap_or(0);
        if expected >= MIN_EXPECTED {
            cells.push((start, i + 1, expected, count));
            start = i + 1;
            expected = 0.0;
            count = 0;
        }
    }
    if start < len {
        match cells.last_mut() {
            Some(last) => {
                last.1 = len;
                last.2 += expected;
                last.3 += count;
            }
            None => cells.push((start, len, expected, count)),
        }
    }
    let statistic = cells
        .iter()
        .map(|&(_, _, e, o)| if e > 0.0 { (o as f64 - e).powi(2) / e } else { 0.0 })
        .sum();
    let dof = cells.len().saturating_sub(1);
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
        cells: cells.iter().map(|&(a, b, _, _)| (a, b)).collect(),
    })
}

/// Contingency-table test that two histograms share one distribution,
/// pooling adjacent cells until each combined count reaches [`MIN_COMBINED`].
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> Result<ChiSquareTest, DiagnosticsError> {
    let (na, nb): (u64, u64) = (a.iter().sum(), b.iter().sum());
    if na == 0 || nb == 0 {
        return Err(DiagnosticsError::InsufficientData("empty sample".into()));
    }
    let len = a.len().max(b.len());
    let at = |h: &[u64], i: usize| h.get(i).copied().unwrap_or(0);
    let mut cells: Vec<(usize, usize, u64, u64)> = Vec::new();
    let (mut start, mut ca, mut cb) = (0usize, 0u64, 0u64);
    for i in 0..len {
        ca += at(a, i);
        cb += at(b, i);
        if ca + cb >= MIN_COMBINED {
            cells.push((start, i + 1, ca, cb));
            start = i + 1;
            ca = 0;
            cb = 0;
        }
    }
    if start < len {
        match cells.last_mut() {
            Some(last) => {
                last.1 = len;
                last.2 += ca;
                last.3 += cb;
            }
            None => cells.push((start, len, ca, cb)),
        }
    }
    let total = (na + nb) as f64;
    let (fa, fb) = (na as f64 / total, nb as f64 / total);
    let statistic = cells
        .iter()
        .map(|&(_, _, oa, ob)| {
            let row = (oa + ob) as f64;
            let (ea, eb) = (row * fa, row * fb);
            (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb
        })
        .sum();
    let dof = cells.len().saturating_sub(1);
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
        cells: cells.iter().map(|&(s, e, _, _)| (s, e)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test<F>(samples: &[f64], cdf: F) -> Result<KsTest, DiagnosticsError>
where
    F: Fn(f64) -> f64,
{
    if samples.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    Ok(KsTest {
        statistic,
        p_value: kolmogorov_sf(lambda),
    })
}

/// Kolmogorov–Smirnov test of exponential(`rate`) samples.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsTest, DiagnosticsError> {
    ks_test(samples, |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() })
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Sample mean and variance (`n - 1` denominator).
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Bootstrap standard error of the sample variance.
pub fn bootstrap_variance_se<R: Rng + ?Sized>(values: &[f64], resamples: usize, rng: &mut R) -> f64 {
    if values.len() < 2 || resamples < 2 {
        return f64::NAN;
    }
    let mut draw = vec![0.0; values.len()];
    let variances: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in draw.iter_mut() {
                *slot = values[rng.random_range(0..values.len())];
            }
            mean_variance(&draw).1
        })
        .collect();
    mean_variance(&variances).1.sqrt()
}
