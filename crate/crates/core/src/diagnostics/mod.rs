//! Empirical summaries of sample batches.

pub mod stats;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cftp::SampleReport;
use crate::kernel::{Point, Window};

pub const DEFAULT_RMAX: f64 = 0.125;
pub const DEFAULT_NBINS: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcfEstimate {
    pub bin_centers: Vec<f64>,
    pub g_hat: Vec<f64>,
    /// Unordered pairs per bin, before edge correction.
    pub counts: Vec<u64>,
    /// Bin width.
    pub bandwidth: f64,
    pub intensity: f64,
    pub patterns: usize,
}

/// Translation-corrected pair correlation estimate pooled over `patterns`.
///
/// Each ordered pair at displacement `(dx, dy)` is weighted by
/// `1 / ((s - |dx|)(s - |dy|))`, the inverse area of the window intersected
/// with its translate. The intensity is the batch mean count over the area.
pub fn estimate_pcf(
    patterns: &[Vec<Point>],
    window: &Window,
    rmax: f64,
    nbins: usize,
) -> Result<PcfEstimate, DiagnosticsError> {
    let side = window.side();
    if !(rmax > 0.0 && rmax <= 0.5 * side) {
        return Err(DiagnosticsError::Parameter(format!(
            "rmax must be in (0, {}], got {rmax}",
            0.5 * side
        )));
    }
    if nbins < 4 {
        return Err(DiagnosticsError::Parameter(format!("nbins must be at least 4, got {nbins}")));
    }
    if patterns.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no patterns".into()));
    }
    let total: usize = patterns.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(DiagnosticsError::InsufficientData("all patterns are empty".into()));
    }

    let width = rmax / nbins as f64;
    let mut weights = vec![0.0; nbins];
    let mut counts = vec![0u64; nbins];
    for pattern in patterns {
        for (i, p) in pattern.iter().enumerate() {
            for q in &pattern[i + 1..] {
                let (dx, dy) = ((p.x - q.x).abs(), (p.y - q.y).abs());
                let r = dx.hypot(dy);
                if r >= rmax {
                    continue;
                }
                let bin = ((r / width) as usize).min(nbins - 1);
                counts[bin] += 1;
                weights[bin] += 2.0 / ((side - dx) * (side - dy));
            }
        }
    }

    let n_patterns = patterns.len() as f64;
    let intensity = total as f64 / (n_patterns * window.area());
    let bin_centers: Vec<f64> = (0..nbins).map(|b| (b as f64 + 0.5) * width).collect();
    let g_hat = weights
        .iter()
        .zip(&bin_centers)
        .map(|(w, r)| w / (n_patterns * intensity * intensity * 2.0 * PI * r * width))
        .collect();
    Ok(PcfEstimate {
        bin_centers,
        g_hat,
        counts,
        bandwidth: width,
        intensity,
        patterns: patterns.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub replications: usize,
    pub mean: f64,
    /// Sample variance with the `n - 1` denominator.
    pub variance: f64,
    /// Relative frequency of each count.
    pub pmf_hat: Vec<f64>,
    /// Raw frequency of each count.
    pub histogram: Vec<u64>,
}

pub fn count_summary(counts: &[usize]) -> Result<CountSummary, DiagnosticsError> {
    if counts.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no counts".into()));
    }
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, variance) = stats::mean_variance(&values);
    let histogram = stats::tabulate(counts);
    let n = counts.len() as f64;
    Ok(CountSummary {
        replications: counts.len(),
        mean,
        variance,
        pmf_hat: histogram.iter().map(|&h| h as f64 / n).collect(),
        histogram,
    })
}

pub fn report_counts(reports: &[SampleReport]) -> Vec<usize> {
    reports.iter().map(SampleReport::count).collect()
}

/// The timing fields of one successful run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub stopping_depth: f64,
    pub coalescence_time: f64,
    /// `|D_{-N}|`, the dominating state at the start of the successful pass.
    pub initial_count: usize,
}

impl From<&SampleReport> for TimingRecord {
    fn from(report: &SampleReport) -> Self {
        Self {
            stopping_depth: report.stopping_depth,
            coalescence_time: report.coalescence_time,
            initial_count: report.initial_count,
        }
    }
}

impl TimingRecord {
    /// Time from the start of the pass until `L = U`.
    pub fn coalescence_duration(&self) -> f64 {
        self.coalescence_time + self.stopping_depth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    /// Coalescence durations in equal-width bins.
    pub coalescence_histogram: Vec<HistogramBin>,
    /// Stopping depths, one entry per distinct depth.
    pub stopping_histogram: Vec<(f64, u64)>,
    pub median_stopping_depth: f64,
    /// `m · max(ln m, 1)` with `m = H · area`.
    pub bound: f64,
    pub bound_ratio: f64,
    pub mean_coalescence_duration: f64,
    pub mean_initial_count: f64,
    /// Whether the mean coalescence duration is at least the log of the mean
    /// initial dominating count.
    pub lower_bound_consistent: bool,
}

pub const TIMING_BINS: usize = 20;

pub fn timing_summary(records: &[TimingRecord], h: f64, area: f64) -> Result<TimingSummary, DiagnosticsError> {
    if records.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no runs".into()));
    }
    let n = records.len() as f64;

    let mut depths: Vec<f64> = records.iter().map(|r| r.stopping_depth).collect();
    depths.sort_by(f64::total_cmp);
    let mut stopping_histogram: Vec<(f64, u64)> = Vec::new();
    for &d in &depths {
        match stopping_histogram.last_mut() {
            Some((depth, count)) if *depth == d => *count += 1,
            _ => stopping_histogram.push((d, 1)),
        }
    }
    let mid = depths.len() / 2;
    let median_stopping_depth = if depths.len() % 2 == 1 {
        depths[mid]
    } else {
        0.5 * (depths[mid - 1] + depths[mid])
    };

    let durations: Vec<f64> = records.iter().map(TimingRecord::coalescence_duration).collect();
    let max = durations.iter().copied().fold(0.0, f64::max);
    let width = if max > 0.0 { max / TIMING_BINS as f64 } else { 1.0 };
    let mut coalescence_histogram: Vec<HistogramBin> = (0..TIMING_BINS)
        .map(|b| HistogramBin {
            lower: b as f64 * width,
            upper: (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &d in &durations {
        let bin = ((d / width) as usize).min(TIMING_BINS - 1);
        coalescence_histogram[bin].count += 1;
    }

    let m = h * area;
    let bound = m * m.ln().max(1.0);
    let mean_coalescence_duration = durations.iter().sum::<f64>() / n;
    let mean_initial_count = records.iter().map(|r| r.initial_count as f64).sum::<f64>() / n;
    Ok(TimingSummary {
        coalescence_histogram,
        stopping_histogram,
        median_stopping_depth,
        bound,
        bound_ratio: median_stopping_depth / bound,
        mean_coalescence_duration,
        mean_initial_count,
        lower_bound_consistent: mean_coalescence_duration >= mean_initial_count.max(1.0).ln(),
    })
}
