use std::path::Path;
use std::sync::mpsc;

use dpp_cftp::cftp::{batch_with_sink, CftpError, SampleReport};
use dpp_cftp::diagnostics::stats::{
    bootstrap_variance_se, chi_square_gof, tabulate, two_sample_chi_square, ChiSquareTest,
};
use dpp_cftp::diagnostics::{
    count_summary, estimate_pcf, timing_summary, DiagnosticsError, PcfEstimate, TimingRecord, TimingSummary,
};
use dpp_cftp::oracle::{poisson_binomial_pmf, CountPmf, GridDpp};
use dpp_cftp::{KernelSummary, SpectralKernel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{ensure_dir, write_json, Cell, Table};
use crate::CliError;

/// Significance level of every hypothesis test.
pub const SIGNIFICANCE: f64 = 0.01;
/// Allowed `|ĝ(r) - g(r)|` in the checked range.
pub const PCF_TOLERANCE: f64 = 0.1;
/// Radii checked against the closed form; smaller bins lose resolution to
/// the Fourier truncation.
pub const PCF_RANGE: (f64, f64) = (0.02, 0.1);
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

// Sub-streams of the root seed for randomness outside the sampler itself.
const BOOTSTRAP_STREAM: u64 = 11;
const GRID_STREAM: u64 = 12;

/// The run configuration as embedded in reports, without the output
/// directory so that reruns elsewhere produce identical files.
pub fn config_record(config: &RunConfig) -> serde_json::Value {
    let mut value = serde_json::to_value(config).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.remove("output");
    }
    value
}

fn aux_rng(root_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(stream);
    rng
}

/// Successful reports in seed order, and the failures.
pub struct BatchOutcome {
    pub reports: Vec<SampleReport>,
    pub failures: Vec<(u64, CftpError)>,
}

impl BatchOutcome {
    /// Sandwich and persistence errors, which indicate a bug rather than
    /// bad luck.
    pub fn invariant_violations(&self) -> usize {
        self.failures
            .iter()
            .filter(|(_, e)| matches!(e, CftpError::Sandwich { .. } | CftpError::Persistence { .. }))
            .count()
    }
}

/// Runs the replications, handing each finished report to `collect` on the
/// calling thread as it arrives.
pub fn run_batch<F>(kernel: &SpectralKernel, config: &RunConfig, mut collect: F) -> Result<BatchOutcome, CliError>
where
    F: FnMut(&SampleReport) -> Result<(), CliError>,
{
    let seeds = config.seeds();
    let options = config.cftp_options();
    let (tx, rx) = mpsc::channel::<(usize, Result<SampleReport, CftpError>)>();
    let mut slots: Vec<Option<Result<SampleReport, CftpError>>> = vec![None; seeds.len()];
    let mut first_error = None;
    std::thread::scope(|scope| {
        scope.spawn(|| {
            let tx = tx;
            batch_with_sink(kernel, &seeds, &options, |i, result| {
                // The receiver outlives the batch.
                let _ = tx.send((i, result.clone()));
            });
        });
        for (i, result) in rx {
            if let Ok(report) = &result {
                if first_error.is_none() {
                    if let Err(e) = collect(report) {
                        first_error = Some(e);
                    }
                }
            }
            slots[i] = Some(result);
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    let mut outcome = BatchOutcome {
        reports: Vec::with_capacity(seeds.len()),
        failures: Vec::new(),
    };
    for (seed, slot) in seeds.iter().zip(slots) {
        match slot.expect("every replication reports") {
            Ok(report) => outcome.reports.push(report),
            Err(e) => outcome.failures.push((*seed, e)),
        }
    }
    Ok(outcome)
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    kernel: &'a KernelSummary,
    seed: u64,
    points: Vec<[f64; 2]>,
    stopping_depth: f64,
    coalescence_time: f64,
    events_processed: usize,
    clamp_count: usize,
    initial_count: usize,
    passes: usize,
}

fn write_sample(dir: &Path, report: &SampleReport) -> Result<(), CliError> {
    let mut table = Table::new(&["x", "y"]);
    for p in &report.points {
        table.row(&[Cell::Num(p.x), Cell::Num(p.y)]);
    }
    table.write(&dir.join(format!("points_{}.csv", report.seed)))?;
    let file = ReportFile {
        kernel: &report.kernel,
        seed: report.seed,
        points: report.points.iter().map(|p| [p.x, p.y]).collect(),
        stopping_depth: report.stopping_depth,
        coalescence_time: report.coalescence_time,
        events_processed: report.events_processed,
        clamp_count: report.clamp_count,
        initial_count: report.initial_count,
        passes: report.passes,
    };
    write_json(&dir.join(format!("report_{}.json", report.seed)), &file)
}

/// `sample`: one point pattern and report per replication.
pub fn sample(config: &RunConfig) -> Result<bool, CliError> {
    let kernel = config.validate()?;
    let dir = ensure_dir(&config.output)?;
    let outcome = run_batch(&kernel, config, |report| write_sample(&dir, report))?;
    for r in &outcome.reports {
        println!(
            "seed {}: {} points, stopping depth {}, coalescence at {:.4}, {} events",
            r.seed,
            r.count(),
            r.stopping_depth,
            r.coalescence_time,
            r.events_processed
        );
    }
    for (seed, e) in &outcome.failures {
        eprintln!("seed {seed}: {e}");
    }
    Ok(outcome.failures.is_empty())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64, limit: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            limit,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountCheck {
    pub mean: f64,
    pub variance: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
    pub chi_square: ChiSquareTest,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcfCheck {
    pub r_min: f64,
    pub r_max: f64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub estimate: PcfEstimate,
    pub theory: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub config: serde_json::Value,
    pub kernel: KernelSummary,
    pub replications: usize,
    pub failed_replications: usize,
    pub invariant_violations: usize,
    pub clamp_count: usize,
    pub counts: CountCheck,
    pub pcf: PcfCheck,
    pub timing: TimingSummary,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn count_check(counts: &[usize], pmf: &CountPmf, root_seed: u64) -> Result<CountCheck, CliError> {
    let summary = count_summary(counts)?;
    let n = counts.len() as f64;
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut rng = aux_rng(root_seed, BOOTSTRAP_STREAM);
    Ok(CountCheck {
        mean: summary.mean,
        variance: summary.variance,
        expected_mean: pmf.mean(),
        expected_variance: pmf.variance(),
        mean_se: (summary.variance / n).sqrt(),
        variance_se: bootstrap_variance_se(&values, BOOTSTRAP_RESAMPLES, &mut rng),
        chi_square: chi_square_gof(&tabulate(counts), pmf.probabilities())?,
    })
}

pub fn pcf_check(kernel: &SpectralKernel, patterns: &[Vec<dpp_cftp::Point>], config: &RunConfig) -> Result<PcfCheck, CliError> {
    let estimate = estimate_pcf(patterns, kernel.window(), config.rmax, config.nbins)?;
    let spec = kernel.spec();
    let theory: Vec<f64> = estimate.bin_centers.iter().map(|&r| spec.pair_correlation(r)).collect();
    let (r_min, r_max) = PCF_RANGE;
    let max_deviation = estimate
        .bin_centers
        .iter()
        .zip(estimate.g_hat.iter().zip(&theory))
        .filter(|(r, _)| (r_min..=r_max).contains(*r))
        .map(|(_, (g, t))| (g - t).abs())
        .fold(0.0, f64::max);
    Ok(PcfCheck {
        r_min,
        r_max,
        tolerance: PCF_TOLERANCE,
        max_deviation,
        estimate,
        theory,
    })
}

/// Runs the batch and every distributional check; writes the report files.
pub fn validation(config: &RunConfig) -> Result<ValidationReport, CliError> {
    let kernel = config.validate()?;
    if config.replications < 2 {
        return Err(DiagnosticsError::InsufficientData(
            "validation needs at least 2 replications".into(),
        )
        .into());
    }
    let dir = ensure_dir(&config.output)?;
    let outcome = run_batch(&kernel, config, |_| Ok(()))?;
    if outcome.reports.len() < 2 {
        return Err(DiagnosticsError::InsufficientData("fewer than 2 successful replications".into()).into());
    }
    let reports = &outcome.reports;

    let pmf = poisson_binomial_pmf(&kernel.lambdas())?;
    let counts: Vec<usize> = reports.iter().map(SampleReport::count).collect();
    let count = count_check(&counts, &pmf, config.root_seed)?;
    let patterns: Vec<Vec<dpp_cftp::Point>> = reports.iter().map(|r| r.points.clone()).collect();
    let pcf = pcf_check(&kernel, &patterns, config)?;
    let records: Vec<TimingRecord> = reports.iter().map(TimingRecord::from).collect();
    let timing = timing_summary(&records, kernel.h(), kernel.window().area())?;

    let mean_z = z_score(count.mean - count.expected_mean, count.mean_se);
    let var_z = z_score(count.variance - count.expected_variance, count.variance_se);
    let checks = vec![
        Check::new(
            "replications_succeeded",
            outcome.failures.is_empty(),
            outcome.failures.len() as f64,
            0.0,
            format!("{} of {} replications failed", outcome.failures.len(), config.replications),
        ),
        Check::new(
            "sandwich_invariants",
            outcome.invariant_violations() == 0,
            outcome.invariant_violations() as f64,
            0.0,
            "sandwich or coalescence-persistence violations".into(),
        ),
        Check::new(
            "count_mean",
            mean_z <= 3.0,
            mean_z,
            3.0,
            format!("mean {} vs {} (standard errors)", count.mean, count.expected_mean),
        ),
        Check::new(
            "count_variance",
            var_z <= 3.0,
            var_z,
            3.0,
            format!("variance {} vs {} (bootstrap standard errors)", count.variance, count.expected_variance),
        ),
        Check::new(
            "count_pmf",
            count.chi_square.p_value >= SIGNIFICANCE,
            count.chi_square.p_value,
            SIGNIFICANCE,
            format!("chi-square {} on {} dof", count.chi_square.statistic, count.chi_square.dof),
        ),
        Check::new(
            "pair_correlation",
            pcf.max_deviation <= PCF_TOLERANCE,
            pcf.max_deviation,
            PCF_TOLERANCE,
            format!("max |g_hat - g| over r in [{}, {}]", PCF_RANGE.0, PCF_RANGE.1),
        ),
        Check::new(
            "stopping_time_bound",
            timing.bound_ratio <= 1.0,
            timing.bound_ratio,
            1.0,
            format!("median stopping depth {} vs m log m = {}", timing.median_stopping_depth, timing.bound),
        ),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let report = ValidationReport {
        config: config_record(config),
        kernel: kernel.summary(),
        replications: reports.len(),
        failed_replications: outcome.failures.len(),
        invariant_violations: outcome.invariant_violations(),
        clamp_count: reports.iter().map(|r| r.clamp_count).sum(),
        counts: count,
        pcf,
        timing,
        checks,
        passed,
    };

    write_json(&dir.join("validation.json"), &report)?;
    write_pcf_table(&dir.join("pcf.csv"), &report.pcf)?;
    let hist = tabulate(&counts);
    let mut table = Table::new(&["n", "probability", "empirical"]);
    for n in 0..pmf.probabilities().len().max(hist.len()) {
        if pmf.probability(n) == 0.0 && hist.get(n).copied().unwrap_or(0) == 0 {
            continue;
        }
        let empirical = hist.get(n).copied().unwrap_or(0) as f64 / reports.len() as f64;
        table.row(&[Cell::Int(n as u64), Cell::Num(pmf.probability(n)), Cell::Num(empirical)]);
    }
    table.write(&dir.join("pmf.csv"))?;
    let mut table = Table::new(&["seed", "stopping_depth", "coalescence_time", "events_processed", "initial_count"]);
    for r in reports {
        table.row(&[
            Cell::Int(r.seed),
            Cell::Num(r.stopping_depth),
            Cell::Num(r.coalescence_time),
            Cell::Int(r.events_processed as u64),
            Cell::Int(r.initial_count as u64),
        ]);
    }
    table.write(&dir.join("timing.csv"))?;
    Ok(report)
}

/// `|diff| / se`, treating an exact match as zero even when `se` vanishes.
fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff.abs() / se
    }
}

fn write_pcf_table(path: &Path, pcf: &PcfCheck) -> Result<(), CliError> {
    let mut table = Table::new(&["r", "g_hat", "g_theory", "pairs"]);
    let est = &pcf.estimate;
    for i in 0..est.bin_centers.len() {
        table.row(&[
            Cell::Num(est.bin_centers[i]),
            Cell::Num(est.g_hat[i]),
            Cell::Num(pcf.theory[i]),
            Cell::Int(est.counts[i]),
        ]);
    }
    table.write(path)
}

/// `validate`: prints one line per check.
pub fn validate(config: &RunConfig) -> Result<bool, CliError> {
    let report = validation(config)?;
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {}: {} (limit {}) {}", c.name, c.value, c.limit, c.detail);
    }
    Ok(report.passed)
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplerCounts {
    pub draws: usize,
    pub mean: f64,
    pub variance: f64,
    pub histogram: Vec<u64>,
}

impl SamplerCounts {
    fn from_counts(counts: &[usize]) -> Result<Self, CliError> {
        let s = count_summary(counts)?;
        Ok(Self {
            draws: counts.len(),
            mean: s.mean,
            variance: s.variance,
            histogram: s.histogram,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub config: serde_json::Value,
    pub kernel: KernelSummary,
    pub grid_size: usize,
    pub grid_trace: f64,
    pub cftp: SamplerCounts,
    pub grid: SamplerCounts,
    pub failed_replications: usize,
    pub invariant_violations: usize,
    pub test: ChiSquareTest,
    pub significance: f64,
    pub passed: bool,
}

/// Draws matched batches from CFTP and the grid oracle and compares their
/// count distributions.
pub fn oracle_comparison(config: &RunConfig) -> Result<OracleComparison, CliError> {
    let kernel = config.validate()?;
    let dir = ensure_dir(&config.output)?;
    let m = config.grid_size();
    let grid = GridDpp::new(&kernel, m)?;
    let outcome = run_batch(&kernel, config, |_| Ok(()))?;
    let cftp_counts: Vec<usize> = outcome.reports.iter().map(SampleReport::count).collect();
    let mut rng = aux_rng(config.root_seed, GRID_STREAM);
    let grid_counts: Vec<usize> = (0..config.replications)
        .map(|_| grid.sample_cells(&mut rng).len())
        .collect();
    let test = two_sample_chi_square(&tabulate(&cftp_counts), &tabulate(&grid_counts))?;
    let passed = outcome.failures.is_empty() && test.p_value >= SIGNIFICANCE;
    let comparison = OracleComparison {
        config: config_record(config),
        kernel: kernel.summary(),
        grid_size: m,
        grid_trace: grid.trace(),
        cftp: SamplerCounts::from_counts(&cftp_counts)?,
        grid: SamplerCounts::from_counts(&grid_counts)?,
        failed_replications: outcome.failures.len(),
        invariant_violations: outcome.invariant_violations(),
        test,
        significance: SIGNIFICANCE,
        passed,
    };
    write_json(&dir.join("oracle_compare.json"), &comparison)?;
    Ok(comparison)
}

pub fn oracle_compare(config: &RunConfig) -> Result<bool, CliError> {
    let c = oracle_comparison(config)?;
    println!(
        "cftp mean {:.4}, grid mean {:.4} (trace {:.4}); chi-square {:.4} on {} dof, p = {:.4}",
        c.cftp.mean, c.grid.mean, c.grid_trace, c.test.statistic, c.test.dof, c.test.p_value
    );
    Ok(c.passed)
}

/// `pmf`: the exact count distribution of the truncated kernel.
pub fn pmf(config: &RunConfig) -> Result<bool, CliError> {
    let kernel = config.validate()?;
    let dir = ensure_dir(&config.output)?;
    let pmf = poisson_binomial_pmf(&kernel.lambdas())?;
    let last = pmf.probabilities().iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut table = Table::new(&["n", "probability"]);
    for (n, &p) in pmf.probabilities()[..=last].iter().enumerate() {
        table.row(&[Cell::Int(n as u64), Cell::Num(p)]);
    }
    table.write(&dir.join("pmf.csv"))?;
    println!(
        "{} modes, mean {:.6}, variance {:.6}",
        kernel.modes().len(),
        pmf.mean(),
        pmf.variance()
    );
    Ok(true)
}

/// `pcf`: sample a batch and estimate its pair correlation.
pub fn pcf(config: &RunConfig) -> Result<bool, CliError> {
    let kernel = config.validate()?;
    let dir = ensure_dir(&config.output)?;
    let outcome = run_batch(&kernel, config, |_| Ok(()))?;
    let patterns: Vec<Vec<dpp_cftp::Point>> = outcome.reports.iter().map(|r| r.points.clone()).collect();
    let check = pcf_check(&kernel, &patterns, config)?;
    write_pcf_table(&dir.join("pcf.csv"), &check)?;
    println!(
        "{} patterns, max |g_hat - g| on [{}, {}] = {:.4}",
        patterns.len(),
        PCF_RANGE.0,
        PCF_RANGE.1,
        check.max_deviation
    );
    for (seed, e) in &outcome.failures {
        eprintln!("seed {seed}: {e}");
    }
    Ok(outcome.failures.is_empty())
}
