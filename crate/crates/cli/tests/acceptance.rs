//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use dpp_cftp::papangelou::Configuration;
use dpp_cftp::{AlphaSpec, Family, ModelSpec, Point, SpectralKernel};
use dpp_cftp_cli::commands::{self, ValidationReport, PCF_TOLERANCE, SIGNIFICANCE};
use dpp_cftp_cli::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: &'static str, title: &'static str, passed: bool, detail: String) -> Outcome {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("[{status}] {id} {title}: {detail}");
    Outcome {
        id,
        title,
        passed,
        detail,
    }
}

fn paper_config(out: &Path, family: Family, alpha: AlphaSpec, nu: Option<f64>, seed: u64) -> RunConfig {
    RunConfig {
        family,
        rho: 50.0,
        alpha,
        nu,
        replications: 500,
        root_seed: seed,
        output: out.to_owned(),
        ..RunConfig::default()
    }
}

fn c1_h_reproduction() -> Outcome {
    let start = Instant::now();
    let kernel = SpectralKernel::with_defaults(ModelSpec::gaussian(50.0, 0.04).unwrap()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let h = kernel.h();
    outcome(
        "C1",
        "H reproduction",
        (56.9..=58.1).contains(&h) && elapsed < 1.0,
        format!("H = {h:.4} (order {}, {:.3} s)", kernel.order(), elapsed),
    )
}

fn c2_count_law(report: &ValidationReport) -> Outcome {
    let c = &report.counts;
    let mean_z = (c.mean - c.expected_mean).abs() / c.mean_se;
    let var_z = (c.variance - c.expected_variance).abs() / c.variance_se;
    let p = c.chi_square.p_value;
    outcome(
        "C2",
        "count law",
        mean_z <= 3.0 && var_z <= 3.0 && p >= SIGNIFICANCE && report.replications == 500,
        format!(
            "mean {:.3} vs {:.3} ({mean_z:.2} se), variance {:.3} vs {:.3} ({var_z:.2} bootstrap se), chi-square p = {p:.4}",
            c.mean, c.expected_mean, c.variance, c.expected_variance
        ),
    )
}

fn c3_pair_correlation(gaussian: &ValidationReport, others: &[(&str, f64)]) -> Outcome {
    let mut parts = vec![format!("gaussian {:.4}", gaussian.pcf.max_deviation)];
    let mut passed = gaussian.pcf.max_deviation <= PCF_TOLERANCE;
    for (name, deviation) in others {
        parts.push(format!("{name} {deviation:.4}"));
        passed &= *deviation <= PCF_TOLERANCE;
    }
    outcome(
        "C3",
        "pair correlation",
        passed,
        format!("max |g_hat - g| on [0.02, 0.1]: {}", parts.join(", ")),
    )
}

fn c4_oracle(comparison: &commands::OracleComparison) -> Outcome {
    outcome(
        "C4",
        "oracle equivalence",
        comparison.passed && comparison.test.p_value >= SIGNIFICANCE,
        format!(
            "cftp mean {:.3}, grid mean {:.3}, chi-square {:.3} on {} dof, p = {:.4}",
            comparison.cftp.mean,
            comparison.grid.mean,
            comparison.test.statistic,
            comparison.test.dof,
            comparison.test.p_value
        ),
    )
}

fn dense_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        if a[col][col] == 0.0 {
            return 0.0;
        }
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

fn dense_ratio(kernel: &SpectralKernel, xi: &[Point], x: Point) -> f64 {
    let gram = |pts: &[Point]| -> Vec<Vec<f64>> {
        pts.iter()
            .map(|p| pts.iter().map(|q| kernel.j_eval(p, q)).collect())
            .collect()
    };
    let mut with = xi.to_vec();
    with.push(x);
    dense_det(gram(&with)) / dense_det(gram(xi))
}

fn c5_papangelou() -> Outcome {
    let kernel = SpectralKernel::with_defaults(ModelSpec::gaussian(50.0, 0.04).unwrap()).unwrap();
    let window = *kernel.window();
    let h = kernel.h();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let instances = 10_000;
    let (mut worst_rel, mut bound_failures, mut monotone_failures, mut ratio_failures) = (0.0f64, 0, 0, 0);
    for _ in 0..instances {
        let size = rng.random_range(0..=12usize);
        let eta: Vec<Point> = (0..size).map(|_| window.sample_uniform(&mut rng)).collect();
        let sub = rng.random_range(0..=size);
        let xi = &eta[..sub];
        let x = window.sample_uniform(&mut rng);

        let big = Configuration::from_points(&kernel, &eta).unwrap();
        let small = Configuration::from_points(&kernel, xi).unwrap();
        let eval = big.evaluate(&kernel, &x).unwrap();
        let dense = dense_ratio(&kernel, &eta, x);
        let rel = (eval.schur - dense).abs() / dense.abs();
        worst_rel = worst_rel.max(rel);
        ratio_failures += (rel > 1e-8) as usize;

        let c_big = eval.value;
        let c_small = small.evaluate(&kernel, &x).unwrap().value;
        bound_failures += (c_big > h + 1e-9 || c_small > h + 1e-9) as usize;
        monotone_failures += (c_big > c_small + 1e-9) as usize;
    }
    outcome(
        "C5",
        "Papangelou correctness",
        ratio_failures == 0 && bound_failures == 0 && monotone_failures == 0,
        format!(
            "{instances} instances: worst relative error {worst_rel:.2e}, {ratio_failures} ratio, {bound_failures} bound, {monotone_failures} monotonicity failures"
        ),
    )
}

fn c6_invariants(violations: &[(&str, usize, usize)]) -> Outcome {
    let total: usize = violations.iter().map(|v| v.1).sum();
    let failed: usize = violations.iter().map(|v| v.2).sum();
    let parts: Vec<String> = violations
        .iter()
        .map(|(name, v, f)| format!("{name}: {v} violations, {f} failed runs"))
        .collect();
    outcome("C6", "sandwich invariants", total == 0 && failed == 0, parts.join("; "))
}

fn c7_timing(report: &ValidationReport) -> Outcome {
    let t = &report.timing;
    let m = report.kernel.h * report.kernel.side * report.kernel.side;
    let bound = m * m.ln();
    outcome(
        "C7",
        "timing bound",
        t.median_stopping_depth <= bound,
        format!(
            "median stopping depth {} vs H·area·log(H·area) = {bound:.2}, ratio {:.4}",
            t.median_stopping_depth,
            t.median_stopping_depth / bound
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> (Option<i32>, Vec<u8>) {
    let output = Command::new(env!("CARGO_BIN_EXE_dpp-cftp"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env_remove("DPP_CFTP_SEED")
        .output()
        .expect("binary runs");
    (output.status.code(), output.stdout)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c8_determinism(root: &Path) -> Outcome {
    let commands: [&[&str]; 5] = [
        &["sample", "--rho", "50", "--alpha", "0.04", "--seed", "7", "-n", "3"],
        &["validate", "--rho", "10", "--alpha", "0.04", "--seed", "3", "-n", "40"],
        &["oracle-compare", "--rho", "5", "--alpha", "0.04", "--grid-size", "16", "--seed", "2", "-n", "200"],
        &["pmf", "--family", "cauchy", "--nu", "5", "--alpha", "max/2"],
        &["pcf", "--family", "matern", "--nu", "5", "--alpha", "max/2", "--seed", "4", "-n", "20"],
    ];
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (i, args) in commands.iter().enumerate() {
        let a = root.join(format!("run{i}_a"));
        let b = root.join(format!("run{i}_b"));
        let (status_a, out_a) = run_cli(args, &a);
        let (status_b, out_b) = run_cli(args, &b);
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        files += fa.len();
        // Checks may legitimately fail on these small runs; only a crash or
        // a difference between the runs counts against determinism.
        let crashed = !matches!(status_a, Some(0 | 1));
        if crashed || status_a != status_b || out_a != out_b || fa != fb || fa.is_empty() {
            mismatches.push(args[0]);
        }
    }
    outcome(
        "C8",
        "determinism",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{} commands re-run, {files} output files byte-identical", commands.len())
        } else {
            format!("outputs differ or failed for: {}", mismatches.join(", "))
        },
    )
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters expect a harness; there are no
    // individually addressable tests here.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let mut outcomes = vec![c1_h_reproduction()];

    let gaussian = commands::validation(&paper_config(
        &root.join("gaussian"),
        Family::Gaussian,
        AlphaSpec::Value(0.04),
        None,
        20_000,
    ))
    .expect("gaussian validation runs");
    outcomes.push(c2_count_law(&gaussian));

    let mut deviations = Vec::new();
    let mut violations = vec![("count/pcf gaussian", gaussian.invariant_violations, gaussian.failed_replications)];
    for (name, family, seed) in [("matern", Family::Matern, 30_000u64), ("cauchy", Family::Cauchy, 40_000)] {
        let config = paper_config(&root.join(name), family, AlphaSpec::HalfMax, Some(5.0), seed);
        let kernel = config.validate().expect("valid kernel");
        let batch = commands::run_batch(&kernel, &config, |_| Ok(())).expect("batch runs");
        let patterns: Vec<Vec<Point>> = batch.reports.iter().map(|r| r.points.clone()).collect();
        let pcf = commands::pcf_check(&kernel, &patterns, &config).expect("pcf estimate");
        deviations.push((name, pcf.max_deviation));
        violations.push((name, batch.invariant_violations(), batch.failures.len()));
    }
    outcomes.push(c3_pair_correlation(&gaussian, &deviations));

    let oracle_config = RunConfig {
        rho: 10.0,
        alpha: AlphaSpec::Value(0.04),
        replications: 2000,
        grid_size: Some(32),
        root_seed: 50_000,
        output: root.join("oracle"),
        ..RunConfig::default()
    };
    let comparison = commands::oracle_comparison(&oracle_config).expect("oracle comparison runs");
    violations.push(("oracle", comparison.invariant_violations, comparison.failed_replications));
    outcomes.push(c4_oracle(&comparison));
    outcomes.push(c5_papangelou());
    outcomes.push(c6_invariants(&violations));
    outcomes.push(c7_timing(&gaussian));
    outcomes.push(c8_determinism(root));

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for o in failed {
            eprintln!("{} {} failed: {}", o.id, o.title, o.detail);
        }
        ExitCode::FAILURE
    }
}
