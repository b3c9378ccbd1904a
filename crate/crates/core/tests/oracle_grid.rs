mod common;

use dpp_cftp::oracle::{grid_dpp_sample, poisson_binomial_pmf, GridDpp};
use dpp_cftp::{ModelSpec, SpectralKernel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn grid_counts_and_inclusion_frequencies() {
    let kernel = common::gaussian(50.0, 0.04);
    let grid = GridDpp::new(&kernel, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 10_000;
    let cells = grid.m() * grid.m();
    let mut hits = vec![0u64; cells];
    let mut counts = Vec::with_capacity(draws);
    for _ in 0..draws {
        let sample = grid.sample_cells(&mut rng);
        let mut seen = vec![false; cells];
        for &c in &sample {
            assert!(!seen[c], "duplicate cell {c}");
            seen[c] = true;
            hits[c] += 1;
        }
        counts.push(sample.len() as f64);
    }

    let n = draws as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!((mean - grid.trace()).abs() < 3.0 * se, "mean {mean}, trace {}", grid.trace());

    // 1024 cells: allow the expected handful beyond 3 s.e., none beyond 4.5.
    let mut beyond = 0;
    for (h, &p) in hits.iter().zip(grid.diagonal()) {
        let f = *h as f64 / n;
        let z = (f - p).abs() / (p * (1.0 - p) / n).sqrt();
        assert!(z < 4.5, "cell frequency {f} vs {p}");
        beyond += (z > 3.0) as usize;
    }
    assert!(beyond <= cells / 100, "{beyond} cells beyond 3 s.e.");
}

#[test]
fn grid_eigenvalues_give_same_count_law() {
    let kernel = common::gaussian(10.0, 0.04);
    let grid = GridDpp::new(&kernel, 32).unwrap();
    let mut grid_lambdas: Vec<f64> = grid.dpp().eigenvalues().iter().copied().filter(|&l| l > 1e-14).collect();
    let mut lambdas = kernel.lambdas();
    grid_lambdas.sort_by(f64::total_cmp);
    lambdas.sort_by(f64::total_cmp);
    let a = poisson_binomial_pmf(&grid_lambdas).unwrap();
    let b = poisson_binomial_pmf(&lambdas).unwrap();
    // Modes beyond the grid's Nyquist frequency alias onto lower ones, which
    // moves the law slightly; far below what 2000 draws can resolve.
    for n in 0..40 {
        let (pa, pb) = (a.probability(n), b.probability(n));
        assert!((pa - pb).abs() < 1e-4, "n = {n}: {pa} vs {pb}");
    }
}

#[test]
fn zero_intensity_grid_is_empty() {
    let kernel = SpectralKernel::with_defaults(ModelSpec::gaussian(0.0, 0.04).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = GridDpp::new(&kernel, 8).unwrap();
    for _ in 0..100 {
        assert!(grid.sample(&mut rng).is_empty());
    }
    assert!(grid_dpp_sample(&kernel, 4, &mut rng).unwrap().is_empty());
}
