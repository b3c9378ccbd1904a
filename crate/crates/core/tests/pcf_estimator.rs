use dpp_cftp::diagnostics::{estimate_pcf, DEFAULT_NBINS, DEFAULT_RMAX};
use dpp_cftp::{Point, Window};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn poisson_patterns(rho: f64, n: usize, seed: u64) -> Vec<Vec<Point>> {
    let window = Window::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = Poisson::new(rho * window.area()).unwrap();
    (0..n)
        .map(|_| {
            let k = counts.sample(&mut rng) as usize;
            (0..k).map(|_| window.sample_uniform(&mut rng)).collect()
        })
        .collect()
}

fn max_deviation(patterns: &[Vec<Point>], r_min: f64) -> f64 {
    let est = estimate_pcf(patterns, &Window::unit(), DEFAULT_RMAX, DEFAULT_NBINS).unwrap();
    est.bin_centers
        .iter()
        .zip(&est.g_hat)
        .filter(|(r, _)| **r >= r_min)
        .map(|(_, g)| (g - 1.0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn poisson_patterns_give_unit_pcf() {
    let patterns = poisson_patterns(200.0, 500, 1);
    assert!(max_deviation(&patterns, 0.02) < 0.1);
}

#[test]
fn poisson_estimate_tightens_with_batch_size() {
    let small = max_deviation(&poisson_patterns(50.0, 100, 2), 0.0);
    let large = max_deviation(&poisson_patterns(50.0, 1000, 3), 0.0);
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn estimate_shape_is_consistent() {
    let patterns = poisson_patterns(50.0, 20, 4);
    let est = estimate_pcf(&patterns, &Window::unit(), 0.1, 10).unwrap();
    assert_eq!(est.bin_centers.len(), 10);
    assert_eq!(est.g_hat.len(), 10);
    assert_eq!(est.counts.len(), 10);
    assert!(est.g_hat.iter().all(|g| *g >= 0.0));
    assert!((est.bandwidth - 0.01).abs() < 1e-15);
}
