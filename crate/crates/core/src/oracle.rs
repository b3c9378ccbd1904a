//! Independent reference samplers and distributions.
//!
//! * [`poisson_binomial_pmf`]: the exact law of the point count, which for a
//!   DPP with eigenvalues `λ_k` is a sum of independent Bernoulli(`λ_k`).
//! * [`FiniteDpp`] / [`GridDpp`]: exact DPP sampling on a finite ground set by
//!   eigendecomposition and the projection recursion; on a grid of cell
//!   centers this discretizes the continuous process.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::kernel::{Point, SpectralKernel, Window};

/// Eigenvalues this far outside `[0, 1]` are treated as a broken
/// discretization rather than rounding.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

/// Largest grid side accepted by [`GridDpp`].
pub const MAX_GRID_SIZE: usize = 64;

pub const DEFAULT_GRID_SIZE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("eigenvalue {value} at index {index} is outside [0, 1)")]
    Spectrum { index: usize, value: f64 },
    #[error("grid kernel eigenvalue {value} is outside [-1e-8, 1 + 1e-8]")]
    Discretization { value: f64 },
    #[error("grid size {m} must be in 1..={MAX_GRID_SIZE}")]
    GridSize { m: usize },
    #[error("kernel matrix must be square, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
}

/// Probability mass function of the number of points.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPmf {
    probabilities: Vec<f64>,
}

impl CountPmf {
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        Self { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Largest possible count.
    pub fn max_count(&self) -> usize {
        self.probabilities.len().saturating_sub(1)
    }

    pub fn probability(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Law of `Σ Bernoulli(p_i)` for independent trials.
///
/// Evaluates
/// `P(n) = 1/(M+1) Σ_l C^{-ln} Π_i (p_i C^l + 1 - p_i)`, `C = e^{2πi/(M+1)}`.
pub fn poisson_binomial_pmf(lambdas: &[f64]) -> Result<CountPmf, OracleError> {
    for (index, &value) in lambdas.iter().enumerate() {
        if !(0.0..1.0).contains(&value) {
            return Err(OracleError::Spectrum { index, value });
        }
    }
    let m = lambdas.len();
    let size = m + 1;
    let step = 2.0 * PI / size as f64;

    // The characteristic function at l and size - l are conjugate.
    let mut chi = vec![Complex64::new(1.0, 0.0); size];
    for l in 1..=size / 2 {
        let c = Complex64::from_polar(1.0, step * l as f64);
        let value = lambdas
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &p| acc * (c * p + (1.0 - p)));
        chi[l] = value;
        chi[size - l] = value.conj();
    }

    // Each entry carries absolute rounding error of order ε Σ|χ_l| / size.
    // Entries below that are noise; clamping them to zero rather than keeping
    // the positive half biases the far-tail contribution to the moments.
    let scale: f64 = chi.iter().map(|c| c.norm()).sum::<f64>() / size as f64;
    let noise = 16.0 * f64::EPSILON * scale;
    let probabilities = (0..size)
        .map(|n| {
            let mut total = Complex64::new(0.0, 0.0);
            for (l, value) in chi.iter().enumerate() {
                // Reduce the phase index first so the angle stays small.
                let phase = (l * n) % size;
                total += value * Complex64::from_polar(1.0, -step * phase as f64);
            }
            let p = total.re / size as f64;
            if p < noise { 0.0 } else { p }
        })
        .collect();
    Ok(CountPmf { probabilities })
}

/// Exact DPP on a finite ground set given a symmetric marginal kernel.
#[derive(Debug, Clone)]
pub struct FiniteDpp {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl FiniteDpp {
    /// Eigendecomposes `kernel` after symmetrizing it.
    pub fn new(kernel: DMatrix<f64>) -> Result<Self, OracleError> {
        if kernel.nrows() != kernel.ncols() {
            return Err(OracleError::Shape {
                rows: kernel.nrows(),
                cols: kernel.ncols(),
            });
        }
        let symmetric = (&kernel + kernel.transpose()) * 0.5;
        let eigen = SymmetricEigen::new(symmetric);
        let mut eigenvalues = Vec::with_capacity(eigen.eigenvalues.len());
        for &value in eigen.eigenvalues.iter() {
            if !(-EIGEN_TOLERANCE..=1.0 + EIGEN_TOLERANCE).contains(&value) {
                return Err(OracleError::Discretization { value });
            }
            eigenvalues.push(value.clamp(0.0, 1.0 - 1e-12));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors: eigen.eigenvectors,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, OracleError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(OracleError::Shape { rows: n, cols: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn ground_size(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Clamped eigenvalues of the kernel.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn expected_count(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Draws a subset of ground-set indices, in selection order.
    ///
    /// Selects eigenvectors by independent coin flips, then samples the
    /// projection DPP `P = V Vᵀ` one item at a time. Conditioning on the items
    /// chosen so far is tracked as a partial Cholesky factor of `P`, so item
    /// `i` is drawn with probability proportional to its residual variance.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.ground_size();
        let columns: Vec<Vec<f64>> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(_, &lambda)| rng.random::<f64>() < lambda)
            .map(|(c, _)| self.eigenvectors.column(c).iter().copied().collect())
            .collect();
        let k = columns.len();

        let mut residual = vec![0.0; n];
        for column in &columns {
            for (d, v) in residual.iter_mut().zip(column) {
                *d += v * v;
            }
        }
        let mut factors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut selected = Vec::with_capacity(k);
        for _ in 0..k {
            let total: f64 = residual.iter().sum();
            let mut target = rng.random::<f64>() * total;
            let mut item = None;
            for (i, &d) in residual.iter().enumerate() {
                if d > 0.0 {
                    item = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            let Some(item) = item else { break };
            selected.push(item);

            // Column `item` of P minus its projection on earlier factors.
            let mut next = vec![0.0; n];
            for column in &columns {
                let weight = column[item];
                for (x, v) in next.iter_mut().zip(column) {
                    *x += weight * v;
                }
            }
            for factor in &factors {
                let weight = factor[item];
                for (x, f) in next.iter_mut().zip(factor) {
                    *x -= weight * f;
                }
            }
            let scale = residual[item].sqrt();
            for (x, d) in next.iter_mut().zip(residual.iter_mut()) {
                *x /= scale;
                *d = (*d - *x * *x).max(0.0);
            }
            // Stays zero from here on, so no item repeats.
            residual[item] = 0.0;
            factors.push(next);
        }
        selected
    }
}

/// The truncated kernel discretized to an `m × m` grid of cell centers.
#[derive(Debug, Clone)]
pub struct GridDpp {
    window: Window,
    m: usize,
    trace: f64,
    diagonal: Vec<f64>,
    dpp: FiniteDpp,
}

impl GridDpp {
    pub fn new(kernel: &SpectralKernel, m: usize) -> Result<Self, OracleError> {
        if m == 0 || m > MAX_GRID_SIZE {
            return Err(OracleError::GridSize { m });
        }
        let window = *kernel.window();
        let side = window.side();
        let cell = side / m as f64;
        let weight = window.area() / (m * m) as f64;

        // The truncated kernel is periodic in the window side, so it only
        // depends on the lattice difference modulo m.
        let mut table = vec![0.0; m * m];
        for da in 0..m {
            for db in 0..m {
                table[da * m + db] = kernel.k_at(da as f64 * cell, db as f64 * cell) * weight;
            }
        }
        let n = m * m;
        let matrix = DMatrix::from_fn(n, n, |i, j| {
            let (ri, ci) = (i / m, i % m);
            let (rj, cj) = (j / m, j % m);
            let dr = (ri + m - rj) % m;
            let dc = (ci + m - cj) % m;
            table[dc * m + dr]
        });
        let diagonal = matrix.diagonal().iter().copied().collect::<Vec<_>>();
        let trace = diagonal.iter().sum();
        let dpp = FiniteDpp::new(matrix)?;
        Ok(Self {
            window,
            m,
            trace,
            diagonal,
            dpp,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Expected number of points, `trace(K_grid)`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Inclusion probability of each cell.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn dpp(&self) -> &FiniteDpp {
        &self.dpp
    }

    /// Center of cell `index`, row-major with rows along `y`.
    pub fn cell_center(&self, index: usize) -> Point {
        let cell = self.window.side() / self.m as f64;
        let half = 0.5 * self.window.side();
        let (row, col) = (index / self.m, index % self.m);
        Point::new(
            -half + (col as f64 + 0.5) * cell,
            -half + (row as f64 + 0.5) * cell,
        )
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn cell_of(&self, p: &Point) -> usize {
        let cell = self.window.side() / self.m as f64;
        let half = 0.5 * self.window.side();
        let index = |v: f64| (((v + half) / cell).floor().max(0.0) as usize).min(self.m - 1);
        index(p.y) * self.m + index(p.x)
    }

    pub fn sample_cells<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.dpp.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Point> {
        self.sample_cells(rng)
            .into_iter()
            .map(|i| self.cell_center(i))
            .collect()
    }
}

/// One draw from the grid discretization of `kernel`.
///
/// Builds and decomposes the grid kernel on every call; use [`GridDpp`] to
/// draw repeatedly.
pub fn grid_dpp_sample<R: Rng + ?Sized>(
    kernel: &SpectralKernel,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Point>, OracleError> {
    Ok(GridDpp::new(kernel, m)?.sample(rng))
}
