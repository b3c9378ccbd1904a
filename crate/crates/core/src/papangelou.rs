//! Point configurations with a factorized J-Gram matrix, and the DPP
//! Papangelou conditional intensity as a Schur complement.
//!
//! For a configuration `ξ` with Gram matrix `A = J(ξ, ξ) = L Lᵀ` and a new
//! point `x` with `v = J(ξ, x)`,
//!
//! `c(ξ, x) = det J(ξ ∪ x) / det J(ξ) = J(x, x) - vᵀ A⁻¹ v = J(x, x) - |L⁻¹ v|²`.

use thiserror::Error;

use crate::kernel::{Point, SpectralKernel};

/// Schur complements below `SINGULARITY_FLOOR · H` count as zero.
pub const SINGULARITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PapangelouError {
    #[error("point ({x}, {y}) lies outside the window")]
    Domain { x: f64, y: f64 },
    #[error("Schur complement {schur:e} is below the singularity floor")]
    Degenerate { schur: f64 },
    #[error("index {index} out of range for a configuration of {len} points")]
    Index { index: usize, len: usize },
}

/// How the factor is rebuilt after a point is removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DeletionStrategy {
    /// Re-run the Cholesky factorization on the reduced Gram matrix from
    /// the removed row onwards (leading rows are unaffected).
    #[default]
    Refactor,
    /// Drop the row and repair the trailing block with a rank-one update.
    RankOneUpdate,
}

/// Result of evaluating the conditional intensity at a point.
#[derive(Debug, Clone)]
pub struct IntensityEval {
    /// Clamped intensity in `[0, H]`.
    pub value: f64,
    /// Unclamped Schur complement.
    pub schur: f64,
    /// Whether a negative Schur complement was clamped to zero.
    pub clamped: bool,
    // Solution of L w = v, reused when the point is appended.
    w: Vec<f64>,
}

/// A finite point pattern with the Cholesky factor of its J-Gram matrix.
///
/// Matrices are stored packed lower-triangular, row by row, so appending a
/// point only pushes one row.
#[derive(Debug, Clone)]
pub struct Configuration {
    points: Vec<Point>,
    gram: Vec<f64>,
    // None when the Gram matrix is numerically singular.
    factor: Option<Vec<f64>>,
    logdet: f64,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl Default for Configuration {
    fn default() -> Self {
        Self::empty()
    }
}

impl Configuration {
    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            gram: Vec::new(),
            factor: Some(Vec::new()),
            logdet: 0.0,
        }
    }

    /// Builds a configuration by appending points in order. Degenerate
    /// points yield a singular configuration rather than an error.
    pub fn from_points(kernel: &SpectralKernel, points: &[Point]) -> Result<Self, PapangelouError> {
        let mut config = Self::empty();
        for p in points {
            config = config.with_point_or_singular(kernel, *p)?;
        }
        Ok(config)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log det A`; `0` for the empty configuration and `-∞` when singular.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn is_singular(&self) -> bool {
        self.factor.is_none()
    }

    /// Dense copy of the J-Gram matrix.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        unpack_symmetric(&self.gram, self.len())
    }

    /// Dense copy of the lower-triangular factor, if the matrix is regular.
    pub fn factor_matrix(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.len();
        self.factor.as_ref().map(|f| {
            let mut out = vec![vec![0.0; n]; n];
            for (i, row) in out.iter_mut().enumerate() {
                row[..=i].copy_from_slice(&f[row_start(i)..row_start(i) + i + 1]);
            }
            out
        })
    }

    /// J values between every point of the configuration and `x`.
    pub fn cross_terms(&self, kernel: &SpectralKernel, x: &Point) -> Vec<f64> {
        self.points.iter().map(|p| kernel.j_eval(p, x)).collect()
    }

    /// Evaluates the intensity at `x` given precomputed cross terms
    /// `v[i] = J(p_i, x)`.
    pub fn evaluate_with(&self, kernel: &SpectralKernel, x: &Point, v: &[f64]) -> IntensityEval {
        debug_assert_eq!(v.len(), self.len());
        let h = kernel.h();
        let diag = kernel.j_eval(x, x);
        let Some(factor) = &self.factor else {
            return IntensityEval {
                value: 0.0,
                schur: 0.0,
                clamped: false,
                w: Vec::new(),
            };
        };
        let w = forward_solve(factor, v);
        let schur = diag - w.iter().map(|t| t * t).sum::<f64>();
        let clamped = schur < 0.0;
        let value = if schur < SINGULARITY_FLOOR * h { 0.0 } else { schur.min(h) };
        IntensityEval {
            value,
            schur,
            clamped,
            w,
        }
    }

    pub fn evaluate(&self, kernel: &SpectralKernel, x: &Point) -> Result<IntensityEval, PapangelouError> {
        check_domain(kernel, x)?;
        let v = self.cross_terms(kernel, x);
        Ok(self.evaluate_with(kernel, x, &v))
    }

    /// Appends `x`, reusing an evaluation made against this configuration.
    pub fn push_evaluated(
        mut self,
        kernel: &SpectralKernel,
        x: Point,
        v: &[f64],
        eval: IntensityEval,
    ) -> Result<Self, PapangelouError> {
        if self.factor.is_some() && eval.value <= 0.0 {
            return Err(PapangelouError::Degenerate { schur: eval.schur });
        }
        self.append_row(kernel, x, v, eval);
        Ok(self)
    }

    /// Appends `x`; a degenerate point turns the configuration singular
    /// instead of failing.
    pub fn push_evaluated_or_singular(
        mut self,
        kernel: &SpectralKernel,
        x: Point,
        v: &[f64],
        eval: IntensityEval,
    ) -> Self {
        self.append_row(kernel, x, v, eval);
        self
    }

    fn append_row(&mut self, kernel: &SpectralKernel, x: Point, v: &[f64], eval: IntensityEval) {
        let diag = kernel.j_eval(&x, &x);
        self.gram.extend_from_slice(v);
        self.gram.push(diag);
        self.points.push(x);
        let regular = eval.value > 0.0;
        match (&mut self.factor, regular) {
            (Some(factor), true) => {
                factor.extend_from_slice(&eval.w);
                factor.push(eval.schur.sqrt());
                self.logdet += eval.schur.ln();
            }
            (Some(_), false) => {
                self.factor = None;
                self.logdet = f64::NEG_INFINITY;
            }
            (None, _) => {}
        }
    }

    /// Returns the configuration with `x` added; fails if `x` is degenerate.
    pub fn with_point(self, kernel: &SpectralKernel, x: Point) -> Result<Self, PapangelouError> {
        check_domain(kernel, &x)?;
        let v = self.cross_terms(kernel, &x);
        let eval = self.evaluate_with(kernel, &x, &v);
        self.push_evaluated(kernel, x, &v, eval)
    }

    pub fn with_point_or_singular(self, kernel: &SpectralKernel, x: Point) -> Result<Self, PapangelouError> {
        check_domain(kernel, &x)?;
        let v = self.cross_terms(kernel, &x);
        let eval = self.evaluate_with(kernel, &x, &v);
        Ok(self.push_evaluated_or_singular(kernel, x, &v, eval))
    }

    /// Removes the point at `index`.
    pub fn without_point(
        self,
        kernel: &SpectralKernel,
        index: usize,
    ) -> Result<Self, PapangelouError> {
        self.without_point_using(kernel, index, DeletionStrategy::Refactor)
    }

    pub fn without_point_using(
        mut self,
        kernel: &SpectralKernel,
        index: usize,
        strategy: DeletionStrategy,
    ) -> Result<Self, PapangelouError> {
        let n = self.len();
        if index >= n {
            return Err(PapangelouError::Index { index, len: n });
        }
        self.points.remove(index);
        self.gram = remove_packed(&self.gram, n, index);
        let floor = SINGULARITY_FLOOR * kernel.h();
        match (strategy, self.factor.take()) {
            (DeletionStrategy::RankOneUpdate, Some(factor)) => {
                self.factor = Some(drop_row_update(&factor, n, index));
                self.logdet = packed_logdet(self.factor.as_ref().unwrap(), n - 1);
            }
            (_, previous) => {
                // Rows before `index` of a regular factor are unchanged.
                let (start, seed) = match previous {
                    Some(f) => (index, remove_packed_prefix(&f, index)),
                    None => (0, Vec::new()),
                };
                self.factor = cholesky_from(&self.gram, n - 1, start, seed, floor);
                self.logdet = match &self.factor {
                    Some(f) => packed_logdet(f, n - 1),
                    None => f64::NEG_INFINITY,
                };
            }
        }
        Ok(self)
    }
}

fn check_domain(kernel: &SpectralKernel, x: &Point) -> Result<(), PapangelouError> {
    if kernel.window().contains(x) {
        Ok(())
    } else {
        Err(PapangelouError::Domain { x: x.x, y: x.y })
    }
}

/// Conditional intensity `c(ξ, x)` clamped to `[0, H]`.
pub fn conditional_intensity(
    kernel: &SpectralKernel,
    config: &Configuration,
    x: &Point,
) -> Result<f64, PapangelouError> {
    Ok(config.evaluate(kernel, x)?.value)
}

pub fn with_point(
    kernel: &SpectralKernel,
    config: Configuration,
    x: Point,
) -> Result<Configuration, PapangelouError> {
    config.with_point(kernel, x)
}

pub fn without_point(
    kernel: &SpectralKernel,
    config: Configuration,
    index: usize,
) -> Result<Configuration, PapangelouError> {
    config.without_point(kernel, index)
}

/// Solves `L w = v` for packed lower-triangular `L`.
fn forward_solve(factor: &[f64], v: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(v.len());
    for (i, &vi) in v.iter().enumerate() {
        let row = &factor[row_start(i)..row_start(i) + i + 1];
        let dot: f64 = row[..i].iter().zip(&w).map(|(a, b)| a * b).sum();
        w.push((vi - dot) / row[i]);
    }
    w
}

fn packed_logdet(factor: &[f64], n: usize) -> f64 {
    (0..n).map(|i| 2.0 * factor[row_start(i) + i].ln()).sum()
}

fn unpack_symmetric(packed: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let a = packed[row_start(i) + j];
            out[i][j] = a;
            out[j][i] = a;
        }
    }
    out
}

/// Drops row and column `index` from a packed lower-triangular matrix.
fn remove_packed(packed: &[f64], n: usize, index: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(row_start(n - 1));
    for i in (0..n).filter(|&i| i != index) {
        let row = &packed[row_start(i)..row_start(i) + i + 1];
        out.extend(row.iter().enumerate().filter(|(j, _)| *j != index).map(|(_, a)| *a));
    }
    out
}

fn remove_packed_prefix(packed: &[f64], rows: usize) -> Vec<f64> {
    packed[..row_start(rows)].to_vec()
}

/// Continues a packed Cholesky factorization of `gram` (size `n`) from row
/// `start`, given the first `start` rows in `seed`. Returns `None` when a
/// pivot falls below `floor`.
fn cholesky_from(gram: &[f64], n: usize, start: usize, seed: Vec<f64>, floor: f64) -> Option<Vec<f64>> {
    let mut factor = seed;
    factor.reserve(row_start(n).saturating_sub(factor.len()));
    for i in start..n {
        let base = row_start(i);
        for j in 0..i {
            let bj = row_start(j);
            let dot: f64 = (0..j).map(|k| factor[base + k] * factor[bj + k]).sum();
            factor.push((gram[base + j] - dot) / factor[bj + j]);
        }
        let sq: f64 = factor[base..base + i].iter().map(|t| t * t).sum();
        let pivot = gram[base + i] - sq;
        if !(pivot >= floor) || pivot <= 0.0 {
            return None;
        }
        factor.push(pivot.sqrt());
    }
    Some(factor)
}

/// Removes row `index` from a packed factor of size `n`. The trailing block
/// `L₃₃` satisfies `L₃₃' L₃₃'ᵀ = L₃₃ L₃₃ᵀ + l lᵀ` with `l` the removed column,
/// which is applied with Givens-style rank-one update steps.
fn drop_row_update(factor: &[f64], n: usize, index: usize) -> Vec<f64> {
    let m = n - 1;
    // Dense working copy of the reduced rows.
    let mut rows: Vec<Vec<f64>> = (0..n)
        .filter(|&i| i != index)
        .map(|i| {
            let r = &factor[row_start(i)..row_start(i) + i + 1];
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != index)
                .map(|(_, a)| *a)
                .chain(std::iter::repeat(0.0))
                .take(m)
                .collect()
        })
        .collect();
    // Column `index` of the old factor below the diagonal.
    let mut l: Vec<f64> = (index + 1..n).map(|i| factor[row_start(i) + index]).collect();
    for k in index..m {
        let off = k - index;
        let a = rows[k][k];
        let b = l[off];
        let r = a.hypot(b);
        let (c, s) = (r / a, b / a);
        rows[k][k] = r;
        for i in (k + 1)..m {
            let li = i - index;
            rows[i][k] = (rows[i][k] + s * l[li]) / c;
            l[li] = c * l[li] - s * rows[i][k];
        }
    }
    let mut out = Vec::with_capacity(row_start(m));
    for (i, row) in rows.iter().enumerate() {
        out.extend_from_slice(&row[..=i]);
    }
    out
}
