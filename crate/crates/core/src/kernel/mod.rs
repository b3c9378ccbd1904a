//! Stationary DPP kernel models and their truncated Fourier representation.
//!
//! A [`SpectralKernel`] holds the eigenvalues `λ_k` of a stationary kernel in
//! the Fourier basis of a square window, the matching J-kernel coefficients
//! `γ_k = λ_k / (1 - λ_k)`, and the constant diagonal `H = J(x, x)` which
//! bounds the Papangelou intensity.

mod bessel;

pub use bessel::{bessel_k, z_pow_bessel_k};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Default fraction of the expected count the retained modes must carry.
pub const DEFAULT_COVERAGE: f64 = 0.999;
/// Default cap on the truncation half-width.
pub const DEFAULT_MAX_ORDER: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid model parameter: {0}")]
    Parameter(String),
    #[error("coverage {achieved:.6} below target {target} at max order {max_order}")]
    Truncation {
        target: f64,
        achieved: f64,
        max_order: usize,
    },
    #[error("eigenvalue {lambda} at k = ({k1}, {k2}) is not below 1")]
    Spectrum { k1: i32, k2: i32, lambda: f64 },
}

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The square `[-side/2, side/2]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    side: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { side: 1.0 }
    }
}

impl Window {
    pub fn new(side: f64) -> Result<Self, KernelError> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(KernelError::Parameter(format!(
                "window side must be positive, got {side}"
            )));
        }
        Ok(Self { side })
    }

    pub fn unit() -> Self {
        Self::default()
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn contains(&self, p: &Point) -> bool {
        let half = 0.5 * self.side;
        p.x.abs() <= half && p.y.abs() <= half
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let half = 0.5 * self.side;
        Point::new(
            rng.random_range(-half..half),
            rng.random_range(-half..half),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Matern,
    Cauchy,
}

impl Family {
    pub fn needs_shape(&self) -> bool {
        !matches!(self, Family::Gaussian)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Matern => "matern",
            Family::Cauchy => "cauchy",
        })
    }
}

impl FromStr for Family {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "matern" | "matérn" => Ok(Family::Matern),
            "cauchy" => Ok(Family::Cauchy),
            other => Err(KernelError::Parameter(format!("unknown family '{other}'"))),
        }
    }
}

/// Range parameter as written in a config: either a number or half the
/// largest admissible value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Value(f64),
    HalfMax,
}

impl AlphaSpec {
    pub fn resolve(&self, family: Family, rho: f64, nu: Option<f64>) -> Result<f64, KernelError> {
        match *self {
            AlphaSpec::Value(a) => Ok(a),
            AlphaSpec::HalfMax => Ok(0.5 * max_alpha(family, rho, nu)?),
        }
    }
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSpec::Value(a) => write!(f, "{a}"),
            AlphaSpec::HalfMax => f.write_str("max/2"),
        }
    }
}

impl FromStr for AlphaSpec {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("max/2") {
            return Ok(AlphaSpec::HalfMax);
        }
        s.parse::<f64>()
            .map(AlphaSpec::Value)
            .map_err(|_| KernelError::Parameter(format!("alpha must be a number or 'max/2', got '{s}'")))
    }
}

impl Serialize for AlphaSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            AlphaSpec::Value(a) => serializer.serialize_f64(*a),
            AlphaSpec::HalfMax => serializer.serialize_str("max/2"),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(a) => Ok(AlphaSpec::Value(a)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Largest range parameter for which the kernel defines a valid DPP.
pub fn max_alpha(family: Family, rho: f64, nu: Option<f64>) -> Result<f64, KernelError> {
    if !(rho > 0.0) {
        return Err(KernelError::Parameter(format!(
            "intensity must be positive to bound alpha, got {rho}"
        )));
    }
    let alpha = match family {
        Family::Gaussian => (1.0 / (PI * rho)).sqrt(),
        Family::Matern => (1.0 / (4.0 * PI * shape(family, nu)? * rho)).sqrt(),
        Family::Cauchy => (shape(family, nu)? / (PI * rho)).sqrt(),
    };
    Ok(alpha)
}

fn shape(family: Family, nu: Option<f64>) -> Result<f64, KernelError> {
    match nu {
        Some(nu) if nu > 0.0 && nu.is_finite() => Ok(nu),
        Some(nu) => Err(KernelError::Parameter(format!(
            "shape nu must be positive, got {nu}"
        ))),
        None => Err(KernelError::Parameter(format!("{family} model requires nu"))),
    }
}

/// Family, intensity `rho`, range `alpha` and (for Matérn and Cauchy) shape `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub rho: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

impl ModelSpec {
    pub fn new(family: Family, rho: f64, alpha: f64, nu: Option<f64>) -> Result<Self, KernelError> {
        let spec = Self {
            family,
            rho,
            alpha,
            nu: if family.needs_shape() { nu } else { None },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(rho: f64, alpha: f64) -> Result<Self, KernelError> {
        Self::new(Family::Gaussian, rho, alpha, None)
    }

    pub fn matern(rho: f64, alpha: f64, nu: f64) -> Result<Self, KernelError> {
        Self::new(Family::Matern, rho, alpha, Some(nu))
    }

    pub fn cauchy(rho: f64, alpha: f64, nu: f64) -> Result<Self, KernelError> {
        Self::new(Family::Cauchy, rho, alpha, Some(nu))
    }

    /// Checks the parameter ranges. `rho = 0` is accepted and yields the
    /// empty process.
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(KernelError::Parameter(format!(
                "intensity rho must be non-negative, got {}",
                self.rho
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(KernelError::Parameter(format!(
                "range alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.family.needs_shape() {
            shape(self.family, self.nu)?;
        }
        if self.rho > 0.0 {
            let max = max_alpha(self.family, self.rho, self.nu)?;
            if self.alpha > max * (1.0 + 1e-12) {
                return Err(KernelError::Parameter(format!(
                    "alpha {} exceeds the existence bound {max} for {} at rho {}",
                    self.alpha, self.family, self.rho
                )));
            }
        }
        Ok(())
    }

    fn nu_or_default(&self) -> f64 {
        self.nu.unwrap_or(1.0)
    }

    /// Continuous Fourier transform of the kernel at squared frequency `omega_sq`.
    pub fn spectral_density(&self, omega_sq: f64) -> f64 {
        let (rho, a) = (self.rho, self.alpha);
        match self.family {
            Family::Gaussian => PI * a * a * rho * (-PI * PI * a * a * omega_sq).exp(),
            Family::Matern => {
                let nu = self.nu_or_default();
                4.0 * PI * a * a * rho * nu / (1.0 + 4.0 * PI * PI * a * a * omega_sq).powf(1.0 + nu)
            }
            Family::Cauchy => {
                let nu = self.nu_or_default();
                let z = 2.0 * PI * a * omega_sq.sqrt();
                // 2^{1-nu} pi a^2 rho / Γ(1+nu) · z^nu K_nu(z); at z = 0 this is pi a^2 rho / nu.
                let prefactor = ((1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(1.0 + nu)).exp();
                prefactor * PI * a * a * rho * z_pow_bessel_k(nu, z)
            }
        }
    }

    /// Kernel value `K_0(r)` at distance `r`.
    pub fn covariance(&self, r: f64) -> f64 {
        let (rho, a) = (self.rho, self.alpha);
        let s = r / a;
        match self.family {
            Family::Gaussian => rho * (-s * s).exp(),
            Family::Matern => rho * normalized_matern(self.nu_or_default(), s),
            Family::Cauchy => rho * (1.0 + s * s).powf(-1.0 - self.nu_or_default()),
        }
    }

    /// Closed-form pair correlation `g(r) = 1 - (K_0(r) / K_0(0))²`.
    pub fn pair_correlation(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let s = r / self.alpha;
        let g = match self.family {
            Family::Gaussian => 1.0 - (-2.0 * s * s).exp(),
            Family::Matern => {
                let c = normalized_matern(self.nu_or_default(), s);
                1.0 - c * c
            }
            Family::Cauchy => 1.0 - (1.0 + s * s).powf(-2.0 * self.nu_or_default() - 2.0),
        };
        g.clamp(0.0, 1.0)
    }
}

/// `2^{1-nu} s^nu K_nu(s) / Γ(nu)`, equal to 1 at `s = 0`.
fn normalized_matern(nu: f64, s: f64) -> f64 {
    let log_norm = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu);
    (log_norm.exp() * z_pow_bessel_k(nu, s)).min(1.0)
}

/// Eigenvalue of the mode `k` on the unit window.
pub fn eigenvalue(spec: &ModelSpec, k: (i32, i32)) -> f64 {
    let (k1, k2) = (k.0 as f64, k.1 as f64);
    spec.spectral_density(k1 * k1 + k2 * k2)
}

/// Closed-form pair correlation function of the model.
pub fn pair_correlation(spec: &ModelSpec, r: f64) -> f64 {
    spec.pair_correlation(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: (i32, i32),
    pub lambda: f64,
    pub gamma: f64,
}

/// Summary of a kernel suitable for embedding in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub family: Family,
    pub rho: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub side: f64,
    pub order: usize,
    #[serde(rename = "H")]
    pub h: f64,
    pub coverage: f64,
}

/// Truncated Fourier model of a stationary DPP kernel on a square window.
///
/// With the window `[-s/2, s/2]²` the orthonormal basis is
/// `φ_k(x) = exp(2πi k·x / s) / s`. Taking the Fourier coefficients of the
/// stationary kernel as continuous Fourier transform values gives
/// `λ_k = F(k / s)`, so that `Σ λ_k ≈ ρ s²`, and
///
/// `J(x, y) = s⁻² Σ_k γ_k cos(2π k·(x - y) / s)`.
///
/// `H` is the diagonal `J(x, x)`, an intensity per unit area; the total birth
/// rate of the dominating process is `H · s²`, which equals `Σ γ_k`.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    spec: ModelSpec,
    window: Window,
    order: usize,
    modes: Vec<Mode>,
    lambda_sum: f64,
    coverage: f64,
    h: f64,
    // Coefficients folded over k -> -k per axis, row-major over (k2, k1) in
    // 0..=order, already divided by the area.
    folded_gamma: Vec<f64>,
    folded_lambda: Vec<f64>,
}

impl SpectralKernel {
    /// Smallest truncation order whose modes carry at least
    /// `coverage_target · ρ · area` of the expected count.
    pub fn build(
        spec: ModelSpec,
        window: Window,
        coverage_target: f64,
        max_order: usize,
    ) -> Result<Self, KernelError> {
        spec.validate()?;
        if !(coverage_target > 0.0 && coverage_target < 1.0) {
            return Err(KernelError::Parameter(format!(
                "coverage target must lie in (0, 1), got {coverage_target}"
            )));
        }
        let side = window.side();
        let lambda_at = |k1: i32, k2: i32| {
            let (f1, f2) = (k1 as f64 / side, k2 as f64 / side);
            spec.spectral_density(f1 * f1 + f2 * f2)
        };
        let target = coverage_target * spec.rho * window.area();

        // Grow the square shell by shell; coverage is monotone in the order.
        let mut total = lambda_at(0, 0);
        let mut order = 0usize;
        while total < target {
            if order == max_order {
                return Err(KernelError::Truncation {
                    target: coverage_target,
                    achieved: total / (spec.rho * window.area()),
                    max_order,
                });
            }
            order += 1;
            let n = order as i32;
            for j in -n..=n {
                total += lambda_at(n, j) + lambda_at(-n, j);
            }
            for i in -(n - 1)..=(n - 1) {
                total += lambda_at(i, n) + lambda_at(i, -n);
            }
        }

        let n = order as i32;
        let mut modes = Vec::with_capacity((2 * order + 1).pow(2));
        for k2 in -n..=n {
            for k1 in -n..=n {
                let lambda = lambda_at(k1, k2);
                if !(0.0..1.0).contains(&lambda) {
                    return Err(KernelError::Spectrum { k1, k2, lambda });
                }
                modes.push(Mode {
                    k: (k1, k2),
                    lambda,
                    gamma: lambda / (1.0 - lambda),
                });
            }
        }
        let lambda_sum: f64 = modes.iter().map(|m| m.lambda).sum();
        let expected = spec.rho * window.area();
        let coverage = if expected > 0.0 { lambda_sum / expected } else { 1.0 };

        let width = order + 1;
        let area = window.area();
        let mut folded_gamma = vec![0.0; width * width];
        let mut folded_lambda = vec![0.0; width * width];
        for m in &modes {
            let (a1, a2) = (m.k.0.unsigned_abs() as usize, m.k.1.unsigned_abs() as usize);
            folded_gamma[a2 * width + a1] += m.gamma / area;
            folded_lambda[a2 * width + a1] += m.lambda / area;
        }

        let mut kernel = Self {
            spec,
            window,
            order,
            modes,
            lambda_sum,
            coverage,
            h: 0.0,
            folded_gamma,
            folded_lambda,
        };
        // Same summation order as `j_eval`, so that J(x, x) == H bit for bit.
        kernel.h = kernel.j_eval(&Point::new(0.0, 0.0), &Point::new(0.0, 0.0));
        Ok(kernel)
    }

    pub fn with_defaults(spec: ModelSpec) -> Result<Self, KernelError> {
        Self::build(spec, Window::unit(), DEFAULT_COVERAGE, DEFAULT_MAX_ORDER)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// Expected number of points, `Σ λ_k`.
    pub fn lambda_sum(&self) -> f64 {
        self.lambda_sum
    }

    /// Count variance `Σ λ_k (1 - λ_k)`.
    pub fn count_variance(&self) -> f64 {
        self.modes.iter().map(|m| m.lambda * (1.0 - m.lambda)).sum()
    }

    pub fn gamma_sum(&self) -> f64 {
        self.h * self.window.area()
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    /// Upper bound of the Papangelou intensity, `J(x, x)`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Birth rate of the dominating process over the whole window.
    pub fn total_birth_rate(&self) -> f64 {
        self.h * self.window.area()
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            family: self.spec.family,
            rho: self.spec.rho,
            alpha: self.spec.alpha,
            nu: self.spec.nu,
            side: self.window.side(),
            order: self.order,
            h: self.h,
            coverage: self.coverage,
        }
    }

    /// J-kernel between two points.
    pub fn j_eval(&self, x: &Point, y: &Point) -> f64 {
        self.fold_eval(&self.folded_gamma, x.x - y.x, x.y - y.y)
    }

    /// Truncated kernel `K(x, y) = s⁻² Σ λ_k cos(2π k·(x - y) / s)`.
    pub fn k_eval(&self, x: &Point, y: &Point) -> f64 {
        self.fold_eval(&self.folded_lambda, x.x - y.x, x.y - y.y)
    }

    /// Kernel values at an arbitrary displacement.
    pub fn k_at(&self, dx: f64, dy: f64) -> f64 {
        self.fold_eval(&self.folded_lambda, dx, dy)
    }

    // The mode set is symmetric under k1 -> -k1 and k2 -> -k2 separately and the
    // coefficients depend only on |k|, so the sine terms cancel and the sum
    // factorizes into cos(2π k1 dx / s) · cos(2π k2 dy / s).
    fn fold_eval(&self, coeffs: &[f64], dx: f64, dy: f64) -> f64 {
        let width = self.order + 1;
        let w = 2.0 * PI / self.window.side();
        let mut cx = [0.0f64; DEFAULT_MAX_ORDER + 1];
        let mut cy = [0.0f64; DEFAULT_MAX_ORDER + 1];
        let (cx, cy) = if width <= cx.len() {
            (&mut cx[..width], &mut cy[..width])
        } else {
            return self.fold_eval_heap(coeffs, dx, dy);
        };
        cosine_table(w * dx, cx);
        cosine_table(w * dy, cy);
        let mut total = 0.0;
        for (row, &c2) in coeffs.chunks_exact(width).zip(cy.iter()) {
            let inner: f64 = row.iter().zip(cx.iter()).map(|(g, c1)| g * c1).sum();
            total += inner * c2;
        }
        total
    }

    fn fold_eval_heap(&self, coeffs: &[f64], dx: f64, dy: f64) -> f64 {
        let width = self.order + 1;
        let w = 2.0 * PI / self.window.side();
        let mut cx = vec![0.0; width];
        let mut cy = vec![0.0; width];
        cosine_table(w * dx, &mut cx);
        cosine_table(w * dy, &mut cy);
        let mut total = 0.0;
        for (row, &c2) in coeffs.chunks_exact(width).zip(cy.iter()) {
            let inner: f64 = row.iter().zip(cx.iter()).map(|(g, c1)| g * c1).sum();
            total += inner * c2;
        }
        total
    }
}

/// Fills `out[k] = cos(k θ)`, re-anchoring the rotation every few steps.
fn cosine_table(theta: f64, out: &mut [f64]) {
    let (s1, c1) = theta.sin_cos();
    let (mut c, mut s) = (1.0, 0.0);
    for (k, slot) in out.iter_mut().enumerate() {
        if k % 16 == 0 && k > 0 {
            let (sk, ck) = (k as f64 * theta).sin_cos();
            c = ck;
            s = sk;
        }
        *slot = c;
        let next_c = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = next_c;
    }
}

/// Maps `0 ≤ λ < 1` to the J-kernel coefficient `λ / (1 - λ)`.
pub fn j_coefficient(lambda: f64) -> f64 {
    lambda / (1.0 - lambda)
}

/// Free-function form of [`SpectralKernel::j_eval`].
pub fn j_eval(kernel: &SpectralKernel, x: &Point, y: &Point) -> f64 {
    kernel.j_eval(x, y)
}

/// Free-function form of [`SpectralKernel::build`].
pub fn build_spectral(
    spec: ModelSpec,
    window: Window,
    coverage_target: f64,
    max_order: usize,
) -> Result<SpectralKernel, KernelError> {
    SpectralKernel::build(spec, window, coverage_target, max_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_gaussian() -> SpectralKernel {
        SpectralKernel::with_defaults(ModelSpec::gaussian(50.0, 0.04).unwrap()).unwrap()
    }

    #[test]
    fn max_alpha_values() {
        let g = max_alpha(Family::Gaussian, 50.0, None).unwrap();
        assert!((g - 0.0797884560802865).abs() < 1e-12);
        let m = max_alpha(Family::Matern, 50.0, Some(5.0)).unwrap();
        assert!((m - 0.0178412411615277).abs() < 1e-12);
        let c = max_alpha(Family::Cauchy, 50.0, Some(5.0)).unwrap();
        assert!((c - (5.0 / (PI * 50.0)).sqrt()).abs() < 1e-15);
        assert!((0.5 * g - 0.0398942280401433).abs() < 1e-12);
    }

    #[test]
    fn max_alpha_requires_shape() {
        assert!(matches!(
            max_alpha(Family::Matern, 50.0, None),
            Err(KernelError::Parameter(_))
        ));
        assert!(matches!(
            max_alpha(Family::Cauchy, 50.0, Some(-1.0)),
            Err(KernelError::Parameter(_))
        ));
    }

    #[test]
    fn alpha_spec_parsing() {
        assert_eq!("max/2".parse::<AlphaSpec>().unwrap(), AlphaSpec::HalfMax);
        assert_eq!("0.04".parse::<AlphaSpec>().unwrap(), AlphaSpec::Value(0.04));
        assert!("half".parse::<AlphaSpec>().is_err());
        let a = AlphaSpec::HalfMax.resolve(Family::Gaussian, 50.0, None).unwrap();
        assert!((a - 0.0398942280401433).abs() < 1e-12);
    }

    #[test]
    fn spec_rejects_alpha_beyond_bound() {
        assert!(ModelSpec::gaussian(50.0, 0.08).is_err());
        assert!(ModelSpec::matern(50.0, 0.01, 5.0).is_ok());
        assert!(ModelSpec::matern(50.0, 0.02, 5.0).is_err());
    }

    #[test]
    fn gaussian_origin_eigenvalue() {
        let spec = ModelSpec::gaussian(50.0, 0.04).unwrap();
        assert!((eigenvalue(&spec, (0, 0)) - 0.25132741228718345).abs() < 1e-15);
    }

    #[test]
    fn cauchy_origin_eigenvalue() {
        let alpha = 0.5 * max_alpha(Family::Cauchy, 50.0, Some(5.0)).unwrap();
        let spec = ModelSpec::cauchy(50.0, alpha, 5.0).unwrap();
        let expected = PI * alpha * alpha * 50.0 / 5.0;
        assert!((eigenvalue(&spec, (0, 0)) - expected).abs() < 1e-14);
        // Continuity approaching the origin.
        let near = spec.spectral_density(1e-14);
        assert!(((near - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn paper_gaussian_truncation() {
        let kernel = paper_gaussian();
        assert!((kernel.h() - 57.5).abs() / 57.5 < 0.01, "H = {}", kernel.h());
        assert!(kernel.coverage() >= DEFAULT_COVERAGE);
        let sum = kernel.lambda_sum();
        assert!((49.95..=50.0).contains(&sum), "sum = {sum}");
        assert_eq!(kernel.order(), 20);
        assert_eq!(kernel.modes().len(), 41 * 41);
    }

    #[test]
    fn truncation_fails_when_order_is_capped() {
        let spec = ModelSpec::gaussian(50.0, 0.04).unwrap();
        let err = SpectralKernel::build(spec, Window::unit(), 0.999, 5).unwrap_err();
        assert!(matches!(err, KernelError::Truncation { max_order: 5, .. }));
    }

    #[test]
    fn eigenvalue_at_one_is_a_spectrum_error() {
        // Within the validation tolerance but with λ_0 just above 1.
        let alpha = max_alpha(Family::Gaussian, 50.0, None).unwrap() * (1.0 + 1e-13);
        let spec = ModelSpec::gaussian(50.0, alpha).unwrap();
        let err = SpectralKernel::build(spec, Window::unit(), 0.999, 64).unwrap_err();
        assert!(matches!(err, KernelError::Spectrum { .. }));
    }

    #[test]
    fn zero_intensity_is_empty() {
        let kernel = SpectralKernel::with_defaults(ModelSpec::gaussian(0.0, 0.04).unwrap()).unwrap();
        assert_eq!(kernel.h(), 0.0);
        assert_eq!(kernel.lambda_sum(), 0.0);
        assert_eq!(kernel.coverage(), 1.0);
    }

    #[test]
    fn larger_window_scales_counts() {
        let spec = ModelSpec::gaussian(50.0, 0.04).unwrap();
        let kernel = SpectralKernel::build(spec, Window::new(2.0).unwrap(), 0.999, 64).unwrap();
        assert!(kernel.coverage() >= 0.999);
        assert!(kernel.lambda_sum() <= 200.0 + 1e-9 && kernel.lambda_sum() >= 0.999 * 200.0);
        let p = Point::new(0.3, -0.7);
        assert_eq!(kernel.j_eval(&p, &p), kernel.h());
        // Per-area intensity bound matches the unit window to within truncation.
        assert!((kernel.h() - paper_gaussian().h()).abs() / kernel.h() < 0.01);
    }

    fn direct_j(kernel: &SpectralKernel, x: &Point, y: &Point) -> f64 {
        let side = kernel.window().side();
        let mut total = 0.0;
        for m in kernel.modes() {
            let phase = 2.0 * PI * (m.k.0 as f64 * (x.x - y.x) + m.k.1 as f64 * (x.y - y.y)) / side;
            total += m.gamma * phase.cos();
        }
        total / kernel.window().area()
    }

    #[test]
    fn j_eval_matches_direct_double_sum() {
        let kernel = paper_gaussian();
        let x = Point::new(0.05, 0.0);
        let y = Point::new(-0.05, 0.0);
        let direct = direct_j(&kernel, &x, &y);
        let fast = kernel.j_eval(&x, &y);
        assert!(((fast - direct) / direct).abs() < 1e-12, "{fast} vs {direct}");
    }

    #[test]
    fn pair_correlation_values() {
        let g = ModelSpec::gaussian(50.0, 0.04).unwrap();
        assert!((g.pair_correlation(0.04) - 0.8646647167633873).abs() < 1e-12);
        let m = ModelSpec::matern(50.0, 0.008, 5.0).unwrap();
        let c = ModelSpec::cauchy(50.0, 0.08, 5.0).unwrap();
        for s in [&g, &m, &c] {
            assert_eq!(s.pair_correlation(0.0), 0.0);
            assert!(s.pair_correlation(1e-9) < 1e-6);
            assert!((s.pair_correlation(5.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matern_pair_correlation_matches_covariance() {
        let m = ModelSpec::matern(50.0, 0.008, 5.0).unwrap();
        for r in [0.001, 0.01, 0.03] {
            let c = m.covariance(r) / 50.0;
            assert!((m.pair_correlation(r) - (1.0 - c * c)).abs() < 1e-14);
        }
    }

    fn arb_spec() -> impl Strategy<Value = ModelSpec> {
        (0usize..3, 1.0f64..100.0, 0.05f64..0.95, 0.5f64..10.0).prop_map(|(f, rho, frac, nu)| {
            let family = [Family::Gaussian, Family::Matern, Family::Cauchy][f];
            let alpha = frac * max_alpha(family, rho, Some(nu)).unwrap();
            ModelSpec::new(family, rho, alpha, Some(nu)).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn eigenvalues_radially_non_increasing(spec in arb_spec()) {
            let mut prev = f64::INFINITY;
            for k in 0..40 {
                let l = eigenvalue(&spec, (k, 0));
                prop_assert!(l <= prev * (1.0 + 1e-12));
                prop_assert!(l >= 0.0);
                prev = l;
            }
            let diag = eigenvalue(&spec, (3, 4));
            let axis = eigenvalue(&spec, (5, 0));
            prop_assert!((diag - axis).abs() <= 1e-12 * axis.max(1e-300));
        }

        #[test]
        fn pair_correlation_in_unit_interval(spec in arb_spec()) {
            let mut prev = 0.0;
            for i in 0..200 {
                let r = i as f64 * spec.alpha / 25.0;
                let g = spec.pair_correlation(r);
                prop_assert!((0.0..=1.0).contains(&g));
                if spec.family != Family::Matern {
                    prop_assert!(g >= prev - 1e-15);
                }
                prev = g;
            }
        }

        #[test]
        fn spectral_kernel_invariants(
            rho in 20.0f64..60.0,
            frac in 0.3f64..0.8,
            xs in proptest::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 2..6),
        ) {
            let alpha = frac * max_alpha(Family::Gaussian, rho, None).unwrap();
            let spec = ModelSpec::gaussian(rho, alpha).unwrap();
            let kernel = SpectralKernel::with_defaults(spec).unwrap();
            let mut gamma_sum = 0.0;
            for m in kernel.modes() {
                prop_assert!(m.lambda >= 0.0 && m.lambda < 1.0);
                prop_assert!((m.gamma - m.lambda / (1.0 - m.lambda)).abs() <= 1e-15 * m.gamma.max(1.0));
                prop_assert!(m.gamma >= m.lambda);
                gamma_sum += m.gamma;
            }
            prop_assert!((gamma_sum - kernel.h()).abs() < 1e-9 * gamma_sum);
            prop_assert!(kernel.h() >= kernel.lambda_sum());
            prop_assert!(kernel.lambda_sum() >= 0.999 * rho);
            for (a, b) in xs.iter().zip(xs.iter().skip(1)) {
                let (p, q) = (Point::new(a.0, a.1), Point::new(b.0, b.1));
                let jpq = kernel.j_eval(&p, &q);
                prop_assert!(jpq <= kernel.h() + 1e-12);
                prop_assert!((jpq - kernel.j_eval(&q, &p)).abs() < 1e-12 * kernel.h());
                prop_assert_eq!(kernel.j_eval(&p, &p), kernel.h());
            }
        }
    }
}
