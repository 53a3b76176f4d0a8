//! Model specification for returns `r_t = v_t ε_t`, `v_t = δ exp(x_t)`, with a
//! latent linear process `x_t = Σ a_i z_{t-i}` and an optional linear filter
//! `y_t = Σ b_j r_{t-j}`, together with the closed-form population moments
//! available when the latent innovations are Gaussian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{neumaier_sum, riemann_zeta};

/// Moving-average coefficient sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `a_i = scale · (i + 1)^{-beta}` with `1/2 < beta < 1`.
    HyperbolicLm { scale: f64, beta: f64 },
    /// `a_i = scale · ratio^i` with `|ratio| < 1`.
    Geometric { ratio: f64, scale: f64 },
    /// Finitely many taps, zero afterwards.
    ExplicitFinite { values: Vec<f64> },
}

impl CoefficientSpec {
    pub fn is_long_memory(&self) -> bool {
        matches!(self, CoefficientSpec::HyperbolicLm { .. })
    }

    /// Geometric and finite sequences are absolutely summable.
    pub fn is_summable(&self) -> bool {
        !self.is_long_memory()
    }

    /// Memory parameter β of a long-memory sequence.
    pub fn beta(&self) -> Option<f64> {
        match *self {
            CoefficientSpec::HyperbolicLm { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            CoefficientSpec::HyperbolicLm { scale, beta } => {
                if !(*beta > 0.5 && *beta < 1.0) {
                    return Err(Error::invalid(
                        format!("{field}.beta"),
                        format!("must lie in (0.5, 1), got {beta}"),
                    ));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(
                        format!("{field}.scale"),
                        format!("must be positive, got {scale}"),
                    ));
                }
            }
            CoefficientSpec::Geometric { ratio, scale } => {
                if ratio.is_nan() || ratio.abs() >= 1.0 {
                    return Err(Error::invalid(
                        format!("{field}.ratio"),
                        format!("must lie in (-1, 1), got {ratio}"),
                    ));
                }
                if !scale.is_finite() {
                    return Err(Error::invalid(format!("{field}.scale"), "must be finite"));
                }
            }
            CoefficientSpec::ExplicitFinite { values } => {
                if values.is_empty() {
                    return Err(Error::invalid(format!("{field}.values"), "must not be empty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("{field}.values"), "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Coefficient with index `i`.
    pub fn coeff(&self, i: usize) -> f64 {
        match self {
            CoefficientSpec::HyperbolicLm { scale, beta } => scale * ((i + 1) as f64).powf(-beta),
            CoefficientSpec::Geometric { ratio, scale } => scale * ratio.powi(i as i32),
            CoefficientSpec::ExplicitFinite { values } => values.get(i).copied().unwrap_or(0.0),
        }
    }

    /// Number of non-zero taps, if finite.
    pub fn support_len(&self) -> Option<usize> {
        match self {
            CoefficientSpec::ExplicitFinite { values } => Some(values.len()),
            _ => None,
        }
    }

    /// Sum of the first `m` coefficients (all of them for `None`).
    pub fn sum(&self, m: Option<usize>) -> f64 {
        match (self, m) {
            (CoefficientSpec::Geometric { ratio, scale }, None) => scale / (1.0 - ratio),
            (CoefficientSpec::HyperbolicLm { .. }, None) => f64::INFINITY,
            (_, m) => {
                let m = m.or(self.support_len()).unwrap_or(0);
                neumaier_sum((0..m).map(|i| self.coeff(i)))
            }
        }
    }

    /// Sum of squared coefficients with indices `< m` (all of them for `None`).
    pub fn sum_sq(&self, m: Option<usize>) -> f64 {
        match (self, m) {
            (CoefficientSpec::Geometric { ratio, scale }, None) => scale * scale / (1.0 - ratio * ratio),
            (CoefficientSpec::HyperbolicLm { scale, beta }, None) => scale * scale * riemann_zeta(2.0 * beta),
            (_, m) => {
                let m = m.or(self.support_len()).unwrap_or(0);
                neumaier_sum((0..m).map(|i| self.coeff(i).powi(2)))
            }
        }
    }
}

/// Realizes `a_0, ..., a_{m-1}`.
pub fn build_coeffs(spec: &CoefficientSpec, m: usize) -> Vec<f64> {
    assert!(m >= 1, "coefficient count must be positive");
    (0..m).map(|i| spec.coeff(i)).collect()
}

/// `Σ_{i≥m} a_i²`: exact for summable sequences, the integral upper bound
/// `C² m^{1-2β} / (2β - 1)` for the hyperbolic sequence.
pub fn coeff_tail_l2(spec: &CoefficientSpec, m: usize) -> f64 {
    assert!(m >= 1, "coefficient count must be positive");
    match spec {
        CoefficientSpec::HyperbolicLm { scale, beta } => {
            scale * scale * (m as f64).powf(1.0 - 2.0 * beta) / (2.0 * beta - 1.0)
        }
        CoefficientSpec::Geometric { ratio, scale } => {
            let r2 = ratio * ratio;
            scale * scale * r2.powi(m as i32) / (1.0 - r2)
        }
        CoefficientSpec::ExplicitFinite { values } => {
            neumaier_sum(values.iter().skip(m).map(|v| v * v))
        }
    }
}

/// Law of an iid innovation sequence; every variant has mean 0, variance 1
/// and vanishing third moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationLaw {
    StandardNormal,
    Rademacher,
}

impl InnovationLaw {
    pub fn mean(self) -> f64 {
        0.0
    }

    pub fn variance(self) -> f64 {
        1.0
    }

    pub fn third_moment(self) -> f64 {
        0.0
    }

    pub fn fourth_moment(self) -> f64 {
        match self {
            InnovationLaw::StandardNormal => 3.0,
            InnovationLaw::Rademacher => 1.0,
        }
    }

    pub fn is_gaussian(self) -> bool {
        self == InnovationLaw::StandardNormal
    }
}

/// Full description of the return process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Volatility scale δ.
    pub delta: f64,
    /// Latent process coefficients `a_i`.
    pub a: CoefficientSpec,
    /// Return filter `b_j`; must be summable.
    pub b: CoefficientSpec,
    pub z_law: InnovationLaw,
    pub eps_law: InnovationLaw,
    /// Risk-free rate, per-period units.
    pub r_f: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta", format!("must be positive, got {}", self.delta)));
        }
        if !(self.r_f > 0.0 && self.r_f.is_finite()) {
            return Err(Error::invalid("r_f", format!("must be positive, got {}", self.r_f)));
        }
        self.a.validate("a")?;
        self.b.validate("b")?;
        if !self.b.is_summable() {
            return Err(Error::invalid("b", "the return filter must be absolutely summable"));
        }
        Ok(())
    }

    pub fn is_long_memory(&self) -> bool {
        self.a.is_long_memory()
    }

    fn require_gaussian(&self, what: &str) -> Result<()> {
        if self.z_law.is_gaussian() {
            Ok(())
        } else {
            Err(Error::NoClosedForm(format!(
                "{what} requires Gaussian latent innovations; use the Monte Carlo moment estimator"
            )))
        }
    }
}

/// Truncation lengths for `a` and `b`; `None` means the untruncated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Truncation {
    pub a: Option<usize>,
    pub b: Option<usize>,
}

impl Truncation {
    pub const NONE: Truncation = Truncation { a: None, b: None };

    pub fn new(a: usize, b: usize) -> Self {
        Truncation { a: Some(a), b: Some(b) }
    }
}

/// τ² = Σ_{i<m} a_i², the variance of `x_t`.
pub fn x_variance(spec: &ModelSpec, m: Option<usize>) -> f64 {
    spec.a.sum_sq(m)
}

/// σ² = E r_t² = δ² exp(2τ²) for Gaussian `z`.
pub fn sigma_squared(spec: &ModelSpec, m: Option<usize>) -> Result<f64> {
    spec.require_gaussian("sigma_squared")?;
    Ok(spec.delta * spec.delta * (2.0 * x_variance(spec, m)).exp())
}

/// σ_y² = σ² Σ b_j², exact because `r_t` is white noise.
pub fn sigma_y_squared(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    Ok(sigma_squared(spec, trunc.a)? * spec.b.sum_sq(trunc.b))
}

/// Derivative at zero of `K_∞(y) = e^{2y} E e^{2x}`, i.e. `2 exp(2τ²)`.
pub fn k_prime_zero(spec: &ModelSpec, m: Option<usize>) -> Result<f64> {
    spec.require_gaussian("k_prime_zero")?;
    Ok(2.0 * (2.0 * x_variance(spec, m)).exp())
}

/// Smallest `K` with `E e^{ηx} ≤ e^{Kη²}` for all η, which is `τ²/2` for Gaussian `x`.
pub fn check_subgaussian(spec: &ModelSpec, m: Option<usize>) -> Result<f64> {
    if !spec.z_law.is_gaussian() {
        return Err(Error::NoClosedForm(
            "sub-Gaussian constant not verifiable in closed form for non-Gaussian latent innovations".into(),
        ));
    }
    Ok(0.5 * x_variance(spec, m))
}

/// Population Sharpe ratio `(E y_t - r_f) / σ_y = -r_f / σ_y`.
pub fn true_sharpe(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    Ok(-spec.r_f / sigma_y_squared(spec, trunc)?.sqrt())
}
