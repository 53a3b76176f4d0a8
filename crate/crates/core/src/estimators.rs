//! Sharpe-ratio statistics and the additive decompositions of their errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{k_prime_zero, sigma_squared, ModelSpec};
use crate::numeric::neumaier_sum;
use crate::simulate::{linear_filter, ConvMethod, SamplePath};

fn require_nonempty(series: &[f64]) -> Result<()> {
    if series.is_empty() {
        Err(Error::Dimension("empty series".into()))
    } else {
        Ok(())
    }
}

/// `n⁻¹ Σ r_t`.
pub fn mean_hat(series: &[f64]) -> Result<f64> {
    require_nonempty(series)?;
    Ok(neumaier_sum(series.iter().copied()) / series.len() as f64)
}

/// `n⁻¹ Σ (r_t - μ̂)²` (divisor `n`).
pub fn var_hat(series: &[f64]) -> Result<f64> {
    let m = mean_hat(series)?;
    Ok(neumaier_sum(series.iter().map(|v| (v - m) * (v - m))) / series.len() as f64)
}

/// Point statistics of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeEstimate {
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub sr_hat: f64,
    pub n: usize,
}

/// `(μ̂ - r_f) / σ̂`; serves raw returns and filtered returns alike.
pub fn sharpe_hat(series: &[f64], r_f: f64) -> Result<SharpeEstimate> {
    let mu_hat = mean_hat(series)?;
    let sigma2_hat = var_hat(series)?;
    if sigma2_hat <= 0.0 {
        return Err(Error::DegenerateSample("zero sample variance".into()));
    }
    Ok(SharpeEstimate {
        mu_hat,
        sigma2_hat,
        sr_hat: (mu_hat - r_f) / sigma2_hat.sqrt(),
        n: series.len(),
    })
}

/// First-order split of `ŜR - SR` into the mean and variance contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaMethodTerms {
    /// `μ̂ / σ_y`
    pub mean_term: f64,
    /// `r_f (σ̂² - σ_y²) / (2 σ_y³)`
    pub var_term: f64,
}

pub fn delta_method_terms(est: &SharpeEstimate, sigma_y2: f64, r_f: f64) -> DeltaMethodTerms {
    let sy = sigma_y2.sqrt();
    DeltaMethodTerms {
        mean_term: est.mu_hat / sy,
        var_term: r_f * (est.sigma2_hat - sigma_y2) / (2.0 * sigma_y2 * sy),
    }
}

/// `σ̂² - σ² = martingale_term + longmem_term + mean_sq_term`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarErrorDecomposition {
    /// `n⁻¹ Σ v_t² (ε_t² - 1)`
    pub martingale_term: f64,
    /// `n⁻¹ Σ (v_t² - σ²)`
    pub longmem_term: f64,
    /// `-μ̂²`
    pub mean_sq_term: f64,
}

impl VarErrorDecomposition {
    pub fn total(&self) -> f64 {
        neumaier_sum([self.martingale_term, self.longmem_term, self.mean_sq_term])
    }
}

fn check_volatility(path: &SamplePath) -> Result<()> {
    if path.v.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::InvalidPath("non-positive volatility".into()));
    }
    require_nonempty(&path.r)
}

/// Decomposition of the raw-return variance error with σ² from the model.
pub fn decompose_var_error(path: &SamplePath, spec: &ModelSpec) -> Result<VarErrorDecomposition> {
    let sigma2 = sigma_squared(spec, path.truncation.a)?;
    decompose_var_error_with(path, sigma2)
}

/// Decomposition of the raw-return variance error for a supplied σ².
pub fn decompose_var_error_with(path: &SamplePath, sigma2: f64) -> Result<VarErrorDecomposition> {
    check_volatility(path)?;
    let n = path.len() as f64;
    let mu = mean_hat(&path.r)?;
    let martingale_term = neumaier_sum(path.v.iter().zip(&path.r).map(|(v, r)| {
        let eps = r / v;
        v * v * (eps * eps - 1.0)
    })) / n;
    let longmem_term = neumaier_sum(path.v.iter().map(|v| v * v - sigma2)) / n;
    Ok(VarErrorDecomposition {
        martingale_term,
        longmem_term,
        mean_sq_term: -mu * mu,
    })
}

/// The three √n-scaled pieces of `√n (n⁻¹ Σ y_t² - σ_y²)` for the filtered series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VDecomposition {
    /// `δ² n^{-1/2} Σ_t Σ_j b_j² e^{2x_{t-j}} (ε_{t-j}² - 1)`
    pub v1: f64,
    /// `δ² n^{-1/2} Σ_t Σ_j b_j² (e^{2x_{t-j}} - E e^{2x})`
    pub v2: f64,
    /// `n^{-1/2} Σ_t Σ_{i≠j} b_i b_j r_{t-i} r_{t-j}`
    pub v3: f64,
}

impl VDecomposition {
    pub fn total(&self) -> f64 {
        neumaier_sum([self.v1, self.v2, self.v3])
    }
}

/// Splits the filtered second moment using the pre-sample window of the path,
/// so that `v1 + v2 + v3 = √n (n⁻¹ Σ y_t² - σ_y²)` holds exactly.
pub fn v_decomposition(path: &SamplePath, spec: &ModelSpec) -> Result<VDecomposition> {
    check_volatility(path)?;
    let trunc = path.truncation;
    let m_b = trunc
        .b
        .ok_or_else(|| Error::InvalidPath("path carries no filter truncation".into()))?;
    if path.r_pre.len() + 1 != m_b || path.x_pre.len() + 1 != m_b {
        return Err(Error::InvalidPath("pre-sample window does not match the filter length".into()));
    }
    // δ² E e^{2x} = σ²
    let sigma2 = sigma_squared(spec, trunc.a)?;
    let b2: Vec<f64> = (0..m_b).map(|j| spec.b.coeff(j).powi(2)).collect();
    let delta2 = path.delta * path.delta;

    let r2: Vec<f64> = path.r_full().map(|r| r * r).collect();
    let v2: Vec<f64> = path.x_full().map(|x| delta2 * (2.0 * x).exp()).collect();
    let mart: Vec<f64> = r2.iter().zip(&v2).map(|(r2, v2)| r2 - v2).collect();
    let centered: Vec<f64> = v2.iter().map(|v2| v2 - sigma2).collect();

    let f1 = linear_filter(&mart, &b2, ConvMethod::Direct)?;
    let f2 = linear_filter(&centered, &b2, ConvMethod::Direct)?;
    let diag = linear_filter(&r2, &b2, ConvMethod::Direct)?;
    let scale = (path.len() as f64).sqrt();
    Ok(VDecomposition {
        v1: neumaier_sum(f1) / scale,
        v2: neumaier_sum(f2) / scale,
        v3: neumaier_sum(path.y.iter().zip(&diag).map(|(y, d)| y * y - d)) / scale,
    })
}

/// Linearization of the volatility partial sum: the retained term
/// `δ² K′_∞(0) n^{β-3/2} Σ x_t` and the remainder `gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    pub retained: f64,
    pub gap: f64,
}

/// Lower-level form with every constant supplied.
pub fn linearization_terms_with(path: &SamplePath, beta: f64, sigma2: f64, k_prime: f64) -> Linearization {
    let n = path.len() as f64;
    let norm = n.powf(beta - 1.5);
    let delta2 = path.delta * path.delta;
    let volsum = neumaier_sum(path.v.iter().map(|v| v * v - sigma2));
    let xsum = neumaier_sum(path.x.iter().copied());
    let retained = norm * delta2 * k_prime * xsum;
    Linearization {
        retained,
        gap: norm * volsum - retained,
    }
}

pub fn linearization_terms(path: &SamplePath, spec: &ModelSpec) -> Result<Linearization> {
    let beta = spec
        .a
        .beta()
        .ok_or_else(|| Error::NotApplicable("linearization needs a long-memory latent process".into()))?;
    check_volatility(path)?;
    let sigma2 = sigma_squared(spec, path.truncation.a)?;
    let k_prime = k_prime_zero(spec, path.truncation.a)?;
    Ok(linearization_terms_with(path, beta, sigma2, k_prime))
}

/// `n^{β-3/2} [Σ (v_t² - σ²) - δ² K′_∞(0) Σ x_t]`.
pub fn linearization_gap(path: &SamplePath, spec: &ModelSpec) -> Result<f64> {
    Ok(linearization_terms(path, spec)?.gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientSpec, InnovationLaw, Truncation};
    use crate::simulate::{simulate_path, SimConfig};
    use proptest::prelude::*;

    fn finite(values: &[f64]) -> CoefficientSpec {
        CoefficientSpec::ExplicitFinite { values: values.to_vec() }
    }

    fn spec(a: CoefficientSpec, b: CoefficientSpec) -> ModelSpec {
        ModelSpec {
            delta: 1.0,
            a,
            b,
            z_law: InnovationLaw::StandardNormal,
            eps_law: InnovationLaw::StandardNormal,
            r_f: 0.05,
        }
    }

    #[test]
    fn mean_and_var_examples() {
        assert_eq!(mean_hat(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let s = [0.01, -0.02, 0.03];
        assert!((mean_hat(&s).unwrap() - 0.006_666_7).abs() < 1e-7);
        // hand arithmetic: deviations 1/300, -8/300, 7/300
        let oracle = ((1.0f64 / 300.0).powi(2) + (8.0f64 / 300.0).powi(2) + (7.0f64 / 300.0).powi(2)) / 3.0;
        assert!((var_hat(&s).unwrap() - oracle).abs() < 1e-18);
        assert!((var_hat(&s).unwrap() - 4.222_22e-4).abs() < 1e-9);
        assert_eq!(var_hat(&[2.5, 2.5, 2.5]).unwrap(), 0.0);
        assert_eq!(var_hat(&[1.0, -1.0]).unwrap(), 1.0);
        assert!(matches!(mean_hat(&[]), Err(Error::Dimension(_))));
        assert!(matches!(var_hat(&[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn sharpe_examples() {
        let e = sharpe_hat(&[0.01, -0.02, 0.03], 0.005).unwrap();
        assert!((e.sr_hat - 0.081_111).abs() < 1e-6);
        assert!((e.sigma2_hat.sqrt() - 0.020_548_1).abs() < 1e-7);
        let e = sharpe_hat(&[1.0, -1.0], 1e-12).unwrap();
        assert!(e.sr_hat.abs() < 1e-11);
        assert!(matches!(sharpe_hat(&[0.3, 0.3, 0.3], 0.01), Err(Error::DegenerateSample(_))));
    }

    proptest! {
        #[test]
        fn sharpe_invariants(series in prop::collection::vec(-10.0f64..10.0, 2..50), r_f in 0.001f64..1.0, c in 0.01f64..100.0) {
            prop_assume!(var_hat(&series).unwrap() > 1e-9);
            let e = sharpe_hat(&series, r_f).unwrap();
            prop_assert!(e.sigma2_hat >= 0.0);
            prop_assert!((e.sr_hat * e.sigma2_hat.sqrt() - (e.mu_hat - r_f)).abs() <= 1e-12 * (1.0 + e.mu_hat.abs() + r_f));
            let scaled: Vec<f64> = series.iter().map(|v| v * c).collect();
            let es = sharpe_hat(&scaled, r_f * c).unwrap();
            prop_assert!((es.sr_hat - e.sr_hat).abs() <= 1e-9 * (1.0 + e.sr_hat.abs()));
        }
    }

    fn relative_residual(d: &VarErrorDecomposition, path: &SamplePath, sigma2: f64) -> f64 {
        let target = var_hat(&path.r).unwrap() - sigma2;
        (d.total() - target).abs() / var_hat(&path.r).unwrap().max(sigma2)
    }

    #[test]
    fn var_error_decomposition_identity() {
        let s = spec(CoefficientSpec::Geometric { ratio: 0.5, scale: 0.5 }, finite(&[1.0]));
        for seed in 0..5 {
            let p = simulate_path(&s, &SimConfig::new(4096, seed)).unwrap();
            let d = decompose_var_error(&p, &s).unwrap();
            let sigma2 = sigma_squared(&s, p.truncation.a).unwrap();
            assert!(relative_residual(&d, &p, sigma2) <= 1e-12);
        }
        let flat = spec(finite(&[0.0]), finite(&[1.0]));
        let p = simulate_path(&flat, &SimConfig::new(100, 1)).unwrap();
        assert_eq!(decompose_var_error(&p, &flat).unwrap().longmem_term, 0.0);
    }

    #[test]
    fn invalid_path_rejected() {
        let s = spec(finite(&[0.0]), finite(&[1.0]));
        let mut p = simulate_path(&s, &SimConfig::new(10, 1)).unwrap();
        p.v[3] = 0.0;
        assert!(matches!(decompose_var_error(&p, &s), Err(Error::InvalidPath(_))));
        assert!(matches!(v_decomposition(&p, &s), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn v_decomposition_reconstructs_second_moment() {
        let s = spec(
            CoefficientSpec::Geometric { ratio: 0.5, scale: 0.3 },
            CoefficientSpec::Geometric { ratio: 0.4, scale: 1.0 },
        );
        let p = simulate_path(&s, &SimConfig::new(2048, 3)).unwrap();
        let d = v_decomposition(&p, &s).unwrap();
        let n = p.len() as f64;
        let sy2 = crate::model::sigma_y_squared(&s, p.truncation).unwrap();
        let target = n.sqrt() * (neumaier_sum(p.y.iter().map(|y| y * y)) / n - sy2);
        assert!((d.total() - target).abs() <= 1e-10 * (1.0 + target.abs()), "{} vs {}", d.total(), target);
    }

    #[test]
    fn v_decomposition_degenerate_cases() {
        let single = spec(CoefficientSpec::Geometric { ratio: 0.5, scale: 0.3 }, finite(&[1.0]));
        let p = simulate_path(&single, &SimConfig::new(512, 2)).unwrap();
        assert_eq!(v_decomposition(&p, &single).unwrap().v3, 0.0);
        let flat = spec(finite(&[0.0]), finite(&[1.0, 0.5]));
        let p = simulate_path(&flat, &SimConfig::new(512, 2)).unwrap();
        assert_eq!(v_decomposition(&p, &flat).unwrap().v2, 0.0);
    }

    #[test]
    fn linearization_preconditions() {
        let short = spec(finite(&[0.0]), finite(&[1.0]));
        let p = simulate_path(&short, &SimConfig::new(64, 1)).unwrap();
        assert!(matches!(linearization_gap(&p, &short), Err(Error::NotApplicable(_))));
        // x ≡ 0 with σ² = δ² leaves nothing to linearize
        let mut p = p;
        p.delta = 1.3;
        p.x.iter_mut().for_each(|x| *x = 0.0);
        p.v.iter_mut().for_each(|v| *v = 1.3);
        let lin = linearization_terms_with(&p, 0.75, 1.69, 2.0);
        assert!(lin.gap.abs() < 1e-12 && lin.retained == 0.0);
        let lm = spec(CoefficientSpec::HyperbolicLm { scale: 0.1, beta: 0.75 }, finite(&[1.0]));
        let p = simulate_path(&lm, &SimConfig::new(256, 1)).unwrap();
        assert!(linearization_gap(&p, &lm).unwrap().is_finite());
        assert_eq!(p.truncation, Truncation::new(16 * 256, 1));
    }

    #[test]
    fn delta_method_terms_match_definition() {
        let e = SharpeEstimate { mu_hat: 0.1, sigma2_hat: 1.21, sr_hat: 0.0, n: 10 };
        let t = delta_method_terms(&e, 1.0, 0.5);
        assert!((t.mean_term - 0.1).abs() < 1e-15);
        assert!((t.var_term - 0.5 * 0.21 / 2.0).abs() < 1e-15);
    }
}
