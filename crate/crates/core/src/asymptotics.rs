//! Limiting-variance constants and rate exponents.
//!
//! The long-memory constant `ξ²` (limit variance of `n^{β-3/2} Σ x_t`) is
//! available by three independent routes:
//!
//! 1. closed form `C² B(β) / ((1-β)(3-2β))` with
//!    `B(β) = ∫_0^∞ x^{-β}(1+x)^{-β} dx = Γ(1-β)Γ(2β-1)/Γ(β)`,
//! 2. the squared fractional kernel `C² ∫_{-∞}^1 (∫_0^1 ((v-u)^+)^{-β} dv)² du`
//!    by adaptive quadrature,
//! 3. exact covariance summation `Var(Σ_1^n x_t) / n^{3-2β}` on a grid of `n`
//!    followed by Richardson extrapolation ([`cov_sum_limit`]).
//!
//! The short-memory constants use Gaussian latent innovations, for which the
//! covariance of `e^{2x_0}` and `e^{2x_k}` is `e^{4τ²}(e^{4γ(k)} - 1)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::model::{build_coeffs, sigma_squared, CoefficientSpec, ModelSpec, Truncation};
use crate::numeric::{hurwitz_zeta, integrate, neumaier_sum};
use crate::simulate::FftFilter;

/// Agreement required between the Γ identity and quadrature for `B(β)`.
pub const BETA_INTEGRAL_ROUTE_TOL: f64 = 1e-8;
/// Agreement required between closed form and squared-kernel route for `ξ²`.
pub const XI_ROUTE_TOL: f64 = 1e-4;

const QUAD_TOL: f64 = 1e-9;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.5 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "memory parameter beta = {beta} must lie in (0.5, 1); the integral diverges otherwise"
        )))
    }
}

/// `B(β)` from the Γ identity.
pub fn beta_integral_gamma(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(gamma(1.0 - beta) * gamma(2.0 * beta - 1.0) / gamma(beta))
}

/// `B(β)` by adaptive quadrature. The range is split at 1 and each half is
/// mapped with a power substitution that removes the endpoint singularity
/// (`x = u^{1/(1-β)}` on `[0, 1]`, `x = w^{-1/(2β-1)}` on `[1, ∞)`).
pub fn beta_integral_quadrature(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let p = 1.0 / (1.0 - beta);
    let head = integrate(|u| (1.0 + u.powf(p)).powf(-beta) * p, 0.0, 1.0, QUAD_TOL * 1e-3, QUAD_TOL * 1e-2);
    let q = 1.0 / (2.0 * beta - 1.0);
    // x = 1/s, s = w^q: integrand s^{2β-2} (1+s)^{-β} ds = q (1 + w^q)^{-β} dw
    let tail = integrate(|w| q * (1.0 + w.powf(q)).powf(-beta), 0.0, 1.0, QUAD_TOL * 1e-3, QUAD_TOL * 1e-2);
    if !(head.converged && tail.converged) {
        return Err(Error::Consistency("beta integral quadrature did not converge".into()));
    }
    Ok(head.value + tail.value)
}

/// `∫_0^∞ (x² + x)^{-β} dx` via the Γ identity, cross-checked by quadrature.
pub fn beta_integral(beta: f64) -> Result<f64> {
    let closed = beta_integral_gamma(beta)?;
    let quad = beta_integral_quadrature(beta)?;
    if ((closed - quad) / closed).abs() > BETA_INTEGRAL_ROUTE_TOL {
        return Err(Error::Consistency(format!(
            "beta integral routes disagree at beta = {beta}: gamma identity {closed}, quadrature {quad}"
        )));
    }
    Ok(closed)
}

/// `∫_{-∞}^1 (∫_0^1 ((v-u)^+)^{-β} dv)² du`; the inner integral is elementary,
/// the outer one is done numerically on `[0, 1]` and on `(-∞, 0]`.
pub fn squared_kernel_integral(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let h = 1.0 - beta;
    // u in [0, 1]: inner = (1-u)^{1-β} / (1-β), whose square integrates to 1/(3-2β)
    let near = 1.0 / (3.0 - 2.0 * beta);
    // u = -s: inner = ((1+s)^{1-β} - s^{1-β}) / (1-β), written without cancellation
    let inner = move |s: f64| {
        if s == 0.0 {
            1.0
        } else {
            s.powf(h) * (h * (1.0 / s).ln_1p()).exp_m1()
        }
    };
    // s = w^{1/(1-β)} on [0, 1] and s = w^{-1/(2β-1)} on [1, ∞) make both pieces smooth
    let p = 1.0 / h;
    let mid = integrate(|w| inner(w.powf(p)).powi(2) * p * w.powf(p - 1.0), 0.0, 1.0, 1e-13, 1e-12);
    let q = 1.0 / (2.0 * beta - 1.0);
    let tail = integrate(
        |w| {
            if w == 0.0 {
                return q * h * h;
            }
            let s = w.powf(-q);
            inner(s).powi(2) * q * s / w
        },
        0.0,
        1.0,
        1e-13,
        1e-12,
    );
    if !(mid.converged && tail.converged) {
        return Err(Error::Consistency("squared-kernel quadrature did not converge".into()));
    }
    let far = mid.value + tail.value;
    Ok((near + far) / (h * h))
}

/// Closed-form `ξ²` without the route check.
pub fn xi_squared_closed_form(scale: f64, beta: f64) -> Result<f64> {
    Ok(scale * scale * beta_integral(beta)? / ((1.0 - beta) * (3.0 - 2.0 * beta)))
}

/// Limit variance of `n^{β-3/2} Σ x_t` for `a_i ~ C i^{-β}`. Fails with a
/// consistency error when the closed form and the squared-kernel route differ
/// by more than [`XI_ROUTE_TOL`].
pub fn xi_squared(scale: f64, beta: f64) -> Result<f64> {
    let closed = xi_squared_closed_form(scale, beta)?;
    let kernel = scale * scale * squared_kernel_integral(beta)?;
    if ((closed - kernel) / closed).abs() > XI_ROUTE_TOL {
        return Err(Error::Consistency(format!(
            "xi^2 routes disagree at beta = {beta}: closed form {closed}, squared kernel {kernel}"
        )));
    }
    Ok(closed)
}

fn binomial_neg(beta: f64, p: usize) -> f64 {
    // binom(-β, p)
    (0..p).fold(1.0, |acc, i| acc * (-beta - i as f64) / (i as f64 + 1.0))
}

/// Autocorrelation sums `Σ_{j<L-k} c_j c_{j+k}` for `k < max_lag` by FFT.
fn fft_autocorrelation(coeffs: &[f64], max_lag: usize) -> Vec<f64> {
    let len = coeffs.len();
    let max_lag = max_lag.min(len);
    // correlating c with its reverse is a convolution; reuse the filter with
    // the reversed sequence as taps and the zero-padded sequence as input
    let reversed: Vec<f64> = coeffs.iter().rev().copied().collect();
    let mut input = vec![0.0; len - 1];
    input.extend_from_slice(coeffs);
    input.extend(std::iter::repeat_n(0.0, max_lag.saturating_sub(1)));
    // output len-1+k holds Σ_j c_j c_{j+k}
    let out = FftFilter::new(&reversed, len + max_lag - 1)
        .apply(&input)
        .expect("lengths are consistent");
    out[len - 1..len - 1 + max_lag].to_vec()
}

/// Autocovariances `γ(k) = Σ_j a_j a_{j+k}`, `k = 0..max_lag-1`, of the latent
/// process truncated at `m` taps (untruncated for `None`).
pub fn latent_autocov(a: &CoefficientSpec, m: Option<usize>, max_lag: usize) -> Vec<f64> {
    match (a, m) {
        (CoefficientSpec::Geometric { ratio, scale }, None) => {
            let base = scale * scale / (1.0 - ratio * ratio);
            (0..max_lag).map(|k| base * ratio.powi(k as i32)).collect()
        }
        (CoefficientSpec::HyperbolicLm { scale, beta }, None) => untruncated_hyperbolic_autocov(*scale, *beta, max_lag),
        (_, m) => {
            let m = m.or(a.support_len()).expect("finite support or explicit truncation");
            let coeffs = build_coeffs(a, m);
            let mut g = if m.saturating_mul(max_lag.min(m)) > 1 << 22 {
                fft_autocorrelation(&coeffs, max_lag)
            } else {
                (0..max_lag.min(m))
                    .map(|k| neumaier_sum(coeffs[..m - k].iter().zip(&coeffs[k..]).map(|(x, y)| x * y)))
                    .collect()
            };
            g.resize(max_lag, 0.0);
            g
        }
    }
}

/// `γ(k) = C² Σ_{m≥1} m^{-β}(m+k)^{-β}` exactly: an FFT sum over the first
/// `L = 4 max_lag` terms plus the remainder expanded binomially in `k/m`,
/// `Σ_p binom(-β, p) k^p ζ(2β+p, L-k+1)`.
fn untruncated_hyperbolic_autocov(scale: f64, beta: f64, max_lag: usize) -> Vec<f64> {
    let len = (4 * max_lag).max(64);
    let coeffs: Vec<f64> = (0..len).map(|i| ((i + 1) as f64).powf(-beta)).collect();
    let head = fft_autocorrelation(&coeffs, max_lag);
    let c2 = scale * scale;
    head.iter()
        .enumerate()
        .map(|(k, &h)| {
            let start = (len - k + 1) as f64;
            let kf = k as f64;
            let mut tail = 0.0;
            let mut kp = 1.0;
            for p in 0..200 {
                let term = binomial_neg(beta, p) * kp * hurwitz_zeta(2.0 * beta + p as f64, start);
                tail += term;
                if term.abs() <= 1e-17 * tail.abs() {
                    break;
                }
                kp *= kf;
            }
            c2 * (h + tail)
        })
        .collect()
}

/// `Var(Σ_{t=1}^n x_t) = n γ(0) + 2 Σ_{k=1}^{n-1} (n-k) γ(k)`.
pub fn partial_sum_variance(gamma_k: &[f64], n: usize) -> f64 {
    assert!(gamma_k.len() >= n && n >= 1);
    let nf = n as f64;
    nf * gamma_k[0] + 2.0 * neumaier_sum((1..n).map(|k| (nf - k as f64) * gamma_k[k]))
}

/// Output of the covariance-summation oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovSumLimit {
    pub n_grid: Vec<usize>,
    /// `Var(Σ_1^n x_t) / n^{3-2β}` at each grid point.
    pub normalized: Vec<f64>,
    /// Richardson extrapolation to `n → ∞`.
    pub extrapolated: f64,
}

/// Correction exponents of `Var(Σ_1^n x_t)/n^{3-2β}` around its limit.
fn richardson_exponents(beta: f64) -> [f64; 3] {
    [1.0 - beta, 2.0 - 2.0 * beta, 1.0]
}

/// Fits `f(n) = L + Σ_i c_i n^{-p_i}` through the last points of the grid.
fn richardson(n_grid: &[usize], values: &[f64], beta: f64) -> f64 {
    let exps = richardson_exponents(beta);
    let pts = n_grid.len().min(exps.len() + 1);
    let start = n_grid.len() - pts;
    let rows: Vec<Vec<f64>> = n_grid[start..]
        .iter()
        .map(|&n| {
            let mut row = vec![1.0];
            row.extend(exps[..pts - 1].iter().map(|p| (n as f64).powf(-p)));
            row
        })
        .collect();
    solve_dense(rows, values[start..].to_vec())[0]
}

/// Gaussian elimination with partial pivoting for a small square system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Covariance-summation oracle for `ξ²`: exact normalized partial-sum
/// variances of the untruncated hyperbolic process on `n_grid`, and their
/// Richardson extrapolation.
pub fn cov_sum_limit(a: &CoefficientSpec, n_grid: &[usize]) -> Result<CovSumLimit> {
    let (scale, beta) = match *a {
        CoefficientSpec::HyperbolicLm { scale, beta } => (scale, beta),
        _ => {
            return Err(Error::NotApplicable(
                "covariance summation under n^{3-2β} scaling needs a long-memory sequence".into(),
            ))
        }
    };
    check_beta(beta)?;
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_grid", "must be a non-empty strictly increasing list of positive integers"));
    }
    let n_max = *n_grid.last().expect("non-empty");
    let gamma_k = untruncated_hyperbolic_autocov(scale, beta, n_max);
    let normalized: Vec<f64> = n_grid
        .iter()
        .map(|&n| partial_sum_variance(&gamma_k, n) / (n as f64).powf(3.0 - 2.0 * beta))
        .collect();
    let extrapolated = richardson(n_grid, &normalized, beta);
    Ok(CovSumLimit {
        n_grid: n_grid.to_vec(),
        normalized,
        extrapolated,
    })
}

fn materialize(spec: &CoefficientSpec, m: Option<usize>) -> Result<Vec<f64>> {
    let m = match (spec, m) {
        (_, Some(m)) => m,
        (CoefficientSpec::ExplicitFinite { values }, None) => values.len(),
        (CoefficientSpec::Geometric { ratio, .. }, None) => {
            if *ratio == 0.0 {
                1
            } else {
                // tail below 1e-17 of the total
                ((1e-17f64).ln() / (2.0 * ratio.abs().ln())).ceil().max(1.0) as usize
            }
        }
        (CoefficientSpec::HyperbolicLm { .. }, None) => {
            return Err(Error::NotApplicable("hyperbolic filter is not summable".into()))
        }
    };
    Ok(build_coeffs(spec, m))
}

fn require_gaussian(spec: &ModelSpec) -> Result<()> {
    if spec.z_law.is_gaussian() {
        Ok(())
    } else {
        Err(Error::NoClosedForm("limit variances need Gaussian latent innovations".into()))
    }
}

/// λ² = σ² (Σ b_j)², the limit variance of `√n W_n`.
pub fn lambda_squared(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    let b = materialize(&spec.b, trunc.b)?;
    let sum_b = neumaier_sum(b.iter().copied());
    Ok(sigma_squared(spec, trunc.a)? * sum_b * sum_b)
}

/// `lim var V_{n,1} = δ⁴ E e^{4x} E(ε²-1)² (Σ b_j²)²`.
pub fn v1_limit_var(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    require_gaussian(spec)?;
    let tau2 = spec.a.sum_sq(trunc.a);
    let b = materialize(&spec.b, trunc.b)?;
    let sum_b2 = neumaier_sum(b.iter().map(|v| v * v));
    let eps_kurt = spec.eps_law.fourth_moment() - 1.0;
    Ok(spec.delta.powi(4) * (8.0 * tau2).exp() * eps_kurt * sum_b2 * sum_b2)
}

/// `lim var V_{n,3} = 4 δ⁴ e^{4τ²} Σ_{d≥1} ρ_b(d)² e^{4γ(d)}` with
/// `ρ_b(d) = Σ_j b_j b_{j+d}`; the cross products `r_s r_u` (s ≠ u) are
/// mutually uncorrelated with variance `E v_s² v_u²`.
pub fn v3_limit_var(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    require_gaussian(spec)?;
    let b = materialize(&spec.b, trunc.b)?;
    if b.len() < 2 {
        return Ok(0.0);
    }
    let tau2 = spec.a.sum_sq(trunc.a);
    let gamma_k = latent_autocov(&spec.a, trunc.a, b.len());
    let terms = (1..b.len()).map(|d| {
        let rho: f64 = neumaier_sum(b[..b.len() - d].iter().zip(&b[d..]).map(|(x, y)| x * y));
        rho * rho * (4.0 * gamma_k[d]).exp()
    });
    Ok(4.0 * spec.delta.powi(4) * (4.0 * tau2).exp() * neumaier_sum(terms))
}

/// `lim var V_{n,2} = δ⁴ (Σ b_j²)² Σ_{k∈ℤ} e^{4τ²}(e^{4γ(k)} - 1)` for a
/// short-memory latent process; the series stops once its terms fall below
/// `1e-12` of the running sum.
pub fn v2_limit_var(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    require_gaussian(spec)?;
    if spec.a.is_long_memory() {
        return Err(Error::NotApplicable(
            "covariances of exp(2x) are not summable under long memory".into(),
        ));
    }
    let tau2 = spec.a.sum_sq(trunc.a);
    let b = materialize(&spec.b, trunc.b)?;
    let sum_b2 = neumaier_sum(b.iter().map(|v| v * v));
    let lags = match (&spec.a, trunc.a) {
        (_, Some(m)) => m,
        (CoefficientSpec::ExplicitFinite { values }, None) => values.len(),
        _ => 1 << 16,
    };
    let gamma_k = latent_autocov(&spec.a, trunc.a, lags);
    let mut total = (4.0 * gamma_k[0]).exp_m1();
    for &g in &gamma_k[1..] {
        let term = 2.0 * (4.0 * g).exp_m1();
        total += term;
        if term.abs() < 1e-12 * total.abs() {
            break;
        }
    }
    Ok(spec.delta.powi(4) * (4.0 * tau2).exp() * total * sum_b2 * sum_b2)
}

/// ξ₁² = λ²/σ_y² + r_f² g² / (4 σ_y⁶), the limit variance of `√n (ŜR - SR)`.
/// The mean term is `μ̂/σ_y`, hence the `1/σ_y²` on λ².
pub fn xi1_squared(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    let g2 = v1_limit_var(spec, trunc)? + v2_limit_var(spec, trunc)? + v3_limit_var(spec, trunc)?;
    let sy2 = sigma_y2(spec, trunc)?;
    Ok(compose_xi1(lambda_squared(spec, trunc)?, g2, sy2, spec.r_f))
}

fn compose_xi1(lambda2: f64, g2: f64, sigma_y2: f64, r_f: f64) -> f64 {
    lambda2 / sigma_y2 + r_f * r_f * g2 / (4.0 * sigma_y2.powi(3))
}

fn sigma_y2(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    let b = materialize(&spec.b, trunc.b)?;
    Ok(sigma_squared(spec, trunc.a)? * neumaier_sum(b.iter().map(|v| v * v)))
}

fn long_memory_params(spec: &ModelSpec) -> Result<(f64, f64)> {
    match spec.a {
        CoefficientSpec::HyperbolicLm { scale, beta } => Ok((scale, beta)),
        _ => Err(Error::NotApplicable("needs a long-memory latent process".into())),
    }
}

/// `C₁ = C Σ b_j²`, the hyperbolic scale of the weights `B_j = Σ_i b_i² a_{j-i}`.
pub fn filtered_scale(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    let (scale, _) = long_memory_params(spec)?;
    let b = materialize(&spec.b, trunc.b)?;
    Ok(scale * neumaier_sum(b.iter().map(|v| v * v)))
}

/// ξ₂² = C₁² B(β) / ((1-β)(3-2β)).
pub fn xi2_squared_filtered(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    let (_, beta) = long_memory_params(spec)?;
    xi_squared(filtered_scale(spec, trunc)?, beta)
}

/// Variance of the limit of `n^{β-1/2}(ŜR_y - SR)`:
/// `[r_f δ² E e^{2x} / σ_y³]² ξ₂²`.
pub fn sr_limit_var_lm(spec: &ModelSpec, trunc: Truncation) -> Result<f64> {
    require_gaussian(spec)?;
    let xi2 = xi2_squared_filtered(spec, trunc)?;
    let sigma2 = sigma_squared(spec, trunc.a)?;
    let sy3 = sigma_y2(spec, trunc)?.powf(1.5);
    Ok((spec.r_f * sigma2 / sy3).powi(2) * xi2)
}

/// Exponent ρ with `sd(ŜR - SR) ∝ n^ρ`.
pub fn rate_exponent(spec: &ModelSpec) -> f64 {
    match spec.a.beta() {
        Some(beta) => 0.5 - beta,
        None => -0.5,
    }
}

/// Every constant for one specification; regime-specific entries are `None`
/// when they do not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub long_memory: bool,
    pub sigma2: f64,
    pub sigma_y2: f64,
    pub lambda2: f64,
    pub xi2: Option<f64>,
    pub xi2_filtered: Option<f64>,
    pub c1: Option<f64>,
    pub v1_var: f64,
    pub v2_var: Option<f64>,
    pub v3_var: f64,
    pub g2: Option<f64>,
    pub xi1_2: Option<f64>,
    pub sr_limit_var: f64,
    pub rate_exponent: f64,
}

pub fn constants(spec: &ModelSpec, trunc: Truncation) -> Result<AsymptoticConstants> {
    spec.validate()?;
    require_gaussian(spec)?;
    let sigma2 = sigma_squared(spec, trunc.a)?;
    let sigma_y2 = sigma_y2(spec, trunc)?;
    let lambda2 = lambda_squared(spec, trunc)?;
    let v1 = v1_limit_var(spec, trunc)?;
    let v3 = v3_limit_var(spec, trunc)?;
    if let Some(beta) = spec.a.beta() {
        let (scale, _) = long_memory_params(spec)?;
        Ok(AsymptoticConstants {
            long_memory: true,
            sigma2,
            sigma_y2,
            lambda2,
            xi2: Some(xi_squared(scale, beta)?),
            xi2_filtered: Some(xi2_squared_filtered(spec, trunc)?),
            c1: Some(filtered_scale(spec, trunc)?),
            v1_var: v1,
            v2_var: None,
            v3_var: v3,
            g2: None,
            xi1_2: None,
            sr_limit_var: sr_limit_var_lm(spec, trunc)?,
            rate_exponent: rate_exponent(spec),
        })
    } else {
        let v2 = v2_limit_var(spec, trunc)?;
        let g2 = v1 + v2 + v3;
        let xi1_2 = compose_xi1(lambda2, g2, sigma_y2, spec.r_f);
        Ok(AsymptoticConstants {
            long_memory: false,
            sigma2,
            sigma_y2,
            lambda2,
            xi2: None,
            xi2_filtered: None,
            c1: None,
            v1_var: v1,
            v2_var: Some(v2),
            v3_var: v3,
            g2: Some(g2),
            xi1_2: Some(xi1_2),
            sr_limit_var: xi1_2,
            rate_exponent: rate_exponent(spec),
        })
    }
}
