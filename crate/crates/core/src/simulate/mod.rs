//! Reproducible sample paths of the latent process, volatility, returns and
//! filtered returns.
//!
//! The latent MA(∞) is truncated at `M` taps and the return filter at `M_b`
//! taps. Paths start from pre-sample innovations rather than a burn-in, so the
//! truncated process is exactly stationary:
//!
//! ```text
//! z: n + M_b - 1 + M - 1 draws ──a──▶ x: n + M_b - 1 values
//! r = δ e^x ε                         (M_b - 1 pre-sample, n in-sample)
//! y = b ⋆ r                           n values
//! ```
//!
//! The latent and return innovations come from two distinct ChaCha streams of
//! the same seed.

mod filter;

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use filter::{linear_filter, ConvMethod, FftFilter, AUTO_FFT_THRESHOLD};

use crate::error::{Error, Result};
use crate::model::{build_coeffs, coeff_tail_l2, CoefficientSpec, InnovationLaw, ModelSpec, Truncation};
use crate::numeric::{mean, neumaier_sum};

/// Relative truncation tolerance used for summable sequences when none is given.
pub const DEFAULT_SUMMABLE_TOL: f64 = 1e-6;
/// Relative truncation tolerance for the hyperbolic sequence, whose bound
/// decays only like `M^{1-2β}`.
pub const DEFAULT_LONG_MEMORY_TOL: f64 = 0.1;
/// Default latent truncation for long-memory runs, as a multiple of `n`.
pub const LONG_MEMORY_TAPS_PER_OBS: usize = 16;
/// Latent variances above this are rejected: `exp(2x)` moments lose meaning.
pub const MAX_LATENT_VARIANCE: f64 = 20.0;

const Z_STREAM: u64 = 0;
const EPS_STREAM: u64 = 1;

/// Simulation settings for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub n: usize,
    /// Latent truncation `M`; derived from the tolerance when absent.
    #[serde(default)]
    pub m: Option<usize>,
    /// Filter truncation `M_b`; derived from the tolerance when absent.
    #[serde(default)]
    pub m_b: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub conv_method: ConvMethod,
    /// Relative tolerance on the truncated squared-coefficient tail.
    #[serde(default)]
    pub trunc_tol: Option<f64>,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SimConfig {
            n,
            m: None,
            m_b: None,
            seed,
            conv_method: ConvMethod::Auto,
            trunc_tol: None,
        }
    }

    /// Validates the settings against `spec` and fills in defaults.
    pub fn resolve(&self, spec: &ModelSpec) -> Result<ResolvedSim> {
        if self.n == 0 {
            return Err(Error::invalid("sim.n", "must be at least 1"));
        }
        if let Some(tol) = self.trunc_tol {
            if tol.is_nan() || tol <= 0.0 {
                return Err(Error::invalid("sim.trunc_tol", "must be positive"));
            }
        }
        let m = resolve_taps(&spec.a, self.m, self.trunc_tol, self.n, "sim.m")?;
        let m_b = resolve_taps(&spec.b, self.m_b, self.trunc_tol, self.n, "sim.m_b")?;
        Ok(ResolvedSim {
            n: self.n,
            m,
            m_b,
            seed: self.seed,
            method: self.conv_method,
        })
    }
}

fn default_tol(spec: &CoefficientSpec) -> f64 {
    if spec.is_long_memory() {
        DEFAULT_LONG_MEMORY_TOL
    } else {
        DEFAULT_SUMMABLE_TOL
    }
}

fn resolve_taps(
    spec: &CoefficientSpec,
    requested: Option<usize>,
    tol: Option<f64>,
    n: usize,
    field: &str,
) -> Result<usize> {
    let tol = tol.unwrap_or_else(|| default_tol(spec));
    let total = spec.sum_sq(None);
    let budget = tol * total;
    match requested {
        Some(0) => Err(Error::invalid(field, "must be at least 1")),
        Some(m) => {
            let tail = coeff_tail_l2(spec, m);
            if tail > budget {
                Err(Error::invalid(
                    field,
                    format!("truncation tail {tail:.3e} exceeds tolerance {budget:.3e}"),
                ))
            } else {
                Ok(m)
            }
        }
        None => match spec {
            CoefficientSpec::ExplicitFinite { values } => Ok(values.len()),
            CoefficientSpec::HyperbolicLm { .. } => {
                let m = LONG_MEMORY_TAPS_PER_OBS * n;
                let tail = coeff_tail_l2(spec, m);
                if tail > budget {
                    return Err(Error::invalid(
                        field,
                        format!("default truncation {m} leaves tail bound {tail:.3e} above tolerance {budget:.3e}"),
                    ));
                }
                Ok(m)
            }
            CoefficientSpec::Geometric { .. } => {
                let mut m = 1;
                while coeff_tail_l2(spec, m) > budget {
                    m += 1;
                }
                Ok(m)
            }
        },
    }
}

/// Settings after validation, with all truncations fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedSim {
    pub n: usize,
    pub m: usize,
    pub m_b: usize,
    pub seed: u64,
    pub method: ConvMethod,
}

impl ResolvedSim {
    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.m, self.m_b)
    }
}

/// One simulated realization. In-sample arrays have length `n`; `x_pre` and
/// `r_pre` hold the `M_b - 1` pre-sample values feeding the return filter,
/// oldest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub x_pre: Vec<f64>,
    pub r_pre: Vec<f64>,
    pub delta: f64,
    pub truncation: Truncation,
    pub spec_digest: String,
    pub seed: u64,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Latent values at times `1 - (M_b - 1), ..., n`.
    pub fn x_full(&self) -> impl Iterator<Item = f64> + '_ {
        self.x_pre.iter().chain(&self.x).copied()
    }

    /// Returns at times `1 - (M_b - 1), ..., n`.
    pub fn r_full(&self) -> impl Iterator<Item = f64> + '_ {
        self.r_pre.iter().chain(&self.r).copied()
    }

    /// Writes the `t,x,v,r,y` table, one row per in-sample time.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "v", "r", "y"])?;
        for t in 0..self.len() {
            w.write_record(&[
                (t + 1).to_string(),
                self.x[t].to_string(),
                self.v[t].to_string(),
                self.r[t].to_string(),
                self.y[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `count` iid innovations.
pub fn gen_innovations<R: Rng + ?Sized>(law: InnovationLaw, count: usize, rng: &mut R) -> Vec<f64> {
    match law {
        InnovationLaw::StandardNormal => (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        InnovationLaw::Rademacher => (0..count)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    }
}

/// Content hash of a spec and its simulation settings.
pub fn spec_digest(spec: &ModelSpec, sim: &ResolvedSim) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&(spec, sim.n, sim.m, sim.m_b, sim.method)).expect("serializable"));
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Prepared simulator: coefficients and FFT plans are built once and reused
/// for every seed.
pub struct Simulator {
    spec: ModelSpec,
    sim: ResolvedSim,
    a: Vec<f64>,
    b: Vec<f64>,
    a_fft: Option<FftFilter>,
    digest: String,
}

impl Simulator {
    pub fn new(spec: &ModelSpec, config: &SimConfig) -> Result<Self> {
        spec.validate()?;
        let sim = config.resolve(spec)?;
        let tau2 = spec.a.sum_sq(Some(sim.m));
        if tau2 > MAX_LATENT_VARIANCE {
            return Err(Error::invalid(
                "a",
                format!("latent variance {tau2:.3} exceeds {MAX_LATENT_VARIANCE}; exp(x) moments overflow"),
            ));
        }
        let a = build_coeffs(&spec.a, sim.m);
        let b = build_coeffs(&spec.b, sim.m_b);
        let x_len = sim.n + sim.m_b - 1;
        let a_fft = match sim.method.resolve(x_len, sim.m) {
            ConvMethod::Fft => Some(FftFilter::new(&a, x_len)),
            _ => None,
        };
        let digest = spec_digest(spec, &sim);
        Ok(Simulator {
            spec: spec.clone(),
            sim,
            a,
            b,
            a_fft,
            digest,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn resolved(&self) -> &ResolvedSim {
        &self.sim
    }

    pub fn truncation(&self) -> Truncation {
        self.sim.truncation()
    }

    /// Latent path at times `1 - (M_b - 1), ..., n`.
    fn latent(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let x_len = self.sim.n + self.sim.m_b - 1;
        let z = gen_innovations(self.spec.z_law, x_len + self.sim.m - 1, rng);
        match &self.a_fft {
            Some(f) => f.apply(&z),
            None => linear_filter(&z, &self.a, ConvMethod::Direct),
        }
    }

    pub fn simulate(&self, seed: u64) -> Result<SamplePath> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(Z_STREAM);
        let x_full = self.latent(&mut rng)?;
        rng.set_stream(EPS_STREAM);
        rng.set_word_pos(0);
        let eps = gen_innovations(self.spec.eps_law, x_full.len(), &mut rng);

        let delta = self.spec.delta;
        let v_full: Vec<f64> = x_full.iter().map(|&x| delta * x.exp()).collect();
        if v_full.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidPath("volatility overflowed or vanished".into()));
        }
        let r_full: Vec<f64> = v_full.iter().zip(&eps).map(|(v, e)| v * e).collect();
        let y = linear_filter(&r_full, &self.b, self.sim.method)?;

        let pre = self.sim.m_b - 1;
        Ok(SamplePath {
            x: x_full[pre..].to_vec(),
            v: v_full[pre..].to_vec(),
            r: r_full[pre..].to_vec(),
            y,
            x_pre: x_full[..pre].to_vec(),
            r_pre: r_full[..pre].to_vec(),
            delta,
            truncation: self.truncation(),
            spec_digest: self.digest.clone(),
            seed,
        })
    }
}

/// Simulates one path; deterministic in `config.seed`.
pub fn simulate_path(spec: &ModelSpec, config: &SimConfig) -> Result<SamplePath> {
    Simulator::new(spec, config)?.simulate(config.seed)
}

/// Sample autocorrelations at lags `1..=max_lag`, with divisor `n` in both the
/// autocovariances and the variance.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag == 0 || max_lag >= n {
        return Err(Error::Dimension(format!("max_lag {max_lag} must lie in 1..{n}")));
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|v| v - m).collect();
    let c0 = neumaier_sum(centered.iter().map(|v| v * v));
    if c0 == 0.0 || !c0.is_finite() {
        return Err(Error::DegenerateSample("autocorrelation of a constant series".into()));
    }
    Ok((1..=max_lag)
        .map(|k| neumaier_sum(centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b)) / c0)
        .collect())
}

/// Monte Carlo estimate of `σ² = E r_t² = δ² E e^{2x}` from one long path,
/// for latent laws without a closed form.
pub fn mc_sigma_squared(spec: &ModelSpec, config: &SimConfig) -> Result<f64> {
    let path = simulate_path(spec, config)?;
    Ok(mean(&path.v.iter().map(|v| v * v).collect::<Vec<_>>()))
}
