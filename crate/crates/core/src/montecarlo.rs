//! Replicated simulation experiments: rate regressions, normality checks,
//! limit-variance matching and the mean-term share.
//!
//! Every replication draws from its own seed `replication_seed(master, n,
//! rep)`, and results are collected in task order, so a run is bitwise
//! reproducible for any number of workers.

use std::collections::HashSet;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::asymptotics::{constants, rate_exponent, AsymptoticConstants};
use crate::error::{Error, Result};
use crate::estimators::{delta_method_terms, linearization_terms, sharpe_hat, Linearization};
use crate::model::{sigma_y_squared, true_sharpe, ModelSpec, Truncation};
use crate::numeric::neumaier_sum;
use crate::simulate::{SimConfig, Simulator};
use crate::TOOL_VERSION;

/// Minimum replications for a rate regression.
pub const MIN_RATE_REPLICATIONS: usize = 100;
/// Minimum replications for a normality check.
pub const MIN_NORMALITY_REPLICATIONS: usize = 500;
/// Asymptotic 1% critical value of `√R · D_R`.
pub const KS_CRIT_1PCT: f64 = 1.63;
/// Asymptotic 5% critical value of `√R · D_R`.
pub const KS_CRIT_5PCT: f64 = 1.36;

fn default_name() -> String {
    "experiment".into()
}

fn default_workers() -> usize {
    1
}

/// One replicated experiment. `sim` is a template: its `n` and `seed` are
/// replaced per task, and truncations are resolved once at the largest `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub spec: ModelSpec,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_sim")]
    pub sim: SimConfig,
}

fn default_sim() -> SimConfig {
    SimConfig::new(0, 0)
}

impl McConfig {
    pub fn new(name: &str, spec: ModelSpec, n_grid: Vec<usize>, replications: usize, master_seed: u64) -> Self {
        McConfig {
            name: name.into(),
            spec,
            n_grid,
            replications,
            master_seed,
            workers: 1,
            sim: default_sim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::invalid("mc.n_grid", "must be a non-empty list of positive integers"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("mc.n_grid", "must be strictly increasing"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("mc.replications", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("mc.workers", "must be at least 1"));
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        *self.n_grid.last().expect("validated grid is non-empty")
    }

    /// Truncations shared by every grid point.
    pub fn truncation(&self) -> Result<Truncation> {
        let mut t = self.sim.clone();
        t.n = self.n_max();
        Ok(t.resolve(&self.spec)?.truncation())
    }

    fn sim_for(&self, n: usize, trunc: Truncation) -> SimConfig {
        SimConfig {
            n,
            m: trunc.a,
            m_b: trunc.b,
            seed: 0,
            conv_method: self.sim.conv_method,
            trunc_tol: self.sim.trunc_tol,
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at sample size `n`. Injective in `rep` for fixed
/// `(master, n)`; cross-`n` collisions are checked by [`run_grid`].
pub fn replication_seed(master: u64, n: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ rep as u64)
}

/// One replication. Degenerate samples produce a flagged row with NaN values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub sr_hat: f64,
    pub sr_error: f64,
    pub mean_term: f64,
    pub var_term: f64,
    pub flagged: bool,
    /// Long-memory runs only.
    pub linearization: Option<Linearization>,
}

/// Population quantities every replication of a run compares against.
#[derive(Debug, Clone, Copy)]
struct Target {
    sr_true: f64,
    sigma_y2: f64,
}

impl Target {
    fn new(spec: &ModelSpec, trunc: Truncation) -> Result<Self> {
        Ok(Target {
            sr_true: true_sharpe(spec, trunc)?,
            sigma_y2: sigma_y_squared(spec, trunc)?,
        })
    }
}

fn replicate(sim: &Simulator, target: Target, n: usize, rep: usize, seed: u64) -> Result<McRow> {
    let spec = sim.spec();
    let flagged = || McRow {
        n,
        rep,
        seed,
        sr_hat: f64::NAN,
        sr_error: f64::NAN,
        mean_term: f64::NAN,
        var_term: f64::NAN,
        flagged: true,
        linearization: None,
    };
    let path = match sim.simulate(seed) {
        Ok(p) => p,
        Err(Error::InvalidPath(_)) => return Ok(flagged()),
        Err(e) => return Err(e),
    };
    let est = match sharpe_hat(&path.y, spec.r_f) {
        Ok(e) => e,
        Err(Error::DegenerateSample(_)) => return Ok(flagged()),
        Err(e) => return Err(e),
    };
    let terms = delta_method_terms(&est, target.sigma_y2, spec.r_f);
    let linearization = if spec.is_long_memory() {
        Some(linearization_terms(&path, spec)?)
    } else {
        None
    };
    Ok(McRow {
        n,
        rep,
        seed,
        sr_hat: est.sr_hat,
        sr_error: est.sr_hat - target.sr_true,
        mean_term: terms.mean_term,
        var_term: terms.var_term,
        flagged: false,
        linearization,
    })
}

/// Simulates one path of length `sim.n` from `seed` and evaluates it.
pub fn run_replication(spec: &ModelSpec, sim: &SimConfig, seed: u64) -> Result<McRow> {
    let simulator = Simulator::new(spec, sim)?;
    let target = Target::new(spec, simulator.truncation())?;
    replicate(&simulator, target, sim.n, 0, seed)
}

/// Per-`n` aggregates over the unflagged replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub replications: usize,
    pub flagged: usize,
    pub mean_error: f64,
    pub sd_error: f64,
    pub sd_mean_term: f64,
    pub sd_var_term: f64,
    /// sd of `sr_error - mean_term - var_term`.
    pub sd_remainder: f64,
    /// `var(mean_term) / var(sr_error)`.
    pub mean_share: f64,
    /// `var(n^{-ρ} sr_error)` with ρ the rate exponent.
    pub scaled_var: f64,
    /// `scaled_var` over the limit variance, when it is computable.
    pub variance_ratio: Option<f64>,
    pub sd_gap: Option<f64>,
    pub sd_retained: Option<f64>,
}

/// Mean and sample variance of `values`, sorted first so the result does not
/// depend on their order.
fn moments(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let k = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / k;
    let var = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (k - 1.0);
    (mean, var)
}

fn summarize(n: usize, rows: &[&McRow], rate: f64, limit_var: Option<f64>) -> Result<NSummary> {
    let ok: Vec<&McRow> = rows.iter().copied().filter(|r| !r.flagged).collect();
    if ok.len() < 2 {
        return Err(Error::DegenerateSample(format!("fewer than two usable replications at n = {n}")));
    }
    let column = |f: &dyn Fn(&McRow) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let (mean_error, var_error) = moments(&mut column(&|r| r.sr_error));
    let (_, var_mean) = moments(&mut column(&|r| r.mean_term));
    let (_, var_var) = moments(&mut column(&|r| r.var_term));
    let (_, var_rem) = moments(&mut column(&|r| r.sr_error - r.mean_term - r.var_term));
    let scaled_var = var_error * (n as f64).powf(-2.0 * rate);
    let lin: Vec<Linearization> = ok.iter().filter_map(|r| r.linearization).collect();
    let (sd_gap, sd_retained) = if lin.len() == ok.len() {
        let (_, vg) = moments(&mut lin.iter().map(|l| l.gap).collect::<Vec<_>>());
        let (_, vr) = moments(&mut lin.iter().map(|l| l.retained).collect::<Vec<_>>());
        (Some(vg.sqrt()), Some(vr.sqrt()))
    } else {
        (None, None)
    };
    Ok(NSummary {
        n,
        replications: rows.len(),
        flagged: rows.len() - ok.len(),
        mean_error,
        sd_error: var_error.sqrt(),
        sd_mean_term: var_mean.sqrt(),
        sd_var_term: var_var.sqrt(),
        sd_remainder: var_rem.sqrt(),
        mean_share: var_mean / var_error,
        scaled_var,
        variance_ratio: limit_var.map(|l| scaled_var / l),
        sd_gap,
        sd_retained,
    })
}

/// OLS fit of `ln sd` on `ln n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Two-sided 95% t interval for the slope.
    pub slope_ci95: [f64; 2],
    pub expected_slope: f64,
}

/// Fits `ln sd = intercept + slope · ln n` with equal weights.
pub fn fit_rate(ns: &[usize], sds: &[f64], expected_slope: f64) -> Result<RateRecord> {
    if ns.len() != sds.len() || ns.len() < 3 {
        return Err(Error::invalid("mc.n_grid", "rate regression needs at least three sample sizes"));
    }
    if sds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::DegenerateSample("zero or non-finite standard deviation in the grid".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = sds.iter().map(|s| s.ln()).collect();
    let k = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / k;
    let ym = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let df = k - 2.0;
    let slope_stderr = (ssr / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Domain(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateRecord {
        slope,
        intercept,
        slope_stderr,
        slope_ci95: [slope - t * slope_stderr, slope + t * slope_stderr],
        expected_slope,
    })
}

/// Shape of the standardized error distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityRecord {
    pub n: usize,
    pub replications: usize,
    pub ks_distance: f64,
    /// `1.63 / √R`.
    pub ks_band_1pct: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and
/// the standard normal CDF.
pub fn ks_distance(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let std_normal = Normal::new(0.0, 1.0).expect("valid parameters");
    let k = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std_normal.cdf(x);
            ((i + 1) as f64 / k - f).max(f - i as f64 / k)
        })
        .fold(0.0, f64::max)
}

/// Centers and scales `errors` by their sample moments, then reports the KS
/// distance to N(0, 1), skewness and excess kurtosis.
pub fn normality_of(n: usize, errors: &[f64]) -> Result<NormalityRecord> {
    if errors.len() < 3 {
        return Err(Error::DegenerateSample("normality check needs at least three errors".into()));
    }
    let mut sorted = errors.to_vec();
    let (mean, var) = moments(&mut sorted);
    if var <= 0.0 {
        return Err(Error::DegenerateSample("errors have zero variance".into()));
    }
    let sd = var.sqrt();
    let z: Vec<f64> = sorted.iter().map(|e| (e - mean) / sd).collect();
    let k = z.len() as f64;
    let m2 = neumaier_sum(z.iter().map(|v| v * v)) / k;
    let m3 = neumaier_sum(z.iter().map(|v| v.powi(3))) / k;
    let m4 = neumaier_sum(z.iter().map(|v| v.powi(4))) / k;
    Ok(NormalityRecord {
        n,
        replications: errors.len(),
        ks_distance: ks_distance(&z),
        ks_band_1pct: KS_CRIT_1PCT / k.sqrt(),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Per-`n` mean shares and their decay from the first to the last grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShareRecord {
    pub long_memory: bool,
    pub shares: Vec<f64>,
    /// `share(n_min) / share(n_max)`.
    pub decay_factor: f64,
}

/// Everything a run reports except the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub experiment: String,
    pub tool_version: String,
    pub config: McConfig,
    pub truncation: Truncation,
    pub sr_true: f64,
    pub sigma_y2: f64,
    pub rate_exponent: f64,
    pub constants: Option<AsymptoticConstants>,
    pub per_n: Vec<NSummary>,
    pub rate: Option<RateRecord>,
    pub normality: NormalityRecord,
    pub mean_share: MeanShareRecord,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub summary: McSummary,
}

impl McReport {
    /// Unflagged errors at sample size `n`.
    pub fn errors_at(&self, n: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n && !r.flagged)
            .map(|r| r.sr_error)
            .collect()
    }

    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows_csv(&self.summary.experiment, &self.rows, out)
    }
}

pub fn write_rows_csv<W: Write>(experiment: &str, rows: &[McRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["experiment", "n", "rep", "seed", "sr_hat", "sr_error", "mean_term", "var_term"])?;
    for r in rows {
        w.write_record([
            experiment.to_string(),
            r.n.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.sr_hat.to_string(),
            r.sr_error.to_string(),
            r.mean_term.to_string(),
            r.var_term.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn limit_constants(spec: &ModelSpec, trunc: Truncation) -> Result<Option<AsymptoticConstants>> {
    match constants(spec, trunc) {
        Ok(c) => Ok(Some(c)),
        Err(Error::NoClosedForm(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every `(n, rep)` task of `config` and aggregates the results.
pub fn run_grid(config: &McConfig) -> Result<McReport> {
    config.validate()?;
    let spec = &config.spec;
    let trunc = config.truncation()?;
    let target = Target::new(spec, trunc)?;
    let rate = rate_exponent(spec);
    let consts = limit_constants(spec, trunc)?;
    let limit_var = consts.as_ref().map(|c| c.sr_limit_var);

    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(config.n_grid.len() * config.replications);
    for &n in &config.n_grid {
        for rep in 0..config.replications {
            let seed = replication_seed(config.master_seed, n, rep);
            if !seen.insert(seed) {
                return Err(Error::Consistency(format!("replication seed collision at n = {n}, rep = {rep}")));
            }
            tasks.push((n, rep, seed));
        }
    }

    let workers = pool(config.workers)?;
    let mut rows = Vec::with_capacity(tasks.len());
    for &n in &config.n_grid {
        let simulator = Simulator::new(spec, &config.sim_for(n, trunc))?;
        let chunk: Vec<Result<McRow>> = workers.install(|| {
            tasks
                .par_iter()
                .filter(|t| t.0 == n)
                .map(|&(n, rep, seed)| replicate(&simulator, target, n, rep, seed))
                .collect()
        });
        for row in chunk {
            rows.push(row?);
        }
    }

    let per_n = config
        .n_grid
        .iter()
        .map(|&n| {
            let at_n: Vec<&McRow> = rows.iter().filter(|r| r.n == n).collect();
            summarize(n, &at_n, rate, limit_var)
        })
        .collect::<Result<Vec<_>>>()?;
    let rate_record = if per_n.len() >= 3 {
        let sds: Vec<f64> = per_n.iter().map(|s| s.sd_error).collect();
        Some(fit_rate(&config.n_grid, &sds, rate)?)
    } else {
        None
    };
    let n_max = config.n_max();
    let last: Vec<f64> = rows
        .iter()
        .filter(|r| r.n == n_max && !r.flagged)
        .map(|r| r.sr_error)
        .collect();
    let normality = normality_of(n_max, &last)?;
    let shares: Vec<f64> = per_n.iter().map(|s| s.mean_share).collect();
    let mean_share = MeanShareRecord {
        long_memory: spec.is_long_memory(),
        decay_factor: shares[0] / shares[shares.len() - 1],
        shares,
    };
    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(McReport {
        summary: McSummary {
            experiment: config.name.clone(),
            tool_version: TOOL_VERSION.into(),
            config: config.clone(),
            truncation: trunc,
            sr_true: target.sr_true,
            sigma_y2: target.sigma_y2,
            rate_exponent: rate,
            constants: consts,
            per_n,
            rate: rate_record,
            normality,
            mean_share,
            flagged,
        },
        rows,
    })
}

/// Rate regression with its preconditions enforced.
pub fn estimate_rate(config: &McConfig) -> Result<McReport> {
    if config.n_grid.len() < 3 {
        return Err(Error::invalid("mc.n_grid", "rate regression needs at least three sample sizes"));
    }
    if config.replications < MIN_RATE_REPLICATIONS {
        return Err(Error::invalid(
            "mc.replications",
            format!("rate regression needs at least {MIN_RATE_REPLICATIONS} replications"),
        ));
    }
    run_grid(config)
}

/// Normality of the errors at the largest grid point.
pub fn normality_check(config: &McConfig) -> Result<McReport> {
    if config.replications < MIN_NORMALITY_REPLICATIONS {
        return Err(Error::invalid(
            "mc.replications",
            format!("normality check needs at least {MIN_NORMALITY_REPLICATIONS} replications"),
        ));
    }
    run_grid(config)
}

/// Mean-share sequence; informational for short-memory specs.
pub fn mean_contribution(config: &McConfig) -> Result<McReport> {
    run_grid(config)
}

/// Empirical-to-theoretical variance ratios per `n`.
pub fn variance_match(config: &McConfig) -> Result<McReport> {
    let report = run_grid(config)?;
    if report.summary.constants.is_none() {
        constants(&config.spec, report.summary.truncation)?;
    }
    Ok(report)
}

/// Harness self-test on pure CLT pseudo-errors: the error at `n` is the mean
/// of `n` iid N(0, 1) draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestRecord {
    pub rate: RateRecord,
    pub normality: NormalityRecord,
}

pub fn clt_self_test(n_grid: &[usize], replications: usize, master_seed: u64) -> Result<SelfTestRecord> {
    let mut sds = Vec::with_capacity(n_grid.len());
    let mut last = Vec::new();
    for &n in n_grid {
        let mut errors: Vec<f64> = (0..replications)
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(master_seed, n, rep));
                let draws = (0..n).map(|_| -> f64 { StandardNormal.sample(&mut rng) });
                neumaier_sum(draws) / n as f64
            })
            .collect();
        last = errors.clone();
        let (_, var) = moments(&mut errors);
        sds.push(var.sqrt());
    }
    Ok(SelfTestRecord {
        rate: fit_rate(n_grid, &sds, -0.5)?,
        normality: normality_of(*n_grid.last().unwrap_or(&0), &last)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientSpec, InnovationLaw};
    use proptest::prelude::*;

    fn iid_spec(eps: InnovationLaw, r_f: f64) -> ModelSpec {
        ModelSpec {
            delta: 1.0,
            a: CoefficientSpec::ExplicitFinite { values: vec![0.0] },
            b: CoefficientSpec::ExplicitFinite { values: vec![1.0] },
            z_law: InnovationLaw::StandardNormal,
            eps_law: eps,
            r_f,
        }
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = HashSet::new();
        for n in [512, 1024, 2048] {
            for rep in 0..2000 {
                assert!(seen.insert(replication_seed(42, n, rep)));
            }
        }
        assert_ne!(replication_seed(1, 512, 0), replication_seed(2, 512, 0));
    }

    #[test]
    fn replication_is_deterministic() {
        let spec = iid_spec(InnovationLaw::StandardNormal, 0.1);
        let sim = SimConfig::new(256, 0);
        assert_eq!(run_replication(&spec, &sim, 9).unwrap(), run_replication(&spec, &sim, 9).unwrap());
    }

    #[test]
    fn rademacher_var_term_is_algebraic() {
        let r_f = 0.3;
        let spec = iid_spec(InnovationLaw::Rademacher, r_f);
        let row = run_replication(&spec, &SimConfig::new(101, 0), 5).unwrap();
        let mu = row.mean_term;
        assert!((row.var_term + r_f * mu * mu / 2.0).abs() < 1e-14);
    }

    #[test]
    fn fit_rate_recovers_exact_power() {
        let ns = [512, 1024, 2048, 4096];
        let sds: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.3)).collect();
        let r = fit_rate(&ns, &sds, -0.3).unwrap();
        assert!((r.slope + 0.3).abs() < 1e-12);
        assert!(r.slope_stderr < 1e-10);
        assert!(fit_rate(&ns[..2], &sds[..2], -0.3).is_err());
        assert!(matches!(
            fit_rate(&ns, &[1.0, 0.0, 1.0, 1.0], -0.5),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn ks_distance_small_cases() {
        assert!((ks_distance(&[0.0]) - 0.5).abs() < 1e-15);
        let far = ks_distance(&[10.0, 11.0, 12.0]);
        assert!((far - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_test_recovers_clt() {
        let grid = [512, 1024, 2048, 4096, 8192, 16384];
        let st = clt_self_test(&grid, 500, 11).unwrap();
        assert!((st.rate.slope + 0.5).abs() < 0.03, "{:?}", st.rate);
        assert!(st.normality.ks_distance < KS_CRIT_5PCT / (500f64).sqrt());
    }

    #[test]
    fn config_validation() {
        let spec = iid_spec(InnovationLaw::StandardNormal, 0.1);
        let mut c = McConfig::new("t", spec, vec![64, 32], 10, 1);
        assert!(matches!(run_grid(&c), Err(Error::InvalidSpec { .. })));
        c.n_grid = vec![32, 64, 128];
        c.workers = 0;
        assert!(run_grid(&c).is_err());
        c.workers = 1;
        assert!(matches!(estimate_rate(&c), Err(Error::InvalidSpec { .. })));
        assert!(matches!(normality_check(&c), Err(Error::InvalidSpec { .. })));
    }

    #[test]
    fn report_shape_and_determinism() {
        let spec = iid_spec(InnovationLaw::StandardNormal, 0.2);
        let mut c = McConfig::new("shape", spec, vec![64, 128, 256], 40, 3);
        let a = run_grid(&c).unwrap();
        assert_eq!(a.rows.len(), 120);
        assert_eq!(a.summary.flagged, 0);
        assert!(a.summary.rate.is_some());
        c.workers = 3;
        let b = run_grid(&c).unwrap();
        assert_eq!(a.rows, b.rows);
        let mut buf = Vec::new();
        a.write_rows_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("experiment,n,rep,seed,sr_hat,sr_error,mean_term,var_term\n"));
        assert_eq!(text.lines().count(), 121);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn summaries_ignore_row_order(seed in any::<u64>(), shift in 1usize..40) {
            let rows: Vec<McRow> = (0..40)
                .map(|rep| {
                    let s = replication_seed(seed, 100, rep);
                    let e = (s % 1000) as f64 / 997.0 - 0.5;
                    McRow {
                        n: 100, rep, seed: s, sr_hat: e, sr_error: e,
                        mean_term: 0.3 * e, var_term: 0.6 * e + 1e-3 * (s % 7) as f64,
                        flagged: false, linearization: None,
                    }
                })
                .collect();
            let mut rotated = rows.clone();
            rotated.rotate_left(shift);
            let a = summarize(100, &rows.iter().collect::<Vec<_>>(), -0.5, Some(1.0)).unwrap();
            let b = summarize(100, &rotated.iter().collect::<Vec<_>>(), -0.5, Some(1.0)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
