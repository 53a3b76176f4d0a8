mod common;

use lmsv::model::{CoefficientSpec, InnovationLaw, ModelSpec};
use lmsv::montecarlo::{run_grid, run_replication, McConfig};
use lmsv::simulate::SimConfig;
use lmsv::Error;

fn lm_small(r_f: f64, workers: usize) -> McConfig {
    let mut spec = common::shipped("lm075.json").model;
    spec.r_f = r_f;
    let mut c = McConfig::new("lm-small", spec, vec![512, 1024, 2048], 100, 77);
    c.workers = workers;
    c
}

#[test]
fn bitwise_reproducible_across_workers() {
    let a = run_grid(&lm_small(10.0, 1)).unwrap();
    let b = run_grid(&lm_small(10.0, 4)).unwrap();
    let bits = |r: &lmsv::montecarlo::McReport| -> Vec<u64> {
        r.rows.iter().flat_map(|x| [x.seed, x.sr_hat.to_bits(), x.var_term.to_bits()]).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    let mut sb = b.summary.clone();
    sb.config.workers = 1;
    assert_eq!(a.summary, sb);
}

#[test]
fn doubling_rf_leaves_variance_ratio_nearly_unchanged() {
    let a = run_grid(&lm_small(10.0, 1)).unwrap();
    let b = run_grid(&lm_small(20.0, 1)).unwrap();
    for (x, y) in a.summary.per_n.iter().zip(&b.summary.per_n) {
        let (rx, ry) = (x.variance_ratio.unwrap(), y.variance_ratio.unwrap());
        // the mean-term share and its sample covariance with the variance term
        // shrink with r_f; at R = 100 they move the ratio by a few percent
        assert!((rx / ry - 1.0).abs() < 0.06, "n = {}: {rx} vs {ry}", x.n);
    }
}

#[test]
fn large_rf_makes_mean_share_small() {
    let r = run_grid(&lm_small(10.0, 1)).unwrap();
    assert!(r.summary.per_n.iter().all(|s| s.mean_share < 0.05));
    assert!(r.summary.per_n.iter().all(|s| s.sd_remainder < 0.1 * s.sd_error));
}

#[test]
fn delta_method_remainder_is_small_short_memory() {
    let spec = common::shipped("sm_geometric.json").model;
    let r = run_grid(&McConfig::new("sm", spec, vec![1024, 4096, 16384], 200, 5)).unwrap();
    let last = r.summary.per_n.last().unwrap();
    assert!(last.sd_remainder < 0.05 * last.sd_error, "{last:?}");
    assert_eq!(r.summary.flagged, 0);
}

#[test]
fn degenerate_replications_are_flagged_not_dropped() {
    let spec = ModelSpec {
        delta: 1.0,
        a: CoefficientSpec::ExplicitFinite { values: vec![0.0] },
        b: CoefficientSpec::ExplicitFinite { values: vec![1.0] },
        z_law: InnovationLaw::StandardNormal,
        eps_law: InnovationLaw::Rademacher,
        r_f: 0.1,
    };
    let row = run_replication(&spec, &SimConfig::new(1, 0), 3).unwrap();
    assert!(row.flagged && row.sr_hat.is_nan());
    // all-equal signs make a constant sample, probability 2^{1-n}
    let c = McConfig::new("deg", spec, vec![5, 6, 7], 200, 9);
    let r = run_grid(&c).unwrap();
    assert_eq!(r.rows.len(), 600);
    assert!(r.summary.flagged > 0);
    assert_eq!(r.summary.flagged, r.summary.per_n.iter().map(|s| s.flagged).sum::<usize>());
}

#[test]
fn rate_needs_enough_replications() {
    let mut c = lm_small(10.0, 1);
    c.replications = 20;
    assert!(matches!(lmsv::montecarlo::estimate_rate(&c), Err(Error::InvalidSpec { .. })));
}
