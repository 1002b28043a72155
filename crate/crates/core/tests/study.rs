mod common;

use ordsieve_core::diagnostics::kolmogorov_sf;
use ordsieve_core::orderstat::orderstat_cdf;
use ordsieve_core::study::*;
use ordsieve_core::BaseCdf;

#[test]
fn zero_truth_upper_column_matches_the_convolution() {
    let cfg = RunConfig {
        sample_size: 100_000,
        truth_theta_xi: vec![],
        truth_theta_eps: vec![],
        ..RunConfig::default()
    };
    let data = cfg.generate_data(99).unwrap();
    let (xi, eps) = (cfg.base_xi, cfg.base_eps);
    let sd = match xi {
        BaseCdf::Normal { var, .. } => var.sqrt(),
        _ => unreachable!(),
    };
    // P(ξ + ε_(2) <= x) = ∫ F_(2)(x - ξ) dΦ, integrated over ±10 sd.
    let rule = common::gauss_rule(200, -10.0 * sd, 10.0 * sd);
    let model = |x: f64| -> f64 {
        rule.iter()
            .map(|(z, w)| w * xi.pdf(*z) * orderstat_cdf(&eps, 3, 2, x - z).unwrap())
            .sum()
    };
    let mut upper: Vec<f64> = data.rows().iter().map(|r| r[1]).collect();
    upper.sort_by(f64::total_cmp);
    let n = upper.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, x) in upper.iter().enumerate().step_by(50) {
        let f = model(*x);
        ks = ks.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    assert!(kolmogorov_sf(ks * n.sqrt()) > 1e-3, "KS {ks}");
}

#[test]
fn montecarlo_is_independent_of_job_count() {
    let cfg = RunConfig {
        sample_size: 80,
        order: 2,
        replications: 3,
        starts: 2,
        max_evals: 150,
        ..RunConfig::default()
    };
    let a = montecarlo(&cfg, 1).unwrap();
    let b = montecarlo(&cfg, 3).unwrap();
    assert_eq!(summary_csv(&a), summary_csv(&b));
    assert_eq!(deciles_csv(&cfg, &a).unwrap(), deciles_csv(&cfg, &b).unwrap());
    // Replication j can be rerun alone.
    let alone = run_replication(&cfg, 2);
    assert_eq!(alone.result, a[2].result);
    for o in &a {
        let fit = o.result.as_ref().unwrap();
        assert!(fit.estimate.criterion_value >= 0.0);
        assert!(fit.sup_err_xi >= 0.0 && fit.sup_err_xi <= 1.0);
        assert!(fit.deciles_xi.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn replication_seeds_are_distinct() {
    let cfg = RunConfig::default();
    let seeds: std::collections::BTreeSet<u64> = (0..500).map(|j| cfg.replication_seed(j)).collect();
    assert_eq!(seeds.len(), 500);
}

#[test]
fn shipped_example_config_parses() {
    let text = include_str!("../../../docs/example.cfg");
    let cfg = RunConfig::parse(text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
}
