//! Fixtures shared by the benchmarks.

use ordsieve_core::estimator::PreparedPanel;
use ordsieve_core::{ObservedSample, RunConfig, SieveCdf};

pub struct Fixture {
    pub cfg: RunConfig,
    pub data: ObservedSample,
    pub panel: PreparedPanel,
    pub truth: (SieveCdf, SieveCdf),
}

/// Default study design at sample size `n` and sieve order 6.
pub fn fixture(n: usize) -> Fixture {
    let cfg = RunConfig {
        sample_size: n,
        order: 6,
        ..RunConfig::default()
    };
    let data = cfg.generate_data(cfg.seed).expect("default truth is valid");
    let panel = cfg
        .panel(cfg.seed)
        .prepare(&cfg.design)
        .expect("panel matches the design");
    let truth = cfg.truth().expect("default truth is valid");
    Fixture {
        cfg,
        data,
        panel,
        truth,
    }
}
