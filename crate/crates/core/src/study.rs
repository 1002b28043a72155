//! Run configuration, the known-truth data generating process, and the
//! Monte Carlo harness.
//!
//! Configuration files are flat `key = value` text (see
//! `docs/config.md` at the repository root for the schema).

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{
    estimate, simulate_sample, CriterionConfig, EstimateResult, ObservedSample,
    OptimizerSettings, SimPanel, DEFAULT_KAPPA,
};
use crate::format::{fmt_f64, parse_f64, parse_f64_list, parse_key_values};
use crate::orderstat::OrderStatDesign;
use crate::rng::{derive_seed, streams};
use crate::sieve::{delta_to_theta, BaseCdf, SieveCdf, DEFAULT_BOUND};

/// Legendre coordinates of the default order-6 truth for `ξ`.
///
/// Hand-picked stand-in: a right-skewed latent component with a slightly
/// heavier upper shoulder than its `N(0, 1/4)` base.
pub const DEFAULT_TRUTH_DELTA_XI: [f64; 6] = [0.30, 0.20, 0.12, -0.06, 0.04, -0.02];

/// Legendre coordinates of the default order-6 truth for `ε`: mass moved
/// toward zero relative to the half-normal base.
pub const DEFAULT_TRUTH_DELTA_EPS: [f64; 6] = [-0.25, 0.15, -0.08, 0.05, -0.03, 0.02];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub design: OrderStatDesign,
    pub sample_size: usize,
    pub order: usize,
    pub kappa: f64,
    pub base_xi: BaseCdf,
    pub base_eps: BaseCdf,
    pub bound: f64,
    pub seed: u64,
    pub replications: usize,
    pub starts: usize,
    pub max_evals: usize,
    pub tol: f64,
    pub start_fraction: f64,
    pub initial_step: f64,
    pub truth_theta_xi: Vec<f64>,
    pub truth_theta_eps: Vec<f64>,
}

impl Default for RunConfig {
    /// Desk-scale version of the simulation design: `n = 3`, `r = 1`,
    /// `s = 2`, `N = 1000`, `k = 4`, `κ = 1`, `G_ξ = N(0, 1/4)`,
    /// `G_ε = N(0, 1)` truncated to `[0, ∞)`, 20 replications.
    fn default() -> Self {
        let opt = OptimizerSettings::default();
        Self {
            design: OrderStatDesign::new(3, 1, 2).expect("valid design"),
            sample_size: 1000,
            order: 4,
            kappa: DEFAULT_KAPPA,
            base_xi: BaseCdf::Normal {
                mean: 0.0,
                var: 0.25,
            },
            base_eps: BaseCdf::TruncNormal {
                mean: 0.0,
                var: 1.0,
            },
            bound: DEFAULT_BOUND,
            seed: 20_240_601,
            replications: 20,
            starts: opt.starts,
            max_evals: opt.max_evals,
            tol: opt.tol,
            start_fraction: opt.start_fraction,
            initial_step: opt.initial_step,
            truth_theta_xi: delta_to_theta(&DEFAULT_TRUTH_DELTA_XI),
            truth_theta_eps: delta_to_theta(&DEFAULT_TRUTH_DELTA_EPS),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "n",
    "r",
    "s",
    "sample_size",
    "order",
    "kappa",
    "base_xi",
    "base_eps",
    "bound",
    "seed",
    "replications",
    "starts",
    "max_evals",
    "tol",
    "start_fraction",
    "initial_step",
    "truth_theta_xi",
    "truth_theta_eps",
    "truth_delta_xi",
    "truth_delta_eps",
];

impl RunConfig {
    /// Parses a config file; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        if let Some(unknown) = kv.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key '{unknown}'")));
        }
        let mut cfg = Self::default();
        let int = |key: &str, default: usize| -> Result<usize> {
            match kv.get(key) {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Config(format!("'{key}' must be a nonnegative integer"))),
                None => Ok(default),
            }
        };
        let float = |key: &str, default: f64| -> Result<f64> {
            kv.get(key).map_or(Ok(default), |v| parse_f64(v))
        };
        let n = int("n", cfg.design.n())?;
        let r = int("r", cfg.design.r())?;
        let s = int("s", cfg.design.s())?;
        cfg.design = OrderStatDesign::new(n, r, s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.sample_size = int("sample_size", cfg.sample_size)?;
        cfg.order = int("order", cfg.order)?;
        cfg.kappa = float("kappa", cfg.kappa)?;
        if let Some(v) = kv.get("base_xi") {
            cfg.base_xi = v.parse()?;
        }
        if let Some(v) = kv.get("base_eps") {
            cfg.base_eps = v.parse()?;
        }
        cfg.bound = float("bound", cfg.bound)?;
        if let Some(v) = kv.get("seed") {
            cfg.seed = v
                .parse()
                .map_err(|_| Error::Config("'seed' must be an unsigned integer".into()))?;
        }
        cfg.replications = int("replications", cfg.replications)?;
        cfg.starts = int("starts", cfg.starts)?;
        cfg.max_evals = int("max_evals", cfg.max_evals)?;
        cfg.tol = float("tol", cfg.tol)?;
        cfg.start_fraction = float("start_fraction", cfg.start_fraction)?;
        cfg.initial_step = float("initial_step", cfg.initial_step)?;
        for (part, target) in [
            ("xi", &mut cfg.truth_theta_xi),
            ("eps", &mut cfg.truth_theta_eps),
        ] {
            let theta = kv.get(&format!("truth_theta_{part}"));
            let delta = kv.get(&format!("truth_delta_{part}"));
            match (theta, delta) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "give either truth_theta_{part} or truth_delta_{part}, not both"
                    )))
                }
                (Some(v), None) => *target = parse_f64_list(v)?,
                (None, Some(v)) => *target = delta_to_theta(&parse_f64_list(v)?),
                (None, None) => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.sample_size < 2 {
            return fail("sample_size must be at least 2".into());
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return fail(format!("bound must be positive, got {}", self.bound));
        }
        if self.replications < 1 {
            return fail("replications must be at least 1".into());
        }
        if self.starts < 1 {
            return fail("starts must be at least 1".into());
        }
        if self.order < 1 {
            return fail("order must be at least 1".into());
        }
        if self.max_evals < 1 {
            return fail("max_evals must be at least 1".into());
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return fail("tol must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.start_fraction) {
            return fail(format!("start_fraction must lie in [0, 1], got {}", self.start_fraction));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return fail("initial_step must be positive".into());
        }
        if self.base_eps.support().0 != 0.0 {
            return fail("base_eps must be supported on [0, inf)".into());
        }
        self.truth().map(|_| ())
    }

    /// Serializes every key, so a parsed copy equals `self`.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ");
        format!(
            "n = {}\nr = {}\ns = {}\nsample_size = {}\norder = {}\nkappa = {}\n\
             base_xi = {}\nbase_eps = {}\nbound = {}\nseed = {}\nreplications = {}\n\
             starts = {}\nmax_evals = {}\ntol = {}\nstart_fraction = {}\ninitial_step = {}\n\
             truth_theta_xi = {}\ntruth_theta_eps = {}\n",
            self.design.n(),
            self.design.r(),
            self.design.s(),
            self.sample_size,
            self.order,
            fmt_f64(self.kappa),
            self.base_xi,
            self.base_eps,
            fmt_f64(self.bound),
            self.seed,
            self.replications,
            self.starts,
            self.max_evals,
            fmt_f64(self.tol),
            fmt_f64(self.start_fraction),
            fmt_f64(self.initial_step),
            list(&self.truth_theta_xi),
            list(&self.truth_theta_eps),
        )
    }

    pub fn criterion_config(&self) -> Result<CriterionConfig> {
        CriterionConfig::new(self.kappa, self.design)
    }

    pub fn optimizer(&self, seed: u64) -> OptimizerSettings {
        OptimizerSettings {
            starts: self.starts,
            max_evals: self.max_evals,
            tol: self.tol,
            start_fraction: self.start_fraction,
            initial_step: self.initial_step,
            seed,
            bound: self.bound,
        }
    }

    /// True `(F_ξ, F_ε)` of the data generating process.
    pub fn truth(&self) -> Result<(SieveCdf, SieveCdf)> {
        let xi = SieveCdf::new(self.base_xi, self.truth_theta_xi.clone(), self.bound)
            .map_err(|e| Error::Config(format!("truth_theta_xi: {e}")))?;
        let eps = SieveCdf::new(self.base_eps, self.truth_theta_eps.clone(), self.bound)
            .map_err(|e| Error::Config(format!("truth_theta_eps: {e}")))?;
        Ok((xi, eps))
    }

    /// Seed of replication `j`.
    pub fn replication_seed(&self, j: usize) -> u64 {
        derive_seed(self.seed, j as u64)
    }

    /// Data sample for a given seed, drawn on the data stream so it is
    /// independent of the simulation panel for the same seed.
    pub fn generate_data(&self, seed: u64) -> Result<ObservedSample> {
        let (xi, eps) = self.truth()?;
        let panel =
            SimPanel::draw_on_stream(self.sample_size, self.design.n(), seed, streams::DATA);
        simulate_sample(&xi, &eps, &panel, &self.design)
    }

    /// Simulation panel for a given seed.
    pub fn panel(&self, seed: u64) -> SimPanel {
        SimPanel::draw(self.sample_size, self.design.n(), seed)
    }

    pub fn estimate(&self, data: &ObservedSample, seed: u64) -> Result<EstimateResult> {
        estimate(
            data,
            &self.design,
            (self.base_xi, self.base_eps),
            self.order,
            &self.criterion_config()?,
            &self.panel(seed),
            &self.optimizer(seed),
        )
    }
}

/// Grid of `points` abscissae between the `lo_p` and `1 - lo_p` quantiles.
pub fn quantile_grid(f: &SieveCdf, points: usize, lo_p: f64) -> Vec<f64> {
    let lo = f.quantile_unchecked(lo_p);
    let hi = f.quantile_unchecked(1.0 - lo_p);
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// `max |F(x) - G(x)|` over the grid.
pub fn sup_distance(f: &SieveCdf, g: &SieveCdf, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|x| (f.eval(*x) - g.eval(*x)).abs())
        .fold(0.0, f64::max)
}

/// Grid used for sup-norm errors: 1001 points across the central
/// `1 - 2·10⁻⁴` mass of the truth.
pub fn error_grid(truth: &SieveCdf) -> Vec<f64> {
    quantile_grid(truth, 1001, 1e-4)
}

/// Deciles of the truth, where pointwise estimates are recorded.
pub fn decile_points(truth: &SieveCdf) -> Vec<f64> {
    (1..10).map(|i| truth.quantile_unchecked(i as f64 / 10.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub seed: u64,
    pub result: std::result::Result<ReplicationFit, String>,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationFit {
    pub estimate: EstimateResult,
    pub sup_err_xi: f64,
    pub sup_err_eps: f64,
    /// `F̂_ξ` and `F̂_ε` at the deciles of the respective truths.
    pub deciles_xi: Vec<f64>,
    pub deciles_eps: Vec<f64>,
}

/// Runs replication `j` in isolation.
pub fn run_replication(cfg: &RunConfig, j: usize) -> ReplicationOutcome {
    let seed = cfg.replication_seed(j);
    let started = Instant::now();
    let result = fit_replication(cfg, seed).map_err(|e| e.to_string());
    ReplicationOutcome {
        index: j,
        seed,
        result,
        runtime_secs: started.elapsed().as_secs_f64(),
    }
}

fn fit_replication(cfg: &RunConfig, seed: u64) -> Result<ReplicationFit> {
    let (xi, eps) = cfg.truth()?;
    let data = cfg.generate_data(seed)?;
    let estimate = cfg.estimate(&data, seed)?;
    let (f_xi, f_eps) = (estimate.f_xi()?, estimate.f_eps()?);
    Ok(ReplicationFit {
        sup_err_xi: sup_distance(&f_xi, &xi, &error_grid(&xi)),
        sup_err_eps: sup_distance(&f_eps, &eps, &error_grid(&eps)),
        deciles_xi: decile_points(&xi).iter().map(|x| f_xi.eval(*x)).collect(),
        deciles_eps: decile_points(&eps).iter().map(|x| f_eps.eval(*x)).collect(),
        estimate,
    })
}

/// Runs all replications on a pool of `jobs` threads. Results come back in
/// replication order whatever the job count.
pub fn montecarlo(cfg: &RunConfig, jobs: usize) -> Result<Vec<ReplicationOutcome>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|j| run_replication(cfg, j))
            .collect()
    }))
}

/// Median by linear interpolation between order statistics (type 7).
pub fn quantile_of(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile_of(values, 0.5)
}

/// Replication table: one row per replication followed by `median` and
/// `iqr` rows. Runtime is excluded so the table is reproducible.
pub fn summary_csv(outcomes: &[ReplicationOutcome]) -> String {
    let mut out = String::from(
        "replication,seed,status,criterion,sup_err_xi,sup_err_eps,evaluations,converged\n",
    );
    let mut cols: [Vec<f64>; 4] = Default::default();
    for o in outcomes {
        match &o.result {
            Ok(fit) => {
                let e = &fit.estimate;
                let vals = [
                    e.criterion_value,
                    fit.sup_err_xi,
                    fit.sup_err_eps,
                    e.evaluations as f64,
                ];
                for (c, v) in cols.iter_mut().zip(vals) {
                    c.push(v);
                }
                out.push_str(&format!(
                    "{},{},ok,{},{},{},{},{}\n",
                    o.index,
                    o.seed,
                    fmt_f64(vals[0]),
                    fmt_f64(vals[1]),
                    fmt_f64(vals[2]),
                    e.evaluations,
                    e.converged
                ));
            }
            Err(msg) => {
                let clean = msg.replace([',', '\n'], ";");
                out.push_str(&format!("{},{},error: {clean},,,,,\n", o.index, o.seed));
            }
        }
    }
    for (label, f) in [
        ("median", median as fn(&[f64]) -> f64),
        ("iqr", |v: &[f64]| quantile_of(v, 0.75) - quantile_of(v, 0.25)),
    ] {
        let cells: Vec<String> = cols.iter().map(|c| fmt_f64(f(c))).collect();
        out.push_str(&format!("{label},,,{},\n", cells.join(",")));
    }
    out
}

/// Pointwise estimates at the truth deciles, one row per replication and
/// decile, for box plots.
pub fn deciles_csv(cfg: &RunConfig, outcomes: &[ReplicationOutcome]) -> Result<String> {
    let (xi, eps) = cfg.truth()?;
    let (px, pe) = (decile_points(&xi), decile_points(&eps));
    let mut out = String::from("replication,decile,x_xi,F_xi,F_xi_hat,x_eps,F_eps,F_eps_hat\n");
    for o in outcomes {
        if let Ok(fit) = &o.result {
            for d in 0..9 {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    o.index,
                    d + 1,
                    fmt_f64(px[d]),
                    fmt_f64(xi.eval(px[d])),
                    fmt_f64(fit.deciles_xi[d]),
                    fmt_f64(pe[d]),
                    fmt_f64(eps.eval(pe[d])),
                    fmt_f64(fit.deciles_eps[d]),
                ));
            }
        }
    }
    Ok(out)
}

/// Wall-clock runtimes, kept apart from the reproducible tables.
pub fn timing_csv(outcomes: &[ReplicationOutcome]) -> String {
    let mut out = String::from("replication,runtime_secs\n");
    for o in outcomes {
        out.push_str(&format!("{},{:.3}\n", o.index, o.runtime_secs));
    }
    out
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    #[test]
    fn default_truth_is_feasible() {
        let cfg = RunConfig::default();
        let (xi, eps) = cfg.truth().unwrap();
        assert_eq!(xi.order(), 6);
        assert_eq!(eps.order(), 6);
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = RunConfig {
            sample_size: 321,
            kappa: 3.14,
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(RunConfig::parse("n = 3\nr = 2\ns = 2\n").is_err());
        assert!(RunConfig::parse("kappa = -1\n").is_err());
        assert!(RunConfig::parse("colour = blue\n").is_err());
        assert!(RunConfig::parse("replications = 0\n").is_err());
        assert!(RunConfig::parse("base_eps = normal(0, 1)\n").is_err());
        assert!(RunConfig::parse("truth_theta_xi = 1000\n").is_err());
        assert!(RunConfig::parse("sample_size = ten\n").is_err());
    }

    #[test]
    fn quantiles_of_small_sets() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile_of(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn generated_rows_are_ordered() {
        let cfg = RunConfig {
            sample_size: 50,
            ..Default::default()
        };
        let data = cfg.generate_data(7).unwrap();
        assert!(data.rows().iter().all(|r| r[0] <= r[1]));
        assert_eq!(data, cfg.generate_data(7).unwrap());
    }
}
