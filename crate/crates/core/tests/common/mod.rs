#![allow(dead_code)]

use num_complex::Complex64;
use ordsieve_core::orderstat::{
    conditional_cdf_given_r, orderstat_cdf, orderstat_joint_cdf, OrderStatDesign, ParentCdf,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One comparison of a closed form against a Monte Carlo frequency.
#[derive(Debug, Clone)]
pub struct Check {
    pub label: String,
    pub model: f64,
    pub empirical: f64,
    pub se: f64,
}

impl Check {
    pub fn z(&self) -> f64 {
        (self.model - self.empirical).abs() / self.se
    }
}

fn binomial_se(p: f64, m: usize) -> f64 {
    // Floor keeps probabilities at 0 or 1 from producing a zero SE.
    (p * (1.0 - p) / m as f64).sqrt().max(1.0 / m as f64)
}

/// Draws `draws` samples of size `n` through `quantile`, then compares the
/// marginal, joint and conditional order-statistic CDFs on a grid of
/// parent quantiles with the sample frequencies.
pub fn orderstat_checks<F: ParentCdf>(
    name: &str,
    parent: &F,
    quantile: impl Fn(f64) -> f64,
    n: usize,
    draws: usize,
    seed: u64,
) -> Vec<Check> {
    let probs = [0.05, 0.2, 0.4, 0.6, 0.8, 0.95];
    let grid: Vec<f64> = probs.iter().map(|p| quantile(*p)).collect();
    let g = grid.len();
    let mut pairs = vec![(1, 2), (1, n), (n - 1, n)];
    pairs.sort_unstable();
    pairs.dedup();

    let mut marginal = vec![vec![0usize; g]; n];
    let mut lower = vec![vec![0usize; g]; pairs.len()];
    let mut joint = vec![vec![vec![0usize; g]; g]; pairs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eta = vec![0.0; n];
    for _ in 0..draws {
        for e in eta.iter_mut() {
            *e = quantile(rng.random::<f64>());
        }
        eta.sort_by(f64::total_cmp);
        for (j, row) in marginal.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().zip(&grid) {
                *c += (eta[j] <= *x) as usize;
            }
        }
        for (p, &(r, s)) in pairs.iter().enumerate() {
            for (a, xr) in grid.iter().enumerate() {
                if eta[r - 1] <= *xr {
                    lower[p][a] += 1;
                    for (b, xs) in grid.iter().enumerate() {
                        joint[p][a][b] += (eta[s - 1] <= *xs) as usize;
                    }
                }
            }
        }
    }

    let m = draws as f64;
    let mut out = Vec::new();
    for j in 1..=n {
        for (a, x) in grid.iter().enumerate() {
            let model = orderstat_cdf(parent, n, j, *x).unwrap();
            out.push(Check {
                label: format!("{name} n={n} F_({j})({x:.3})"),
                model,
                empirical: marginal[j - 1][a] as f64 / m,
                se: binomial_se(model, draws),
            });
        }
    }
    for (p, &(r, s)) in pairs.iter().enumerate() {
        let d = OrderStatDesign::new(n, r, s).unwrap();
        for (a, xr) in grid.iter().enumerate() {
            for (b, xs) in grid.iter().enumerate() {
                let model = orderstat_joint_cdf(parent, &d, *xr, *xs);
                out.push(Check {
                    label: format!("{name} n={n} F_({r},{s})({xr:.3}, {xs:.3})"),
                    model,
                    empirical: joint[p][a][b] as f64 / m,
                    se: binomial_se(model, draws),
                });
                let hits = lower[p][a];
                if hits >= 1000 {
                    let model = conditional_cdf_given_r(parent, &d, *xs, *xr).unwrap();
                    out.push(Check {
                        label: format!("{name} n={n} F_({s}|{r})({xs:.3} | {xr:.3})"),
                        model,
                        empirical: joint[p][a][b] as f64 / hits as f64,
                        se: binomial_se(model, hits),
                    });
                }
            }
        }
    }
    out
}

pub fn exponential_quantile(u: f64) -> f64 {
    -(-u).ln_1p()
}

/// Shifted Legendre polynomials on `[0, 1]` normalized to unit norm, by
/// Bonnet's recurrence.
pub fn shifted_legendre(l: usize, u: f64) -> f64 {
    let x = 2.0 * u - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return 1.0;
    }
    for m in 1..l {
        let mf = m as f64;
        let p2 = ((2.0 * mf + 1.0) * x * p1 - mf * p0) / (mf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    ((2 * l + 1) as f64).sqrt() * p1
}

/// Gauss–Legendre rule on `[a, b]` by Newton iteration on the Legendre
/// polynomial from Chebyshev initial guesses.
pub fn gauss_rule(count: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let nf = count as f64;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 1..count {
                let mf = m as f64;
                let p2 = ((2.0 * mf + 1.0) * x * p1 - mf * p0) / (mf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
    }
    out
}

/// `(1/4κ²) ∫_{(-κ,κ)²} |ψ̂ - φ̂|² dt` on a tensor Gauss–Legendre grid.
/// The ch.f. factorizes per coordinate, so each row's factors are tabulated
/// once per axis.
pub fn criterion_by_quadrature(
    data: &[[f64; 2]],
    sim: &[[f64; 2]],
    kappa: f64,
    nodes: usize,
) -> f64 {
    let rule = gauss_rule(nodes, -kappa, kappa);
    let table = |rows: &[[f64; 2]], axis: usize| -> Vec<Vec<Complex64>> {
        rule.iter()
            .map(|(t, _)| {
                rows.iter()
                    .map(|x| Complex64::from_polar(1.0, t * x[axis]))
                    .collect()
            })
            .collect()
    };
    let (d0, d1) = (table(data, 0), table(data, 1));
    let (s0, s1) = (table(sim, 0), table(sim, 1));
    let nd = data.len() as f64;
    let ns = sim.len() as f64;
    let mut total = 0.0;
    for (a, (_, wa)) in rule.iter().enumerate() {
        for (b, (_, wb)) in rule.iter().enumerate() {
            let psi: Complex64 = d0[a].iter().zip(&d1[b]).map(|(u, v)| u * v).sum::<Complex64>() / nd;
            let phi: Complex64 = s0[a].iter().zip(&s1[b]).map(|(u, v)| u * v).sum::<Complex64>() / ns;
            total += wa * wb * (psi - phi).norm_sqr();
        }
    }
    total / (4.0 * kappa * kappa)
}

/// `count` rows with independent normal coordinates, sorted within rows.
pub fn random_rows(rng: &mut ChaCha8Rng, count: usize, shift: f64, scale: f64) -> Vec<[f64; 2]> {
    (0..count)
        .map(|_| {
            let a = shift + scale * box_muller(rng);
            let b = shift + scale * box_muller(rng);
            [a.min(b), a.max(b)]
        })
        .collect()
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}
