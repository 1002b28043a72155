//! Identification diagnostics: the Rossberg distribution, Monte Carlo
//! spacing and cross-sum samples, two-sample Kolmogorov–Smirnov distances,
//! and ratios of ch.f.s of the two observed order statistics.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::monotone_root;
use crate::orderstat::{OrderStatDesign, ParentCdf};
use crate::rng::{derive_seed, open_unit, stream, streams};
use crate::sieve::BaseCdf;

/// Denominator moduli below this flag a ratio point as unreliable.
pub const RATIO_FLAG_THRESHOLD: f64 = 1e-3;

/// Parent distribution `G(x) = 1 - e^{-x}[1 + π^{-2}(1 - cos 2πx)]` on
/// `[0, ∞)`, whose two-sample spacing law matches the standard exponential.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rossberg;

impl Rossberg {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let bracket = 1.0 + (1.0 - (2.0 * PI * x).cos()) / (PI * PI);
        (1.0 - (-x).exp() * bracket).clamp(0.0, 1.0)
    }

    /// `e^{-x}[1 + (1 - cos 2πx - 2π sin 2πx)/π²]`, positive on `[0, ∞)`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let a = 2.0 * PI * x;
        (-x).exp() * (1.0 + (1.0 - a.cos() - 2.0 * PI * a.sin()) / (PI * PI))
    }

    /// Inverse of [`Rossberg::cdf`] for `p` in `(0, 1)`.
    ///
    /// `1 - e^{-x}(1 + 2/π²) <= G(x) <= 1 - e^{-x}` brackets the root.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Boundary(p));
        }
        let lo = -(-p).ln_1p();
        let hi = ((1.0 + 2.0 / (PI * PI)) / (1.0 - p)).ln();
        Ok(monotone_root(lo, hi, 1e-14, |x| {
            (self.cdf(x) - p, self.pdf(x))
        }))
    }
}

impl ParentCdf for Rossberg {
    fn cdf(&self, x: f64) -> f64 {
        Rossberg::cdf(self, x)
    }

    fn support_lower(&self) -> f64 {
        0.0
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        Rossberg::quantile(self, p)
    }
}

fn orderstat_pair<F: ParentCdf + ?Sized, R: rand::Rng>(
    f: &F,
    d: &OrderStatDesign,
    buf: &mut [f64],
    rng: &mut R,
) -> Result<(f64, f64)> {
    for u in buf.iter_mut() {
        *u = open_unit(rng);
    }
    buf.sort_by(f64::total_cmp);
    Ok((f.quantile(buf[d.r() - 1])?, f.quantile(buf[d.s() - 1])?))
}

/// `m` draws of the spacing `η_(s) - η_(r)` from samples of size `n`.
pub fn spacing_sample<F: ParentCdf + ?Sized>(
    f: &F,
    n: usize,
    r: usize,
    s: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = OrderStatDesign::new(n, r, s)?;
    let mut rng = stream(seed, streams::DIAG_MODEL);
    let mut buf = vec![0.0; n];
    (0..m)
        .map(|_| orderstat_pair(f, &d, &mut buf, &mut rng).map(|(a, b)| (b - a).max(0.0)))
        .collect()
}

/// `m` draws of the cross-sum `η'_(r) + η_(s)`, where `η'` is a sample of
/// size `n` from `g` and `η` an independent sample of size `n` from `f`.
pub fn crosssum_sample<F, G>(
    f: &F,
    g: &G,
    n: usize,
    r: usize,
    s: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: ParentCdf + ?Sized,
    G: ParentCdf + ?Sized,
{
    let d = OrderStatDesign::new(n, r, s)?;
    let mut rng_f = stream(seed, streams::DIAG_MODEL);
    let mut rng_g = stream(seed, streams::DIAG_SECOND);
    let mut buf = vec![0.0; n];
    (0..m)
        .map(|_| {
            let (_, upper) = orderstat_pair(f, &d, &mut buf, &mut rng_f)?;
            let (lower, _) = orderstat_pair(g, &d, &mut buf, &mut rng_g)?;
            Ok(lower + upper)
        })
        .collect()
}

/// Sup-norm distance between the empirical CDFs of two sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(a.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] <= w[1]));
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov survival function `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS comparison of two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub statistic: f64,
    pub sample_sizes: (usize, usize),
    /// Asymptotic p-value of the two-sample test.
    pub p_value: f64,
    /// Abscissae at which the two empirical CDFs are tabulated.
    pub grid: Vec<f64>,
    pub cdf_a: Vec<f64>,
    pub cdf_b: Vec<f64>,
}

impl DistanceReport {
    /// Sorts both samples, computes the statistic and tabulates both
    /// empirical CDFs on `grid`.
    pub fn compare(mut a: Vec<f64>, mut b: Vec<f64>, grid: Vec<f64>) -> Self {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let statistic = ks_distance(&a, &b);
        let (na, nb) = (a.len(), b.len());
        let en = ((na * nb) as f64 / (na + nb) as f64).sqrt();
        let p_value = kolmogorov_sf(statistic * en);
        let cdf_a = grid.iter().map(|x| empirical_cdf(&a, *x)).collect();
        let cdf_b = grid.iter().map(|x| empirical_cdf(&b, *x)).collect();
        Self {
            statistic,
            sample_sizes: (na, nb),
            p_value,
            grid,
            cdf_a,
            cdf_b,
        }
    }

    /// Whether equality is rejected at level `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Fraction of a sorted sample at or below `x`.
pub fn empirical_cdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// One point of a ch.f.-ratio curve `ψ_{X_(s)}(t) / ψ_{X_(r)}(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub t: f64,
    pub value: Complex64,
    /// Delta-method Monte Carlo standard errors of the real and imaginary
    /// parts.
    pub se_re: f64,
    pub se_im: f64,
    /// Denominator modulus fell below [`RATIO_FLAG_THRESHOLD`].
    pub flagged: bool,
}

/// Source of a ratio curve: an observed sample, or a model to simulate.
pub enum RatioSource<'a> {
    Sample(&'a [[f64; 2]]),
    Model {
        errors: &'a dyn ParentCdf,
        /// Latent common component; `None` compares error order statistics
        /// directly (the latent ch.f. cancels from the ratio).
        latent: Option<&'a dyn ParentCdf>,
        design: OrderStatDesign,
    },
}

/// Draws `m` rows `(ξ + ε_(r), ξ + ε_(s))`.
pub fn simulate_pairs(
    errors: &dyn ParentCdf,
    latent: Option<&dyn ParentCdf>,
    d: &OrderStatDesign,
    m: usize,
    seed: u64,
    stream_id: u64,
) -> Result<Vec<[f64; 2]>> {
    let mut rng = stream(seed, stream_id);
    let mut buf = vec![0.0; d.n()];
    (0..m)
        .map(|_| {
            let xi = match latent {
                Some(l) => l.quantile(open_unit(&mut rng))?,
                None => 0.0,
            };
            let (a, b) = orderstat_pair(errors, d, &mut buf, &mut rng)?;
            Ok([xi + a, xi + b])
        })
        .collect()
}

/// Ratio of the ch.f. of the second coordinate to that of the first, at
/// each `t` in `t_grid`, with Monte Carlo standard errors.
pub fn chf_ratio_curve(
    source: RatioSource<'_>,
    t_grid: &[f64],
    m: usize,
    seed: u64,
) -> Result<Vec<RatioPoint>> {
    let simulated;
    let rows: &[[f64; 2]] = match source {
        RatioSource::Sample(rows) => rows,
        RatioSource::Model {
            errors,
            latent,
            design,
        } => {
            simulated = simulate_pairs(errors, latent, &design, m, seed, streams::DIAG_MODEL)?;
            &simulated
        }
    };
    if rows.len() < 2 {
        return Err(Error::Config("ratio curve needs at least two rows".into()));
    }
    Ok(t_grid.iter().map(|&t| ratio_point(rows, t)).collect())
}

fn ratio_point(rows: &[[f64; 2]], t: f64) -> RatioPoint {
    let nf = rows.len() as f64;
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for x in rows {
        den += Complex64::from_polar(1.0, t * x[0]);
        num += Complex64::from_polar(1.0, t * x[1]);
    }
    num /= nf;
    den /= nf;
    if den.norm() < RATIO_FLAG_THRESHOLD {
        return RatioPoint {
            t,
            value: Complex64::new(f64::NAN, f64::NAN),
            se_re: f64::NAN,
            se_im: f64::NAN,
            flagged: true,
        };
    }
    let ratio = num / den;
    // Influence of each draw on the ratio: (a_i - R b_i) / B.
    let (mut s_re, mut s_im) = (0.0, 0.0);
    for x in rows {
        let a = Complex64::from_polar(1.0, t * x[1]);
        let b = Complex64::from_polar(1.0, t * x[0]);
        let z = (a - ratio * b) / den;
        s_re += z.re * z.re;
        s_im += z.im * z.im;
    }
    // The influence terms have mean zero by construction of the ratio.
    RatioPoint {
        t,
        value: ratio,
        se_re: (s_re / (nf - 1.0)).sqrt() / nf.sqrt(),
        se_im: (s_im / (nf - 1.0)).sqrt() / nf.sqrt(),
        flagged: false,
    }
}

/// Default ratio grid: 81 points on `[-4, 4]`.
pub fn default_t_grid() -> Vec<f64> {
    (0..81).map(|i| (i as f64 - 40.0) / 10.0).collect()
}

/// Largest standardized gap `|a - b| / sqrt(se_a² + se_b²)` over real and
/// imaginary parts at unflagged points with `|t|` in `[t_min, t_max]`.
pub fn max_standardized_gap(a: &[RatioPoint], b: &[RatioPoint], t_min: f64, t_max: f64) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(p, q)| !p.flagged && !q.flagged)
        .filter(|(p, _)| p.t.abs() >= t_min && p.t.abs() <= t_max)
        .map(|(p, q)| {
            let z_re = (p.value.re - q.value.re).abs() / p.se_re.hypot(q.se_re).max(1e-300);
            let z_im = (p.value.im - q.value.im).abs() / p.se_im.hypot(q.se_im).max(1e-300);
            z_re.max(z_im)
        })
        .fold(0.0, f64::max)
}

/// Settings of the Rossberg-versus-exponential comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RossbergSettings {
    /// Draws per simulated sample.
    pub draws: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    /// Abscissae at which spacing and cross-sum CDFs are tabulated.
    pub cdf_grid: Vec<f64>,
}

impl Default for RossbergSettings {
    fn default() -> Self {
        Self {
            draws: 1_000_000,
            seed: 20_240_601,
            t_grid: default_t_grid(),
            cdf_grid: (0..=200).map(|i| 0.05 * i as f64).collect(),
        }
    }
}

/// Spacing KS statistic below which the two spacing laws count as aligned.
pub const SPACING_ALIGNED_BELOW: f64 = 0.004;
/// Level of the cross-sum two-sample test.
pub const CROSSSUM_LEVEL: f64 = 1e-3;
/// Standardized gap separating "within Monte Carlo noise" from "departs".
pub const RATIO_GAP_LIMIT: f64 = 4.0;

/// Exponential and Rossberg error laws compared through spacings,
/// cross-sums and ch.f. ratios, with `n = 2`, `r = 1`, `s = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RossbergReport {
    /// Exponential spacings (`a`) against Rossberg spacings (`b`).
    pub spacing: DistanceReport,
    /// Cross-sums with both parents exponential (`a`) against cross-sums
    /// whose lower order statistic comes from a Rossberg sample (`b`).
    pub crosssum: DistanceReport,
    /// Ratio of an observed sample: standard normal latent plus
    /// exponential errors.
    pub ratio_observed: Vec<RatioPoint>,
    pub ratio_exponential: Vec<RatioPoint>,
    pub ratio_rossberg: Vec<RatioPoint>,
}

impl RossbergReport {
    pub fn run(settings: &RossbergSettings) -> Result<Self> {
        let expo = BaseCdf::exponential(1.0)?;
        let latent = BaseCdf::normal(0.0, 1.0)?;
        let seeds: Vec<u64> = (0..6).map(|i| derive_seed(settings.seed, i)).collect();
        let m = settings.draws;
        let spacing = DistanceReport::compare(
            spacing_sample(&expo, 2, 1, 2, m, seeds[0])?,
            spacing_sample(&Rossberg, 2, 1, 2, m, seeds[1])?,
            settings.cdf_grid.clone(),
        );
        let crosssum = DistanceReport::compare(
            crosssum_sample(&expo, &expo, 2, 1, 2, m, seeds[2])?,
            crosssum_sample(&expo, &Rossberg, 2, 1, 2, m, seeds[3])?,
            settings.cdf_grid.clone(),
        );
        let design = OrderStatDesign::new(2, 1, 2)?;
        let observed = simulate_pairs(
            &expo,
            Some(&latent),
            &design,
            m,
            settings.seed,
            streams::DIAG_OBSERVED,
        )?;
        let t = &settings.t_grid;
        let model = |errors: &dyn ParentCdf, seed| {
            chf_ratio_curve(
                RatioSource::Model {
                    errors,
                    latent: None,
                    design,
                },
                t,
                m,
                seed,
            )
        };
        Ok(Self {
            spacing,
            crosssum,
            ratio_observed: chf_ratio_curve(RatioSource::Sample(&observed), t, m, settings.seed)?,
            ratio_exponential: model(&expo, seeds[4])?,
            ratio_rossberg: model(&Rossberg, seeds[5])?,
        })
    }

    pub fn spacing_aligned(&self) -> bool {
        self.spacing.statistic < SPACING_ALIGNED_BELOW
    }

    pub fn crosssum_distinct(&self) -> bool {
        self.crosssum.rejects(CROSSSUM_LEVEL)
    }

    /// Largest standardized gap between the exponential-model and observed
    /// ratios for `|t| <= 2`.
    pub fn exponential_gap(&self) -> f64 {
        max_standardized_gap(&self.ratio_exponential, &self.ratio_observed, 0.0, 2.0)
    }

    /// Largest standardized gap between the Rossberg-model and observed
    /// ratios for `|t| > 1`.
    pub fn rossberg_gap(&self) -> f64 {
        max_standardized_gap(
            &self.ratio_rossberg,
            &self.ratio_observed,
            1.0 + 1e-9,
            f64::INFINITY,
        )
    }

    /// The exponential model tracks the observed ratio while the Rossberg
    /// model departs from it beyond `|t| = 1`.
    pub fn ratio_departs(&self) -> bool {
        self.exponential_gap() <= RATIO_GAP_LIMIT && self.rossberg_gap() > RATIO_GAP_LIMIT
    }
}
