//! Sieve family of distribution functions `F(x) = H_k(G(x); θ)`.
//!
//! `G` is a fixed base distribution and `H_k` is the CDF on `[0, 1]` of a
//! squared-polynomial density. With `a(θ) = (1 - π_kᵀθ, θ)` the polynomial
//! `p(u) = Σ a_i u^i` integrates to one, and
//! `H_k(v; θ) = aᵀΠ(v)a / aᵀΠ(1)a` where `Π(v)_{ij} = v^{i+j+1}/(i+j+1)`.
//!
//! The coefficient space `Θ_k` is a box in the Legendre coordinates
//! `δ_ℓ = Σ_m θ_{ℓ+m} μ_ℓ(m)`, the coefficients of `p` in the orthonormal
//! basis `ρ_ℓ`. The optimizer works in those coordinates; see
//! [`theta_to_delta`] and [`delta_to_theta`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::format::{fmt_f64, parse_f64};
use crate::numeric::{
    normal_cdf, normal_pdf, normal_quantile, normal_quantile_upper, normal_sf,
};
use crate::orderstat::ParentCdf;

/// Default for the constant `c` bounding the Legendre coordinates.
pub const DEFAULT_BOUND: f64 = 5.0;

/// Denominators `aᵀΠ(1)a` below this are treated as degenerate.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// `ρ_ℓ(u) = √(2ℓ+1) L_ℓ(2u - 1)`, the Legendre polynomial shifted to
/// `[0, 1]` and normalized to unit `L²` norm.
pub fn legendre_rho(l: usize, u: f64) -> f64 {
    let x = 2.0 * u - 1.0;
    let (p, _) = crate::numeric::legendre_with_derivative(l, x);
    ((2 * l + 1) as f64).sqrt() * p
}

/// `Π_{k+1}(v)`, the `(k+1)×(k+1)` matrix `(v^{i+j+1}/(i+j+1))`.
pub fn pi_matrix(k: usize, v: f64) -> Vec<Vec<f64>> {
    (0..=k)
        .map(|i| {
            (0..=k)
                .map(|j| {
                    let e = (i + j + 1) as i32;
                    v.powi(e) / e as f64
                })
                .collect()
        })
        .collect()
}

/// `π_k = (1/2, 1/3, …, 1/(k+1))`.
pub fn pi_vector(k: usize) -> Vec<f64> {
    (1..=k).map(|i| 1.0 / (i as f64 + 1.0)).collect()
}

/// `a(θ) = (1 - π_kᵀθ, θ₁, …, θ_k)`: monomial coefficients of the
/// unit-mass polynomial whose square is the (unnormalized) density.
pub fn monomial_coefficients(theta: &[f64]) -> Vec<f64> {
    let pi = pi_vector(theta.len());
    let lead = 1.0 - pi.iter().zip(theta).map(|(p, t)| p * t).sum::<f64>();
    std::iter::once(lead).chain(theta.iter().copied()).collect()
}

fn quadratic_form(m: &[Vec<f64>], a: &[f64]) -> f64 {
    m.iter()
        .zip(a)
        .map(|(row, ai)| ai * row.iter().zip(a).map(|(x, aj)| x * aj).sum::<f64>())
        .sum()
}

/// `H_k(v; θ)` by the quadratic forms in `Π(v)` and `Π(1)`.
pub fn h_cdf(k: usize, theta: &[f64], v: f64) -> Result<f64> {
    if theta.len() != k {
        return Err(Error::Config(format!(
            "expected {k} coefficients, got {}",
            theta.len()
        )));
    }
    let a = monomial_coefficients(theta);
    let denom = quadratic_form(&pi_matrix(k, 1.0), &a);
    if denom.is_nan() || denom < DENOMINATOR_GUARD {
        return Err(Error::InvalidCoefficients(format!(
            "normalizing constant {denom:e} below guard"
        )));
    }
    let v = v.clamp(0.0, 1.0);
    Ok((quadratic_form(&pi_matrix(k, v), &a) / denom).clamp(0.0, 1.0))
}

/// `μ_ℓ(m) = ∫₀¹ u^{ℓ+m} ρ_ℓ(u) du = √(2ℓ+1) ((ℓ+m)!)² / (m! (2ℓ+m+1)!)`.
pub fn mu_moment(l: usize, m: usize) -> f64 {
    use crate::numeric::ln_factorial;
    let ln = 2.0 * ln_factorial(l + m) - ln_factorial(m) - ln_factorial(2 * l + m + 1);
    ((2 * l + 1) as f64).sqrt() * ln.exp()
}

/// Bound on the `ℓ`-th Legendre coordinate, `c / (1 + √ℓ ln ℓ)`.
pub fn coordinate_bound(l: usize, c: f64) -> f64 {
    let lf = l as f64;
    c / (1.0 + lf.sqrt() * lf.ln())
}

/// Legendre coordinates `δ_ℓ = Σ_{m=0}^{k-ℓ} θ_{ℓ+m} μ_ℓ(m)`, `ℓ = 1..k`.
pub fn theta_to_delta(theta: &[f64]) -> Vec<f64> {
    let k = theta.len();
    (1..=k)
        .map(|l| (0..=k - l).map(|m| theta[l + m - 1] * mu_moment(l, m)).sum())
        .collect()
}

/// Inverse of [`theta_to_delta`] by back substitution (the map is upper
/// triangular with positive diagonal `μ_ℓ(0)`).
pub fn delta_to_theta(delta: &[f64]) -> Vec<f64> {
    let k = delta.len();
    let mut theta = vec![0.0; k];
    for l in (1..=k).rev() {
        let rest: f64 = (1..=k - l).map(|m| theta[l + m - 1] * mu_moment(l, m)).sum();
        theta[l - 1] = (delta[l - 1] - rest) / mu_moment(l, 0);
    }
    theta
}

/// Membership in the closed set `Θ_k`.
pub fn theta_feasible(k: usize, theta: &[f64], c: f64) -> bool {
    theta.len() == k && delta_feasible(&theta_to_delta(theta), c)
}

/// Box check in Legendre coordinates. The relative slack of `1e-10`
/// absorbs round-off in the `θ ↔ δ` conversion, so points on a face stay
/// inside after a round trip.
pub fn delta_feasible(delta: &[f64], c: f64) -> bool {
    delta.iter().enumerate().all(|(i, d)| {
        let b = coordinate_bound(i + 1, c);
        d.is_finite() && d.abs() <= b * (1.0 + 1e-10)
    })
}

/// Base distribution `G` of a sieve CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseCdf {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, var: f64 },
    /// Normal with the given location and scale, truncated to `[0, ∞)`.
    TruncNormal { mean: f64, var: f64 },
    Exponential { rate: f64 },
}

impl BaseCdf {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("uniform needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        check_normal(mean, var)?;
        Ok(Self::Normal { mean, var })
    }

    pub fn trunc_normal(mean: f64, var: f64) -> Result<Self> {
        check_normal(mean, var)?;
        Ok(Self::TruncNormal { mean, var })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Domain(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lo, hi } => (lo, hi),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::TruncNormal { .. } | Self::Exponential { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::Normal { mean, var } => {
                let sd = var.sqrt();
                normal_pdf((x - mean) / sd) / sd
            }
            Self::TruncNormal { mean, var } => {
                if x < 0.0 {
                    return 0.0;
                }
                let sd = var.sqrt();
                normal_pdf((x - mean) / sd) / sd / normal_sf(-mean / sd)
            }
            Self::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Normal { mean, var } => normal_cdf((x - mean) / var.sqrt()),
            Self::TruncNormal { mean, var } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let sd = var.sqrt();
                let alpha = -mean / sd;
                let z = (x - mean) / sd;
                let mass = normal_sf(alpha);
                if z > 0.0 {
                    (1.0 - normal_sf(z) / mass).clamp(0.0, 1.0)
                } else {
                    ((normal_cdf(z) - normal_cdf(alpha)) / mass).clamp(0.0, 1.0)
                }
            }
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
        }
    }

    /// Inverse CDF for `p` in `[0, 1]`; endpoints map to the support ends.
    pub fn inverse(&self, p: f64) -> f64 {
        let (lo, hi) = self.support();
        if p <= 0.0 {
            return lo;
        }
        if p >= 1.0 {
            return hi;
        }
        match *self {
            Self::Uniform { lo, hi } => lo + p * (hi - lo),
            Self::Normal { mean, var } => mean + var.sqrt() * normal_quantile(p),
            Self::TruncNormal { mean, var } => {
                let sd = var.sqrt();
                let alpha = -mean / sd;
                let mass = normal_sf(alpha);
                let below = normal_cdf(alpha) + p * mass;
                let z = if below > 0.5 {
                    normal_quantile_upper((1.0 - p) * mass)
                } else {
                    normal_quantile(below)
                };
                (mean + sd * z).max(0.0)
            }
            Self::Exponential { rate } => -(-p).ln_1p() / rate,
        }
    }
}

fn check_normal(mean: f64, var: f64) -> Result<()> {
    if !(mean.is_finite() && var.is_finite() && var > 0.0) {
        return Err(Error::Domain(format!(
            "normal needs finite mean and positive variance, got ({mean}, {var})"
        )));
    }
    Ok(())
}

impl ParentCdf for BaseCdf {
    fn cdf(&self, x: f64) -> f64 {
        BaseCdf::cdf(self, x)
    }

    fn support_lower(&self) -> f64 {
        self.support().0
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::Boundary(p));
        }
        Ok(self.inverse(p))
    }
}

impl fmt::Display for BaseCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Uniform { lo, hi } => write!(f, "uniform({}, {})", fmt_f64(lo), fmt_f64(hi)),
            Self::Normal { mean, var } => {
                write!(f, "normal({}, {})", fmt_f64(mean), fmt_f64(var))
            }
            Self::TruncNormal { mean, var } => {
                write!(f, "truncnormal({}, {})", fmt_f64(mean), fmt_f64(var))
            }
            Self::Exponential { rate } => write!(f, "exponential({})", fmt_f64(rate)),
        }
    }
}

impl FromStr for BaseCdf {
    type Err = Error;

    /// Parses `normal(mean, var)`, `truncnormal(mean, var)`,
    /// `exponential(rate)` or `uniform(lo, hi)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| Error::Parse(format!("base distribution '{s}' lacks parameters")))?;
        if !s.ends_with(')') {
            return Err(Error::Parse(format!("base distribution '{s}' is missing ')'")));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let args = s[open + 1..s.len() - 1]
            .split(',')
            .map(parse_f64)
            .collect::<Result<Vec<_>>>()?;
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("'{name}' takes {n} parameters, got {}", args.len())))
            }
        };
        match name.as_str() {
            "uniform" => want(2).and_then(|_| Self::uniform(args[0], args[1])),
            "normal" => want(2).and_then(|_| Self::normal(args[0], args[1])),
            "truncnormal" | "truncated_normal" => {
                want(2).and_then(|_| Self::trunc_normal(args[0], args[1]))
            }
            "exponential" => want(1).and_then(|_| Self::exponential(args[0])),
            other => Err(Error::Parse(format!("unknown base distribution '{other}'"))),
        }
    }
}

/// A member of the sieve: `F(x) = H_k(G(x); θ)`.
///
/// Evaluation runs in the orthonormal basis: with `p = ρ_0 + Σ δ_ℓ ρ_ℓ`
/// the normalizer is `1 + Σ δ_ℓ²`, and `∫₀^v p²` is a Legendre series in
/// `2v - 1`. The monomial route of [`h_cdf`] cancels badly once the
/// coefficients grow with `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveCdf {
    base: BaseCdf,
    theta: Vec<f64>,
    bound: f64,
    /// Coefficients of `p / √norm` on `L_ℓ(2v - 1)`.
    density_series: Vec<f64>,
    /// Coefficients of `H_k(v)` on `L_m(2v - 1)`, `m = 0..=2k+1`.
    cdf_series: Vec<f64>,
    /// `θ = 0`, where `H_k` is the identity and is returned exactly.
    identity: bool,
}

const RECURRENCE_LEN: usize = 128;

/// `((2m+1)/(m+1), m/(m+1))`, so `L_{m+1} = a x L_m - b L_{m-1}`.
const RECURRENCE: [(f64, f64); RECURRENCE_LEN] = {
    let mut table = [(0.0, 0.0); RECURRENCE_LEN];
    let mut m = 0;
    while m < RECURRENCE_LEN {
        let mf = m as f64;
        table[m] = ((2.0 * mf + 1.0) / (mf + 1.0), mf / (mf + 1.0));
        m += 1;
    }
    table
};

/// `Σ c_m L_m(x)` by the forward three-term recurrence.
fn legendre_series(coef: &[f64], x: f64) -> f64 {
    match coef.len() {
        0 => return 0.0,
        1 => return coef[0],
        _ => {}
    }
    let (mut l0, mut l1) = (1.0, x);
    let mut sum = coef[0] + coef[1] * x;
    for (m, c) in coef.iter().enumerate().skip(2) {
        let (a, b) = if m - 1 < RECURRENCE_LEN {
            RECURRENCE[m - 1]
        } else {
            let mf = (m - 1) as f64;
            ((2.0 * mf + 1.0) / (mf + 1.0), mf / (mf + 1.0))
        };
        let l2 = a * x * l1 - b * l0;
        sum += c * l2;
        l0 = l1;
        l1 = l2;
    }
    sum
}

impl SieveCdf {
    /// Builds a sieve CDF, rejecting `θ` outside `Θ_k`.
    pub fn new(base: BaseCdf, theta: Vec<f64>, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::Domain(format!("bound constant must be positive, got {bound}")));
        }
        if !theta_feasible(theta.len(), &theta, bound) {
            return Err(Error::InvalidCoefficients(format!(
                "coefficients outside the constraint set for c = {bound}"
            )));
        }
        Self::unchecked(base, theta, bound)
    }

    /// The base distribution itself (`k = 0`).
    pub fn base_only(base: BaseCdf) -> Self {
        Self::unchecked(base, Vec::new(), DEFAULT_BOUND).expect("constant density is valid")
    }

    /// Builds from Legendre coordinates.
    pub fn from_delta(base: BaseCdf, delta: &[f64], bound: f64) -> Result<Self> {
        Self::new(base, delta_to_theta(delta), bound)
    }

    fn unchecked(base: BaseCdf, theta: Vec<f64>, bound: f64) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite coefficient".into()));
        }
        let k = theta.len();
        let delta: Vec<f64> = std::iter::once(1.0).chain(theta_to_delta(&theta)).collect();
        let norm: f64 = delta.iter().map(|d| d * d).sum();
        if norm.is_nan() || norm < DENOMINATOR_GUARD {
            return Err(Error::InvalidCoefficients(format!(
                "normalizing constant {norm:e} below guard"
            )));
        }
        let scale = norm.sqrt();
        let density_series: Vec<f64> = delta
            .iter()
            .enumerate()
            .map(|(l, d)| d * ((2 * l + 1) as f64).sqrt() / scale)
            .collect();

        // Coefficients c_j of p²/norm on ρ_j, by a rule exact to degree 4k+1.
        let (nodes, weights) = crate::numeric::gauss_legendre(2 * k + 1);
        let mut square = vec![0.0; 2 * k + 1];
        square[0] = 1.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let p = legendre_series(&density_series, *x);
            let mut l = (1.0, *x);
            for (j, c) in square.iter_mut().enumerate().skip(1) {
                if j > 1 {
                    let jf = (j - 1) as f64;
                    l = (l.1, ((2.0 * jf + 1.0) * x * l.1 - jf * l.0) / (jf + 1.0));
                }
                *c += 0.5 * w * p * p * ((2 * j + 1) as f64).sqrt() * l.1;
            }
        }
        // ∫₀^v ρ_j = (L_{j+1} - L_{j-1}) / (2√(2j+1)) for j ≥ 1 and
        // (L_0 + L_1)/2 for j = 0.
        let mut cdf_series = vec![0.0; 2 * k + 2];
        cdf_series[0] += 0.5 * square[0];
        cdf_series[1] += 0.5 * square[0];
        for (j, c) in square.iter().enumerate().skip(1) {
            let t = c / (2.0 * ((2 * j + 1) as f64).sqrt());
            cdf_series[j + 1] += t;
            cdf_series[j - 1] -= t;
        }
        let identity = theta.iter().all(|t| *t == 0.0);
        Ok(Self {
            base,
            theta,
            bound,
            density_series,
            cdf_series,
            identity,
        })
    }

    pub fn base(&self) -> &BaseCdf {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn delta(&self) -> Vec<f64> {
        theta_to_delta(&self.theta)
    }

    /// `H_k(v; θ)` on `[0, 1]`.
    pub fn h(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        if self.identity {
            return v;
        }
        legendre_series(&self.cdf_series, 2.0 * v - 1.0).clamp(0.0, 1.0)
    }

    /// Density of `H_k`, `p(v)² / (1 + Σ δ_ℓ²)`.
    pub fn h_density(&self, v: f64) -> f64 {
        let p = legendre_series(&self.density_series, 2.0 * v - 1.0);
        p * p
    }

    /// `v` in `[0, 1]` with `H_k(v) = p`.
    pub fn h_inverse(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        if self.identity {
            return p;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut v = p;
        for _ in 0..100 {
            let f = self.h(v) - p;
            if f == 0.0 {
                return v;
            }
            if f < 0.0 {
                lo = v;
            } else {
                hi = v;
            }
            let d = self.h_density(v);
            let next = v - f / d;
            if d > 0.0 && next > lo && next < hi {
                let step = (next - v).abs();
                v = next;
                if step <= 4.0 * f64::EPSILON * v {
                    return v;
                }
            } else {
                v = 0.5 * (lo + hi);
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return v;
            }
        }
        v
    }

    /// Density `h(G(x)) g(x)`.
    pub fn pdf(&self, x: f64) -> f64 {
        let g = self.base.pdf(x);
        if g == 0.0 {
            return 0.0;
        }
        self.h_density(self.base.cdf(x)) * g
    }

    /// `F(x) = H_k(G(x))`.
    pub fn eval(&self, x: f64) -> f64 {
        self.h(self.base.cdf(x))
    }

    /// Quantile for `p` strictly inside `(0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Boundary(p));
        }
        Ok(self.quantile_unchecked(p))
    }

    /// Quantile without the boundary check; endpoints map to the support
    /// ends of the base.
    pub fn quantile_unchecked(&self, p: f64) -> f64 {
        self.base.inverse(self.h_inverse(p))
    }

    /// Plain-text `key = value` record; floats carry 17 significant digits
    /// so [`SieveCdf::from_record`] restores the value bit for bit.
    pub fn to_record(&self) -> String {
        let theta: Vec<String> = self.theta.iter().map(|t| fmt_f64(*t)).collect();
        format!(
            "base = {}\norder = {}\ntheta = {}\nbound = {}\n",
            self.base,
            self.order(),
            theta.join(", "),
            fmt_f64(self.bound)
        )
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let kv = crate::format::parse_key_values(text)?;
        let get = |key: &str| {
            kv.get(key)
                .map(String::as_str)
                .ok_or_else(|| Error::Parse(format!("missing key '{key}'")))
        };
        let base: BaseCdf = get("base")?.parse()?;
        let order: usize = get("order")?
            .parse()
            .map_err(|_| Error::Parse("order must be a nonnegative integer".into()))?;
        let theta = crate::format::parse_f64_list(get("theta")?)?;
        if theta.len() != order {
            return Err(Error::Parse(format!(
                "order {order} but {} coefficients",
                theta.len()
            )));
        }
        let bound = parse_f64(get("bound")?)?;
        Self::new(base, theta, bound)
    }
}

impl ParentCdf for SieveCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn support_lower(&self) -> f64 {
        self.base.support().0
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        SieveCdf::quantile(self, p)
    }
}
