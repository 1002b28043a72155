//! Finite-sample distribution theory for order statistics of an i.i.d.
//! sample: marginal, joint and conditional CDFs, the conditional limit as the
//! conditioning threshold shrinks to zero, and recovery of the parent CDF
//! from the CDF of a single order statistic.

use crate::error::{Error, Result};
use crate::numeric::{
    beta_order_density, binomial_lower, binomial_upper, binomial_upper_accurate, ln_factorial,
    monotone_root,
};

/// Which two order statistics `(r, s)` out of `n` draws are observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrderStatDesign {
    n: usize,
    r: usize,
    s: usize,
}

impl OrderStatDesign {
    pub fn new(n: usize, r: usize, s: usize) -> Result<Self> {
        if n < 2 || r < 1 || r >= s || s > n {
            return Err(Error::Domain(format!(
                "order-statistic design requires 1 <= r < s <= n and n >= 2, got n={n}, r={r}, s={s}"
            )));
        }
        Ok(Self { n, r, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }
}

/// A continuous parent distribution.
pub trait ParentCdf: Send + Sync {
    fn cdf(&self, x: f64) -> f64;

    /// Lower end of the support; `-inf` when unbounded.
    fn support_lower(&self) -> f64;

    fn quantile(&self, _p: f64) -> Result<f64> {
        Err(Error::Unsupported("quantile"))
    }
}

impl<T: ParentCdf + ?Sized> ParentCdf for &T {
    fn cdf(&self, x: f64) -> f64 {
        (**self).cdf(x)
    }

    fn support_lower(&self) -> f64 {
        (**self).support_lower()
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        (**self).quantile(p)
    }
}

fn check_rank(n: usize, j: usize) -> Result<()> {
    if j < 1 || j > n {
        return Err(Error::Domain(format!("rank {j} outside [1, {n}]")));
    }
    Ok(())
}

/// `P(η_(j) <= p-quantile)` as a function of the parent probability `p`:
/// the binomial upper tail `Σ_{l>=j} C(n,l) p^l (1-p)^(n-l)`.
pub fn orderstat_cdf_at_prob(n: usize, j: usize, p: f64) -> Result<f64> {
    check_rank(n, j)?;
    Ok(binomial_upper_accurate(n, j, p.clamp(0.0, 1.0)))
}

/// `P(η_(j) <= x)` for `η_1..η_n` i.i.d. with CDF `f`.
pub fn orderstat_cdf<F: ParentCdf + ?Sized>(f: &F, n: usize, j: usize, x: f64) -> Result<f64> {
    orderstat_cdf_at_prob(n, j, f.cdf(x))
}

/// `P(η_(r) <= x_r, η_(s) <= x_s)`.
///
/// For `x_r > x_s` the event equals `{η_(r) <= x_s, η_(s) <= x_s}`, so the
/// first argument is clipped to `x_s`.
pub fn orderstat_joint_cdf<F: ParentCdf + ?Sized>(
    f: &F,
    d: &OrderStatDesign,
    x_r: f64,
    x_s: f64,
) -> f64 {
    let a = f.cdf(x_r.min(x_s)).clamp(0.0, 1.0);
    let b = f.cdf(x_s).clamp(0.0, 1.0).max(a);
    joint_cdf_at_probs(d, a, b)
}

/// Joint CDF in terms of the parent probabilities `a = F(x_r) <= b = F(x_s)`:
/// `Σ_{k=s}^n Σ_{j=r}^k n!/(j!(k-j)!(n-k)!) a^j (b-a)^(k-j) (1-b)^(n-k)`.
pub fn joint_cdf_at_probs(d: &OrderStatDesign, a: f64, b: f64) -> f64 {
    let n = d.n;
    if a <= 0.0 {
        return 0.0;
    }
    let ln_n = ln_factorial(n);
    let mid = b - a;
    let mut total = 0.0;
    for k in d.s..=n {
        let tail = (1.0 - b).powi((n - k) as i32);
        if tail == 0.0 {
            continue;
        }
        for j in d.r..=k {
            let ln_coef = ln_n - ln_factorial(j) - ln_factorial(k - j) - ln_factorial(n - k);
            total += ln_coef.exp() * a.powi(j as i32) * mid.powi((k - j) as i32) * tail;
        }
    }
    total.clamp(0.0, 1.0)
}

/// `P(η_(s) <= x_s | η_(r) <= x_r)`.
///
/// Returns [`Error::NullEvent`] when `P(η_(r) <= x_r) = 0`; the limit as the
/// threshold shrinks to the support boundary is
/// [`conditional_limit_cdf`].
pub fn conditional_cdf_given_r<F: ParentCdf + ?Sized>(
    f: &F,
    d: &OrderStatDesign,
    x_s: f64,
    x_r: f64,
) -> Result<f64> {
    let denom = orderstat_cdf(f, d.n, d.r, x_r)?;
    if denom <= 0.0 {
        return Err(Error::NullEvent);
    }
    Ok((orderstat_joint_cdf(f, d, x_r, x_s) / denom).clamp(0.0, 1.0))
}

/// Limit of [`conditional_cdf_given_r`] as `x_r` decreases to 0 for a parent
/// supported on `[0, ∞)`: the CDF of the `(s-r)`-th order statistic of
/// `n-r` draws.
pub fn conditional_limit_cdf<F: ParentCdf + ?Sized>(
    f: &F,
    d: &OrderStatDesign,
    c: f64,
) -> Result<f64> {
    if f.support_lower() != 0.0 {
        return Err(Error::Domain(format!(
            "conditional limit needs a parent supported on [0, inf), lower bound is {}",
            f.support_lower()
        )));
    }
    if c <= 0.0 {
        return Ok(0.0);
    }
    orderstat_cdf(f, d.n - d.r, d.s - d.r, c)
}

/// Parent probability `p` with `I_p(j, n-j+1) = y`, i.e. `F(x)` recovered
/// from `F_(j)(x) = y`.
///
/// Above one half the complementary tail is matched instead, which keeps the
/// solve well conditioned in relative terms. Absolute tolerance on `p` is
/// `1e-12` or better.
pub fn parent_from_orderstat(y: f64, n: usize, j: usize) -> Result<f64> {
    check_rank(n, j)?;
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("probability {y} outside [0, 1]")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(1.0);
    }
    let xtol = 1e-15;
    let p = if y <= 0.5 {
        monotone_root(0.0, 1.0, xtol, |p| {
            (binomial_upper(n, j, p) - y, beta_order_density(n, j, p))
        })
    } else {
        let q = 1.0 - y;
        monotone_root(0.0, 1.0, xtol, |p| {
            (q - binomial_lower(n, j, p), beta_order_density(n, j, p))
        })
    };
    Ok(p.clamp(0.0, 1.0))
}

/// `(F⁻¹(u)_(r), F⁻¹(u)_(s))`: order the uniforms, then map the `r`-th and
/// `s`-th through the quantile (valid because the quantile is monotone).
pub fn sample_orderstats<F: ParentCdf + ?Sized>(
    f: &F,
    d: &OrderStatDesign,
    u: &[f64],
) -> Result<(f64, f64)> {
    if u.len() != d.n {
        return Err(Error::Config(format!(
            "expected {} uniforms, got {}",
            d.n,
            u.len()
        )));
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((f.quantile(sorted[d.r - 1])?, f.quantile(sorted[d.s - 1])?))
}
