//! Small numerical kernels shared by the distribution code: factorials,
//! binomial tail sums, the standard normal, Gauss–Legendre rules and a
//! safeguarded scalar root finder.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};

/// `ln(n!)` by direct summation; exact enough for the small counts used here.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// One binomial probability mass `C(n, l) p^l (1-p)^(n-l)` with `0^0 = 1`.
fn binomial_term(n: usize, l: usize, p: f64) -> f64 {
    let coef = ln_binomial(n, l).exp();
    coef * p.powi(l as i32) * (1.0 - p).powi((n - l) as i32)
}

/// `P(Bin(n, p) >= j)` summed directly. Every term is nonnegative, so the
/// result carries full relative precision even when it is tiny.
pub fn binomial_upper(n: usize, j: usize, p: f64) -> f64 {
    (j..=n).map(|l| binomial_term(n, l, p)).sum()
}

/// `P(Bin(n, p) < j)` summed directly.
pub fn binomial_lower(n: usize, j: usize, p: f64) -> f64 {
    (0..j.min(n + 1)).map(|l| binomial_term(n, l, p)).sum()
}

/// `P(Bin(n, p) >= j)`, switching to the complement of the lower tail when
/// the upper tail exceeds one half so values near 1 are correctly rounded.
pub fn binomial_upper_accurate(n: usize, j: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if j <= n { 1.0 } else { 0.0 };
    }
    let upper = binomial_upper(n, j, p);
    if upper <= 0.5 {
        upper
    } else {
        (1.0 - binomial_lower(n, j, p)).clamp(0.0, 1.0)
    }
}

/// Density of Beta(j, n-j+1) at p, the derivative of `p -> P(Bin(n,p) >= j)`.
pub fn beta_order_density(n: usize, j: usize, p: f64) -> f64 {
    let coef = (ln_factorial(n) - ln_factorial(j - 1) - ln_factorial(n - j)).exp();
    coef * p.powi(j as i32 - 1) * (1.0 - p).powi((n - j) as i32)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail `1 - Φ(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile with one Newton polish step.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let z = -SQRT_2 * erfc_inv(2.0 * p);
    polish_normal(z, p, false)
}

/// `z` with `1 - Φ(z) = q`.
pub fn normal_quantile_upper(q: f64) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    if q >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let z = SQRT_2 * erfc_inv(2.0 * q);
    polish_normal(z, q, true)
}

fn polish_normal(z: f64, target: f64, upper: bool) -> f64 {
    let dens = normal_pdf(z);
    if !z.is_finite() || dens < 1e-300 {
        return z;
    }
    if upper {
        z + (normal_sf(z) - target) / dens
    } else {
        z - (normal_cdf(z) - target) / dens
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(count >= 1);
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let m = count.div_ceil(2);
    let nf = count as f64;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` for the standard Legendre polynomial on `[-1, 1]`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.signum().powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Root of a nondecreasing function on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
///
/// Newton steps from `fdf` are taken while they stay inside the current
/// bracket; otherwise the bracket is bisected. Stops when the bracket is
/// narrower than `xtol` or the residual vanishes.
pub fn monotone_root<F>(mut lo: f64, mut hi: f64, xtol: f64, mut fdf: F) -> f64
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= xtol {
            return 0.5 * (lo + hi);
        }
        let newton = if dfx > 0.0 && dfx.is_finite() {
            x - fx / dfx
        } else {
            f64::NAN
        };
        if newton > lo && newton < hi {
            let step = (newton - x).abs();
            x = newton;
            if step <= 0.25 * xtol {
                return x;
            }
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    x
}
