//! Nelder–Mead simplex minimization.
//!
//! Uses the dimension-adaptive coefficients of Gao and Han (2012), which
//! keep the method from stalling in a dozen or more dimensions. Infeasible
//! points are expected to evaluate to `+inf`.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    /// Budget of objective evaluations.
    pub max_evals: usize,
    /// Converged once every vertex is within this sup-norm distance of the
    /// best vertex.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`; the initial simplex offsets coordinate `i` by
/// `steps[i]`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    settings: &NelderMeadSettings,
) -> NelderMeadOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert_eq!(steps.len(), dim);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if dim == 0 {
        let value = eval(x0, &mut evals);
        return NelderMeadOutcome {
            x: Vec::new(),
            value,
            evals,
            converged: true,
        };
    }

    let d = dim as f64;
    let (alpha, beta, gamma, shrink) = if dim >= 2 {
        (1.0, 1.0 + 2.0 / d, 0.75 - 0.5 / d, 1.0 - 1.0 / d)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
    // Retry infeasible initial vertices on the opposite side.
    for i in 0..dim {
        if values[i + 1].is_infinite() {
            let mut v = x0.to_vec();
            v[i] -= steps[i];
            let fv = eval(&v, &mut evals);
            if fv < values[i + 1] {
                simplex[i + 1] = v;
                values[i + 1] = fv;
            }
        }
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut converged = false;
    while evals < settings.max_evals {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < settings.tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &idx in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= d);

        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = along(alpha);
        let f_r = eval(&reflected, &mut evals);
        if f_r < values[best] {
            let expanded = along(alpha * beta);
            let f_e = eval(&expanded, &mut evals);
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
            continue;
        }
        if f_r < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_r;
            continue;
        }
        let (candidate, f_c) = if f_r < values[worst] {
            let outside = along(alpha * gamma);
            let f = eval(&outside, &mut evals);
            (outside, f)
        } else {
            let inside = along(-gamma);
            let f = eval(&inside, &mut evals);
            (inside, f)
        };
        if f_c < values[worst].min(f_r) {
            simplex[worst] = candidate;
            values[worst] = f_c;
            continue;
        }
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            let moved: Vec<f64> = anchor
                .iter()
                .zip(&simplex[idx])
                .map(|(b, x)| b + shrink * (x - b))
                .collect();
            values[idx] = eval(&moved, &mut evals);
            simplex[idx] = moved;
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .unwrap();
    NelderMeadOutcome {
        x: simplex[best].clone(),
        value: values[best],
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn minimizes_rosenbrock() {
        let s = NelderMeadSettings {
            max_evals: 20_000,
            tol: 1e-9,
        };
        let out = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], &s);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_ten_dimensions() {
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0) * (v - 0.1 * i as f64).powi(2))
                .sum::<f64>()
        };
        let s = NelderMeadSettings {
            max_evals: 50_000,
            tol: 1e-8,
        };
        let out = nelder_mead(f, &[1.0; 10], &[0.3; 10], &s);
        assert!(out.value < 1e-12, "{}", out.value);
    }

    #[test]
    fn respects_infeasible_region() {
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::INFINITY
            } else {
                x[0] * x[0] + x[1] * x[1]
            }
        };
        let s = NelderMeadSettings {
            max_evals: 5_000,
            tol: 1e-10,
        };
        let out = nelder_mead(f, &[2.0, 1.0], &[0.5, 0.5], &s);
        assert!(out.x[0] >= 0.5);
        assert!(out.value.is_finite() && out.value < 0.26, "{}", out.value);
    }

    #[test]
    fn budget_stops_without_convergence() {
        let s = NelderMeadSettings {
            max_evals: 30,
            tol: 1e-14,
        };
        let out = nelder_mead(rosenbrock, &[-1.2, 1.0, 0.3], &[0.5; 3], &s);
        assert!(!out.converged);
        assert!(out.evals <= 30 + 4);
    }
}
