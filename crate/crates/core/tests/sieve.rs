mod common;

use ordsieve_core::sieve::*;
use proptest::prelude::*;

fn normal_base() -> BaseCdf {
    BaseCdf::normal(0.0, 0.25).unwrap()
}

/// `H_k(v)` by integrating the squared polynomial numerically.
fn h_by_quadrature(theta: &[f64], v: f64) -> f64 {
    let a = monomial_coefficients(theta);
    let p = |u: f64| a.iter().rev().fold(0.0, |acc, c| acc * u + c);
    let square = |lo: f64, hi: f64| -> f64 {
        common::gauss_rule(40, lo, hi)
            .iter()
            .map(|(u, w)| w * p(*u).powi(2))
            .sum()
    };
    square(0.0, v) / square(0.0, 1.0)
}

#[test]
fn shifted_legendre_basis_is_orthonormal() {
    let rule = common::gauss_rule(20, 0.0, 1.0);
    for j in 0..=8 {
        for l in 0..=8 {
            let ip: f64 = rule
                .iter()
                .map(|(u, w)| w * legendre_rho(j, *u) * legendre_rho(l, *u))
                .sum();
            let expected = if j == l { 1.0 } else { 0.0 };
            assert!((ip - expected).abs() < 1e-10, "({j}, {l}): {ip}");
            let independent = common::shifted_legendre(l, 0.37);
            assert!((legendre_rho(l, 0.37) - independent).abs() < 1e-12);
        }
    }
}

#[test]
fn moments_match_quadrature() {
    let rule = common::gauss_rule(30, 0.0, 1.0);
    for l in 1..=8 {
        for m in 0..=8 {
            let q: f64 = rule
                .iter()
                .map(|(u, w)| w * u.powi((l + m) as i32) * common::shifted_legendre(l, *u))
                .sum();
            assert!((mu_moment(l, m) - q).abs() < 1e-13, "l={l} m={m}");
        }
    }
}

#[test]
fn delta_coordinates_are_legendre_coefficients() {
    let theta = delta_to_theta(&[0.2, -0.1, 0.05, 0.03]);
    let a = monomial_coefficients(&theta);
    let p = |u: f64| a.iter().rev().fold(0.0, |acc, c| acc * u + c);
    let rule = common::gauss_rule(20, 0.0, 1.0);
    let delta = theta_to_delta(&theta);
    for (l, d) in delta.iter().enumerate() {
        let coef: f64 = rule
            .iter()
            .map(|(u, w)| w * p(*u) * common::shifted_legendre(l + 1, *u))
            .sum();
        assert!((coef - d).abs() < 1e-12);
    }
    let c0: f64 = rule.iter().map(|(u, w)| w * p(*u)).sum();
    assert!((c0 - 1.0).abs() < 1e-13);
}

#[test]
fn h_matches_integrated_square() {
    let theta = delta_to_theta(&[0.3, 0.2, -0.1, 0.05]);
    let f = SieveCdf::new(normal_base(), theta.clone(), DEFAULT_BOUND).unwrap();
    for i in 0..=20 {
        let v = i as f64 / 20.0;
        let oracle = h_by_quadrature(&theta, v);
        assert!((f.h(v) - oracle).abs() < 1e-13, "v={v}");
        assert!((h_cdf(4, &theta, v).unwrap() - oracle).abs() < 1e-13);
    }
}

#[test]
fn cdf_integrates_its_density() {
    let f = SieveCdf::from_delta(normal_base(), &[0.3, 0.2, -0.1, 0.05], DEFAULT_BOUND).unwrap();
    let lo = -4.0;
    for x in [-1.0, -0.5, 0.0, 0.2, 0.7, 1.5] {
        let integral: f64 = common::gauss_rule(200, lo, x)
            .iter()
            .map(|(t, w)| w * f.pdf(*t))
            .sum();
        assert!((integral + f.eval(lo) - f.eval(x)).abs() < 1e-8, "x={x}");
    }
}

#[test]
fn zero_coefficients_reproduce_the_base() {
    let bases = [
        normal_base(),
        BaseCdf::trunc_normal(2.0, 1.0).unwrap(),
        BaseCdf::exponential(1.5).unwrap(),
        BaseCdf::uniform(-1.0, 3.0).unwrap(),
    ];
    for base in bases {
        for k in [0, 1, 4, 6] {
            let f = SieveCdf::new(base, vec![0.0; k], DEFAULT_BOUND).unwrap();
            for i in 0..200 {
                let x = -2.0 + 0.03 * i as f64;
                assert_eq!(f.eval(x), base.cdf(x), "{base} k={k} x={x}");
            }
        }
    }
}

#[test]
fn symmetric_perturbation_keeps_the_median() {
    // Even-order Legendre terms are symmetric about u = 1/2.
    let f = SieveCdf::from_delta(normal_base(), &[0.0, 0.3, 0.0, -0.1], DEFAULT_BOUND).unwrap();
    assert!((f.eval(0.0) - 0.5).abs() < 1e-15);
    assert!(f.quantile(0.5).unwrap().abs() < 1e-12);
}

#[test]
fn saturated_box_corner_is_a_valid_cdf() {
    let delta: Vec<f64> = (1..=6)
        .map(|l| coordinate_bound(l, DEFAULT_BOUND) * if l % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let f = SieveCdf::from_delta(normal_base(), &delta, DEFAULT_BOUND).unwrap();
    assert_eq!(f.h(0.0), 0.0);
    assert_eq!(f.h(1.0), 1.0);
    let grid: Vec<f64> = (0..=1000).map(|i| f.h(i as f64 / 1000.0)).collect();
    assert!(grid.windows(2).all(|w| w[1] >= w[0]));
}

fn feasible_delta(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, k).prop_map(|unit| {
        unit.iter()
            .enumerate()
            .map(|(i, u)| u * coordinate_bound(i + 1, DEFAULT_BOUND))
            .collect()
    })
}

proptest! {
    #[test]
    fn feasible_members_are_valid_cdfs(delta in (1usize..=8).prop_flat_map(feasible_delta)) {
        let k = delta.len();
        let theta = delta_to_theta(&delta);
        prop_assert!(theta_feasible(k, &theta, DEFAULT_BOUND));
        prop_assert_eq!(h_cdf(k, &theta, 0.0).unwrap(), 0.0);
        prop_assert!((h_cdf(k, &theta, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let f = SieveCdf::new(normal_base(), theta, DEFAULT_BOUND).unwrap();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = i as f64 / 1000.0;
            let h = f.h(v);
            prop_assert!(h >= prev && h <= 1.0);
            prop_assert!(f.h_density(v) >= 0.0);
            prev = h;
        }
    }

    #[test]
    fn quantile_round_trip(delta in (1usize..=6).prop_flat_map(feasible_delta), p in 0.001f64..0.999) {
        let bases = [normal_base(), BaseCdf::trunc_normal(2.0, 1.0).unwrap(), BaseCdf::exponential(1.0).unwrap()];
        for base in bases {
            let f = SieveCdf::from_delta(base, &delta, DEFAULT_BOUND).unwrap();
            let x = f.quantile(p).unwrap();
            prop_assert!((f.eval(x) - p).abs() < 1e-10, "{} p={} F(x)={}", base, p, f.eval(x));
        }
    }

    #[test]
    fn delta_theta_round_trip(delta in (1usize..=8).prop_flat_map(feasible_delta)) {
        let back = theta_to_delta(&delta_to_theta(&delta));
        for (a, b) in back.iter().zip(&delta) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn record_round_trip(delta in (1usize..=6).prop_flat_map(feasible_delta)) {
        let f = SieveCdf::from_delta(normal_base(), &delta, DEFAULT_BOUND).unwrap();
        let back = SieveCdf::from_record(&f.to_record()).unwrap();
        prop_assert_eq!(back, f);
    }
}

#[test]
fn out_of_box_coefficients_are_rejected() {
    let mut delta = vec![0.0; 4];
    delta[2] = 1.01 * coordinate_bound(3, DEFAULT_BOUND);
    assert!(SieveCdf::from_delta(normal_base(), &delta, DEFAULT_BOUND).is_err());
    assert!(!theta_feasible(4, &delta_to_theta(&delta), DEFAULT_BOUND));
    assert!(matches!(
        SieveCdf::base_only(normal_base()).quantile(1.0),
        Err(ordsieve_core::Error::Boundary(_))
    ));
}
