//! Independent references: closed forms, special functions and dense linear algebra.

use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;

use gfl_core::calculus::{hessian, Derivation};
use gfl_core::continuity::fitted_order;
use gfl_core::curvature::i_k;
use gfl_core::flow::sample_initial;
use gfl_core::scenarios::mehler_reference;
use gfl_core::space::{build_space, GridSpec, Potential, Space};

fn ou(n: usize) -> Space<f64> {
    Potential::Quadratic { c: 1.0 }.build_space(&GridSpec::interval_1d(-6.0, 6.0, n)).unwrap()
}

#[test]
fn ou_cell_masses_match_gaussian_integrals() {
    let s = ou(256);
    let h = s.max_spacing();
    let sqrt2 = 2f64.sqrt();
    for (i, m) in s.measure().iter().enumerate() {
        let x = s.coords(i)[0];
        // ∫ e^{−y²/2} over the cell, via erf.
        let exact = (PI / 2.0).sqrt() * (erf((x + h / 2.0) / sqrt2) - erf((x - h / 2.0) / sqrt2));
        let rel = (m / exact - 1.0).abs();
        assert!(rel <= h * h * (1.0 + x * x) / 20.0, "cell {i} at {x}: {rel:e}");
    }
    let total = (2.0 * PI).sqrt() * erf(6.0 / sqrt2);
    assert!((s.total_mass() / total - 1.0).abs() < 1e-10);
}

#[test]
fn sampling_the_ou_measure_follows_the_gaussian_cdf() {
    let s = ou(512);
    let n = 20_000;
    let mut xs: Vec<f64> = sample_initial(&s, &s.constant(1.0), n, 5).unwrap().into_iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    // 1% Kolmogorov–Smirnov critical value.
    assert!(ks <= 1.63 / (n as f64).sqrt(), "KS distance {ks}");
}

#[test]
fn flat_torus_cosines_decay_with_the_discrete_symbol() {
    let n = 128;
    let s: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, n), &vec![0.0; n]).unwrap();
    let h = s.max_spacing();
    for k in [1.0, 3.0, 17.0] {
        let f = s.field_fn(|x| (k * x[0]).cos());
        let lambda = 4.0 / (h * h) * (k * h / 2.0).sin().powi(2);
        for t in [0.01, 0.3] {
            let p = s.apply_semigroup(&f, t).unwrap();
            let err = p.values().iter().zip(f.values()).map(|(a, b)| (a - (-lambda * t).exp() * b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "k = {k}, t = {t}: {err:e}");
        }
    }
}

#[test]
fn mehler_sine_closed_form() {
    // P_t sin(x) = exp(−(1 − e^{−2t})/2) sin(e^{−t} x).
    let s = ou(512);
    for t in [0.1, 0.25, 1.0] {
        let m = mehler_reference(&s, f64::sin, t, 40).unwrap();
        let p = s.apply_semigroup(&s.field_fn(|x| x[0].sin()), t).unwrap();
        for i in 0..s.len() {
            let x = s.coords(i)[0];
            let exact = (-(1.0 - (-2.0 * t).exp()) / 2.0).exp() * ((-t).exp() * x).sin();
            assert!((m.values()[i] - exact).abs() < 1e-12, "quadrature at {x}");
            if x.abs() <= 3.0 {
                assert!((p.values()[i] - exact).abs() < 5e-3, "semigroup at {x}");
            }
        }
    }
}

#[test]
fn ou_hessian_of_the_potential_converges_to_the_identity_form() {
    // Hess V = 1 for V = x²/2, so H[V](f, g) → f′g′.
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for n in [128, 256, 512] {
        let s = ou(n);
        let v = s.field_fn(|x| 0.5 * x[0] * x[0]);
        let f = s.field_fn(|x| x[0].sin());
        let g = s.field_fn(|x| (0.5 * x[0]).cos() + 0.2 * x[0]);
        let hv = hessian(&s, &v, &f, &g).unwrap();
        let err = (0..n)
            .filter(|&i| s.coords(i)[0].abs() <= 3.0)
            .map(|i| {
                let x = s.coords(i)[0];
                (hv.values()[i] - x.cos() * (-0.5 * (0.5 * x).sin() + 0.2)).abs()
            })
            .fold(0.0, f64::max);
        hs.push(s.max_spacing());
        errs.push(err);
    }
    let order = fitted_order(&hs, &errs).unwrap();
    assert!(errs[2] < 1e-2 && order >= 1.8, "errors {errs:?}, order {order}");
}

#[test]
fn gradient_derivation_matches_analytic_derivative() {
    let n = 512;
    let s: Space<f64> = build_space(&GridSpec::torus_1d(2.0 * PI, n), &vec![0.0; n]).unwrap();
    let v = s.field_fn(|x| x[0].cos());
    let b = Derivation::gradient(&s, &v).unwrap();
    let f = s.field_fn(|x| (2.0 * x[0]).sin());
    let act = b.apply(&s, &f, 0.0).unwrap();
    let err = (0..n)
        .map(|i| {
            let x = s.coords(i)[0];
            (act.values()[i] - (-x.sin()) * 2.0 * (2.0 * x).cos()).abs()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn i_k_closed_forms() {
    assert_eq!(i_k(0.0, 0.7), 0.7);
    assert!((i_k(2.0, 0.5) - (1f64.exp() - 1.0) / 2.0).abs() < 1e-15);
    assert!((i_k(1e-9, 1.0) - 1.0).abs() < 1e-8);
}
