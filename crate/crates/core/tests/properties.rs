//! Invariants under randomised inputs.

use std::f64::consts::PI;

use proptest::prelude::*;

use gfl_core::calculus::{gamma, Derivation, DerivationSpec};
use gfl_core::commutator::{commutator, Exponents};
use gfl_core::continuity::{fitted_order, solve_viscous_ce, CeConfig};
use gfl_core::flow::{integrate_flow, FlowConfig, Initial};
use gfl_core::scenarios::{load_config, ScenarioConfig};
use gfl_core::space::{lp_norm, GridSpec, Potential, ScalarField, Space};

fn space(torus: bool, n: usize, c: f64) -> Space<f64> {
    if torus {
        Potential::Cosine { a: c }.build_space(&GridSpec::torus_1d(2.0 * PI, n)).unwrap()
    } else {
        Potential::Quadratic { c: c.abs() + 0.1 }.build_space(&GridSpec::interval_1d(-3.0, 3.0, n)).unwrap()
    }
}

/// Trigonometric field with the given coefficients.
fn field(s: &Space<f64>, coeffs: &[f64]) -> ScalarField<f64> {
    s.field_fn(|x| coeffs.iter().enumerate().map(|(k, c)| c * ((k as f64 + 1.0) * x[0] + k as f64).sin()).sum())
}

fn setup() -> impl Strategy<Value = (bool, usize, f64, Vec<f64>, Vec<f64>)> {
    (
        any::<bool>(),
        16usize..64,
        -1.0f64..1.0,
        prop::collection::vec(-1.0f64..1.0, 4),
        prop::collection::vec(-1.0f64..1.0, 4),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gamma_is_symmetric_bilinear_and_nonnegative((torus, n, c, a, b) in setup(), lam in -2.0f64..2.0) {
        let s = space(torus, n, c);
        let (f, g) = (field(&s, &a), field(&s, &b));
        let fg = gamma(&s, &f, &g).unwrap();
        let gf = gamma(&s, &g, &f).unwrap();
        prop_assert_eq!(fg.values(), gf.values());
        let lin = gamma(&s, &f.add(&g.scale(lam)), &g).unwrap();
        let gg = gamma(&s, &g, &g).unwrap();
        for i in 0..n {
            prop_assert!((lin.values()[i] - fg.values()[i] - lam * gg.values()[i]).abs() <= 1e-9 * (1.0 + gg.values()[i].abs()));
        }
        prop_assert!(gamma(&s, &f, &f).unwrap().min() >= 0.0);
    }

    #[test]
    fn semigroup_is_markov_and_self_adjoint((torus, n, c, a, b) in setup(), t in 0.001f64..2.0) {
        let s = space(torus, n, c);
        let (f, g) = (field(&s, &a), field(&s, &b));
        let pf = s.apply_semigroup(&f, t).unwrap();
        let pg = s.apply_semigroup(&g, t).unwrap();
        let scale = lp_norm(&s, &f, 1.0).unwrap() + 1e-300;
        prop_assert!((s.integrate(&pf) - s.integrate(&f)).abs() <= 1e-10 * scale);
        prop_assert!((s.inner(&pf, &g) - s.inner(&f, &pg)).abs() <= 1e-10 * (1.0 + lp_norm(&s, &f, 2.0).unwrap() * lp_norm(&s, &g, 2.0).unwrap()));
        let positive = f.map(|v| v.abs() + 0.01);
        prop_assert!(s.apply_semigroup(&positive, t).unwrap().min() > 0.0);
        prop_assert!(pf.max_abs() <= f.max_abs() * (1.0 + 1e-10));
    }

    #[test]
    fn derivations_kill_constants_and_commutator_is_linear((torus, n, c, a, b) in setup(), amp in 0.1f64..2.0, alpha in 0.01f64..0.5) {
        let s = space(torus, n, c);
        let bf = Derivation::from_fn(&s, |x| vec![amp * x[0].sin() + 0.3]).unwrap();
        prop_assert!(bf.apply(&s, &s.constant(1.7), 0.0).unwrap().max_abs() < 1e-12);
        let (u, w) = (field(&s, &a), field(&s, &b));
        let cu = commutator(&s, &bf, &u, alpha).unwrap();
        let cw = commutator(&s, &bf, &w, alpha).unwrap();
        let sum = commutator(&s, &bf, &u.add(&w.scale(2.0)), alpha).unwrap();
        let expect = cu.add(&cw.scale(2.0));
        let scale = 1.0 + expect.max_abs();
        prop_assert!(sum.sub(&expect).max_abs() <= 1e-10 * scale);
    }

    #[test]
    fn continuity_conserves_mass_and_guard_keeps_positivity((torus, n, c, a, _b) in setup(), amp in 0.0f64..1.5, sigma in 0.0f64..0.05) {
        let s = space(torus, n, c);
        let b = Derivation::from_fn(&s, |x| vec![amp * (x[0] + 0.4).sin()]).unwrap();
        let u0 = field(&s, &a).map(|v| v.abs() + 0.05);
        let dt = 0.2 * s.min_spacing() / (amp + 0.1);
        for cfg in [CeConfig::new(sigma, 0.5, dt), CeConfig::new(sigma, 0.5, dt).monotone()] {
            let guarded = cfg.positivity_guard;
            let sol = solve_viscous_ce(&s, &b, &u0, &cfg).unwrap();
            prop_assert!(sol.mass_drift() <= 1e-12);
            if guarded {
                prop_assert!(sol.fields.iter().all(|f| f.min() >= 0.0));
            }
        }
    }

    #[test]
    fn flows_are_seed_deterministic_and_stay_in_the_domain(torus in any::<bool>(), seed in any::<u64>(), amp in 0.1f64..2.0) {
        let s = space(torus, 32, 0.2);
        let b = Derivation::from_fn(&s, |x| vec![amp * x[0].cos()]).unwrap();
        let density = s.constant(1.0);
        let cfg = FlowConfig::new(0.3, 0.01).sample_every(10).seed(seed);
        let one = integrate_flow(&s, &b, Initial::Density(&density, 50), &cfg).unwrap();
        let two = integrate_flow(&s, &b, Initial::Density(&density, 50), &cfg).unwrap();
        prop_assert_eq!(&one.samples, &two.samples);
        let ax = &s.axes()[0];
        let (lo, hi) = (ax.start, ax.start + ax.length);
        prop_assert!(one.samples.iter().all(|x| *x >= lo && *x <= hi));
    }

    #[test]
    fn fitted_order_recovers_power_laws(p in 0.2f64..3.0, c in 0.01f64..100.0) {
        let h = [0.1f64, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|x| c * x.powf(p)).collect();
        prop_assert!((fitted_order(&h, &e).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn hoelder_triples_are_accepted(q in 1.01f64..20.0, split in 0.05f64..0.95) {
        let rest = 1.0 - 1.0 / q;
        let (r, s) = (1.0 / (rest * split), 1.0 / (rest * (1.0 - split)));
        let e = Exponents::new(q, r, s).unwrap();
        prop_assert!((1.0 / e.s_conjugate() + 1.0 / s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn configs_round_trip_with_stable_hash(n in 8usize..400, seed in any::<u64>(), amp in -2.0f64..2.0, t_end in 0.1f64..3.0) {
        let text = format!(
            "name = \"p\"\nseed = {seed}\n[space]\nnodes = {n}\n[field]\nfamily = \"sine\"\namplitude = {amp:?}\n[time]\nt_end = {t_end:?}\n"
        );
        let cfg = load_config(&text).unwrap();
        prop_assert_eq!(cfg.space.nodes, n);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = load_config(&json).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
        let steps = cfg.time.t_end / cfg.dt();
        prop_assert!((steps - steps.round()).abs() < 1e-9);
    }
}

#[test]
fn single_precision_tracks_double_precision() {
    let n = 64;
    let s64: Space<f64> = Potential::Flat.build_space(&GridSpec::torus_1d(2.0 * PI, n)).unwrap();
    let s32: Space<f32> = Potential::Flat.build_space(&GridSpec::torus_1d(2.0 * PI, n)).unwrap();
    let f64_field = s64.field_fn(|x| (x[0].cos()).exp());
    let f32_field = s32.field_fn(|x| (x[0].cos()).exp());
    let p64 = s64.apply_semigroup(&f64_field, 0.3).unwrap();
    let p32 = s32.apply_semigroup(&f32_field, 0.3).unwrap();
    let err = p64.values().iter().zip(p32.values()).map(|(a, b)| (a - *b as f64).abs()).fold(0.0, f64::max);
    // Round-off of the f32 spectral transform: a few hundred ulps of ‖f‖_∞.
    assert!(err < 1e3 * f32::EPSILON as f64 * f64_field.max_abs(), "{err}");
    let b32 = DerivationSpec::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.2 }.build(&s32).unwrap();
    let g32: gfl_core::f32::ScalarField = gamma(&s32, &f32_field, &f32_field).unwrap();
    assert!(g32.min() >= 0.0);
    assert!(b32.apply(&s32, &s32.constant(1.0), 0.0).unwrap().max_abs() < 1e-6);
}
