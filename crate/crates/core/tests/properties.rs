use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use sde_trbdf2::integrals::{pair_moment, IntegralLayout, SegmentSampler};
use sde_trbdf2::linalg::Matrix;
use sde_trbdf2::model::{exact_solution_linear, exact_solution_test1, test1, LinearSde};
use sde_trbdf2::multiindex::{check_hierarchical, hierarchical_set, order_two_set, remainder_set};
use sde_trbdf2::schemes::{integrate_path, SchemeConfig};
use sde_trbdf2::stability::{amplification, h_star, ms_gain, ms_polynomial, MsScheme};
use sde_trbdf2::{MultiIndex, RngStream, Scheme};

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

fn word(max_letter: u8) -> impl Strategy<Value = MultiIndex> {
    prop::collection::vec(0..=max_letter, 0..6).prop_map(|v| MultiIndex::new(&v))
}

/// `(λ, σ)` with `2 Re λ + |σ|² < 0`.
fn stable_pair() -> impl Strategy<Value = (Complex64, Complex64)> {
    (0.05f64..60.0, -30.0f64..30.0, 0.0f64..0.95, 0.0f64..std::f64::consts::TAU).prop_map(|(a, b, frac, phase)| {
        let lambda = Complex64::new(-a, b);
        let sigma = Complex64::from_polar((2.0 * a * frac).sqrt(), phase);
        (lambda, sigma)
    })
}

fn scheme() -> impl Strategy<Value = MsScheme> {
    prop_oneof![Just(MsScheme::TRBDF2), Just(MsScheme::It2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hierarchical_sets_are_closed(m in 1usize..=3, twice_p in 1usize..=4) {
        let set = hierarchical_set(twice_p as f64 / 2.0, m).unwrap();
        prop_assert!(check_hierarchical(&set, m).is_ok());
        for alpha in set.iter().filter(|a| !a.is_empty()) {
            prop_assert!(set.contains(&alpha.drop_first()), "{}", alpha);
        }
        let rem = remainder_set(&set, m).unwrap();
        for beta in &rem {
            prop_assert!(!set.contains(beta));
            prop_assert!(set.contains(&beta.drop_first()));
        }
    }

    #[test]
    fn word_text_round_trip_and_order(a in word(3), b in word(3)) {
        prop_assert_eq!(a.to_string().parse::<MultiIndex>().unwrap(), a.clone());
        prop_assert_eq!(a.cmp(&b), a.letters().cmp(b.letters()));
    }

    #[test]
    fn self_moment_scales_with_weight(delta in 0.01f64..2.0, pick in 0usize..12) {
        let alpha = order_two_set(1).into_iter().nth(pick).unwrap();
        prop_assume!(!alpha.is_empty());
        let w = (alpha.len() + alpha.zeros()) as i32;
        let ratio = pair_moment(&alpha, &alpha, 2.0 * delta) / pair_moment(&alpha, &alpha, delta);
        prop_assert!((ratio - 2f64.powi(w)).abs() < 1e-12 * 2f64.powi(w));
    }

    #[test]
    fn sampler_draws_repeat_for_same_stream(seed in any::<u64>(), delta in 0.01f64..1.0) {
        let layout = Arc::new(IntegralLayout::full(1).unwrap());
        let mut a = SegmentSampler::new(layout.clone(), delta, 6).unwrap();
        let mut b = SegmentSampler::new(layout, delta, 6).unwrap();
        let x = a.sample(&mut RngStream::from_parts(seed, 1, 2, 3));
        let y = b.sample(&mut RngStream::from_parts(seed, 1, 2, 3));
        for ((_, u), (_, v)) in x.entries().zip(y.entries()) {
            prop_assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn noise_free_gain_is_squared_amplification(re in -100.0f64..-0.01, im in -50.0f64..50.0, h in 1e-3f64..2.0) {
        let lambda = Complex64::new(re, im);
        let g = amplification(lambda * h, GAMMA).unwrap().norm_sqr();
        let d = ms_gain(MsScheme::TRBDF2, h, lambda, Complex64::new(0.0, 0.0), GAMMA).unwrap();
        prop_assert!((g - d).abs() <= 1e-12 * g.max(1e-300), "{} vs {}", g, d);
    }

    #[test]
    fn polynomial_ignores_noise_phase((lambda, sigma) in stable_pair(), s in scheme()) {
        let base = ms_polynomial(s, lambda, sigma, GAMMA).unwrap();
        let scale = lambda.norm().max(sigma.norm_sqr()).max(1.0);
        for k in 1..8 {
            let theta = k as f64 * std::f64::consts::TAU / 8.0;
            let turned = ms_polynomial(s, lambda, sigma * Complex64::from_polar(1.0, theta), GAMMA).unwrap();
            // compare in the scaled variable h·max(1, |λ|, |σ|²)
            let big = base.coefficients.iter().enumerate()
                .fold(0.0f64, |m, (j, c)| m.max((c / scale.powi(j as i32)).abs()));
            for (j, (x, y)) in base.coefficients.iter().zip(&turned.coefficients).enumerate() {
                prop_assert!(((x - y) / scale.powi(j as i32)).abs() <= 1e-9 * big, "c{}: {} vs {}", j, x, y);
            }
        }
    }

    #[test]
    fn gain_below_one_inside_bound((lambda, sigma) in stable_pair(), s in scheme()) {
        let hs = h_star(s, lambda, sigma, GAMMA).unwrap().value().min(1e3);
        for k in 1..=100 {
            let h = hs * k as f64 / 101.0;
            prop_assert!(ms_gain(s, h, lambda, sigma, GAMMA).unwrap() < 1.0, "h = {}", h);
        }
    }

    #[test]
    fn gain_tends_to_one_and_is_continuous((lambda, sigma) in stable_pair(), s in scheme(), h in 1e-4f64..1e-2) {
        let g0 = ms_gain(s, 1e-12, lambda, sigma, GAMMA).unwrap();
        prop_assert!((g0 - 1.0).abs() < 1e-8);
        let scale = 1.0 / lambda.norm().max(sigma.norm_sqr()).max(1.0);
        let h = h * scale;
        let a = ms_gain(s, h, lambda, sigma, GAMMA).unwrap();
        let b = ms_gain(s, h * (1.0 + 1e-9), lambda, sigma, GAMMA).unwrap();
        prop_assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
    }

    #[test]
    fn scalar_linear_solution_is_gbm(l in -5.0f64..2.0, s in -2.0f64..2.0, t in 0.0f64..3.0, w in -3.0f64..3.0, x0 in -4.0f64..4.0) {
        let lin = LinearSde::new(Matrix::from_fn(1, 1, |_, _| l), vec![Matrix::from_fn(1, 1, |_, _| s)]).unwrap();
        let x = exact_solution_linear(&lin, &[x0], t, &[w]).unwrap()[0];
        let expect = x0 * ((l - 0.5 * s * s) * t + s * w).exp();
        prop_assert!((x - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
    }
}

#[test]
fn single_precision_path_tracks_exact_solution() {
    let model = test1::<f32>(0.5);
    let cfg = SchemeConfig::<f32>::default();
    let mut worst = 0.0f32;
    for j in 0..20 {
        let mut stream = RngStream::from_parts(11, 0, 0, j);
        let out = integrate_path(&model, Scheme::TRBDF2, &[0.5f32], 0.0625, 1.0, &cfg, &mut stream, false).unwrap();
        let exact = exact_solution_test1(0.5f32, 0.5, out.w_total[0]).unwrap();
        worst = worst.max((out.terminal[0] - exact).abs());
    }
    assert!(worst < 1e-3, "{worst}");
}
