//! Acceptance suite: one `PASS`/`FAIL` line per criterion.
//!
//! Failing criteria are reported, not hidden. The process exits non-zero on a failure only
//! when run with `--strict` (`cargo test --test acceptance -- --strict`).

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sde_trbdf2::experiments::{run_test, ExperimentConfig, TestCase};
use sde_trbdf2::integrals::{pair_moment, IntegralLayout, SegmentSampler};
use sde_trbdf2::model::{test2, ScalarSde, ScaledNoise, Test1Oracle};
use sde_trbdf2::multiindex::order_two_set;
use sde_trbdf2::schemes::integrate_path;
use sde_trbdf2::stability::{
    a_stability_probe, ms_gain, ms_gain_mc, ms_polynomial, stability_map, GridRange, MsScheme, StabilityCell,
};
use sde_trbdf2::{mi, KahanSum, MultiIndex, RngStream, Scheme, SchemeConfig, Variant};

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn run(test: TestCase, schemes: &[Scheme], exps: (u32, u32)) -> sde_trbdf2::ExperimentReport {
    let mut cfg = ExperimentConfig::new(test);
    cfg.schemes = schemes.to_vec();
    cfg.h_exponents = exps;
    cfg.paths = 2000;
    cfg.seed = SEED;
    run_test(&cfg).expect("experiment runs")
}

fn convergence_orders() -> Outcome {
    let schemes: Vec<Scheme> = Variant::ALL.iter().map(|&v| Scheme::TrBdf2(v)).collect();
    let report = run(TestCase::Order, &schemes, (3, 9));
    let mut ok = true;
    let mut parts = Vec::new();
    for s in &report.schemes {
        let rhos: Vec<f64> = s.levels.iter().filter_map(|l| l.rho).collect();
        let m = mean(&rhos[rhos.len() - 3..]);
        let band = match s.scheme.as_str() {
            "trbdf2" => (1.8, 2.2),
            "trbdf2-r1" | "trbdf2-r3" | "trbdf2-r5" => (0.85, 1.15),
            _ => (1.35, 1.65),
        };
        ok &= (band.0..=band.1).contains(&m);
        parts.push(format!("{}={m:.3}", s.scheme));
    }
    outcome(ok, format!("mean rho over finest pairs: {}", parts.join(" ")))
}

fn eps_at(report: &sde_trbdf2::ExperimentReport, scheme: &str, h: f64) -> f64 {
    report.scheme(scheme).and_then(|s| s.level(h)).expect("level present").eps
}

fn stiff_contrast() -> Outcome {
    let schemes = [Scheme::IT2, Scheme::TRBDF2];
    let r2 = run(TestCase::Stiff2, &schemes, (1, 7));
    let r5 = run(TestCase::Stiff5, &schemes, (1, 7));
    let (i_coarse, t_coarse) = (eps_at(&r2, "it2", 0.5), eps_at(&r2, "trbdf2", 0.5));
    let fine = 2f64.powi(-7);
    let (i_fine, t_fine) = (eps_at(&r2, "it2", fine), eps_at(&r2, "trbdf2", fine));
    let (i5, t5) = (eps_at(&r5, "it2", 0.0625), eps_at(&r5, "trbdf2", 0.0625));
    let near = |e: f64| e > 1.3e-7 / 5.0 && e < 1.3e-7 * 5.0;
    let ok = i_coarse > 1e2 && t_coarse < 0.1 && near(i_fine) && near(t_fine) && i5 > 1e3 && t5 < 1e-4;
    outcome(
        ok,
        format!(
            "d=2 h=2^-1: it2 {i_coarse:.4e} trbdf2 {t_coarse:.4e}; h=2^-7: it2 {i_fine:.4e} trbdf2 {t_fine:.4e}; \
             d=5 h=2^-4: it2 {i5:.4e} trbdf2 {t5:.4e}"
        ),
    )
}

fn general_orders() -> Outcome {
    let report = run(TestCase::General, &[Scheme::TRBDF2], (1, 7));
    let s = report.scheme("trbdf2").expect("trbdf2 row");
    let reference = [(4, 1.8279), (5, 1.9755), (6, 2.0025)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, expect) in reference {
        let rho = s.level(2f64.powi(-i)).and_then(|l| l.rho).expect("rho present");
        ok &= (rho - expect).abs() <= 0.25;
        parts.push(format!("h=2^-{i}: {rho:.4} (ref {expect})"));
    }
    outcome(ok, parts.join(", "))
}

fn ms_polynomial_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut c0_err, mut it2_err, mut tr_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut ratios = Vec::new();
    let mut fit_ok = true;
    for _ in 0..20 {
        let re = -rng.random_range(0.1..50.0);
        let lambda = Complex64::new(re, rng.random_range(-20.0..20.0));
        let radius = (-2.0 * re * rng.random_range(0.0..0.95f64)).sqrt();
        let sigma = Complex64::from_polar(radius, rng.random_range(0.0..std::f64::consts::TAU));
        let drift = 2.0 * lambda.re + sigma.norm_sqr();
        let s2 = sigma.norm_sqr();
        let it2_c1 = 0.5 * drift * drift;
        let tr_c1 = (2.0 * lambda.re * GAMMA * (GAMMA - 1.0) + s2 * (2.0 - GAMMA)) * drift / (2.0 - GAMMA);
        for scheme in [MsScheme::It2, MsScheme::TRBDF2] {
            match ms_polynomial(scheme, lambda, sigma, GAMMA) {
                Ok(p) => {
                    fit_ok &= p.degree <= scheme.degree();
                    c0_err = c0_err.max(rel(p.coefficients[0], drift));
                    if scheme == MsScheme::It2 {
                        it2_err = it2_err.max(rel(p.coefficients[1], it2_c1));
                    } else {
                        tr_err = tr_err.max(rel(p.coefficients[1], tr_c1));
                        ratios.push(p.coefficients[1] / tr_c1);
                    }
                }
                Err(_) => fit_ok = false,
            }
        }
    }
    let (rmin, rmax) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    let ok = fit_ok && c0_err < 1e-9 && it2_err < 1e-6 && tr_err < 1e-6;
    outcome(
        ok,
        format!(
            "c0 rel {c0_err:.1e}; it2 c1 rel {it2_err:.1e}; trbdf2 c1 rel {tr_err:.1e} \
             (fitted/stated ratio in [{rmin:.6}, {rmax:.6}]); degree and trailing checks {}",
            if fit_ok { "ok" } else { "failed" }
        ),
    )
}

fn oracle_cross_check() -> Outcome {
    let points = [
        (-1.0, 0.0, 0.5, 0.0, 0.2),
        (-3.0, 1.0, 1.0, 0.5, 0.1),
        (-10.0, 0.0, 2.0, 0.0, 0.05),
        (-5.0, -2.0, 0.0, 1.5, 0.3),
        (-0.5, 0.5, 0.3, 0.3, 0.5),
    ];
    let mut worst = 0.0f64;
    let mut ok = true;
    for scheme in [MsScheme::TRBDF2, MsScheme::It2] {
        for (k, &(lr, li, sr, si, h)) in points.iter().enumerate() {
            let (l, s) = (Complex64::new(lr, li), Complex64::new(sr, si));
            let exact = ms_gain(scheme, h, l, s, GAMMA).expect("gain");
            let (mc, se) = ms_gain_mc(scheme, h, l, s, GAMMA, 1_000_000, SEED + k as u64).expect("mc");
            let z = (mc - exact).abs() / se;
            worst = worst.max(z);
            ok &= z <= 3.0;
        }
    }
    outcome(ok, format!("largest deviation {worst:.2} standard errors over 10 points"))
}

fn a_stability() -> Outcome {
    let r = a_stability_probe(GAMMA).expect("probe");
    let ok = r.interior_points >= 10_000 && r.max_interior < 1.0 && r.max_boundary <= 1.0 + 1e-12 && r.far_field < 1e-6;
    outcome(
        ok,
        format!(
            "{} interior points max |G| {:.6}; {} boundary points max |G|-1 = {:.1e}; |G(-1e8)| {:.2e}",
            r.interior_points,
            r.max_interior,
            r.boundary_points,
            r.max_boundary - 1.0,
            r.far_field
        ),
    )
}

fn integral_moments() -> Outcome {
    let h = 0.5f64;
    let closed = [
        (mi![1], mi![1], h),
        (mi![1, 0], mi![1, 0], h.powi(3) / 3.0),
        (mi![1, 0], mi![1], h * h / 2.0),
        (mi![0], mi![0], h * h),
    ];
    let closed_err = closed.iter().fold(0.0f64, |m, (a, b, v)| m.max(rel(pair_moment(a, b, h), *v)));

    let words: Vec<MultiIndex> = order_two_set(1).iter().cloned().collect();
    let layout = Arc::new(IntegralLayout::new(1, words.iter()).expect("layout"));
    let mut sampler = SegmentSampler::new(layout, h, 64).expect("sampler");
    let mut stream = RngStream::from_parts(SEED, 1, 0, 0);
    let n = words.len();
    let draws = 1_000_000;
    let mut sums = vec![KahanSum::new(); n * n];
    let mut squares = vec![KahanSum::new(); n * n];
    let mut identity_err = 0.0f64;
    let mut seg = sampler.blank();
    for _ in 0..draws {
        sampler.sample_into(&mut stream, &mut seg);
        let v: Vec<f64> = words.iter().map(|w| seg.get(w).expect("entry")).collect();
        for i in 0..n {
            for j in i..n {
                let p = v[i] * v[j];
                sums[i * n + j].add(p);
                squares[i * n + j].add(p * p);
            }
        }
        let g = |a: MultiIndex| seg.get(&a).expect("entry");
        let w = g(mi![1]);
        let checks = [
            (g(mi![1, 1]), (w * w - h) / 2.0),
            (g(mi![1, 1, 1]), (w * w * w - 3.0 * h * w) / 6.0),
            (g(mi![1, 1, 1, 1]), (w.powi(4) - 6.0 * h * w * w + 3.0 * h * h) / 24.0),
            (g(mi![0, 1]), h * w - g(mi![1, 0])),
            (g(mi![0, 1, 1]) + g(mi![1, 0, 1]) + g(mi![1, 1, 0]), h * g(mi![1, 1])),
        ];
        for (a, b) in checks {
            identity_err = identity_err.max((a - b).abs() / b.abs().max(h * h));
        }
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let m = sums[i * n + j].value() / draws as f64;
            let var = squares[i * n + j].value() / draws as f64 - m * m;
            let se = (var / draws as f64).sqrt();
            let expect = pair_moment(&words[i], &words[j], h);
            let z = if se > 0.0 { (m - expect).abs() / se } else { (m - expect).abs() / 1e-300 };
            worst = worst.max(z);
        }
    }
    let ok = closed_err < 1e-12 && worst <= 4.0 && identity_err < 1e-12;
    outcome(
        ok,
        format!(
            "closed forms rel {closed_err:.1e}; {} pairs over 10^6 draws, largest deviation {worst:.2} SE; \
             per-draw identities rel {identity_err:.1e}",
            n * (n + 1) / 2
        ),
    )
}

/// Independent deterministic TR-BDF2 for scalar `x' = f(x)` with Newton on each stage.
fn trbdf2_scalar(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x0: f64, h: f64, n: usize) -> Vec<(f64, f64)> {
    let g2 = (1.0 - GAMMA) / (2.0 - GAMMA);
    let g3 = 1.0 / (GAMMA * (2.0 - GAMMA));
    let solve = |c: f64, rhs: f64, guess: f64| {
        let mut y = guess;
        for _ in 0..100 {
            let step = (y - c * f(y) - rhs) / (1.0 - c * df(y));
            y -= step;
            if step.abs() <= 1e-15 * y.abs().max(1.0) {
                break;
            }
        }
        y
    };
    let mut y = x0;
    let mut out = Vec::new();
    for _ in 0..n {
        let mid = solve(0.5 * GAMMA * h, y + 0.5 * GAMMA * h * f(y), y);
        let next = solve(g2 * h, g3 * mid + (1.0 - g3) * y, mid);
        out.push((mid, next));
        y = next;
    }
    out
}

fn deterministic_reduction() -> Outcome {
    let cfg = SchemeConfig::default();
    let mut worst = 0.0f64;

    let beta = 3.0;
    let model = ScalarSde::new(ScaledNoise {
        inner: Test1Oracle { beta },
        scale: 0.0,
    });
    let h = 2f64.powi(-5);
    let mut stream = RngStream::from_parts(SEED, 2, 0, 0);
    let path = integrate_path(&model, Scheme::TRBDF2, &[0.5], h, 1.0, &cfg, &mut stream, true).expect("path");
    let reference = trbdf2_scalar(
        |x| -beta * beta * x * (1.0 - x * x),
        |x| -beta * beta * (1.0 - 3.0 * x * x),
        0.5,
        h,
        32,
    );
    for (k, (mid, next)) in reference.iter().enumerate() {
        worst = worst.max(rel(path.mid_states[k][0], *mid)).max(rel(path.states[k + 1][0], *next));
    }

    // linear 2x2 with zero diffusion: both stages are exact linear solves
    let lin = test2(2, 15.0, 0.0).expect("model");
    let a = [[-15.0, 15.0], [15.0, -15.0]];
    let h = 2f64.powi(-3);
    let path = integrate_path(&lin, Scheme::TRBDF2, &[1.0, 0.0], h, 1.0, &cfg, &mut stream, true).expect("path");
    let solve = |c: f64, rhs: [f64; 2]| {
        let m = [[1.0 - c * a[0][0], -c * a[0][1]], [-c * a[1][0], 1.0 - c * a[1][1]]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [(rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det, (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det]
    };
    let g2 = (1.0 - GAMMA) / (2.0 - GAMMA);
    let g3 = 1.0 / (GAMMA * (2.0 - GAMMA));
    let mut y = [1.0, 0.0];
    for k in 0..8 {
        let ay = [a[0][0] * y[0] + a[0][1] * y[1], a[1][0] * y[0] + a[1][1] * y[1]];
        let c = 0.5 * GAMMA * h;
        let mid = solve(c, [y[0] + c * ay[0], y[1] + c * ay[1]]);
        let next = solve(g2 * h, [g3 * mid[0] + (1.0 - g3) * y[0], g3 * mid[1] + (1.0 - g3) * y[1]]);
        for i in 0..2 {
            let scale = next[i].abs().max(mid[i].abs()).max(1e-300);
            worst = worst.max((path.mid_states[k][i] - mid[i]).abs() / scale);
            worst = worst.max((path.states[k + 1][i] - next[i]).abs() / scale);
        }
        y = next;
    }
    outcome(worst < 1e-12, format!("largest relative deviation {worst:.1e} over 40 grid points"))
}

fn stability_maps() -> Outcome {
    let re = GridRange::new(-200.0, 0.0, 50).expect("grid");
    let sigma = GridRange::new(0.0, 20.0, 50).expect("grid");
    let tr = stability_map(MsScheme::TRBDF2, re, sigma, GAMMA, 1e3).expect("trbdf2 map");
    let it = stability_map(MsScheme::It2, re, sigma, GAMMA, 1e3).expect("it2 map");
    let (mut large_checked, mut large_fail, mut order_checked, mut order_fail) = (0, 0, 0, 0);
    let mut smallest_large = f64::INFINITY;
    for (i, &r) in tr.re_lambda.iter().enumerate() {
        for (j, &s) in tr.sigma.iter().enumerate() {
            let (StabilityCell::Bound(t), StabilityCell::Bound(q)) = (tr.cell(i, j), it.cell(i, j)) else {
                continue;
            };
            if s < 2.0 && r < -10.0 {
                large_checked += 1;
                smallest_large = smallest_large.min(t.value());
                if t.value() <= 10.0 {
                    large_fail += 1;
                }
            }
            order_checked += 1;
            if q.value() > t.value() {
                order_fail += 1;
            }
        }
    }
    outcome(
        large_fail == 0 && order_fail == 0,
        format!(
            "trbdf2 h*>10: {large_fail}/{large_checked} cells violate (min {smallest_large:.3}); \
             it2 h* <= trbdf2 h*: {order_fail}/{order_checked} cells violate"
        ),
    )
}

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::new(TestCase::General);
    cfg.paths = 300;
    cfg.seed = SEED;
    cfg.h_exponents = (2, 5);
    let mut order = ExperimentConfig::new(TestCase::Order);
    order.paths = 300;
    order.seed = SEED;
    order.h_exponents = (3, 5);
    let grid = GridRange::new(-50.0, 0.0, 10).expect("grid");
    let sig = GridRange::new(0.0, 8.0, 10).expect("grid");
    let snapshot = || -> Vec<String> {
        let a = run_test(&cfg).expect("general");
        let b = run_test(&order).expect("order");
        let m = stability_map(MsScheme::TRBDF2, grid, sig, GAMMA, 1e3).expect("map");
        let mc = ms_gain_mc(MsScheme::TRBDF2, 0.1, Complex64::new(-2.0, 1.0), Complex64::new(1.0, 0.0), GAMMA, 20_000, SEED)
            .expect("mc");
        vec![
            a.to_csv(),
            a.to_json(false).expect("json"),
            b.to_csv(),
            m.to_csv(),
            format!("{:?}", mc),
        ]
    };
    let mut runs = vec![snapshot(), snapshot()];
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
        runs.push(pool.install(snapshot));
    }
    let ok = runs.iter().all(|r| r == &runs[0]);
    outcome(ok, format!("{} artifacts compared over 4 runs (default, repeat, 1 and 3 threads)", runs[0].len()))
}

fn main() {
    let strict = std::env::args().any(|a| a == "--strict");
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("convergence orders on the order test", convergence_orders),
        ("stiff contrast against it2", stiff_contrast),
        ("observed orders on the general test", general_orders),
        ("mean-square polynomial coefficients", ms_polynomial_exactness),
        ("mean-square gain against Monte Carlo", oracle_cross_check),
        ("A- and L-stability probe", a_stability),
        ("integral moments and identities", integral_moments),
        ("deterministic reduction", deterministic_reduction),
        ("stability map properties", stability_maps),
        ("determinism across runs and threads", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
