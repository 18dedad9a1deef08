use proptest::prelude::*;
use rand::Rng;

use weaklab::directional::{
    bbm_mollifier_functional, besov_diagnostic, directional_functional, directional_profile, directional_summary,
    BesovConfig, QuadConfig,
};
use weaklab::fields::{Components, FieldSpec, Slope};
use weaklab::plateau::{GridConfig, WindowConfig};
use weaklab::rng::substream;
use weaklab::tail::{tail_measure_exact_grid, tail_measure_profile, tail_summary, SamplerConfig, TailProfile};
use weaklab::{Domain, Error, Field};

fn linear(a: &[f64]) -> Field {
    Field::build(&FieldSpec::Linear {
        slope: Slope::Vector(a.to_vec()),
        offset: None,
    })
    .unwrap()
}

fn gaussian(dim: usize) -> Field {
    Field::build(&FieldSpec::Gaussian {
        center: vec![0.0; dim],
        amplitude: Components::Scalar(1.0),
        width: 1.0,
    })
    .unwrap()
}

fn step(normal: &[f64], offset: f64, jump: f64) -> Field {
    Field::build(&FieldSpec::Step {
        normal: normal.to_vec(),
        offset,
        jump: Components::Scalar(jump),
        base: None,
    })
    .unwrap()
}

fn cusp_1d() -> Field {
    Field::build(&FieldSpec::Cusp {
        center: vec![0.0],
        exponent: 0.5,
        support_lo: vec![-1.0],
        support_hi: vec![1.0],
    })
    .unwrap()
}

fn power_1d(beta: f64) -> Field {
    Field::build(&FieldSpec::PowerSingularity {
        center: vec![0.0],
        exponent: beta,
        support_lo: vec![-1.0],
        support_hi: vec![1.0],
    })
    .unwrap()
}

fn grid_of(spec: FieldSpec, lo: &[f64], hi: &[f64], nodes: &[usize]) -> Field {
    Field::build(&FieldSpec::Grid {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        nodes: nodes.to_vec(),
        values: None,
        sample: Some(Box::new(spec)),
    })
    .unwrap()
}

fn linear_spec(a: &[f64]) -> FieldSpec {
    FieldSpec::Linear {
        slope: Slope::Vector(a.to_vec()),
        offset: None,
    }
}

fn s_grid(lo: f64, hi: f64) -> Vec<f64> {
    GridConfig::new(lo, hi, 4).points().unwrap()
}

fn unit(dim: usize) -> Domain {
    Domain::unit_box(dim).unwrap()
}

/// Deviations of the Monte Carlo profile from the grid oracle beyond the
/// discretization error, in units of σ, for seeds 0..10 and every threshold.
fn oracle_deviations() -> Vec<f64> {
    // closed form for u(x) = x on (0,1), q = r = 2: μ(s) = (2 - 1/s)/s
    let s = s_grid(10.0, 1000.0);
    let oracle = tail_measure_exact_grid(&grid_of(linear_spec(&[1.0]), &[0.0], &[1.0], &[512]), 2.0, 2.0, &s).unwrap();
    let field = linear(&[1.0]);
    let mut z = Vec::new();
    for seed in 0..10 {
        let mc = tail_measure_profile(&field, &unit(1), 2.0, 2.0, &s, &SamplerConfig::new(1_000_000, seed)).unwrap();
        for i in 0..s.len() {
            let closed = (2.0 - 1.0 / s[i]) / s[i];
            let discretization = (oracle.mu_hat[i] - closed).abs();
            let gap = (mc.mu_hat[i] - oracle.mu_hat[i]).abs();
            z.push((gap - discretization).max(0.0) / (mc.ci_halfwidth[i] / 3.0));
        }
    }
    z
}

#[test]
fn monte_carlo_agrees_with_grid_oracle_over_ten_seeds() {
    let z = oracle_deviations();
    let beyond = z.iter().filter(|v| **v > 3.0).count();
    let worst = z.iter().copied().fold(0.0, f64::max);
    println!("{beyond} of {} points beyond 3σ, worst {worst:.2}σ", z.len());
    // 90 comparisons at the 3σ level: a correct estimator exceeds it at 3 or
    // more points with probability ≈ 0.0025
    assert!(beyond <= 2, "{beyond} points beyond 3σ");
    assert!(worst <= 4.0, "worst deviation {worst}σ");
}

#[test]
fn monte_carlo_ci_is_calibrated() {
    let f = linear(&[1.0]);
    let s = s_grid(10.0, 1000.0);
    let mut z2 = 0.0;
    let mut n = 0.0;
    for seed in 0..200 {
        let p = tail_measure_profile(&f, &unit(1), 2.0, 2.0, &s, &SamplerConfig::new(50_000, 1000 + seed)).unwrap();
        for i in 0..s.len() {
            let closed = (2.0 - 1.0 / s[i]) / s[i];
            z2 += ((p.mu_hat[i] - closed) / (p.ci_halfwidth[i] / 3.0)).powi(2);
            n += 1.0;
        }
    }
    // mean of z² over 1800 draws; about ±0.1 at these sizes
    let m = z2 / n;
    assert!((0.75..1.3).contains(&m), "mean z² = {m}");
}

#[test]
fn oracle_scaling_law_is_exact() {
    let s = s_grid(1.0, 1000.0);
    let base = grid_of(
        FieldSpec::Gaussian {
            center: vec![0.5, 0.5],
            amplitude: Components::Scalar(1.0),
            width: 0.3,
        },
        &[0.0, 0.0],
        &[1.0, 1.0],
        &[24, 24],
    );
    let q = 2.0;
    let p = tail_measure_exact_grid(&base, q, 2.0, &s).unwrap();
    for lambda in [0.5, 2.0] {
        let scaled_s: Vec<f64> = s.iter().map(|v| v * f64::powf(lambda, q)).collect();
        let ps = tail_measure_exact_grid(&base.scaled(lambda), q, 2.0, &scaled_s).unwrap();
        assert_eq!(ps.mu_hat, p.mu_hat, "λ = {lambda}");
    }
}

#[test]
fn summaries_scale_by_lambda_to_the_q() {
    let s = s_grid(10.0, 1000.0);
    let cfg = WindowConfig::default();
    let field = linear(&[1.0]);
    let base = tail_summary(
        &tail_measure_profile(&field, &unit(1), 2.0, 2.0, &s, &SamplerConfig::new(1_000_000, 3)).unwrap(),
        &cfg,
    )
    .unwrap();
    for lambda in [0.5, 2.0] {
        let f = lambda * lambda;
        let scaled_s: Vec<f64> = s.iter().map(|v| v * f).collect();
        let p = tail_measure_profile(
            &field.scaled(lambda),
            &unit(1),
            2.0,
            2.0,
            &scaled_s,
            &SamplerConfig::new(1_000_000, 3),
        )
        .unwrap();
        let sum = tail_summary(&p, &cfg).unwrap();
        for (a, b, e) in [
            (sum.sup_s_mu, base.sup_s_mu, base.sup_stderr),
            (sum.limsup_est, base.limsup_est, base.limsup_stderr),
            (sum.liminf_est, base.liminf_est, base.liminf_stderr),
        ] {
            assert!(
                (a - f * b).abs() <= 6.0 * f * e + 1e-12 * a.abs(),
                "λ = {lambda}: {a} vs {}",
                f * b
            );
        }
    }
}

fn brute_force_oracle(field: &Field, q: f64, r: f64, s: &[f64]) -> Vec<f64> {
    let grid = field.grid().unwrap();
    let n = grid.node_count();
    let dim = field.dim();
    let cell: f64 = grid.spacing().iter().product();
    let mut pos = vec![vec![0.0; dim]; n];
    for (i, p) in pos.iter_mut().enumerate() {
        grid.node_position(i, p);
    }
    let vals: Vec<f64> = pos.iter().map(|p| field.evaluate(p).unwrap()[0]).collect();
    let mut mu = vec![0.0; s.len()];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let t: f64 = pos[i]
                .iter()
                .zip(&pos[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let k = (vals[i] - vals[j]).abs().powf(q) / t.powf(r + dim as f64);
            for (m, &sv) in mu.iter_mut().zip(s) {
                if k > sv {
                    *m += cell * cell;
                }
            }
        }
    }
    mu
}

#[test]
fn halved_oracle_matches_full_enumeration() {
    let s = s_grid(1.0, 1000.0);
    let cases = [
        grid_of(linear_spec(&[1.0]), &[0.0], &[1.0], &[40]),
        grid_of(
            FieldSpec::Gaussian {
                center: vec![0.3, 0.6],
                amplitude: Components::Scalar(2.0),
                width: 0.5,
            },
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[9, 7],
        ),
    ];
    for f in &cases {
        let fast = tail_measure_exact_grid(f, 2.0, 1.5, &s).unwrap();
        let slow = brute_force_oracle(f, 2.0, 1.5, &s);
        for (a, b) in fast.mu_hat.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }
}

#[test]
fn sign_flip_leaves_profile_unchanged() {
    let s = s_grid(10.0, 1000.0);
    let d = unit(2);
    let f = gaussian(2);
    let cfg = SamplerConfig::new(200_000, 11);
    let a = tail_measure_profile(&f, &d, 2.0, 2.0, &s, &cfg).unwrap();
    let b = tail_measure_profile(&f.scaled(-1.0), &d, 2.0, 2.0, &s, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn axis_permutation_within_ci() {
    let s = s_grid(100.0, 10_000.0);
    let a = tail_measure_profile(
        &linear(&[1.0, 0.5]),
        &Domain::cuboid(&[0.0, 0.0], &[1.0, 2.0]).unwrap(),
        2.0,
        2.0,
        &s,
        &SamplerConfig::new(1_000_000, 5),
    )
    .unwrap();
    let b = tail_measure_profile(
        &linear(&[0.5, 1.0]),
        &Domain::cuboid(&[0.0, 0.0], &[2.0, 1.0]).unwrap(),
        2.0,
        2.0,
        &s,
        &SamplerConfig::new(1_000_000, 6),
    )
    .unwrap();
    for i in 0..s.len() {
        let tol = (a.ci_halfwidth[i].powi(2) + b.ci_halfwidth[i].powi(2)).sqrt();
        assert!(
            (a.mu_hat[i] - b.mu_hat[i]).abs() <= tol,
            "s {}: {} vs {}",
            s[i],
            a.mu_hat[i],
            b.mu_hat[i]
        );
    }
}

fn check_monotone(p: &TailProfile) {
    for w in p.mu_hat.windows(2) {
        assert!(w[1] <= w[0]);
    }
    let widest = p.ci_halfwidth.iter().copied().fold(0.0, f64::max);
    assert!(
        p.raw_violation <= widest + 1e-15,
        "raw violation {} vs ci {widest}",
        p.raw_violation
    );
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 12,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    })]

    #[test]
    fn tail_profiles_are_nonincreasing(seed in 0u64..1_000_000, which in 0usize..4, r in 0.5f64..3.0) {
        let (field, domain) = match which {
            0 => (linear(&[1.0]), unit(1)),
            1 => (gaussian(2), unit(2)),
            2 => (step(&[1.0], 0.5, 1.0), unit(1)),
            _ => (linear(&[0.3, -1.0]), Domain::ball(&[0.0, 0.0], 1.0).unwrap()),
        };
        let s = s_grid(1.0, 1e4);
        // u(x) = x with 1 < r < 5/3 has level sets below the sampler's radius floor at s = 1e4
        let p = match tail_measure_profile(&field, &domain, 2.0, r, &s, &SamplerConfig::new(20_000, seed)) {
            Err(Error::ShellUnderflow(_)) if which == 0 && r > 1.0 => {
                prop_assume!(false);
                unreachable!()
            }
            other => other.unwrap(),
        };
        check_monotone(&p);
        let v = domain.volume();
        prop_assert!(p.mu_hat[0] <= v * v);
    }
}

#[test]
fn r_below_q_vanishes_and_r_above_q_diverges() {
    let s = s_grid(10.0, 1000.0);
    let field = linear(&[1.0]);
    let cfg = SamplerConfig::new(1_000_000, 2);
    let at_q = tail_summary(
        &tail_measure_profile(&field, &unit(1), 2.0, 2.0, &s, &cfg).unwrap(),
        &WindowConfig::default(),
    )
    .unwrap();
    let below = tail_summary(
        &tail_measure_profile(&field, &unit(1), 2.0, 1.0, &s, &cfg).unwrap(),
        &WindowConfig::default(),
    )
    .unwrap();
    assert!(below.limsup_est <= 0.05 * at_q.limsup_est, "{below:?}");
    // u(x) = x, r = 3: μ(s) = 2 s^{-1/2} - s^{-1}, so s·μ grows like s^{1/2}
    let above = tail_measure_profile(&field, &unit(1), 2.0, 3.0, &s, &cfg).unwrap();
    let n = s.len();
    let slope = (above.s_mu[n - 1] / above.s_mu[n - 5]).ln() / (s[n - 1] / s[n - 5]).ln();
    assert!((slope - 0.5).abs() < 0.05, "slope {slope}");
}

fn catalog() -> Vec<(&'static str, Field, Domain)> {
    vec![
        ("linear-1d", linear(&[1.0]), unit(1)),
        ("gaussian-1d", gaussian(1), Domain::cuboid(&[-3.0], &[3.0]).unwrap()),
        ("step-1d", step(&[1.0], 0.5, 1.0), unit(1)),
        ("cusp-1d", cusp_1d(), Domain::cuboid(&[-1.0], &[1.0]).unwrap()),
        ("linear-2d", linear(&[1.0, 0.0]), unit(2)),
        ("gaussian-2d", gaussian(2), unit(2)),
    ]
}

#[test]
fn mollifier_sits_between_directional_extremes() {
    let eps_grid = GridConfig::new(0.1, 0.01, 2).points().unwrap();
    for (name, field, domain) in catalog() {
        let area = weaklab::constants::sphere_surface_area(domain.dim()).unwrap();
        let mut quad = QuadConfig::new(100_000, 17);
        quad.sphere_resolution = 64;
        for &eps in &eps_grid {
            let sigma = eps / 8.0;
            let m = bbm_mollifier_functional(&field, &domain, 2.0, eps, sigma, &quad).unwrap();
            let ts: Vec<f64> = (0..=8).map(|k| eps - sigma + 2.0 * sigma * k as f64 / 8.0).collect();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut ci: f64 = 0.0;
            for &t in &ts {
                let d = directional_functional(&field, &domain, 2.0, 2.0, t, &quad).unwrap();
                lo = lo.min(d.value / area);
                hi = hi.max(d.value / area);
                ci = ci.max(d.ci_halfwidth / area);
            }
            let slack = ci + m.ci_halfwidth;
            assert!(
                lo - slack <= m.value && m.value <= hi + slack,
                "{name} ε={eps}: {lo} ≤ {} ≤ {hi}",
                m.value
            );
        }
    }
}

#[test]
fn convex_domains_attain_sup_in_the_limit() {
    let eps = GridConfig::new(0.1, 0.001, 4).points().unwrap();
    let cases = [
        ("linear-1d", linear(&[1.0]), unit(1)),
        ("gaussian-1d", gaussian(1), Domain::cuboid(&[-3.0], &[3.0]).unwrap()),
        (
            "linear-ball",
            linear(&[1.0, 0.0]),
            Domain::ball(&[0.0, 0.0], 0.5).unwrap(),
        ),
    ];
    for (name, field, domain) in cases {
        let mut quad = QuadConfig::new(100_000, 23);
        quad.sphere_resolution = 64;
        let p = directional_profile(&field, &domain, 2.0, 2.0, &eps, &quad).unwrap();
        let s = directional_summary(&p, &WindowConfig::default());
        assert!(s.converged, "{name}");
        let tol = 3.0 * (s.sup_stderr.powi(2) + s.limsup_stderr.powi(2)).sqrt() + 0.02 * s.limsup_est;
        assert!(s.sup_value <= s.limsup_est + tol, "{name}: {s:?}");
    }
}

#[test]
fn directional_functional_is_subadditive_on_convex_domains() {
    let mut rng = substream(99, 0);
    let cases = [
        ("linear-1d", linear(&[1.0]), unit(1)),
        ("gaussian-1d", gaussian(1), Domain::cuboid(&[-3.0], &[3.0]).unwrap()),
        ("step-1d", step(&[1.0], 0.5, 1.0), unit(1)),
        ("gaussian-2d", gaussian(2), unit(2)),
    ];
    for (name, field, domain) in cases {
        let mut quad = QuadConfig::new(50_000, 31);
        quad.sphere_resolution = 64;
        for _ in 0..6 {
            let t1 = 0.01 + 0.2 * rng.random::<f64>();
            let t2 = 0.01 + 0.2 * rng.random::<f64>();
            let a = directional_functional(&field, &domain, 2.0, 2.0, t1, &quad).unwrap();
            let b = directional_functional(&field, &domain, 2.0, 2.0, t2, &quad).unwrap();
            let c = directional_functional(&field, &domain, 2.0, 2.0, t1 + t2, &quad).unwrap();
            let (big, ci) = if a.value >= b.value {
                (a.value, a.ci_halfwidth)
            } else {
                (b.value, b.ci_halfwidth)
            };
            let tol = (c.ci_halfwidth.powi(2) + ci.powi(2)).sqrt();
            assert!(c.value <= big + tol, "{name} t1={t1} t2={t2}: {} vs {big}", c.value);
        }
    }
}

#[test]
fn besov_verdicts() {
    let eps = GridConfig::new(0.1, 0.001, 4).points().unwrap();
    let sym = Domain::cuboid(&[-1.0], &[1.0]).unwrap();
    let cfg = BesovConfig::default();

    let d = besov_diagnostic(
        &step(&[1.0], 0.5, 1.0),
        &unit(1),
        2.0,
        1.0,
        &eps,
        &QuadConfig::new(4_000_000, 1),
        &cfg,
    )
    .unwrap();
    assert!(d.bounded, "step: {}", d.trend_exponent);

    let d = besov_diagnostic(
        &power_1d(0.125),
        &sym,
        2.0,
        1.0,
        &eps,
        &QuadConfig::new(4_000_000, 2),
        &cfg,
    )
    .unwrap();
    assert!(!d.bounded);
    assert!((d.trend_exponent + 0.25).abs() <= 0.1, "power: {}", d.trend_exponent);

    let d = besov_diagnostic(&cusp_1d(), &sym, 2.0, 1.0, &eps, &QuadConfig::new(1_000_000, 3), &cfg).unwrap();
    assert!(d.bounded, "cusp: {}", d.trend_exponent);
}
