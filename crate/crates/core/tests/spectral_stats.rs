use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use seqrpf::map_zoo::*;
use seqrpf::rpf::*;
use seqrpf::spectral_stats::*;
use seqrpf::transfer_op::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn doubling(obs: Observable, n: usize) -> Transfer {
    let s = SequentialSystem::homogeneous(make_linear_expanding(2).unwrap(), Potential::zero(), obs);
    Transfer::new(s, Grid::new(Space::Circle, n).unwrap()).unwrap()
}

fn mp_beta(beta: f64, potential: Potential, obs: Observable, n: usize) -> Transfer {
    let s = SequentialSystem::homogeneous(make_mp_map(beta).unwrap(), potential, obs);
    Transfer::new(s, Grid::new(Space::Interval, n).unwrap()).unwrap()
}

fn mp(potential: Potential, n: usize) -> Transfer {
    mp_beta(0.5, potential, Observable::scalar(Scalar::Identity), n)
}

fn driven(n: usize) -> Transfer {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let s = make_driven_mp_system(golden, BetaMap { offset: 0.5, slope: 0.2 }, 64)
        .unwrap()
        .with_potential(Potential::new(PotentialKind::Cosine, 0.1))
        .with_observable(Observable::scalar(Scalar::Identity));
    Transfer::new(s, Grid::new(Space::Interval, n).unwrap()).unwrap()
}

fn opts() -> RpfOptions {
    RpfOptions::default().with_depth(120)
}

fn family(tr: &Transfer, len: usize) -> GibbsFamily {
    gibbs_family(tr, 0, len, &opts()).unwrap()
}

#[test]
fn pressure_vanishes_at_zero() {
    let tr = mp(Potential::new(PotentialKind::Cosine, 0.2), 1 << 10);
    let g = family(&tr, 1);
    assert_eq!(pressure(&tr, &g, 0, 7, &[c(0.0, 0.0)], &opts()).unwrap(), c(0.0, 0.0));
}

#[test]
fn pressure_is_additive_in_blocks() {
    let tr = driven(1 << 10);
    let g = family(&tr, 12);
    for z in [c(0.1, 0.0), c(0.0, 0.05), c(0.03, -0.04)] {
        let whole = pressure(&tr, &g, 0, 10, &[z], &opts()).unwrap();
        let a = pressure(&tr, &g, 0, 5, &[z], &opts()).unwrap();
        let b = pressure(&tr, &g, 5, 5, &[z], &opts()).unwrap();
        assert!((whole - a - b).norm() <= 1e-8, "{z}: {}", (whole - a - b).norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn additivity_holds_at_any_split(split in 1usize..9, re in -0.1f64..0.1, im in -0.1f64..0.1) {
        let tr = mp(Potential::new(PotentialKind::Cosine, 0.3), 1 << 9);
        let g = family(&tr, 1);
        let z = [c(re, im)];
        let whole = pressure(&tr, &g, 0, 9, &z, &opts()).unwrap();
        let parts = pressure(&tr, &g, 0, split, &z, &opts()).unwrap()
            + pressure(&tr, &g, split as i64, 9 - split, &z, &opts()).unwrap();
        prop_assert!((whole - parts).norm() <= 1e-8);
    }
}

#[test]
fn centred_pressure_has_zero_gradient() {
    for tr in [mp(Potential::new(PotentialKind::Cosine, 0.3), 1 << 11), driven(1 << 11)] {
        let g = family(&tr, 21);
        let block = pressure_block(&tr, &g, 0, 20, &PressureOptions { rpf: opts(), ..Default::default() }).unwrap();
        assert!(block.gradient[0].abs() <= 1e-6, "{:?}", block.gradient);
    }
}

#[test]
fn doubling_pressure_is_quadratic() {
    // σ² = 1/2 for cos 2πx under Lebesgue, so the even part of Π_{0,n}(t)
    // is n t²/4 + O(n t⁴); the odd part carries the third cumulant.
    let tr = doubling(Observable::scalar(Scalar::Cos(1)), 1 << 10);
    let g = family(&tr, 1);
    let n = 16;
    let even = |t: f64| {
        let p = |t: f64| pressure(&tr, &g, 0, n, &[c(t, 0.0)], &opts()).unwrap().re;
        (p(t) + p(-t)) / (2.0 * n as f64)
    };
    let (x, y): (Vec<f64>, Vec<f64>) = [0.01, 0.02, 0.03, 0.04].iter().map(|&t| (t * t, even(t))).unzip();
    let fit = seqrpf::fit::line_fit(&x, &y).unwrap();
    assert!((fit.slope - 0.25).abs() <= 1e-3, "{fit:?}");
    // The O(t⁴) curvature leaks into the intercept at the 1e−8 level.
    assert!(fit.intercept.abs() <= 1e-7, "{fit:?}");
}

#[test]
fn pressure_refuses_branch_crossings() {
    // arg λ(it) grows like t μ(u) per fiber for an uncentred observable; a
    // constant observable with t = 2.0 rotates λ by 2 rad.
    let s = SequentialSystem::homogeneous(
        make_linear_expanding(2).unwrap(),
        Potential::zero(),
        Observable::scalar(Scalar::Constant(1.0)),
    );
    let tr = Transfer::new(s, Grid::new(Space::Circle, 256).unwrap()).unwrap().with_radius(3.0).unwrap();
    let g = family(&tr, 1);
    let err = pressure(&tr, &g, 0, 3, &[c(0.0, 2.0)], &opts()).unwrap_err();
    assert!(matches!(err, seqrpf::Error::BranchCut { .. }), "{err}");
}

#[test]
fn hessian_matches_five_point_stencil() {
    for tr in
        [mp(Potential::new(PotentialKind::Cosine, 0.3), 1 << 11), doubling(Observable::scalar(Scalar::Cos(1)), 1 << 11)]
    {
        let g = family(&tr, 1);
        let block = pressure_block(&tr, &g, 0, 50, &PressureOptions { rpf: opts(), ..Default::default() }).unwrap();
        assert!(block.stencil_gap() <= 1e-4, "{}", block.stencil_gap());
    }
}

#[test]
fn taylor_remainder_is_cubic() {
    let tr = mp(Potential::zero(), 1 << 11);
    let g = family(&tr, 1);
    let n = 30;
    let sampler = PressureSampler::new(&tr, &g, 0, n, opts()).unwrap();
    let block =
        pressure_blocks(&sampler, &PressureOptions { rpf: opts(), ..Default::default() }).unwrap().pop().unwrap();
    let rows = taylor_remainders(&sampler, &block, &[0.025, 0.05, 0.1, 0.2]).unwrap();
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    assert!(worst <= 1.0, "{rows:?}");
}

#[test]
fn zero_observable_has_zero_covariance() {
    let tr = doubling(Observable::zero(), 512);
    let g = family(&tr, 1);
    let curve = covariance_curve(&tr, &g, 0, 50).unwrap();
    assert!(curve.cov.iter().all(|m| m.iter().all(|v| *v == 0.0)));
    assert_eq!(curve.mode, CovMode::Quadrature);
    let report = check_cov_hessian(&tr, &g, 0, &[1, 10, 50], 0.05, &PressureOptions::default()).unwrap();
    assert!(report.rows.iter().all(|r| r.hessian.iter().all(|v| v.abs() <= 1e-12) && r.diff <= 1e-12));
}

/// `Var(Σ_{k<n} cos(2π 2^k x))` by midpoint quadrature on `m` points; exact
/// for trigonometric polynomials of degree below `m`.
fn brute_doubling_variance(n: usize, m: usize) -> f64 {
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for i in 0..m {
        let x = (i as f64 + 0.5) / m as f64;
        let s: f64 = (0..n).map(|k| (2.0 * PI * (1u64 << k) as f64 * x).cos()).sum();
        s1 += s;
        s2 += s * s;
    }
    s2 / m as f64 - (s1 / m as f64).powi(2)
}

#[test]
fn doubling_variance_is_half_n() {
    let tr = doubling(Observable::scalar(Scalar::Cos(1)), 1 << 12);
    let g = family(&tr, 1);
    let curve = covariance_curve(&tr, &g, 0, 1024).unwrap();
    for n in 1..=10 {
        assert!((brute_doubling_variance(n, 1 << 16) - n as f64 / 2.0).abs() <= 1e-9);
    }
    for n in [1, 2, 5, 10, 100, 1024] {
        assert!((curve.at(n)[0] - n as f64 / 2.0).abs() <= 1e-6, "n = {n}: {}", curve.at(n)[0]);
    }
}

/// `Var_μ(S_n)` by fine midpoint quadrature of exact orbits against the
/// Gibbs density, interpolated linearly from the nodal weights.
fn brute_variance(tr: &Transfer, g: &GibbsFamily, n: usize, m: usize) -> f64 {
    let fiber = tr.system().fiber(0);
    let grid = tr.grid();
    let density: Vec<f64> = g.mu(0).unwrap().iter().zip(grid.quadrature_weights()).map(|(mu, w)| mu / w).collect();
    let f = GridFunction::from_real_values(0, grid, &density).unwrap();
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let mut x = (i as f64 + 0.5) / m as f64;
        let w = f.eval(x).re;
        let mut s = 0.0;
        for _ in 0..n {
            s += fiber.observable.eval_component(0, &fiber.map, x);
            x = fiber.map.forward(x);
        }
        s0 += w;
        s1 += w * s;
        s2 += w * s * s;
    }
    s2 / s0 - (s1 / s0).powi(2)
}

#[test]
fn mp_covariance_matches_orbit_quadrature() {
    // The Gibbs density is singular at 0, so the orbit quadrature converges
    // slowly in N while the transported curve is already grid-stable.
    let mut prev_err = f64::INFINITY;
    let mut prev_curve: Option<Vec<f64>> = None;
    for k in [11, 12, 13] {
        let tr = mp(Potential::new(PotentialKind::Cosine, 0.3), 1 << k);
        let g = family(&tr, 1);
        let curve = covariance_curve(&tr, &g, 0, 8).unwrap();
        let vals: Vec<f64> = [1, 2, 4, 8].iter().map(|&n| curve.at(n)[0]).collect();
        let direct: Vec<f64> = [1, 2, 4, 8].iter().map(|&n| brute_variance(&tr, &g, n, 1 << 21)).collect();
        let err = vals.iter().zip(&direct).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        assert!(err < prev_err, "N = 2^{k}: {err} after {prev_err}");
        assert!(err <= 2e-2, "N = 2^{k}: {vals:?} vs {direct:?}");
        if let Some(p) = &prev_curve {
            assert!(vals.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-5), "{vals:?} vs {p:?}");
        }
        prev_err = err;
        prev_curve = Some(vals);
    }
    assert!(prev_err <= 1e-2);
}

#[test]
fn coboundary_variance_stays_bounded() {
    // S_n = r∘T^n − r with r = cos 2πx: Var = 1 for n ≥ 1, and 4 Var(r) = 2.
    // Interpolating cos 4πx at the half-way preimages breaks the telescoping
    // by about (4πh)²/16 ≈ 6e−7 per step, so the grid value drifts linearly.
    let tr = doubling(Observable::coboundary(Scalar::Cos(1)), 1 << 12);
    let g = family(&tr, 1);
    let curve = covariance_curve(&tr, &g, 0, 1024).unwrap();
    for n in 1..=1024 {
        assert!(curve.at(n)[0] <= 4.0 * 0.5 + 0.01);
        assert!((curve.at(n)[0] - 1.0).abs() <= 1e-6 * n as f64, "n = {n}: {}", curve.at(n)[0]);
    }
}

#[test]
fn covariance_matrices_are_symmetric_psd_and_cauchy() {
    let tr = mp_beta(
        0.5,
        Potential::new(PotentialKind::Cosine, 0.2),
        Observable::vector(&[Scalar::Identity, Scalar::Cos(1)]),
        1 << 11,
    );
    let g = family(&tr, 1);
    let curve = covariance_curve(&tr, &g, 0, 512).unwrap();
    for n in 1..=512 {
        let m = curve.at(n);
        assert!((m[1] - m[2]).abs() <= 1e-12 * m[0].abs().max(1.0));
        assert!(curve.min_eigenvalue(n) >= -1e-12);
    }
    let gaps: Vec<f64> = [16, 32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let (a, b) = (curve.matrix(n) / n as f64, curve.matrix(2 * n) / (2 * n) as f64);
            (b - a).abs().max()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn covariance_and_hessian_stay_close() {
    let tr = doubling(Observable::scalar(Scalar::Cos(1)), 1 << 12);
    let g = family(&tr, 1);
    let ns: Vec<usize> = (1..=200).collect();
    let report =
        check_cov_hessian(&tr, &g, 0, &ns, 0.05, &PressureOptions { rpf: opts(), ..Default::default() }).unwrap();
    assert!(report.ok(), "{}", report.max_diff);
    for r in &report.rows {
        assert!(r.cov[0] >= 0.4 * r.n as f64);
    }

    let tr = mp(Potential::new(PotentialKind::Cosine, 0.3), 1 << 12);
    let g = family(&tr, 1);
    // Correlated increments: Π″ ≈ nσ² while Var(u) < σ², so the gap is an
    // O(1) constant that must not grow with n.
    let report = check_cov_hessian(
        &tr,
        &g,
        0,
        &[1, 10, 50, 100, 200],
        1.5,
        &PressureOptions { rpf: opts(), ..Default::default() },
    )
    .unwrap();
    let diffs: Vec<(usize, f64)> = report.rows.iter().map(|r| (r.n, r.diff)).collect();
    assert!(report.ok(), "{diffs:?}");
    let (first, last) = (&report.rows[1], report.rows.last().unwrap());
    assert!((last.diff - first.diff).abs() <= 0.05, "{diffs:?}");
    assert!(last.cov[0] >= 10.0 * first.cov[0]);
}

#[test]
fn norm_decay_at_zero_is_markov() {
    let tr = doubling(Observable::scalar(Scalar::Cos(1)), 1 << 10);
    let g = family(&tr, 1);
    let cfg = NormDecayConfig { ts: vec![0.0], n_max: 60, burn_in: 10, trials: 64, ..Default::default() };
    let report = norm_decay_scan(&tr, &g, 0, &cfg).unwrap();
    assert!(report.rows[0].norms.iter().all(|v| (v - 1.0).abs() <= 1e-9), "{:?}", report.rows[0].norms);
}

#[test]
fn norm_decay_scales_with_t_squared() {
    let tr = doubling(Observable::scalar(Scalar::Cos(1)), 1 << 10);
    let g = family(&tr, 1);
    let report = norm_decay_scan(&tr, &g, 0, &NormDecayConfig::default()).unwrap();
    for r in &report.rows {
        assert!(r.slope() < 0.0, "t = {}: {:?}", r.t, r.fit);
    }
    for (a, b) in [(0.05, 0.1), (0.1, 0.2)] {
        let ratio = report.row(b).unwrap().slope() / report.row(a).unwrap().slope();
        assert!((2.0..=8.0).contains(&ratio), "{a} → {b}: {ratio}");
    }
    assert!(report.uniform_bound_holds(10.0), "{}", report.sup_norm);
    // c ≈ σ²/2 = 1/4.
    assert!(
        (report.row(0.05).unwrap().c - 0.25).abs() <= 0.05,
        "{:?}",
        report.rows.iter().map(|r| r.c).collect::<Vec<_>>()
    );
}

#[test]
fn characteristic_function_matches_direct_quadrature() {
    // Lebesgue is invariant and μ(cos) = 0, so E e^{it S_n} is a plain integral.
    let tr = doubling(Observable::scalar(Scalar::Cos(1)), 1 << 12);
    let g = family(&tr, 1);
    let (n, t) = (8usize, 0.2);
    let m = 1usize << 16;
    let direct: Complex64 = (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) / m as f64;
            let s: f64 = (0..n).map(|k| (2.0 * PI * (1u64 << k) as f64 * x).cos()).sum();
            Complex64::from_polar(1.0, t * s)
        })
        .sum::<Complex64>()
        / m as f64;
    let phi = characteristic(&tr, &g, 0, n, &[t]).unwrap();
    assert!((phi - direct).norm() <= 1e-5, "{phi} vs {direct}");
    assert!((characteristic(&tr, &g, 0, 10, &[0.0]).unwrap() - 1.0).norm() <= 1e-12);
}

#[test]
fn generic_observable_grows_linearly_and_coboundary_fails() {
    let tr = doubling(Observable::scalar(Scalar::Cos(1)), 1 << 12);
    let g = family(&tr, 1);
    let report = variance_growth_check(&tr, &g, &[0, 3], &[64, 256, 1024], &[vec![1.0]], 0.4).unwrap();
    assert!(report.passed());
    assert!((0.45..=0.55).contains(&report.min_ratio), "{}", report.min_ratio);

    let tr = doubling(Observable::coboundary(Scalar::Cos(1)), 1 << 12);
    let g = family(&tr, 1);
    let report = variance_growth_check(&tr, &g, &[0], &[64, 256, 1024], &[vec![1.0]], 0.4).unwrap();
    assert!(!report.passed());
    let w = report.witness.unwrap();
    assert_eq!(w.n, 1024);
    assert!(w.ratio <= 2.0 / 1024.0);
}

#[test]
fn two_dimensional_observable_has_nondegenerate_covariance() {
    let tr = doubling(Observable::vector(&[Scalar::Cos(1), Scalar::Sin(1)]), 1 << 12);
    let g = family(&tr, 1);
    let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, -2.0]];
    let report = variance_growth_check(&tr, &g, &[0], &[64, 128, 512], &dirs, 0.4).unwrap();
    assert!(report.passed());
    assert!(report.min_eigen_ratio.iter().all(|&(_, _, r)| r >= 0.4), "{:?}", report.min_eigen_ratio);
}

#[test]
fn identical_systems_are_stable() {
    let tr = mp(Potential::new(PotentialKind::Cosine, 0.2), 1 << 10);
    let g = family(&tr, 1);
    let r = stability_scan(&tr, &g, &tr, &g, 0, 64, DEFAULT_R0, 1).unwrap();
    assert_eq!(r.epsilon_hat, 0.0);
    assert_eq!(r.sup_ratio, 0.0);
}

#[test]
fn constant_potential_shift_leaves_covariance_unchanged() {
    let a = mp(Potential::new(PotentialKind::Cosine, 0.2), 1 << 11);
    let b = mp(Potential::new(PotentialKind::Cosine, 0.2).shifted(0.7), 1 << 11);
    let (ga, gb) = (family(&a, 1), family(&b, 1));
    let (ca, cb) = (covariance_curve(&a, &ga, 0, 300).unwrap(), covariance_curve(&b, &gb, 0, 300).unwrap());
    for n in 1..=300 {
        assert!((ca.at(n)[0] - cb.at(n)[0]).abs() <= 1e-10, "n = {n}");
    }
}

#[test]
fn covariance_drift_shrinks_with_beta_perturbation() {
    let n = 1 << 11;
    let obs = Observable::scalar(Scalar::Identity);
    let base = mp_beta(0.5, Potential::zero(), obs.clone(), n);
    let gb = family(&base, 1);
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for db in [0.04, 0.02, 0.01] {
        let pert = mp_beta(0.5 + db, Potential::zero(), obs.clone(), n);
        let gp = family(&pert, 1);
        let r = stability_scan(&base, &gb, &pert, &gp, 0, 200, DEFAULT_R0, 3).unwrap();
        assert!(r.epsilon_hat > 0.0 && r.sup_ratio > 0.0);
        assert!(r.sup_ratio < prev.1, "Δβ = {db}: {} after {}", r.sup_ratio, prev.1);
        assert!(r.epsilon_hat < prev.0, "Δβ = {db}: ε̂ {} after {}", r.epsilon_hat, prev.0);
        prev = (r.epsilon_hat, r.sup_ratio);
    }
}
