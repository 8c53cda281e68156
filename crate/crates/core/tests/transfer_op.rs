use num_complex::Complex64;
use proptest::prelude::*;
use seqrpf::map_zoo::*;
use seqrpf::rpf::{gibbs_family, RpfOptions};
use seqrpf::transfer_op::*;

fn mp_transfer(n: usize) -> Transfer {
    let s = SequentialSystem::homogeneous(
        make_mp_map(0.5).unwrap(),
        Potential::new(PotentialKind::Cosine, 0.2),
        Observable::scalar(Scalar::Identity),
    );
    Transfer::new(s, Grid::new(Space::Interval, n).unwrap()).unwrap()
}

fn doubling(n: usize) -> Transfer {
    let s = SequentialSystem::homogeneous(
        make_linear_expanding(2).unwrap(),
        Potential::zero(),
        Observable::scalar(Scalar::Cos(1)),
    );
    Transfer::new(s, Grid::new(Space::Circle, n).unwrap()).unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linearity(a in values(65), b in values(65), c in -3.0f64..3.0, t in -0.2f64..0.2) {
        let tr = mp_transfer(64);
        let z = [Complex64::new(0.0, t)];
        let ga = GridFunction::from_real_values(0, tr.grid(), &a).unwrap();
        let gb = GridFunction::from_real_values(0, tr.grid(), &b).unwrap();
        let lhs = tr.apply(0, &z, &ga.scale(Complex64::new(c, 0.0)).add(&gb)).unwrap();
        let rhs = tr.apply(0, &z, &ga).unwrap().scale(Complex64::new(c, 0.0)).add(&tr.apply(0, &z, &gb).unwrap());
        prop_assert!(lhs.sub(&rhs).sup_norm() < 1e-12);
    }

    #[test]
    fn positivity(a in prop::collection::vec(0.0f64..1.0, 65), t in -0.2f64..0.2) {
        let tr = mp_transfer(64);
        let g = GridFunction::from_real_values(0, tr.grid(), &a).unwrap();
        let out = tr.apply(0, &[Complex64::new(t, 0.0)], &g).unwrap();
        prop_assert!(out.values.iter().all(|v| v.re >= 0.0 && v.im == 0.0));
    }

    #[test]
    fn composition_matches_iteration(a in values(65), n in 1usize..6) {
        let tr = mp_transfer(64);
        let z = [Complex64::new(0.05, -0.1)];
        let g = GridFunction::from_real_values(0, tr.grid(), &a).unwrap();
        let mut cur = g.clone();
        for k in 0..n as i64 {
            cur = tr.apply(k, &z, &cur).unwrap();
        }
        let comp = tr.compose(0, n, &z, &g).unwrap();
        let plain = comp.into_plain();
        prop_assert!(plain.sub(&cur).sup_norm() <= 1e-12 * cur.sup_norm().max(1.0));
    }

    #[test]
    fn adjoint_pairing(a in values(65), b in values(65)) {
        let tr = mp_transfer(64);
        let z = [Complex64::new(0.1, 0.05)];
        let g = GridFunction::from_real_values(0, tr.grid(), &a).unwrap();
        let w: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let lhs = tr.apply(0, &z, &g).unwrap().pair(&w);
        let rhs = g.pair(&tr.adjoint(0, &z, &w).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }
}

#[test]
fn normalised_operator_fixes_constants() {
    let tr = mp_transfer(256);
    let gibbs = gibbs_family(&tr, 0, 2, &RpfOptions::default().with_depth(120)).unwrap();
    let norm = Normalized::new(&tr, &gibbs).unwrap();
    let one = GridFunction::constant(0, tr.grid(), Complex64::new(1.0, 0.0));
    let out = norm.apply(0, &[0.0], &one).unwrap();
    assert!(out.values.iter().all(|v| (v - 1.0).norm() < 1e-7));
}

#[test]
fn normalised_doubling_is_half_the_operator() {
    let tr = doubling(256);
    let gibbs = gibbs_family(&tr, 0, 1, &RpfOptions::default()).unwrap();
    let norm = Normalized::new(&tr, &gibbs).unwrap();
    let g = GridFunction::from_real(0, tr.grid(), |x| (2.0 * std::f64::consts::PI * x).sin() + x * x);
    let z = [Complex64::new(0.0, 0.2)];
    let a = norm.apply(0, &[0.2], &g).unwrap();
    let b = tr.apply(0, &z, &g).unwrap().scale(Complex64::new(0.5, 0.0));
    assert!(a.sub(&b).sup_norm() < 1e-12);
}

#[test]
fn normalised_sup_norm_not_amplified() {
    let tr = mp_transfer(256);
    let gibbs = gibbs_family(&tr, 0, 1, &RpfOptions::default().with_depth(120)).unwrap();
    let norm = Normalized::new(&tr, &gibbs).unwrap();
    for t in [0.0, 0.1, 0.2] {
        let g = GridFunction::from_real(0, tr.grid(), |x| (7.0 * x).cos());
        let out = norm.compose(0, 5, &[t], &g).unwrap();
        assert!(out.sup_norm() <= g.sup_norm() * (1.0 + 1e-9), "{t}");
    }
}

#[test]
fn centring_only_changes_the_phase() {
    let tr = mp_transfer(256);
    let gibbs = gibbs_family(&tr, 0, 1, &RpfOptions::default().with_depth(120)).unwrap();
    let plain = Normalized::new(&tr, &gibbs).unwrap();
    let mean = plain.mean_observable(0).unwrap()[0];
    let centred = Normalized::new(&tr, &gibbs).unwrap().centred();
    let g = GridFunction::from_real(0, tr.grid(), |x| 1.0 + x);
    let a = plain.apply(0, &[0.2], &g).unwrap().scale(Complex64::from_polar(1.0, -0.2 * mean));
    let b = centred.apply(0, &[0.2], &g).unwrap();
    assert!(a.sub(&b).sup_norm() < 1e-14);
}

#[test]
fn normalisation_needs_zero_parameter() {
    let tr = doubling(64);
    let mut gibbs = gibbs_family(&tr, 0, 1, &RpfOptions::default()).unwrap();
    gibbs.rpf.z = vec![Complex64::new(0.1, 0.0)];
    assert!(Normalized::new(&tr, &gibbs).is_err());
}
