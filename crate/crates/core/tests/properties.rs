use oscchain::bessel::{bessel_j, bessel_j_sequence, completeness_sum};
use oscchain::chain::symplectic_eigenvalues;
use oscchain::densities::{spectral_number, spectral_scan};
use oscchain::propagator::energy_expectation;
use oscchain::{evolve, ChainDynamics, ChainParams, Exec, GaussianState, Which};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ChainParams> {
    (
        1usize..12,
        0.3f64..3.0,
        0.0f64..2.0,
        0.05f64..2.0,
        any::<bool>(),
    )
        .prop_flat_map(|(n, m, nu2, k, periodic)| {
            prop::collection::vec(-2.0f64..2.0, n).prop_map(move |b| {
                let mut p = ChainParams::new(n, m, nu2, k).with_centers(b);
                p.periodic = periodic;
                p
            })
        })
}

fn state(n: usize) -> impl Strategy<Value = GaussianState> {
    (
        prop::collection::vec(-3.0f64..3.0, 2 * n),
        prop::collection::vec((0.1f64..3.0, 1.0f64..4.0), n),
    )
        .prop_map(move |(mean, widths)| {
            let vq: Vec<f64> = widths.iter().map(|w| w.0).collect();
            let vp: Vec<f64> = widths.iter().map(|w| w.1 / (4.0 * w.0)).collect();
            GaussianState::product(&mean[..n], &mean[n..], &vq, &vp).unwrap()
        })
}

fn params_and_state() -> impl Strategy<Value = (ChainParams, GaussianState)> {
    params().prop_flat_map(|p| {
        let n = p.n();
        (Just(p), state(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_flow_is_symplectic(p in params(), t in 0.0f64..50.0) {
        let s = ChainDynamics::new(&p).unwrap().propagator(t).unwrap();
        prop_assert!(s.symplectic_defect() < 1e-9);
    }

    #[test]
    fn flow_is_a_one_parameter_group(p in params(), t1 in 0.0f64..20.0, t2 in 0.0f64..20.0) {
        let d = ChainDynamics::new(&p).unwrap();
        let a = d.propagator(t1).unwrap().then(&d.propagator(t2).unwrap());
        let b = d.propagator(t1 + t2).unwrap();
        prop_assert!((a.matrix - &b.matrix).abs().max() < 1e-9);
        prop_assert!((a.drift - &b.drift).abs().max() < 1e-8);
    }

    #[test]
    fn energy_is_conserved((p, st) in params_and_state(), t in 0.0f64..100.0) {
        let d = ChainDynamics::new(&p).unwrap();
        let e0 = energy_expectation(&st, &p);
        let e1 = energy_expectation(&evolve(&st, &d.propagator(t).unwrap()).unwrap(), &p);
        prop_assert!((e1 - e0).abs() <= 1e-9 * e0.abs().max(1.0), "{e0} -> {e1}");
    }

    #[test]
    fn evolution_preserves_symplectic_spectrum((p, st) in params_and_state(), t in 0.0f64..30.0) {
        let out = evolve(&st, &ChainDynamics::new(&p).unwrap().propagator(t).unwrap()).unwrap();
        prop_assert!((&out.cov - out.cov.transpose()).abs().max() == 0.0);
        let a = symplectic_eigenvalues(&st.cov);
        let b = symplectic_eigenvalues(&out.cov);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-7 * x.max(1.0));
            prop_assert!(*y >= 0.5 - 1e-7);
        }
    }

    #[test]
    fn number_density_at_zero_k_is_sharp((p, st) in params_and_state(), t in 0.0f64..10.0) {
        let out = evolve(&st, &ChainDynamics::new(&p).unwrap().propagator(t).unwrap()).unwrap();
        let m = spectral_number(&out, 0.0);
        prop_assert_eq!(m.mean.re, p.n() as f64);
        prop_assert!(m.variance.abs() < 1e-12);
    }

    #[test]
    fn spectral_variance_is_non_negative((p, st) in params_and_state(), k in 0.0f64..5.0) {
        for which in Which::ALL {
            let m = oscchain::spectral(&st, &p, which, k);
            prop_assert!(m.variance >= -1e-9 * (1.0 + m.mean.norm_sqr()));
        }
    }

    #[test]
    fn execution_strategies_agree((p, st) in params_and_state()) {
        let ks: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let a = spectral_scan(&st, &p, Which::Energy, &ks, Exec::Sequential);
        let b = spectral_scan(&st, &p, Which::Energy, &ks, Exec::default());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bessel_three_term_recurrence(n in 1i64..40, x in 0.01f64..200.0) {
        let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
        let rhs = 2.0 * n as f64 / x * bessel_j(n, x);
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + rhs.abs()), "{lhs} {rhs}");
    }

    #[test]
    fn bessel_sequence_is_complete(x in 0.0f64..500.0) {
        let seq = bessel_j_sequence(x as usize + 50, x);
        let s: f64 = seq[0] * seq[0] + 2.0 * seq[1..].iter().map(|v| v * v).sum::<f64>();
        prop_assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_completeness_saturates(nu2 in 0.001f64..0.05, t in 0.0f64..200.0) {
        let p = ChainParams::new(401, 1.0, nu2, 1.0);
        let arg = p.gamma().unwrap() * p.omega().unwrap() * t;
        let r = arg.ceil() as usize + 25;
        let c = completeness_sum(&p, t, r).unwrap();
        prop_assert!((c - 1.0).abs() < 1e-10);
        prop_assert!(completeness_sum(&p, t, 1).unwrap() <= 1.0 + 1e-12);
    }
}
