use oscchain::{evolve, spectral, ChainDynamics, ChainParams, GaussianState, Which};
use oscchain_harness::oracle::{mc_oracle, ode_oracle, point_energy, Observable, Part};

#[test]
fn single_oscillator_returns_after_one_period() {
    let p = ChainParams::new(1, 1.3, 0.0, 0.7);
    let w = p.omega().unwrap();
    let x0 = [0.8, -0.4];
    let tr = ode_oracle(&p, &x0, 2.0 * std::f64::consts::PI / w, 1e-4 / w, 2).unwrap();
    let end = tr.states.last().unwrap();
    for (a, b) in end.iter().zip(&x0) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn energy_drift_is_small() {
    let p = ChainParams::new(6, 1.0, 0.8, 0.5).with_centers(vec![0.0, 0.3, -0.2, 0.1, 0.0, 0.5]);
    let x0: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
    let w = p.omega().unwrap();
    let tr = ode_oracle(&p, &x0, 20.0 / w, 1e-3 / w, 21).unwrap();
    let e0 = point_energy(&p, &x0);
    for s in &tr.states {
        assert!(((point_energy(&p, s) - e0) / e0).abs() < 1e-8);
    }
}

#[test]
fn five_site_chain_matches_exact_propagator() {
    let p = ChainParams::new(5, 0.9, 1.2, 0.4).with_centers(vec![0.1, -0.3, 0.7, 0.0, 0.2]);
    let x0 = [0.5, -0.1, 0.2, 0.9, -0.7, 0.3, 0.0, -0.4, 0.8, 0.1];
    let w = p.omega().unwrap();
    let tr = ode_oracle(&p, &x0, 10.0, 5e-3 / w, 11).unwrap();
    let d = ChainDynamics::new(&p).unwrap();
    let st = GaussianState::product(&x0[..5], &x0[5..], &[1.0; 5], &[1.0; 5]).unwrap();
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let ev = evolve(&st, &d.propagator(*t).unwrap()).unwrap();
        for i in 0..10 {
            assert!((ev.mean[i] - s[i]).abs() < 1e-6, "t = {t}, i = {i}");
        }
    }
}

#[test]
fn ode_rejects_coarse_steps() {
    let p = ChainParams::new(2, 1.0, 1.0, 1.0);
    let w = p.omega().unwrap();
    assert!(ode_oracle(&p, &[0.0; 4], 1.0, 0.02 / w, 2).is_err());
}

#[test]
fn zero_wavenumber_number_is_exact() {
    let p = ChainParams::new(4, 1.0, 0.3, 1.0);
    let st =
        GaussianState::product(&[0.0, 1.0, 2.0, 3.0], &[0.0; 4], &[0.5; 4], &[0.5; 4]).unwrap();
    let obs = [Observable::SpectralMean {
        which: Which::Number,
        k: 0.0,
        part: Part::Re,
    }];
    let e = mc_oracle(&st, &p, &obs, 10_000, 10, 3).unwrap();
    assert_eq!(e[0].mean, 4.0);
    assert_eq!(e[0].std_error, 0.0);
}

#[test]
fn single_particle_spectral_number_within_five_se() {
    let p = ChainParams::new(1, 1.0, 0.0, 1.0);
    let st = GaussianState::product(&[0.4], &[0.2], &[0.6], &[0.8]).unwrap();
    for k in [0.5, 1.3] {
        let m = spectral(&st, &p, Which::Number, k);
        let obs = [
            Observable::SpectralMean {
                which: Which::Number,
                k,
                part: Part::Re,
            },
            Observable::SpectralMean {
                which: Which::Number,
                k,
                part: Part::Im,
            },
            Observable::SpectralVariance {
                which: Which::Number,
                k,
            },
        ];
        let e = mc_oracle(&st, &p, &obs, 100_000, 50, 11).unwrap();
        assert!(e[0].z_score(m.mean.re) < 5.0);
        assert!(e[1].z_score(m.mean.im) < 5.0);
        assert!(e[2].z_score(m.variance) < 5.0);
    }
}

#[test]
fn doubling_samples_shrinks_standard_error() {
    let p = ChainParams::new(3, 1.0, 0.5, 1.0);
    let st = GaussianState::product(&[0.0, 1.0, 2.0], &[0.1; 3], &[0.7; 3], &[0.6; 3]).unwrap();
    let obs = [Observable::SpectralMean {
        which: Which::Number,
        k: 1.0,
        part: Part::Re,
    }];
    let a = mc_oracle(&st, &p, &obs, 40_000, 400, 5).unwrap()[0];
    let b = mc_oracle(&st, &p, &obs, 80_000, 400, 6).unwrap()[0];
    let ratio = b.std_error / a.std_error;
    assert!((0.6..=0.8).contains(&ratio), "ratio {ratio}");
}

#[test]
fn same_seed_same_estimate() {
    let p = ChainParams::new(2, 1.0, 0.5, 1.0);
    let st = GaussianState::product(&[0.0, 1.0], &[0.0; 2], &[0.5; 2], &[0.5; 2]).unwrap();
    let obs = [Observable::SpectralVariance {
        which: Which::Energy,
        k: 0.7,
    }];
    let a = mc_oracle(&st, &p, &obs, 5_000, 10, 42).unwrap();
    let b = mc_oracle(&st, &p, &obs, 5_000, 10, 42).unwrap();
    assert_eq!(a, b);
}
