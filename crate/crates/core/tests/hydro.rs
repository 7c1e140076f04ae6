use oscchain::densities::real_space_fields;
use oscchain::hydro::{
    build_local_equilibrium, equilibrium_profile, extract_fields, hydro_evolve, hydro_rhs,
    Boundary, HydroConfig, HydroFields, HydroSolver,
};
use oscchain::{ChainParams, Grid};

fn trap() -> ChainParams {
    ChainParams::new(100, 1.0, 0.0, 1.0)
}

fn free() -> ChainParams {
    let mut p = ChainParams::new(100, 1.0, 0.0, 0.0);
    p.free_evolution = true;
    p
}

fn periodic() -> HydroConfig {
    HydroConfig {
        boundary: Boundary::Periodic,
        ..Default::default()
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

fn l1(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

/// Cell averages of a fine solution on a grid `factor` times coarser.
fn restrict(a: &[f64], factor: usize) -> Vec<f64> {
    a.chunks(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect()
}

fn interp(g: &Grid, a: &[f64], x: f64) -> f64 {
    let u = ((x - g.x0) / g.dx).clamp(0.0, (g.len - 1) as f64);
    let i = (u.floor() as usize).min(g.len - 2);
    let w = u - i as f64;
    a[i] * (1.0 - w) + a[i + 1] * w
}

fn perturbed_trap(cells: usize) -> HydroFields {
    let mut h = equilibrium_profile(&trap(), 1.0, -8.0, 8.0, cells).unwrap();
    for i in 0..cells {
        let x = h.grid.x(i);
        let env = (-0.5 * x * x).exp();
        h.v[i] = 0.2 * x.sin() * env;
        h.theta[i] = 1.0 + 0.2 * x.cos() * env;
    }
    h
}

#[test]
fn fixed_point_survives_a_thousand_steps() {
    let h = equilibrium_profile(&trap(), 1.0, -8.0, 8.0, 200).unwrap();
    let mut s = HydroSolver::new(&h, &trap(), HydroConfig::default()).unwrap();
    for _ in 0..1000 {
        s.step(f64::INFINITY).unwrap();
    }
    let out = s.fields();
    assert!(rel_l2(&out.f, &h.f) <= 1e-3);
    assert!(rel_l2(&out.theta, &h.theta) <= 1e-3);
    let vth = 1.0;
    assert!(
        out.v.iter().map(|v| v * v).sum::<f64>().sqrt() / (h.grid.len as f64).sqrt() <= 1e-3 * vth
    );
    assert!((out.f.iter().sum::<f64>() * h.grid.dx - 1.0).abs() <= 1e-5);
}

#[test]
fn mass_is_conserved_under_a_perturbation() {
    let h = perturbed_trap(160);
    let m0 = h.mass();
    let traj = hydro_evolve(&h, &trap(), &HydroConfig::default(), &[0.5, 2.0, 5.0]).unwrap();
    for fr in &traj.frames {
        assert!((fr.mass() - m0).abs() <= 1e-5);
        assert!(fr.f.iter().all(|&f| f >= 0.0));
    }
}

#[test]
fn rhs_of_uniform_free_fluid_vanishes() {
    let g = Grid::cells(0.0, 4.0, 40).unwrap();
    let h = HydroFields::new(g, vec![0.25; 40], vec![-0.4; 40], vec![1.3; 40]).unwrap();
    let r = hydro_rhs(&h, &free(), &periodic()).unwrap();
    assert!(r
        .df
        .iter()
        .chain(&r.dv)
        .chain(&r.dtheta)
        .all(|x| x.abs() < 1e-12));
}

/// v(x, t) for Burgers data v0 = a sin(2 pi x) before crossing, by Newton on x0.
fn characteristic(x: f64, t: f64, a: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut x0 = x;
    for _ in 0..50 {
        let r = x0 + a * (tau * x0).sin() * t - x;
        let d = 1.0 + a * tau * (tau * x0).cos() * t;
        x0 -= r / d;
    }
    a * (tau * x0).sin()
}

#[test]
fn pressureless_flow_follows_characteristics() {
    let a = 0.1;
    let t = 0.5;
    let err = |cells: usize| {
        let g = Grid::cells(0.0, 1.0, cells).unwrap();
        let v: Vec<f64> = g
            .points()
            .iter()
            .map(|x| a * (2.0 * std::f64::consts::PI * x).sin())
            .collect();
        let h = HydroFields::new(g.clone(), vec![1.0; cells], v, vec![0.0; cells]).unwrap();
        let out = hydro_evolve(&h, &free(), &periodic(), &[t]).unwrap();
        let exact: Vec<f64> = g
            .points()
            .iter()
            .map(|&x| characteristic(x, t, a))
            .collect();
        l1(&out.frames[0].v, &exact, g.dx)
    };
    let (e1, e2) = (err(100), err(200));
    assert!(e2 < 1e-3, "{e2}");
    assert!(e1 / e2 >= 3.0, "{e1} {e2}");
}

#[test]
fn grid_refinement_converges() {
    let t = 1.0;
    let run = |cells| {
        let h = perturbed_trap(cells);
        hydro_evolve(&h, &trap(), &HydroConfig::default(), &[t])
            .unwrap()
            .frames
            .remove(0)
    };
    let reference = run(1600);
    let mut errs = Vec::new();
    for cells in [100, 200] {
        let out = run(cells);
        let factor = 1600 / cells;
        let dx = 16.0 / cells as f64;
        let e = l1(&out.f, &restrict(&reference.f, factor), dx)
            + l1(&out.v, &restrict(&reference.v, factor), dx)
            + l1(&out.theta, &restrict(&reference.theta, factor), dx);
        errs.push(e);
    }
    assert!(errs[0] / errs[1] >= 3.0, "{errs:?}");
}

#[test]
fn galilean_boost_commutes_with_evolution() {
    let cells = 200;
    let v0 = 0.5;
    let len = 10.0;
    let dx = len / cells as f64;
    // boost distance of 20 cells
    let t = 20.0 * dx / v0;
    let fields = |cells: usize, boost: f64| {
        let g = Grid::cells(0.0, len, cells).unwrap();
        let tau = 2.0 * std::f64::consts::PI / len;
        let xs = g.points();
        let f = xs
            .iter()
            .map(|x| 0.1 * (1.0 + 0.2 * (tau * x).sin()))
            .collect();
        let v = xs.iter().map(|x| boost + 0.1 * (tau * x).cos()).collect();
        let th = xs
            .iter()
            .map(|x| 1.0 + 0.1 * (2.0 * tau * x).sin())
            .collect();
        HydroFields::new(g, f, v, th).unwrap()
    };
    let evolve = |h: &HydroFields| {
        hydro_evolve(h, &free(), &periodic(), &[t])
            .unwrap()
            .frames
            .remove(0)
    };
    let rest = evolve(&fields(cells, 0.0));
    let moving = evolve(&fields(cells, v0));
    let shifted: Vec<f64> = (0..cells).map(|i| moving.f[(i + 20) % cells]).collect();
    let diff = l1(&shifted, &rest.f, dx);

    let fine = evolve(&fields(2 * cells, 0.0));
    let disc = l1(&rest.f, &restrict(&fine.f, 2), dx);
    assert!(
        diff <= 2.0 * disc.max(1e-12),
        "boost {diff}, discretization {disc}"
    );
}

fn ac9_like() -> (ChainParams, HydroFields, f64) {
    let (k, theta0, s) = (1e-4, 1.0, 5.0);
    let sigma = (theta0 / k as f64).sqrt();
    let p = ChainParams::new(400, 1.0, 0.0, k);
    let cells = (16.0 * sigma / 2.5) as usize;
    let mut h = equilibrium_profile(&p, theta0, -8.0 * sigma, 8.0 * sigma, cells).unwrap();
    let eps = 0.1;
    for i in 0..cells {
        let x = h.grid.x(i);
        let e2 = (-x * x / (2.0 * sigma * sigma)).exp();
        h.f[i] *= 1.0 + eps * (x / sigma).sin() * (-x * x / (8.0 * sigma * sigma)).exp();
        h.v[i] = 1.5 * eps * (x / sigma).sin() * e2;
        h.theta[i] = theta0 * (1.0 + 2.0 * eps * e2 * (x / sigma).cos());
    }
    h.normalize().unwrap();
    (p, h, s)
}

#[test]
fn local_equilibrium_round_trip() {
    let (p, h, s) = ac9_like();
    let state = build_local_equilibrium(&h, &p, s).unwrap();
    let grid = Grid::linspace(-500.0, 500.0, 401).unwrap();
    let field = real_space_fields(&state, &p, &grid, 5.0).unwrap();
    let ex = extract_fields(&field, &p, 0.05).unwrap();
    assert!(ex.flagged.is_empty());
    let floor = 1.0 / (4.0 * s * s);
    let mut checked = 0;
    for i in 0..grid.len {
        if !ex.mask[i] {
            continue;
        }
        checked += 1;
        let x = grid.x(i);
        let f = interp(&h.grid, &h.f, x);
        let v = interp(&h.grid, &h.v, x);
        let th = interp(&h.grid, &h.theta, x);
        assert!((ex.fields.f[i] - f).abs() <= 0.05 * f, "f at {x}");
        assert!((ex.fields.v[i] - v).abs() <= 0.05 * th.sqrt(), "v at {x}");
        assert!(
            (ex.fields.theta[i] - floor - th).abs() <= 0.05 * th,
            "theta at {x}"
        );
        let n = field.n[i];
        let scale = n * th.sqrt();
        assert!((field.g[i] - v * n).abs() <= 0.02 * scale, "g at {x}");
        let tau = (v * v + th) * n;
        assert!((field.tau[i] - tau).abs() <= 0.03 * tau, "tau at {x}");
        let j = (1.5 * v * th + 0.5 * v * v * v) * n + 0.5 * p.binding * x * x * field.g[i];
        let jscale = n * th.powf(1.5) * (1.0 + 0.5 * p.binding * x * x / th);
        assert!((field.j[i] - j).abs() <= 0.03 * jscale, "j at {x}");
    }
    assert!(checked > 100);
}

#[test]
fn inversion_is_homogeneous_in_n() {
    let (p, h, s) = ac9_like();
    let mut p2 = p.clone();
    p2.n_particles = 800;
    let grid = Grid::linspace(-400.0, 400.0, 321).unwrap();
    let a = extract_fields(
        &real_space_fields(&build_local_equilibrium(&h, &p, s).unwrap(), &p, &grid, 5.0).unwrap(),
        &p,
        0.05,
    )
    .unwrap();
    let b = extract_fields(
        &real_space_fields(
            &build_local_equilibrium(&h, &p2, s).unwrap(),
            &p2,
            &grid,
            5.0,
        )
        .unwrap(),
        &p2,
        0.05,
    )
    .unwrap();
    for i in 0..grid.len {
        if a.mask[i] && b.mask[i] {
            assert!((a.fields.f[i] - b.fields.f[i]).abs() <= 0.02 * a.fields.f[i]);
            assert!((a.fields.theta[i] - b.fields.theta[i]).abs() <= 0.02 * a.fields.theta[i]);
            assert!((a.fields.v[i] - b.fields.v[i]).abs() <= 0.02);
        }
    }
}

#[test]
fn step_collapse_is_reported() {
    let h = perturbed_trap(64);
    let cfg = HydroConfig {
        min_dt: 1e3,
        ..Default::default()
    };
    let err = hydro_evolve(&h, &trap(), &cfg, &[1.0]).unwrap_err();
    assert!(err.to_string().contains("collapse"), "{err}");
}
