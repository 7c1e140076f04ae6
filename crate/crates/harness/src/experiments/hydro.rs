use oscchain::densities::real_space_fields;
use oscchain::hydro::{
    build_local_equilibrium, equilibrium_profile, extract_fields, HydroConfig, HydroSolver,
};
use oscchain::{evolve_marginals, ChainDynamics};

use super::local_equilibrium_fields;
use crate::config::{ExperimentConfig, HydroCompare, HydroFixedPoint, StateSpec};
use crate::error::{HarnessError, Result};
use crate::output::{num, Check, Outcome, Table};

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn fixed_point(config: &mut ExperimentConfig, e: &HydroFixedPoint) -> Result<Outcome> {
    let drift_tol = config.tolerance("drift", 1e-3);
    let mass_tol = config.tolerance("mass", 1e-5);
    let p = config.chain()?.clone();
    let sigma = (e.theta0 / p.binding).sqrt();
    let l = e.half_width * sigma;
    let h0 = equilibrium_profile(&p, e.theta0, -l, l, e.cells)?;
    let cfg = HydroConfig {
        cfl: e.cfl,
        ..Default::default()
    };
    let mut solver = HydroSolver::new(&h0, &p, cfg)?;
    let m0 = h0.mass();
    for _ in 0..e.steps {
        solver.step(f64::INFINITY)?;
    }
    let h = solver.fields();
    let vth = (e.theta0 / p.mass).sqrt();
    let df = rel_l2(&h.f, &h0.f);
    let dth = rel_l2(&h.theta, &h0.theta);
    let dv = (h.v.iter().map(|v| v * v).sum::<f64>() / h.v.len() as f64).sqrt() / vth;
    let dm = (h.mass() - m0).abs();

    let mut out = Outcome::default();
    out.checks.push(Check::at_most(
        "drift",
        df.max(dth).max(dv),
        drift_tol,
        format!(
            "after {} steps: f {df:.2e}, theta {dth:.2e}, v/v_th {dv:.2e}",
            e.steps
        ),
    ));
    out.checks.push(Check::at_most(
        "mass",
        dm,
        mass_tol,
        "|integral of f - initial|",
    ));
    out.derived.insert("t_final".into(), solver.time());
    out.derived.insert("dx".into(), h.grid.dx);
    let mut t = Table::new("fields", &["x", "f_initial", "f", "v", "theta"]);
    for i in 0..h.grid.len {
        t.push(vec![
            num(h.grid.x(i)),
            num(h0.f[i]),
            num(h.f[i]),
            num(h.v[i]),
            num(h.theta[i]),
        ]);
    }
    out.tables.push(t);
    out.documents.push((
        "hydro_run".into(),
        serde_json::json!({
            "scheme": solver.config().scheme(),
            "cfl": e.cfl,
            "dx": h.grid.dx,
            "domain": [-l, l],
            "floors": {
                "density": solver.config().density_floor,
                "temperature": solver.config().temperature_floor,
                "sponge": solver.config().sponge,
            },
        }),
    ));
    Ok(out)
}

pub fn compare(config: &mut ExperimentConfig, e: &HydroCompare) -> Result<Outcome> {
    let tol = config.tolerance("closure", 0.1);
    let p = config.chain()?.clone();
    let spec = config.state()?.clone();
    let StateSpec::LocalEquilibrium { width, .. } = spec else {
        return Err(HarnessError::Config(
            "hydro-compare needs a local-equilibrium state".into(),
        ));
    };
    let h0 = local_equilibrium_fields(&spec, &p, e.window / 2.0)?;
    let st0 = build_local_equilibrium(&h0, &p, width)?;
    let dynamics = ChainDynamics::new(&p)?;
    let gw = p.gamma()? * p.omega()?;
    if !(gw > 0.0) {
        return Err(HarnessError::Config("hydro-compare needs nu^2 > 0".into()));
    }
    let unit = 1.0 / gw;
    let floor = 1.0 / (4.0 * width * width * p.mass);
    let cfg = HydroConfig {
        cfl: e.cfl,
        sponge: e.sponge,
        ..Default::default()
    };
    let mut solver = HydroSolver::new(&h0, &p, cfg)?;
    let grid = h0.grid.clone();

    let mut table = Table::new(
        "discrepancy",
        &[
            "t",
            "t_gamma_omega",
            "f_rel_l2",
            "v_rel_thermal",
            "theta_rel_l2",
            "unmasked",
            "flagged",
        ],
    );
    let mut fields = Table::new("fields", &["source", "t", "x", "f", "v", "theta"]);
    let mut worst = 0.0f64;
    let mut window_end = None;
    let mut all_ok = true;
    for &tg in &e.times {
        let t = tg * unit;
        let st = evolve_marginals(&st0, &dynamics.propagator(t)?)?;
        let ex = extract_fields(&real_space_fields(&st, &p, &grid, e.window)?, &p, e.mask)?;
        solver.advance_to(t)?;
        let hy = solver.fields();
        let idx: Vec<usize> = (0..grid.len).filter(|&i| ex.mask[i]).collect();
        let pick = |a: &[f64]| idx.iter().map(|&i| a[i]).collect::<Vec<f64>>();
        let th_micro: Vec<f64> = idx.iter().map(|&i| ex.fields.theta[i] - floor).collect();
        let f_err = rel_l2(&pick(&ex.fields.f), &pick(&hy.f));
        let th_err = rel_l2(&th_micro, &pick(&hy.theta));
        let cnt = idx.len().max(1) as f64;
        let vth = (pick(&hy.theta).iter().sum::<f64>() / cnt / p.mass).sqrt();
        let dv = pick(&ex.fields.v)
            .iter()
            .zip(pick(&hy.v))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>();
        let v_err = (dv / cnt).sqrt() / vth;
        let err = f_err.max(th_err).max(v_err);
        if tg <= e.assert_until {
            worst = worst.max(err);
        }
        if all_ok && err <= tol {
            window_end = Some(tg);
        } else {
            all_ok = false;
        }
        table.push(vec![
            num(t),
            num(tg),
            num(f_err),
            num(v_err),
            num(th_err),
            idx.len().to_string(),
            ex.flagged.len().to_string(),
        ]);
        for &i in &idx {
            let x = num(grid.x(i));
            fields.push(vec![
                "micro".into(),
                num(t),
                x.clone(),
                num(ex.fields.f[i]),
                num(ex.fields.v[i]),
                num(ex.fields.theta[i] - floor),
            ]);
            fields.push(vec![
                "hydro".into(),
                num(t),
                x,
                num(hy.f[i]),
                num(hy.v[i]),
                num(hy.theta[i]),
            ]);
        }
    }
    let mut out = Outcome::default();
    out.checks.push(Check::at_most(
        "closure",
        worst,
        tol,
        format!(
            "max relative discrepancy for t <= {}/(gamma Omega); agreement holds up to {}",
            e.assert_until,
            window_end.map_or("none".to_string(), |w| format!("{w}/(gamma Omega)"))
        ),
    ));
    out.derived.insert("inv_gamma_omega".into(), unit);
    out.derived.insert(
        "agreement_window_gamma_omega".into(),
        window_end.unwrap_or(0.0),
    );
    out.derived
        .insert("hydro_steps".into(), solver.steps() as f64);
    out.tables.push(table);
    out.tables.push(fields);
    Ok(out)
}
