use oscchain::densities::conservation_residual;
use oscchain::{evolve, ChainDynamics, Grid};

use super::product_state;
use crate::config::{ConservationCheck, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::output::{num, Check, Outcome, Table};

pub fn run(config: &mut ExperimentConfig, e: &ConservationCheck) -> Result<Outcome> {
    let min_order = config.tolerance("order", 1.9);
    let p = config.chain()?.clone();
    let spec = config.state()?.clone();
    let xg = config
        .grids
        .x
        .clone()
        .ok_or_else(|| HarnessError::Config("conservation-check needs grids.x".into()))?;
    if e.levels < 2 || e.samples < 3 {
        return Err(HarnessError::Config(
            "conservation-check needs levels >= 2 and samples >= 3".into(),
        ));
    }
    let st0 = product_state(&spec, &p, config.seed)?;
    let d = ChainDynamics::new(&p)?;
    let unit = 1.0 / p.omega()?;

    let mut table = Table::new(
        "residuals",
        &[
            "level",
            "dt",
            "dx",
            "samples",
            "number_rel",
            "number_abs",
            "momentum_rel",
            "energy_rel",
        ],
    );
    let mut number = Vec::new();
    let mut momentum = Vec::new();
    let mut energy = Vec::new();
    for l in 0..e.levels {
        let scale = (1u64 << l) as f64;
        let dt = e.dt * unit / scale;
        let dx = xg.dx / scale;
        let samples = (e.samples - 1) * (1 << l) + 1;
        let len = ((xg.hi - xg.lo) / dx).round() as usize + 1;
        let grid = Grid::new(xg.lo, dx, len)?;
        let t0 = e.t_start * unit;
        let states = (0..samples)
            .map(|i| Ok(evolve(&st0, &d.propagator(t0 + i as f64 * dt)?)?))
            .collect::<Result<Vec<_>>>()?;
        let r = conservation_residual(&states, dt, &p, &grid, xg.window)?;
        table.push(vec![
            l.to_string(),
            num(dt),
            num(dx),
            samples.to_string(),
            num(r.number.relative),
            num(r.number.absolute),
            num(r.momentum.relative),
            num(r.energy.relative),
        ]);
        number.push(r.number.relative);
        momentum.push(r.momentum.relative);
        energy.push(r.energy.relative);
    }
    let orders = |v: &[f64]| {
        v.windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .collect::<Vec<f64>>()
    };
    let on = orders(&number);
    let worst = on.iter().copied().fold(f64::INFINITY, f64::min);

    let mut out = Outcome::default();
    out.checks.push(Check::at_least(
        "order",
        worst,
        min_order,
        format!("min log2 ratio of number-continuity residuals under dt, dx halving: {on:?}"),
    ));
    for (name, v) in [("momentum", &momentum), ("energy", &energy)] {
        if let Some(o) = orders(v).into_iter().reduce(f64::min) {
            out.derived.insert(format!("{name}_order"), o);
        }
        out.derived.insert(
            format!("{name}_residual_finest"),
            *v.last().expect("levels >= 2"),
        );
    }
    out.derived.insert("number_order".into(), worst);
    out.derived.insert(
        "number_residual_finest".into(),
        *number.last().expect("levels >= 2"),
    );
    out.tables.push(table);
    Ok(out)
}
