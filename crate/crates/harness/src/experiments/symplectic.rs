use oscchain::propagator::energy_expectation;
use oscchain::{evolve, ChainDynamics};

use super::{random_chain, random_state, rng};
use crate::config::{ExperimentConfig, PropagatorOracle, SymplecticSuite};
use crate::error::Result;
use crate::oracle::ode_oracle;
use crate::output::{num, Check, Outcome, Table};

pub fn suite(config: &mut ExperimentConfig, e: &SymplecticSuite) -> Result<Outcome> {
    let tol_s = config.tolerance("symplectic", 1e-9);
    let tol_e = config.tolerance("energy", 1e-8);
    let mut table = Table::new(
        "symplectic",
        &[
            "case",
            "n",
            "mass",
            "coupling",
            "binding",
            "periodic",
            "t_omega",
            "defect",
            "energy_drift",
        ],
    );
    let (mut worst_s, mut worst_e) = (0.0f64, 0.0f64);
    for case in 0..e.cases {
        let mut r = rng(config.seed, 1 + case as u64);
        let p = random_chain(&mut r, e.n_max);
        let st = random_state(&mut r, p.n());
        let d = ChainDynamics::new(&p)?;
        let w = p.omega()?;
        let e0 = energy_expectation(&st, &p);
        for &tw in &e.times {
            let s = d.propagator(tw / w)?;
            let defect = s.symplectic_defect();
            let drift = (energy_expectation(&evolve(&st, &s)?, &p) - e0).abs() / e0.abs();
            worst_s = worst_s.max(defect);
            worst_e = worst_e.max(drift);
            table.push(vec![
                case.to_string(),
                p.n().to_string(),
                num(p.mass),
                num(p.coupling),
                num(p.binding),
                p.periodic.to_string(),
                num(tw),
                num(defect),
                num(drift),
            ]);
        }
    }
    let mut out = Outcome::default();
    out.checks.push(Check::at_most(
        "symplectic",
        worst_s,
        tol_s,
        format!("max |S^T J S - J| over {} chains", e.cases),
    ));
    out.checks.push(Check::at_most(
        "energy",
        worst_e,
        tol_e,
        "max relative drift of <H>",
    ));
    out.derived.insert("max_symplectic_defect".into(), worst_s);
    out.derived.insert("max_energy_drift".into(), worst_e);
    out.tables.push(table);
    Ok(out)
}

pub fn oracle(config: &mut ExperimentConfig, e: &PropagatorOracle) -> Result<Outcome> {
    let tol = config.tolerance("oracle", 1e-6);
    let mut table = Table::new("propagator_oracle", &["case", "n", "t", "max_abs_error"]);
    let mut worst = 0.0f64;
    for case in 0..e.cases {
        let mut r = rng(config.seed, 1 + case as u64);
        let p = random_chain(&mut r, e.n_max);
        let st = random_state(&mut r, p.n());
        let w = p.omega()?;
        let d = ChainDynamics::new(&p)?;
        let mean0: Vec<f64> = st.mean.iter().copied().collect();
        let traj = ode_oracle(&p, &mean0, e.t_final / w, e.dt / w, e.samples)?;
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let exact = d.propagator(*t)?.apply_mean(&st.mean);
            let err = exact
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(err);
            table.push(vec![case.to_string(), p.n().to_string(), num(*t), num(err)]);
        }
    }
    let mut out = Outcome::default();
    out.checks.push(Check::at_most(
        "oracle",
        worst,
        tol,
        format!("max |exact - RK4| of the means over {} chains", e.cases),
    ));
    out.derived.insert("max_oracle_error".into(), worst);
    out.tables.push(table);
    Ok(out)
}
