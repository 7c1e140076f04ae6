use oscchain::bessel::{approx_propagator, completeness_sum, effective_rmax};
use oscchain::ChainDynamics;

use crate::config::{BesselAccuracy, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::output::{num, Check, Outcome, Table};

pub fn run(config: &mut ExperimentConfig, e: &BesselAccuracy) -> Result<Outcome> {
    let ratio_tol = config.tolerance("error_ratio", 0.5);
    let deficit_tol = config.tolerance("completeness", 1e-8);
    let base = config.chain()?.clone();
    if e.couplings.len() < 2 || e.points < 2 {
        return Err(HarnessError::Config(
            "need at least two couplings and two time points".into(),
        ));
    }
    let n = base.n();
    let mut table = Table::new(
        "bessel_accuracy",
        &[
            "coupling",
            "t",
            "t_gamma_omega",
            "r_max",
            "position_block_error",
            "completeness_deficit",
        ],
    );
    let mut errors = Vec::new();
    let mut worst_deficit = 0.0f64;
    let mut out = Outcome::default();
    for &nu2 in &e.couplings {
        let mut p = base.clone();
        p.coupling = nu2;
        let (w, g) = (p.omega()?, p.gamma()?);
        let d = ChainDynamics::new(&p)?;
        let mut worst = 0.0f64;
        for i in 0..e.points {
            let tg = e.t_max * i as f64 / (e.points - 1) as f64;
            let t = tg / (g * w);
            let r_max = effective_rmax(&p, tg.ceil() as usize + e.r_pad);
            let approx = approx_propagator(&p, t, r_max)?;
            let exact = d.propagator(t)?;
            let diff = approx.matrix.rows(0, n) - exact.matrix.rows(0, n);
            let err = diff.abs().max();
            let deficit = (1.0 - completeness_sum(&p, t, r_max)?).abs();
            worst = worst.max(err);
            worst_deficit = worst_deficit.max(deficit);
            table.push(vec![
                num(nu2),
                num(t),
                num(tg),
                r_max.to_string(),
                num(err),
                num(deficit),
            ]);
        }
        out.derived.insert(format!("max_error_nu2_{nu2}"), worst);
        errors.push(worst);
    }
    let ratio = errors[errors.len() - 1] / errors[0];
    out.checks.push(Check::at_most(
        "error_ratio",
        ratio,
        ratio_tol,
        format!(
            "max position-block error {:.3e} -> {:.3e}",
            errors[0],
            errors[errors.len() - 1]
        ),
    ));
    out.checks.push(Check::at_most(
        "completeness",
        worst_deficit,
        deficit_tol,
        "max |1 - sum_r (f_r^2 + g_r^2)|",
    ));
    out.tables.push(table);
    Ok(out)
}
