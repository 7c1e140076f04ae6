use oscchain::densities::real_space_fields;
use oscchain::{evolve, spectral, ChainDynamics, Grid, Which};
use rand::Rng;

use super::{random_chain, random_state, rng};
use crate::config::{ExperimentConfig, MomentOracle};
use crate::error::Result;
use crate::oracle::{mc_oracle, FieldKind, Observable, Part};
use crate::output::{num, Check, Outcome, Table};

const FIELDS: [(FieldKind, &str); 5] = [
    (FieldKind::Number, "n"),
    (FieldKind::Momentum, "g"),
    (FieldKind::Energy, "h"),
    (FieldKind::KineticFlux, "tau"),
    (FieldKind::EnergyFlux, "j"),
];

pub fn run(config: &mut ExperimentConfig, e: &MomentOracle) -> Result<Outcome> {
    let sigma = config.tolerance("sigma", 5.0);
    let mut table = Table::new(
        "moment_oracle",
        &[
            "state",
            "n",
            "observable",
            "argument",
            "closed_form",
            "monte_carlo",
            "std_error",
            "z",
        ],
    );
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for s in 0..e.states {
        let mut r = rng(config.seed, 1 + s as u64);
        let p = random_chain(&mut r, e.n_max);
        let st0 = random_state(&mut r, p.n());
        let t = r.random_range(0.0..20.0) / p.omega()?;
        let st = evolve(&st0, &ChainDynamics::new(&p)?.propagator(t)?)?;
        let n = st.n();
        let mean_dq = (0..n).map(|j| st.var_q(j).sqrt()).sum::<f64>() / n as f64;

        let mut obs = Vec::new();
        let mut labels = Vec::new();
        let mut closed = Vec::new();
        for which in Which::ALL {
            for &kk in &e.wavenumbers {
                let k = kk / mean_dq;
                let m = spectral(&st, &p, which, k);
                for (part, v) in [(Part::Re, m.mean.re), (Part::Im, m.mean.im)] {
                    obs.push(Observable::SpectralMean { which, k, part });
                    labels.push((format!("{which}_mean_{part:?}").to_lowercase(), k));
                    closed.push(v);
                }
                obs.push(Observable::SpectralVariance { which, k });
                labels.push((format!("{which}_variance"), k));
                closed.push(m.variance);
            }
        }
        for _ in 0..e.probes {
            let j = r.random_range(0..n);
            let x = st.q(j) + r.random_range(-0.5..0.5) * mean_dq;
            let window = r.random_range(0.3..1.0) * mean_dq;
            let f = real_space_fields(&st, &p, &Grid::new(x, 0.25 * window, 2)?, window)?;
            let vals = [f.n[0], f.g[0], f.h[0], f.tau[0], f.j[0]];
            for ((kind, name), v) in FIELDS.iter().zip(vals) {
                obs.push(Observable::Field {
                    kind: *kind,
                    x,
                    window,
                });
                labels.push((format!("field_{name}"), x));
                closed.push(v);
            }
        }

        let mc_seed = config.seed ^ ((s as u64 + 1) << 40);
        let est = mc_oracle(&st, &p, &obs, e.samples, e.batches, mc_seed)?;
        for ((lab, c), est) in labels.iter().zip(&closed).zip(&est) {
            let z = est.z_score(*c);
            worst = worst.max(z);
            count += 1;
            table.push(vec![
                s.to_string(),
                n.to_string(),
                lab.0.clone(),
                num(lab.1),
                num(*c),
                num(est.mean),
                num(est.std_error),
                num(z),
            ]);
        }
    }
    let mut out = Outcome::default();
    out.checks.push(Check::at_most(
        "moments",
        worst,
        sigma,
        format!(
            "max |closed - MC| / SE over {count} comparisons on {} states",
            e.states
        ),
    ));
    out.derived.insert("max_z".into(), worst);
    out.tables.push(table);
    Ok(out)
}
