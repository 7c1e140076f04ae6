use oscchain::decoherence::{
    decoherence_scale, peaking_ratio, peaking_report, variance_decomposition,
};
use oscchain::densities::{correlation_profile, spectral_number};
use oscchain::{evolve, ChainDynamics, ChainParams, Exec, GaussianState};
use serde_json::json;

use super::{k_grid, max_width, product_state, times};
use crate::config::{DecoherenceCheck, DecoherenceScan, ExperimentConfig};
use crate::error::Result;
use crate::output::{num, Check, Outcome, Table};

fn trajectory(
    p: &ChainParams,
    st0: &GaussianState,
    ts: &[f64],
) -> Result<Vec<(f64, GaussianState)>> {
    let d = ChainDynamics::new(p)?;
    ts.iter()
        .map(|&t| Ok((t, evolve(st0, &d.propagator(t)?)?)))
        .collect()
}

/// Mean spacing between neighbouring mean positions.
fn spacing(st: &GaussianState) -> f64 {
    let n = st.n();
    if n < 2 {
        return 1.0;
    }
    let mut q: Vec<f64> = (0..n).map(|j| st.q(j)).collect();
    q.sort_by(f64::total_cmp);
    (q[n - 1] - q[0]) / (n - 1) as f64
}

pub fn run(config: &mut ExperimentConfig, e: &DecoherenceScan) -> Result<Outcome> {
    let p = config.chain()?.clone();
    let spec = config.state()?.clone();
    let st0 = product_state(&spec, &p, config.seed)?;
    let ts = times(config.grids.t.as_ref(), &p)?;
    let ks = k_grid(config.grids.k.as_ref(), &st0);
    let states = trajectory(&p, &st0, &ts)?;
    let mut out = Outcome::default();

    out.derived.insert("omega".into(), p.omega()?);
    let gamma = p.gamma()?;
    out.derived.insert("gamma".into(), gamma);
    if gamma > 0.0 {
        out.derived
            .insert("inv_gamma_omega".into(), 1.0 / (gamma * p.omega()?));
    }

    let mut table = Table::new("peaking", &["which", "t", "k", "ratio", "asymptote"]);
    for &which in &e.which {
        let rep = peaking_report(&states, &p, which, &ks, e.peaking, Exec::default());
        for (ti, t) in rep.times.iter().enumerate() {
            for (ki, k) in rep.k_grid.iter().enumerate() {
                table.push(vec![
                    which.to_string(),
                    num(*t),
                    num(*k),
                    num(rep.ratio[ti][ki]),
                    num(rep.asymptote[ti][ki]),
                ]);
            }
        }
        out.documents.push((
            format!("peaking_{which}"),
            json!({
                "which": which,
                "tolerance": rep.tolerance,
                "times": rep.times,
                "k_grid": rep.k_grid,
                "decoherence_scale": rep.decoherence_scale,
                "resolved": rep.resolved,
            }),
        ));
    }
    out.tables.push(table);

    let (t_last, st_last) = states.last().expect("at least one time");
    let scale = decoherence_scale(st_last, &p, e.peaking, &ks, &e.which)?;
    out.derived.insert("k_star".into(), scale.k_star);
    out.derived.insert("t_final".into(), *t_last);
    let prof = correlation_profile(st_last, p.periodic);
    out.derived.insert("corr_length".into(), prof.corr_length);

    for check in &e.checks {
        match check {
            DecoherenceCheck::ZeroK => {
                let tol = config.tolerance("zero_k", 0.0);
                let worst = states
                    .iter()
                    .map(|(_, s)| peaking_ratio(&spectral_number(s, 0.0)))
                    .fold(0.0, f64::max);
                out.checks.push(Check::at_most(
                    "zero_k",
                    worst,
                    tol,
                    "max over t of R_number(k = 0)",
                ));
            }
            DecoherenceCheck::Asymptote => {
                let tol = config.tolerance("asymptote", 0.05);
                let mut worst = 0.0f64;
                let mut used = 0;
                for (_, s) in &states {
                    let w = max_width(s);
                    for &k in ks
                        .iter()
                        .filter(|&&k| k > 0.0 && k * w <= e.asymptote_cutoff)
                    {
                        let r = peaking_ratio(&spectral_number(s, k));
                        let a = oscchain::decoherence::smallk_asymptote(s, k);
                        worst = worst.max((r / a - 1.0).abs());
                        used += 1;
                    }
                }
                if used == 0 {
                    worst = f64::INFINITY;
                }
                out.checks.push(Check::at_most(
                    "asymptote",
                    worst,
                    tol,
                    format!("max |R / (k^2 dX^2 / N^2) - 1| over {used} small-k points"),
                ));
            }
            DecoherenceCheck::NScaling => {
                let tol = config.tolerance("n_scaling", 0.2);
                let mut scaled = Vec::new();
                let mut t2 = Table::new("n_scaling", &["n", "k", "ratio", "ratio_times_n"]);
                for &n in &e.n_scaling {
                    let mut pn = p.clone();
                    pn.n_particles = n;
                    pn.centers.clear();
                    let s = product_state(&spec, &pn, config.seed)?;
                    let k = e.scaling_k / max_width(&s);
                    let r = peaking_ratio(&spectral_number(&s, k));
                    scaled.push(r * n as f64);
                    t2.push(vec![n.to_string(), num(k), num(r), num(r * n as f64)]);
                }
                let worst = scaled
                    .iter()
                    .map(|x| (x / scaled[0] - 1.0).abs())
                    .fold(0.0, f64::max);
                out.checks.push(Check::at_most(
                    "n_scaling",
                    if scaled.is_empty() {
                        f64::INFINITY
                    } else {
                        worst
                    },
                    tol,
                    format!("max relative spread of R N across N = {:?}", e.n_scaling),
                ));
                out.tables.push(t2);
            }
            DecoherenceCheck::Crossover => crossover(config, &p, &states, &ks, &mut out)?,
        }
    }
    Ok(out)
}

fn crossover(
    config: &mut ExperimentConfig,
    p: &ChainParams,
    states: &[(f64, GaussianState)],
    ks: &[f64],
    out: &mut Outcome,
) -> Result<()> {
    let factor = config.tolerance("crossover_factor", 3.0);
    let peak_tol = config.tolerance("small_k_peaking", 0.05);
    let mut t3 = Table::new(
        "crossover",
        &[
            "t",
            "corr_length",
            "k_crossover",
            "k_half_width",
            "max_small_k_ratio",
        ],
    );
    let mut worst_factor = 0.0f64;
    let mut worst_peak = 0.0f64;
    for (t, s) in states {
        let xi = correlation_profile(s, p.periodic).corr_length * spacing(s);
        let ratios: Vec<(f64, f64)> = ks
            .iter()
            .filter(|&&k| k > 0.0)
            .map(|&k| (k, variance_decomposition(s, k).cross_ratio()))
            .collect();
        let kc = ratios.iter().find(|(_, r)| r.abs() >= 1.0).map(|(k, _)| *k);
        let half = ratios.first().and_then(|(_, r0)| {
            ratios
                .iter()
                .find(|(_, r)| r.abs() <= 0.5 * r0.abs())
                .map(|(k, _)| *k)
        });
        let off = match kc {
            Some(k) if xi.is_finite() => (k * xi).ln().abs() / factor.ln(),
            _ => f64::INFINITY,
        };
        worst_factor = worst_factor.max(off);
        let peak = ks
            .iter()
            .filter(|&&k| k > 0.0 && k * xi <= 0.1)
            .map(|&k| peaking_ratio(&spectral_number(s, k)))
            .fold(0.0, f64::max);
        worst_peak = worst_peak.max(peak);
        t3.push(vec![
            num(*t),
            num(xi),
            num(kc.unwrap_or(f64::NAN)),
            num(half.unwrap_or(f64::NAN)),
            num(peak),
        ]);
    }
    out.checks.push(Check::at_most(
        "crossover",
        worst_factor,
        1.0,
        format!("max |ln(k_c xi)| / ln {factor}; 1 means a factor {factor}"),
    ));
    out.checks.push(Check::at_most(
        "small_k_peaking",
        worst_peak,
        peak_tol,
        "max R_number over 0 < k xi <= 0.1",
    ));
    out.tables.push(t3);
    Ok(())
}
