use nalgebra::{DMatrix, DVector};
use oscchain::densities::correlation_profile;
use oscchain::{ChainDynamics, Exec, GaussianState};

use super::rng;
use crate::config::{ExperimentConfig, Thermalization};
use crate::error::{HarnessError, Result};
use crate::output::{num, Check, Outcome, Table};
use rand::Rng;

struct Sample {
    spread: f64,
    envelope: f64,
    corr_length: f64,
}

pub fn run(config: &mut ExperimentConfig, e: &Thermalization) -> Result<Outcome> {
    let spread_tol = config.tolerance("spread", 0.1);
    let lo = config.tolerance("equilibration_min", 0.3);
    let hi = config.tolerance("equilibration_max", 10.0);
    let base = config.chain()?.clone();
    if !(base.binding > 0.0) {
        return Err(HarnessError::Config("thermalization needs K > 0".into()));
    }
    let steps = (e.t_max / e.dt).round() as usize;
    let per_window = ((e.window / e.dt).round() as usize).max(1);
    let n = base.n();
    let mut out = Outcome::default();
    let mut table = Table::new(
        "thermalization",
        &[
            "gamma",
            "t",
            "t_gamma_omega",
            "momentum_spread",
            "corr_envelope",
            "corr_length",
        ],
    );

    for (gi, &gamma) in e.gammas.iter().enumerate() {
        let mut p = base.clone();
        p.coupling = gamma * p.binding / (1.0 - 2.0 * gamma);
        p.centers.clear();
        let w = p.omega()?;
        let m = p.mass;
        let unit = 1.0 / (gamma * w);
        let mut r = rng(config.seed, 1 + gi as u64);
        let s0 = 1.0 / (2.0 * m * w);
        let mut weights = vec![0.0; 2 * n];
        for j in 0..n {
            let c = 1.0 + e.jitter * (2.0 * r.random::<f64>() - 1.0);
            weights[j] = c * s0;
            weights[n + j] = c * e.momentum_excess * m * w / 2.0;
        }
        let d = ChainDynamics::new(&p)?;
        let periodic = p.periodic;
        let samples: Vec<Result<Sample>> = Exec::default().map_range(steps + 1, |i| {
            let t = i as f64 * e.dt * unit;
            let s = d.propagator(t)?.matrix;
            // product initial state: cov(t) = S diag(weights) S^T
            let mut a = s.rows(0, n).into_owned();
            for (mut col, &wt) in a.column_iter_mut().zip(&weights) {
                col *= wt.sqrt();
            }
            let qq = &a * a.transpose();
            let mut cov = DMatrix::zeros(2 * n, 2 * n);
            cov.view_mut((0, 0), (n, n)).copy_from(&qq);
            let mut vp = Vec::with_capacity(n);
            for j in 0..n {
                let row = s.row(n + j);
                let v: f64 = row.iter().zip(&weights).map(|(x, wt)| x * x * wt).sum();
                cov[(n + j, n + j)] = v;
                vp.push(v);
            }
            let mean_vp = vp.iter().sum::<f64>() / n as f64;
            let sd = (vp.iter().map(|v| (v - mean_vp).powi(2)).sum::<f64>() / n as f64).sqrt();
            let st = GaussianState {
                mean: DVector::zeros(2 * n),
                cov,
            };
            let prof = correlation_profile(&st, periodic);
            let envelope = prof
                .profile
                .iter()
                .skip(1)
                .map(|x| x.abs())
                .fold(0.0, f64::max);
            Ok(Sample {
                spread: sd / mean_vp,
                envelope,
                corr_length: prof.corr_length,
            })
        });
        let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

        let mut t_eq = None;
        for (i, smp) in samples.iter().enumerate() {
            let tg = i as f64 * e.dt;
            if t_eq.is_none() && smp.spread < spread_tol {
                t_eq = Some(tg);
            }
            table.push(vec![
                num(gamma),
                num(tg * unit),
                num(tg),
                num(smp.spread),
                num(smp.envelope),
                num(smp.corr_length),
            ]);
        }
        let windows: Vec<f64> = samples
            .chunks(per_window)
            .map(|c| c.iter().map(|s| s.envelope).fold(0.0, f64::max))
            .collect();
        let (ip, peak) = windows
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        let last = *windows.last().expect("at least one window");
        let rises = ip > 0 && windows[0] < peak;
        let decays = ip + 1 < windows.len() && last < peak;

        let teq = t_eq.unwrap_or(f64::INFINITY);
        out.derived
            .insert(format!("equilibration_time_gamma_{gamma}"), teq * unit);
        out.derived
            .insert(format!("inv_gamma_omega_gamma_{gamma}"), unit);
        out.derived
            .insert(format!("equilibration_gamma_omega_gamma_{gamma}"), teq);
        out.checks.push(Check::within(
            &format!("equilibration_gamma_{gamma}"),
            teq,
            lo,
            hi,
            format!("first t (units 1/(gamma Omega)) with std/mean of (dp_n)^2 < {spread_tol}; allowed [{lo}, {hi}]"),
        ));
        out.checks.push(Check::boolean(
            &format!("correlations_gamma_{gamma}"),
            rises && decays,
            format!(
                "windowed max_r>=1 |rho(r)|: start {:.3}, peak {:.3} in window {ip}, end {:.3}",
                windows[0], peak, last
            ),
        ));
    }
    out.tables.push(table);
    Ok(out)
}
