mod bessel;
mod conservation;
mod decoherence;
mod hydro;
mod moments;
mod symplectic;
mod thermalization;

use std::path::Path;
use std::time::Instant;

use oscchain::hydro::{equilibrium_profile, HydroFields};
use oscchain::{ChainDynamics, ChainParams, GaussianState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    Experiment, ExperimentConfig, KGrid, KUnit, Layout, StateSpec, TimeGrid, TimeUnit,
};
use crate::error::{HarnessError, Result};
use crate::output::{write_outputs, Outcome, RunManifest};

/// Runs the configured experiment in memory. Missing tolerances are filled
/// into `config` so that it becomes the resolved config.
pub fn run(config: &mut ExperimentConfig) -> Result<Outcome> {
    let exp = config.experiment.clone();
    match &exp {
        Experiment::SymplecticSuite(e) => symplectic::suite(config, e),
        Experiment::PropagatorOracle(e) => symplectic::oracle(config, e),
        Experiment::BesselAccuracy(e) => bessel::run(config, e),
        Experiment::MomentOracle(e) => moments::run(config, e),
        Experiment::DecoherenceScan(e) => decoherence::run(config, e),
        Experiment::Thermalization(e) => thermalization::run(config, e),
        Experiment::HydroFixedPoint(e) => hydro::fixed_point(config, e),
        Experiment::HydroCompare(e) => hydro::compare(config, e),
        Experiment::ConservationCheck(e) => conservation::run(config, e),
    }
}

pub struct Run {
    pub config: ExperimentConfig,
    pub outcome: Outcome,
    pub manifest: Option<RunManifest>,
}

/// Runs and, when `out` is given, writes all outputs plus the manifest.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<Run> {
    let mut resolved = config.clone();
    let start = Instant::now();
    let outcome = run(&mut resolved)?;
    let wall = start.elapsed().as_secs_f64();
    let manifest = match out {
        Some(dir) => Some(write_outputs(&resolved, &outcome, wall, dir)?),
        None => None,
    };
    Ok(Run {
        config: resolved,
        outcome,
        manifest,
    })
}

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub(crate) fn time_scale(params: &ChainParams, unit: TimeUnit) -> Result<f64> {
    Ok(match unit {
        TimeUnit::Absolute => 1.0,
        TimeUnit::Omega => 1.0 / params.omega()?,
        TimeUnit::GammaOmega => {
            let g = params.gamma()? * params.omega()?;
            if g <= 0.0 {
                return Err(HarnessError::Config(
                    "time unit 1/(gamma Omega) needs nu^2 > 0".into(),
                ));
            }
            1.0 / g
        }
    })
}

pub(crate) fn times(grid: Option<&TimeGrid>, params: &ChainParams) -> Result<Vec<f64>> {
    match grid {
        None => Ok(vec![0.0]),
        Some(g) => {
            let s = time_scale(params, g.unit)?;
            Ok(g.values.iter().map(|t| t * s).collect())
        }
    }
}

pub(crate) fn max_width(state: &GaussianState) -> f64 {
    (0..state.n())
        .map(|j| state.var_q(j).max(0.0).sqrt())
        .fold(0.0, f64::max)
}

pub(crate) fn k_grid(grid: Option<&KGrid>, state: &GaussianState) -> Vec<f64> {
    match grid {
        None => oscchain::decoherence::default_k_grid(state, 60),
        Some(g) => {
            let s = match g.unit {
                KUnit::Absolute => 1.0,
                KUnit::InverseWidth => 1.0 / max_width(state).max(f64::MIN_POSITIVE),
            };
            oscchain::decoherence::log_grid(g.lo * s, g.hi * s, g.points)
        }
    }
}

/// Product Gaussian initial state; randomness drawn from stream 0 of `seed`.
pub(crate) fn product_state(
    spec: &StateSpec,
    params: &ChainParams,
    seed: u64,
) -> Result<GaussianState> {
    let StateSpec::ProductGaussian {
        layout,
        spread,
        var_q,
        var_p,
        ground_units,
        jitter,
        momentum_spread,
    } = spec
    else {
        return Err(HarnessError::Config(
            "expected a product-gaussian state".into(),
        ));
    };
    let n = params.n();
    let mut r = rng(seed, 0);
    let q: Vec<f64> = match layout {
        Layout::FixedPoint => {
            let x = ChainDynamics::new(params)?.fixed_point();
            (0..n).map(|j| x[j]).collect()
        }
        Layout::Uniform => (0..n)
            .map(|j| -0.5 * spread + spread * (j as f64 + 0.5) / n as f64)
            .collect(),
        Layout::RandomUniform => (0..n).map(|_| spread * (r.random::<f64>() - 0.5)).collect(),
    };
    let (uq, up) = if *ground_units {
        let w = params.omega()?;
        let m = params.mass;
        (1.0 / (2.0 * m * w), m * w / 2.0)
    } else {
        (1.0, 1.0)
    };
    let mut vq = Vec::with_capacity(n);
    let mut vp = Vec::with_capacity(n);
    for _ in 0..n {
        let c = if *jitter > 0.0 {
            1.0 + jitter * (2.0 * r.random::<f64>() - 1.0)
        } else {
            1.0
        };
        vq.push(c * var_q * uq);
        vp.push(c * var_p * up);
    }
    let p: Vec<f64> = (0..n)
        .map(|_| {
            if *momentum_spread > 0.0 {
                let z: f64 = r.sample(rand_distr::StandardNormal);
                momentum_spread * z
            } else {
                0.0
            }
        })
        .collect();
    Ok(GaussianState::product(&q, &p, &vq, &vp)?)
}

/// Hydro fields of a local-equilibrium spec on cells of width `dx`.
pub(crate) fn local_equilibrium_fields(
    spec: &StateSpec,
    params: &ChainParams,
    dx: f64,
) -> Result<HydroFields> {
    let StateSpec::LocalEquilibrium {
        theta0,
        epsilon,
        half_width,
        ..
    } = spec
    else {
        return Err(HarnessError::Config(
            "expected a local-equilibrium state".into(),
        ));
    };
    let sigma = (theta0 / params.binding).sqrt();
    let l = half_width * sigma;
    let cells = (2.0 * l / dx).ceil() as usize;
    let mut h = equilibrium_profile(params, *theta0, -l, l, cells)?;
    let vth = (theta0 / params.mass).sqrt();
    for i in 0..cells {
        let x = h.grid.x(i) / sigma;
        let b = (-0.5 * x * x).exp();
        h.f[i] *= 1.0 + epsilon * x.sin() * (-x * x / 8.0).exp();
        h.v[i] = 1.5 * epsilon * vth * x.sin() * b;
        h.theta[i] = theta0 * (1.0 + 2.0 * epsilon * b * x.cos());
    }
    h.normalize()?;
    Ok(h)
}

/// A random chain for the suites: N in [1, n_max], K > 0, random centers.
pub(crate) fn random_chain(r: &mut ChaCha8Rng, n_max: usize) -> ChainParams {
    let n = r.random_range(1..=n_max);
    let mass = r.random_range(0.5..2.0);
    let coupling = r.random_range(0.0..2.0);
    let binding = r.random_range(0.05..2.0);
    let centers = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut p = ChainParams::new(n, mass, coupling, binding).with_centers(centers);
    p.periodic = r.random_bool(0.5);
    p
}

/// Random product state above the uncertainty bound.
pub(crate) fn random_state(r: &mut ChaCha8Rng, n: usize) -> GaussianState {
    let q: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let p: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let vq: Vec<f64> = (0..n).map(|_| r.random_range(0.2..2.0)).collect();
    let vp: Vec<f64> = vq
        .iter()
        .map(|v| r.random_range(1.0..3.0) / (4.0 * v))
        .collect();
    GaussianState::product(&q, &p, &vq, &vp).expect("valid product state")
}
