//! Independent verification oracles: a Monte Carlo sampler over the Gaussian
//! Wigner function and a fixed-step RK4 integrator for the mean equations of
//! motion. Neither shares code with the closed forms they check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use oscchain::{ChainParams, Exec, GaussianState, Which};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Number,
    Momentum,
    Energy,
    KineticFlux,
    EnergyFlux,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    /// Re or Im of sum_j a_j exp(i k q_j)
    SpectralMean { which: Which, k: f64, part: Part },
    /// E|X - EX|^2 of the same sum
    SpectralVariance { which: Which, k: f64 },
    /// sum_j a_j W(x - q_j) with a normalized Gaussian window
    Field {
        kind: FieldKind,
        x: f64,
        window: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    /// |value - mean| in standard errors; 0/0 counts as agreement.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (value - self.mean).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d <= 1e-12 * value.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn sqrt_cov(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = cov.clone().cholesky() {
        return c.l();
    }
    let eig = cov.clone().symmetric_eigen();
    let mut u = eig.eigenvectors;
    for (mut col, &l) in u.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= l.max(0.0).sqrt();
    }
    u
}

struct Sampler<'a> {
    params: &'a ChainParams,
    n: usize,
}

impl Sampler<'_> {
    fn weight(&self, which: Which, q: f64, p: f64, j: usize) -> f64 {
        match which {
            Which::Number => 1.0,
            Which::Momentum => p,
            Which::Energy => {
                let u = q - self.params.center(j);
                p * p / (2.0 * self.params.mass) + 0.5 * self.params.binding * u * u
            }
        }
    }

    fn spectral(&self, z: &DVector<f64>, which: Which, k: f64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..self.n {
            let (q, p) = (z[j], z[self.n + j]);
            s += Complex64::from_polar(self.weight(which, q, p, j), k * q);
        }
        s
    }

    fn field(&self, z: &DVector<f64>, kind: FieldKind, x: f64, window: f64) -> f64 {
        let m = self.params.mass;
        let kb = self.params.binding;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * window * window).sqrt();
        let mut s = 0.0;
        for j in 0..self.n {
            let (q, p) = (z[j], z[self.n + j]);
            let d = (x - q) / window;
            let w = norm * (-0.5 * d * d).exp();
            let u = q - self.params.center(j);
            let a = match kind {
                FieldKind::Number => 1.0,
                FieldKind::Momentum => p,
                FieldKind::Energy => p * p / (2.0 * m) + 0.5 * kb * u * u,
                FieldKind::KineticFlux => p * p / m,
                FieldKind::EnergyFlux => p * p * p / (2.0 * m * m) + 0.5 * kb / m * p * u * u,
            };
            s += a * w;
        }
        s
    }
}

/// Batch-means Monte Carlo estimates of several observables from one set of
/// phase-space samples. Batch b draws from ChaCha8 stream b of `seed`, so
/// results do not depend on the execution strategy.
pub fn mc_oracle(
    state: &GaussianState,
    params: &ChainParams,
    observables: &[Observable],
    samples: usize,
    batches: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if samples < 1000 {
        return Err(HarnessError::Oracle(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    if batches < 2 || samples < 2 * batches {
        return Err(HarnessError::Oracle(format!(
            "{batches} batches for {samples} samples"
        )));
    }
    if state.n() != params.n() {
        return Err(HarnessError::Oracle("state and chain sizes differ".into()));
    }
    for o in observables {
        if let Observable::Field { window, .. } = o {
            if !(*window > 0.0) {
                return Err(HarnessError::Oracle(format!("unsupported window {window}")));
            }
        }
    }
    let n = state.n();
    let l = sqrt_cov(&state.cov);
    let per_batch = samples.div_ceil(batches);
    let sampler = Sampler { params, n };

    let batch_values = Exec::default().map_range(batches, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let mut sums = vec![0.0; observables.len()];
        let mut csums = vec![Complex64::new(0.0, 0.0); observables.len()];
        let mut z = DVector::zeros(2 * n);
        for _ in 0..per_batch {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let x = &state.mean + &l * &z;
            for (i, o) in observables.iter().enumerate() {
                match *o {
                    Observable::SpectralMean { which, k, part } => {
                        let v = sampler.spectral(&x, which, k);
                        sums[i] += if part == Part::Re { v.re } else { v.im };
                    }
                    Observable::SpectralVariance { which, k } => {
                        let v = sampler.spectral(&x, which, k);
                        csums[i] += v;
                        sums[i] += v.norm_sqr();
                    }
                    Observable::Field {
                        kind,
                        x: x0,
                        window,
                    } => {
                        sums[i] += sampler.field(&x, kind, x0, window);
                    }
                }
            }
        }
        let nb = per_batch as f64;
        observables
            .iter()
            .enumerate()
            .map(|(i, o)| match o {
                Observable::SpectralVariance { .. } => {
                    (sums[i] - csums[i].norm_sqr() / nb) / (nb - 1.0)
                }
                _ => sums[i] / nb,
            })
            .collect::<Vec<f64>>()
    });

    let nbat = batches as f64;
    Ok((0..observables.len())
        .map(|i| {
            let mean = batch_values.iter().map(|b| b[i]).sum::<f64>() / nbat;
            let var = batch_values
                .iter()
                .map(|b| (b[i] - mean).powi(2))
                .sum::<f64>()
                / (nbat - 1.0);
            Estimate {
                mean,
                std_error: (var / nbat).sqrt(),
                samples: per_batch * batches,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    /// (q, p) means at each recorded time.
    pub states: Vec<Vec<f64>>,
}

fn forces(params: &ChainParams, q: &[f64], out: &mut [f64]) {
    let n = q.len();
    let (nu2, kb) = (params.coupling, params.binding);
    for j in 0..n {
        out[j] = -kb * (q[j] - params.center(j));
    }
    for j in 0..n {
        let prev = if j > 0 {
            j - 1
        } else if params.periodic && n > 1 {
            n - 1
        } else {
            continue;
        };
        let f = nu2 * (q[j] - q[prev]);
        out[j] -= f;
        out[prev] += f;
    }
}

fn derivative(params: &ChainParams, x: &[f64], out: &mut [f64]) {
    let n = x.len() / 2;
    let m = params.mass;
    for j in 0..n {
        out[j] = x[n + j] / m;
    }
    let (q, _) = x.split_at(n);
    forces(params, q, &mut out[n..]);
}

/// Classic RK4 for dq/dt = p/m, dp/dt = F(q). The step is shrunk so that
/// `records` evenly spaced times from 0 to t_final land on step boundaries.
pub fn ode_oracle(
    params: &ChainParams,
    mean0: &[f64],
    t_final: f64,
    dt: f64,
    records: usize,
) -> Result<OdeTrajectory> {
    params.validate()?;
    if mean0.len() != 2 * params.n() {
        return Err(HarnessError::Oracle(
            "initial mean has the wrong length".into(),
        ));
    }
    if let Ok(w) = params.omega() {
        if w > 0.0 && dt > 0.01 / w * (1.0 + 1e-12) {
            return Err(HarnessError::Oracle(format!(
                "dt = {dt} exceeds 0.01/Omega"
            )));
        }
    }
    if !(dt > 0.0) || !(t_final >= 0.0) || records < 2 {
        return Err(HarnessError::Oracle(
            "need dt > 0, t_final >= 0, records >= 2".into(),
        ));
    }
    let intervals = records - 1;
    let per = ((t_final / dt / intervals as f64).ceil() as usize).max(1);
    let h = t_final / (per * intervals) as f64;
    let d = mean0.len();
    let mut x = mean0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
        vec![0.0; d],
    );
    let mut out = OdeTrajectory {
        times: vec![0.0],
        states: vec![x.clone()],
    };
    for r in 1..=intervals {
        for _ in 0..per {
            derivative(params, &x, &mut k1);
            for i in 0..d {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            derivative(params, &tmp, &mut k2);
            for i in 0..d {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            derivative(params, &tmp, &mut k3);
            for i in 0..d {
                tmp[i] = x[i] + h * k3[i];
            }
            derivative(params, &tmp, &mut k4);
            for i in 0..d {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.times.push(r as f64 * per as f64 * h);
        out.states.push(x.clone());
    }
    Ok(out)
}

/// Classical energy of a phase-space point, with its own bond loop.
pub fn point_energy(params: &ChainParams, x: &[f64]) -> f64 {
    let n = x.len() / 2;
    let mut e = 0.0;
    for j in 0..n {
        let u = x[j] - params.center(j);
        e += x[n + j] * x[n + j] / (2.0 * params.mass) + 0.5 * params.binding * u * u;
        let prev = if j > 0 {
            j - 1
        } else if params.periodic && n > 1 {
            n - 1
        } else {
            continue;
        };
        let d = x[j] - x[prev];
        e += 0.5 * params.coupling * d * d;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_observable_has_zero_error() {
        let st = GaussianState::product(&[0.0, 1.0, 2.0], &[0.0; 3], &[1.0; 3], &[1.0; 3]).unwrap();
        let p = ChainParams::new(3, 1.0, 0.1, 1.0);
        let obs = [Observable::SpectralMean {
            which: Which::Number,
            k: 0.0,
            part: Part::Re,
        }];
        let e = mc_oracle(&st, &p, &obs, 1000, 10, 1).unwrap()[0];
        assert_eq!(e.mean, 3.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn rejects_small_sample_counts() {
        let st = GaussianState::product(&[0.0], &[0.0], &[1.0], &[1.0]).unwrap();
        let p = ChainParams::new(1, 1.0, 0.0, 1.0);
        assert!(mc_oracle(&st, &p, &[], 999, 10, 1).is_err());
    }

    #[test]
    fn two_site_ring_counts_both_bonds() {
        let p = ChainParams::new(2, 1.0, 0.5, 0.0);
        let mut f = [0.0; 2];
        forces(&p, &[1.0, 0.0], &mut f);
        assert_eq!(f, [-1.0, 1.0]);
    }
}
