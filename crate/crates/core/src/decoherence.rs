//! Peaking ratios of local densities and the coarse-graining scale below
//! which they stay sharply peaked.

use crate::chain::{ChainParams, GaussianState};
use crate::densities::{number_variance_parts, spectral, SpectralMoment, Which};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Returned by [`peaking_ratio`] when |mean|^2 is too small to divide by.
pub const SATURATED: f64 = f64::INFINITY;

/// R = variance / |mean|^2.
pub fn peaking_ratio(moment: &SpectralMoment) -> f64 {
    let d = moment.mean.norm_sqr();
    if d < 1e-30 {
        SATURATED
    } else {
        moment.variance / d
    }
}

/// k^2 (dX)^2 / N^2 with X the sum of positions.
pub fn smallk_asymptote(state: &GaussianState, k: f64) -> f64 {
    let n = state.n() as f64;
    k * k * state.center_of_mass_variance() / (n * n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceSplit {
    pub diagonal: f64,
    pub cross: f64,
}

impl VarianceSplit {
    pub fn total(&self) -> f64 {
        self.diagonal + self.cross
    }

    pub fn cross_ratio(&self) -> f64 {
        self.cross / self.diagonal
    }
}

/// Splits (dn(k))^2 into the j = n and j != n parts of the double sum.
pub fn variance_decomposition(state: &GaussianState, k: f64) -> VarianceSplit {
    let (diagonal, cross) = number_variance_parts(state, k);
    VarianceSplit { diagonal, cross }
}

/// 0 followed by `points` log-spaced wavenumbers on [1e-3, 10] / <dq>.
pub fn default_k_grid(state: &GaussianState, points: usize) -> Vec<f64> {
    let n = state.n();
    let mean_dq = (0..n).map(|j| state.var_q(j).max(0.0).sqrt()).sum::<f64>() / n as f64;
    let scale = if mean_dq > 0.0 { 1.0 / mean_dq } else { 1.0 };
    log_grid(1e-3 * scale, 10.0 * scale, points)
}

/// 0 followed by `points` log-spaced values on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut ks = vec![0.0];
    if points == 1 {
        ks.push(lo);
    } else if points > 1 {
        let (a, b) = (lo.ln(), hi.ln());
        ks.extend((0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()));
    }
    ks
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleResult {
    pub k_star: f64,
    pub resolved: bool,
    pub notes: Vec<String>,
}

fn scale_from_ratios(ks: &[f64], ratios: &[f64], tolerance: f64) -> (f64, bool) {
    let mut k_star = 0.0;
    let mut resolved = false;
    for (&k, &r) in ks.iter().zip(ratios) {
        if r <= tolerance {
            k_star = k;
            if k > 0.0 {
                resolved = true;
            }
        } else {
            break;
        }
    }
    (k_star, resolved)
}

/// Largest grid k* with R(k) <= tolerance at every grid point up to k*,
/// minimized over the requested density kinds. Kinds whose mean vanishes at
/// k = 0 (e.g. momentum of a state at rest) are skipped with a note.
pub fn decoherence_scale(
    state: &GaussianState,
    params: &ChainParams,
    tolerance: f64,
    k_grid: &[f64],
    kinds: &[Which],
) -> Result<ScaleResult> {
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must lie in (0, 1), got {tolerance}"
        )));
    }
    if k_grid.first() != Some(&0.0) || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "k grid must start at 0 and ascend".into(),
        ));
    }
    let mut notes = Vec::new();
    let mut k_star = f64::INFINITY;
    let mut resolved = true;
    let mut used = 0;
    for &which in kinds {
        let ratios: Vec<f64> = k_grid
            .iter()
            .map(|&k| peaking_ratio(&spectral(state, params, which, k)))
            .collect();
        if ratios[0] == SATURATED {
            notes.push(format!(
                "{which}: mean vanishes at k = 0, ratio saturated; use number or energy diagnostics"
            ));
            continue;
        }
        used += 1;
        let (k, ok) = scale_from_ratios(k_grid, &ratios, tolerance);
        if !ok {
            notes.push(format!("{which}: no decoherent scale resolved on the grid"));
        }
        resolved &= ok;
        k_star = k_star.min(k);
    }
    if used == 0 {
        notes.push("no density kind with a resolvable ratio".into());
        return Ok(ScaleResult {
            k_star: 0.0,
            resolved: false,
            notes,
        });
    }
    if !resolved {
        k_star = 0.0;
    }
    Ok(ScaleResult {
        k_star,
        resolved,
        notes,
    })
}

/// R(k, t) for one density kind over a time series of states.
#[derive(Clone, Debug, PartialEq)]
pub struct PeakingReport {
    pub which: Which,
    pub k_grid: Vec<f64>,
    pub times: Vec<f64>,
    /// ratio[t][k]
    pub ratio: Vec<Vec<f64>>,
    /// asymptote[t][k] = k^2 (dX(t))^2 / N^2
    pub asymptote: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub decoherence_scale: Vec<f64>,
    pub resolved: Vec<bool>,
}

pub fn peaking_report(
    states: &[(f64, GaussianState)],
    params: &ChainParams,
    which: Which,
    k_grid: &[f64],
    tolerance: f64,
    exec: Exec,
) -> PeakingReport {
    let nk = k_grid.len();
    let cells = exec.map_range(states.len() * nk, |c| {
        let (ti, ki) = (c / nk, c % nk);
        let (_, st) = &states[ti];
        let k = k_grid[ki];
        (
            peaking_ratio(&spectral(st, params, which, k)),
            smallk_asymptote(st, k),
        )
    });
    let mut ratio = Vec::with_capacity(states.len());
    let mut asymptote = Vec::with_capacity(states.len());
    let mut decoherence_scale = Vec::with_capacity(states.len());
    let mut resolved = Vec::with_capacity(states.len());
    for row in cells.chunks(nk.max(1)) {
        let r: Vec<f64> = row.iter().map(|c| c.0).collect();
        let (k, ok) = scale_from_ratios(k_grid, &r, tolerance);
        decoherence_scale.push(if ok { k } else { 0.0 });
        resolved.push(ok);
        ratio.push(r);
        asymptote.push(row.iter().map(|c| c.1).collect());
    }
    PeakingReport {
        which,
        k_grid: k_grid.to_vec(),
        times: states.iter().map(|(t, _)| *t).collect(),
        ratio,
        asymptote,
        tolerance,
        decoherence_scale,
        resolved,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::spectral_number;

    fn single(s2: f64) -> (GaussianState, ChainParams) {
        (
            GaussianState::product(&[0.0], &[1.0], &[s2], &[1.0]).unwrap(),
            ChainParams::new(1, 1.0, 0.0, 1.0),
        )
    }

    #[test]
    fn ratio_vanishes_at_zero() {
        let (s, _) = single(0.5);
        assert_eq!(peaking_ratio(&spectral_number(&s, 0.0)), 0.0);
        assert_eq!(smallk_asymptote(&s, 0.0), 0.0);
    }

    #[test]
    fn single_particle_ratio() {
        let s2 = 0.3;
        let (s, _) = single(s2);
        for k in [0.05, 0.7, 2.0] {
            let r = peaking_ratio(&spectral_number(&s, k));
            let expect = (k * k * s2).exp_m1();
            assert!((r - expect).abs() < 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn saturated_sentinel() {
        let m = SpectralMoment {
            k: 1.0,
            mean: num_complex::Complex64::new(1e-16, 0.0),
            variance: 1.0,
            which: Which::Momentum,
        };
        assert_eq!(peaking_ratio(&m), SATURATED);
    }

    #[test]
    fn uncorrelated_asymptote() {
        let n = 10;
        let s = GaussianState::product(&vec![0.0; n], &vec![0.0; n], &vec![0.4; n], &vec![1.0; n])
            .unwrap();
        let k = 0.2;
        assert!((smallk_asymptote(&s, k) - k * k * 0.4 / n as f64).abs() < 1e-15);
        assert_eq!(variance_decomposition(&s, k).cross, 0.0);
    }

    #[test]
    fn single_particle_scale() {
        let s2 = 1.0;
        let (s, p) = single(s2);
        let ks = log_grid(1e-3, 10.0, 60);
        let r = decoherence_scale(&s, &p, 0.01, &ks, &[Which::Number]).unwrap();
        let kmax = (0.01f64.ln_1p() / s2).sqrt();
        let expect = ks
            .iter()
            .copied()
            .filter(|&k| k <= kmax)
            .fold(0.0, f64::max);
        assert!(r.resolved);
        assert_eq!(r.k_star, expect);
    }

    #[test]
    fn zero_only_grid() {
        let (s, p) = single(1.0);
        let r = decoherence_scale(&s, &p, 0.01, &[0.0], &[Which::Number]).unwrap();
        assert_eq!(r.k_star, 0.0);
    }

    #[test]
    fn unresolved_and_skipped_kinds() {
        let s = GaussianState::product(&[0.0], &[0.0], &[100.0], &[1.0]).unwrap();
        let p = ChainParams::new(1, 1.0, 0.0, 1.0);
        let r = decoherence_scale(&s, &p, 0.01, &[0.0, 1.0, 2.0], &Which::ALL).unwrap();
        assert!(!r.resolved);
        assert_eq!(r.k_star, 0.0);
        assert!(r.notes.iter().any(|n| n.starts_with("momentum")));
    }
}
