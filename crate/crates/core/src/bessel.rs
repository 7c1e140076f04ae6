//! Integer-order Bessel functions and the weak-coupling propagator built on them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::chain::ChainParams;
use crate::error::{Error, Result};
use crate::propagator::AffinePropagator;

const RESCALE: f64 = 1e250;

/// J_0(x) ..= J_nmax(x) by Miller's downward recurrence, normalized with
/// J_0 + 2 sum_k J_{2k} = 1.
pub fn bessel_j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    let ax = x.abs();
    if ax == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if ax < 1e-5 {
        // two-term power series, error O(x^4) relative
        let h = 0.5 * ax;
        let mut lead = 1.0;
        for (n, o) in out.iter_mut().enumerate() {
            if n > 0 {
                lead *= h / n as f64;
            }
            *o = lead * (1.0 - h * h / (n as f64 + 1.0));
            if lead == 0.0 {
                break;
            }
        }
    } else {
        let top = nmax.max(ax as usize);
        let mut m = top + 20 + (40.0 * top as f64).sqrt() as usize;
        m += m % 2;
        let mut jp1 = 0.0;
        let mut j = 1e-300;
        let mut sum = if m % 2 == 0 { 2.0 * j } else { 0.0 };
        for k in (1..=m).rev() {
            let jm1 = 2.0 * k as f64 / ax * j - jp1;
            jp1 = j;
            j = jm1;
            let idx = k - 1;
            if idx <= nmax {
                out[idx] = j;
            }
            if idx % 2 == 0 && idx > 0 {
                sum += 2.0 * j;
            }
            if j.abs() > RESCALE {
                j /= RESCALE;
                jp1 /= RESCALE;
                sum /= RESCALE;
                for o in out.iter_mut() {
                    *o /= RESCALE;
                }
            }
        }
        let norm = sum + j;
        for o in out.iter_mut() {
            *o /= norm;
        }
    }
    if x < 0.0 {
        for (n, o) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *o = -*o;
            }
        }
    }
    out
}

/// J_n(x) for any integer order, using J_{-n} = (-1)^n J_n.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let a = n.unsigned_abs() as usize;
    let v = bessel_j_sequence(a, x)[a];
    if n < 0 && a % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Leading large-argument form sqrt(2/(pi x)) cos(x - n pi/2 - pi/4), x > 0.
pub fn bessel_j_asymptotic(n: i64, x: f64) -> f64 {
    (2.0 / (PI * x)).sqrt() * (x - n as f64 * PI / 2.0 - PI / 4.0).cos()
}

fn j_signed(seq: &[f64], r: i64) -> f64 {
    let a = r.unsigned_abs() as usize;
    let v = seq[a];
    if r < 0 && a % 2 == 1 {
        -v
    } else {
        v
    }
}

fn require_bound(params: &ChainParams) -> Result<(f64, f64)> {
    params.validate()?;
    if params.binding <= 0.0 {
        return Err(Error::InvalidParams(
            "the Bessel kernel needs a bound chain (K > 0)".into(),
        ));
    }
    let omega = params.omega()?;
    let gamma = params.gamma()?;
    if gamma > 0.1 {
        log::warn!("gamma = {gamma} is outside the weak-coupling regime of the Bessel kernel");
    }
    Ok((omega, gamma))
}

/// Kernel values and their time derivatives for one offset.
#[derive(Clone, Copy, Debug)]
struct Kernel {
    f: f64,
    g: f64,
    df: f64,
    dg: f64,
}

fn kernel_from(seq: &[f64], r: i64, omega: f64, gamma: f64, t: f64) -> Kernel {
    let j = j_signed(seq, r);
    let dj = 0.5 * (j_signed(seq, r - 1) - j_signed(seq, r + 1));
    let (s, c) = (omega * t - PI * r as f64 / 2.0).sin_cos();
    let a = gamma * omega;
    Kernel {
        f: j * c,
        g: j * s,
        df: a * dj * c - omega * j * s,
        dg: a * dj * s + omega * j * c,
    }
}

/// (f_r, g_r) = J_r(gamma Omega t) (cos, sin)(Omega t - pi r/2).
pub fn bessel_kernel(params: &ChainParams, r: i64, t: f64) -> Result<(f64, f64)> {
    let (omega, gamma) = require_bound(params)?;
    let a = r.unsigned_abs() as usize + 1;
    let seq = bessel_j_sequence(a, gamma * omega * t);
    let k = kernel_from(&seq, r, omega, gamma, t);
    Ok((k.f, k.g))
}

/// Largest usable offset for a chain of this size.
pub fn effective_rmax(params: &ChainParams, r_max: usize) -> usize {
    let n = params.n();
    if params.periodic {
        r_max.min(n / 2)
    } else {
        r_max.min(n.saturating_sub(1))
    }
}

/// sum_{|r| <= r_max} (f_r^2 + g_r^2), which tends to sum_r J_r^2 = 1.
pub fn completeness_sum(params: &ChainParams, t: f64, r_max: usize) -> Result<f64> {
    let (omega, gamma) = require_bound(params)?;
    let seq = bessel_j_sequence(r_max + 1, gamma * omega * t);
    Ok((-(r_max as i64)..=r_max as i64)
        .map(|r| {
            let k = kernel_from(&seq, r, omega, gamma, t);
            k.f * k.f + k.g * k.g
        })
        .sum())
}

/// Weak-coupling propagator assembled from the Bessel kernel, truncated at
/// |offset| <= r_max with periodic wraparound.
pub fn approx_propagator(params: &ChainParams, t: f64, r_max: usize) -> Result<AffinePropagator> {
    let (omega, gamma) = require_bound(params)?;
    if r_max == 0 {
        return Err(Error::InvalidInput("r_max must be at least 1".into()));
    }
    let n = params.n();
    let m = params.mass;
    let rm = effective_rmax(params, r_max);
    if rm < r_max {
        log::info!("r_max {r_max} clamped to {rm} for N = {n}");
    }
    let seq = bessel_j_sequence(rm + 1, gamma * omega * t);
    let kernels: Vec<Kernel> = (-(rm as i64)..=rm as i64)
        .map(|r| kernel_from(&seq, r, omega, gamma, t))
        .collect();

    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for row in 0..n {
        for col in 0..n {
            let mut d = col as i64 - row as i64;
            if params.periodic {
                let ni = n as i64;
                d = d.rem_euclid(ni);
                if 2 * d > ni {
                    d -= ni;
                }
            }
            if d.unsigned_abs() as usize > rm {
                continue;
            }
            let k = kernels[(d + rm as i64) as usize];
            s[(row, col)] = k.f;
            s[(row, n + col)] = k.g / (m * omega);
            s[(n + row, col)] = m * k.df;
            s[(n + row, n + col)] = k.dg / omega;
        }
    }

    let mut drift = DVector::zeros(2 * n);
    if params.has_centers() {
        let v = params.potential_matrix();
        let kb = DVector::from_iterator(n, (0..n).map(|j| params.binding * params.center(j)));
        let q = v
            .cholesky()
            .ok_or_else(|| {
                Error::InvalidParams("potential matrix is not positive definite".into())
            })?
            .solve(&kb);
        let mut xs = DVector::zeros(2 * n);
        xs.rows_mut(0, n).copy_from(&q);
        drift = &xs - &s * &xs;
    }
    Ok(AffinePropagator {
        matrix: s,
        drift,
        time: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::exact_propagator;

    // Reference values to 10 significant digits.
    const TABLE: &[(i64, f64, f64)] = &[
        (0, 1.0, 0.7651976866),
        (1, 1.0, 0.4400505857),
        (0, 10.0, -0.2459357645),
        (1, 10.0, 0.04347274617),
        (5, 2.5, 0.01950162513),
        (3, 50.0, 0.09273480406),
        (10, 3.0, 1.2928351645e-05),
        (2, -4.0, 0.3641281459),
    ];

    #[test]
    fn reference_values() {
        for &(n, x, v) in TABLE {
            let got = bessel_j(n, x);
            assert!(
                (got - v).abs() < 1e-9 * v.abs().max(1e-3),
                "J_{n}({x}) = {got}, want {v}"
            );
        }
    }

    #[test]
    fn symmetry_and_zero() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(4, 0.0), 0.0);
        let x = 7.3;
        assert!((bessel_j(-3, x) + bessel_j(3, x)).abs() < 1e-16);
        assert!((bessel_j(-4, x) - bessel_j(4, x)).abs() < 1e-16);
        assert!((bessel_j(3, -x) + bessel_j(3, x)).abs() < 1e-16);
    }

    #[test]
    fn tiny_argument_series() {
        let x = 1e-7;
        assert!((bessel_j(1, x) - 0.5e-7).abs() < 1e-22);
        assert!((bessel_j(0, x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn large_argument_completeness() {
        for x in [0.3, 12.0, 180.0, 2500.0] {
            let n = x as usize + 60;
            let seq = bessel_j_sequence(n, x);
            let s: f64 = seq[0] * seq[0] + 2.0 * seq[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-10, "x={x}: {s}");
        }
    }

    #[test]
    fn kernel_at_zero_time() {
        let p = ChainParams::new(11, 1.0, 0.01, 1.0);
        assert_eq!(bessel_kernel(&p, 0, 0.0).unwrap(), (1.0, 0.0));
        let (f, g) = bessel_kernel(&p, 2, 0.0).unwrap();
        assert!(f.abs() < 1e-300 && g.abs() < 1e-300);
        assert!(bessel_kernel(&ChainParams::new(3, 1.0, 0.1, 0.0), 0, 1.0).is_err());
    }

    #[test]
    fn approx_at_zero_time() {
        let p = ChainParams::new(9, 1.0, 0.02, 1.0)
            .with_centers((0..9).map(|i| 0.1 * i as f64).collect());
        let gamma = p.gamma().unwrap();
        for r in [1, 3, 40] {
            let s = approx_propagator(&p, 0.0, r).unwrap();
            let id = DMatrix::<f64>::identity(18, 18);
            // position rows are exact; the momentum rows carry the O(gamma) kernel error
            assert!((s.matrix.rows(0, 9) - id.rows(0, 9)).abs().max() < 1e-15);
            let pp = (s.matrix.view((9, 9), (9, 9)) - id.view((9, 9), (9, 9)))
                .abs()
                .max();
            assert!((pp - gamma / 2.0).abs() < 1e-15);
            assert!(s.drift.rows(0, 9).abs().max() < 1e-15);
        }
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        let p = ChainParams::new(31, 1.0, 0.05, 1.0);
        let (om, ga) = (p.omega().unwrap(), p.gamma().unwrap());
        let t = 13.0;
        let h = 1e-5;
        for r in [-3i64, 0, 2, 5] {
            let at = |tt: f64| {
                let seq = bessel_j_sequence(10, ga * om * tt);
                kernel_from(&seq, r, om, ga, tt)
            };
            let k = at(t);
            let fd_f = (at(t + h).f - at(t - h).f) / (2.0 * h);
            let fd_g = (at(t + h).g - at(t - h).g) / (2.0 * h);
            assert!((k.df - fd_f).abs() < 1e-8);
            assert!((k.dg - fd_g).abs() < 1e-8);
        }
    }

    #[test]
    fn approx_tracks_exact_for_weak_coupling() {
        let p = ChainParams::new(61, 1.0, 0.002, 1.0);
        let t = 3.0 / (p.gamma().unwrap() * p.omega().unwrap());
        let a = approx_propagator(&p, t, 30).unwrap();
        let e = exact_propagator(&p, t).unwrap();
        let err = (a.matrix.view((0, 0), (61, 61)) - e.matrix.view((0, 0), (61, 61)))
            .abs()
            .max();
        assert!(err < 0.02, "{err}");
    }
}
