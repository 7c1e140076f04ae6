//! Local densities of Gaussian states.
//!
//! Spectral moments are evaluated at the classical-moment (Wigner symbol)
//! level. For a linear form a.z the Gaussian identity
//! E[P(z) exp(a.z)] = exp(a.mu + a^T Sigma a / 2) E[P(z~)], z~ ~ N(mu + Sigma a, Sigma)
//! reduces every moment to polynomial moments with complex-shifted means.
//! Real-space fields use a Gaussian window of width `window`, so particle j
//! contributes a Gaussian of variance (dq_j)^2 + window^2 times conditional
//! moments of (q_j, p_j) given the kernel.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainParams, GaussianState};
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Number,
    Momentum,
    Energy,
}

impl Which {
    pub const ALL: [Which; 3] = [Which::Number, Which::Momentum, Which::Energy];

    pub fn as_str(self) -> &'static str {
        match self {
            Which::Number => "number",
            Which::Momentum => "momentum",
            Which::Energy => "energy",
        }
    }
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralMoment {
    pub k: f64,
    pub mean: Complex64,
    pub variance: f64,
    pub which: Which,
}

fn clamp_variance(v: f64, mean: Complex64) -> f64 {
    if v < 0.0 {
        if v < -1e-12 * mean.norm_sqr() {
            log::debug!(
                "negative variance {v} clamped to zero (|mean|^2 = {})",
                mean.norm_sqr()
            );
        }
        0.0
    } else {
        v
    }
}

/// c_j = <exp(i k q_j)>
fn phase_factors(state: &GaussianState, k: f64) -> Vec<Complex64> {
    (0..state.n())
        .map(|j| Complex64::from_polar((-0.5 * k * k * state.var_q(j)).exp(), k * state.q(j)))
        .collect()
}

/// Diagonal (j = n) and cross (j != n) parts of the number variance.
pub fn number_variance_parts(state: &GaussianState, k: f64) -> (f64, f64) {
    let n = state.n();
    let c = phase_factors(state, k);
    let k2 = k * k;
    let mut diag = 0.0;
    for j in 0..n {
        diag += c[j].norm_sqr() * (k2 * state.var_q(j)).exp_m1();
    }
    let mut cross = 0.0;
    for j in 0..n {
        for l in (j + 1)..n {
            cross += 2.0 * (c[j] * c[l].conj()).re * (k2 * state.cov_qq(j, l)).exp_m1();
        }
    }
    (diag, cross)
}

/// n(k) = sum_j exp(i k q_j)
pub fn spectral_number(state: &GaussianState, k: f64) -> SpectralMoment {
    let mean: Complex64 = phase_factors(state, k).iter().sum();
    let (d, c) = number_variance_parts(state, k);
    SpectralMoment {
        k,
        mean,
        variance: clamp_variance(d + c, mean),
        which: Which::Number,
    }
}

/// g(k) = sum_j p_j exp(i k q_j)
pub fn spectral_momentum(state: &GaussianState, k: f64) -> SpectralMoment {
    let n = state.n();
    let ik = Complex64::new(0.0, k);
    let c = phase_factors(state, k);
    let single: Vec<Complex64> = (0..n)
        .map(|j| c[j] * (state.p(j) + ik * state.cov_qp(j, j)))
        .collect();
    let mean: Complex64 = single.iter().sum();

    let pair = |j: usize, l: usize| -> Complex64 {
        let cjl = c[j] * c[l].conj() * (k * k * state.cov_qq(j, l)).exp();
        let mj = state.p(j) + ik * (state.cov_qp(j, j) - state.cov_qp(l, j));
        let ml = state.p(l) + ik * (state.cov_qp(j, l) - state.cov_qp(l, l));
        cjl * (mj * ml + state.cov_pp(j, l)) - single[j] * single[l].conj()
    };
    let mut var = 0.0;
    for j in 0..n {
        var += pair(j, j).re;
        for l in (j + 1)..n {
            var += 2.0 * pair(j, l).re;
        }
    }
    SpectralMoment {
        k,
        mean,
        variance: clamp_variance(var, mean),
        which: Which::Momentum,
    }
}

/// E[x^2 y^2] for jointly Gaussian x, y with (possibly complex) means.
fn fourth(mx: Complex64, my: Complex64, sxx: f64, syy: f64, sxy: f64) -> Complex64 {
    (mx * mx + sxx) * (my * my + syy) + 2.0 * sxy * sxy + 4.0 * mx * my * sxy
}

/// h(k) = sum_j [p_j^2/2m + K/2 (q_j - b_j)^2] exp(i k q_j), interaction term excluded.
pub fn spectral_energy(state: &GaussianState, params: &ChainParams, k: f64) -> SpectralMoment {
    let n = state.n();
    let ik = Complex64::new(0.0, k);
    let alpha = 0.5 / params.mass;
    let beta = 0.5 * params.binding;
    let c = phase_factors(state, k);
    let single: Vec<Complex64> = (0..n)
        .map(|j| {
            let mp = state.p(j) + ik * state.cov_qp(j, j);
            let mu = state.q(j) - params.center(j) + ik * state.var_q(j);
            c[j] * (alpha * (mp * mp + state.var_p(j)) + beta * (mu * mu + state.var_q(j)))
        })
        .collect();
    let mean: Complex64 = single.iter().sum();

    let pair = |j: usize, l: usize| -> Complex64 {
        // tilt by i k (e_{q_j} - e_{q_l})
        let shift_q = |a: usize| ik * (state.cov_qq(a, j) - state.cov_qq(a, l));
        let shift_p = |a: usize| ik * (state.cov_qp(j, a) - state.cov_qp(l, a));
        let mpj = state.p(j) + shift_p(j);
        let mpl = state.p(l) + shift_p(l);
        let muj = state.q(j) - params.center(j) + shift_q(j);
        let mul = state.q(l) - params.center(l) + shift_q(l);
        let e_pp = fourth(mpj, mpl, state.var_p(j), state.var_p(l), state.cov_pp(j, l));
        let e_pu = fourth(mpj, mul, state.var_p(j), state.var_q(l), state.cov_qp(l, j));
        let e_up = fourth(muj, mpl, state.var_q(j), state.var_p(l), state.cov_qp(j, l));
        let e_uu = fourth(muj, mul, state.var_q(j), state.var_q(l), state.cov_qq(j, l));
        let cjl = c[j] * c[l].conj() * (k * k * state.cov_qq(j, l)).exp();
        cjl * (alpha * alpha * e_pp + alpha * beta * (e_pu + e_up) + beta * beta * e_uu)
            - single[j] * single[l].conj()
    };
    let mut var = 0.0;
    for j in 0..n {
        var += pair(j, j).re;
        for l in (j + 1)..n {
            var += 2.0 * pair(j, l).re;
        }
    }
    SpectralMoment {
        k,
        mean,
        variance: clamp_variance(var, mean),
        which: Which::Energy,
    }
}

pub fn spectral(
    state: &GaussianState,
    params: &ChainParams,
    which: Which,
    k: f64,
) -> SpectralMoment {
    match which {
        Which::Number => spectral_number(state, k),
        Which::Momentum => spectral_momentum(state, k),
        Which::Energy => spectral_energy(state, params, k),
    }
}

/// One density over a wavenumber grid; each k is independent.
pub fn spectral_scan(
    state: &GaussianState,
    params: &ChainParams,
    which: Which,
    ks: &[f64],
    exec: Exec,
) -> Vec<SpectralMoment> {
    exec.map(ks, |&k| spectral(state, params, which, k))
}

/// Uniform grid x_i = x0 + i dx, i < len.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(x0: f64, dx: f64, len: usize) -> Result<Self> {
        if !(dx > 0.0) || len < 2 || !x0.is_finite() {
            return Err(Error::InvalidGrid(format!("x0={x0}, dx={dx}, len={len}")));
        }
        Ok(Grid { x0, dx, len })
    }

    /// `len` points from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if len < 2 || !(hi > lo) {
            return Err(Error::InvalidGrid(format!(
                "[{lo}, {hi}] with {len} points"
            )));
        }
        Grid::new(lo, (hi - lo) / (len - 1) as f64, len)
    }

    /// Centers of `cells` equal cells covering [lo, hi].
    pub fn cells(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if cells < 2 || !(hi > lo) {
            return Err(Error::InvalidGrid(format!(
                "[{lo}, {hi}] with {cells} cells"
            )));
        }
        let dx = (hi - lo) / cells as f64;
        Grid::new(lo + 0.5 * dx, dx, cells)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.x(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureOptions {
    /// Cells with n < floor_rel * max(n) are masked.
    pub floor_rel: f64,
    /// Use the raw (dp_j)^2 instead of the conditional variance.
    pub raw_variance: bool,
}

impl Default for TemperatureOptions {
    fn default() -> Self {
        TemperatureOptions {
            floor_rel: 1e-6,
            raw_variance: false,
        }
    }
}

/// Coarse-grained real-space fields on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub grid: Grid,
    pub window: f64,
    pub n: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub tau: Vec<f64>,
    pub j: Vec<f64>,
    /// theta = kT where n is above the floor, None elsewhere.
    pub temperature: Vec<Option<f64>>,
    /// sum_j E[(q_j - b_j) W(x - q_j)], the smeared trap displacement.
    pub displacement: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Particle {
    q: f64,
    u: f64,
    p: f64,
    sqq: f64,
    spp: f64,
    sqp: f64,
}

fn particles(state: &GaussianState, params: &ChainParams) -> Vec<Particle> {
    (0..state.n())
        .map(|j| Particle {
            q: state.q(j),
            u: state.q(j) - params.center(j),
            p: state.p(j),
            sqq: state.var_q(j),
            spp: state.var_p(j),
            sqp: state.cov_qp(j, j),
        })
        .collect()
}

#[derive(Clone, Copy, Default)]
struct PointFields {
    n: f64,
    g: f64,
    h: f64,
    tau: f64,
    j: f64,
    heat: f64,
    disp: f64,
}

fn point_fields(
    x: f64,
    parts: &[Particle],
    window2: f64,
    m: f64,
    kb: f64,
    raw_variance: bool,
) -> PointFields {
    let mut acc = PointFields::default();
    for pt in parts {
        let tot = pt.sqq + window2;
        let lam = 1.0 / tot;
        let dx = x - pt.q;
        let w = (-0.5 * dx * dx * lam).exp() / (2.0 * PI * tot).sqrt();
        if w == 0.0 {
            continue;
        }
        let mu = pt.u + pt.sqq * lam * dx;
        let vq = pt.sqq * window2 * lam;
        let mp = pt.p + pt.sqp * lam * dx;
        let vp = (pt.spp - pt.sqp * pt.sqp * lam).max(0.0);
        let cqp = pt.sqp * window2 * lam;
        let p2 = mp * mp + vp;
        let u2 = mu * mu + vq;
        let p3 = mp * mp * mp + 3.0 * mp * vp;
        let pu2 = mp * u2 + 2.0 * mu * cqp;
        acc.n += w;
        acc.g += w * mp;
        acc.tau += w * p2 / m;
        acc.h += w * (p2 / (2.0 * m) + 0.5 * kb * u2);
        acc.j += w * (p3 / (2.0 * m * m) + 0.5 * kb / m * pu2);
        acc.heat += w * if raw_variance { pt.spp } else { vp };
        acc.disp += w * mu;
    }
    acc
}

fn check_window(grid: &Grid, window: f64) -> Result<()> {
    if !(window > 0.0) {
        return Err(Error::InvalidInput(format!(
            "window must be positive, got {window}"
        )));
    }
    if grid.dx > 0.5 * window * (1.0 + 1e-12) {
        return Err(Error::InvalidGrid(format!(
            "grid spacing {} does not resolve window {window} (need dx <= window/2)",
            grid.dx
        )));
    }
    Ok(())
}

pub fn real_space_fields_with(
    state: &GaussianState,
    params: &ChainParams,
    grid: &Grid,
    window: f64,
    opts: &TemperatureOptions,
    exec: Exec,
) -> Result<DensityField> {
    check_window(grid, window)?;
    if state.n() != params.n() {
        return Err(Error::Dimension {
            expected: params.n(),
            got: state.n(),
        });
    }
    let parts = particles(state, params);
    let w2 = window * window;
    let xs = grid.points();
    let pts = exec.map(&xs, |&x| {
        point_fields(
            x,
            &parts,
            w2,
            params.mass,
            params.binding,
            opts.raw_variance,
        )
    });
    let nmax = pts.iter().fold(0.0f64, |a, p| a.max(p.n));
    let floor = opts.floor_rel * nmax;
    let temperature = pts
        .iter()
        .map(|p| {
            if p.n > floor && p.n > 0.0 {
                Some(p.heat / (params.mass * p.n))
            } else {
                None
            }
        })
        .collect();
    Ok(DensityField {
        grid: grid.clone(),
        window,
        n: pts.iter().map(|p| p.n).collect(),
        g: pts.iter().map(|p| p.g).collect(),
        h: pts.iter().map(|p| p.h).collect(),
        tau: pts.iter().map(|p| p.tau).collect(),
        j: pts.iter().map(|p| p.j).collect(),
        temperature,
        displacement: pts.iter().map(|p| p.disp).collect(),
    })
}

pub fn real_space_fields(
    state: &GaussianState,
    params: &ChainParams,
    grid: &Grid,
    window: f64,
) -> Result<DensityField> {
    real_space_fields_with(
        state,
        params,
        grid,
        window,
        &TemperatureOptions::default(),
        Exec::default(),
    )
}

/// theta(x) from the conditional momentum variance, None where masked.
pub fn temperature_field(
    state: &GaussianState,
    params: &ChainParams,
    grid: &Grid,
    window: f64,
    opts: &TemperatureOptions,
) -> Result<Vec<Option<f64>>> {
    Ok(real_space_fields_with(state, params, grid, window, opts, Exec::default())?.temperature)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationProfile {
    /// Mean normalized sigma(q_j, q_{j+r}) for r = 0, 1, ...
    pub profile: Vec<f64>,
    /// First r with |profile| < 1/e, linearly interpolated; infinite if none.
    pub corr_length: f64,
    /// Sites dropped because (dq_j)^2 = 0.
    pub excluded: usize,
}

pub fn correlation_profile(state: &GaussianState, periodic: bool) -> CorrelationProfile {
    let n = state.n();
    let sd: Vec<f64> = (0..n).map(|j| state.var_q(j).max(0.0).sqrt()).collect();
    let excluded = sd.iter().filter(|&&s| s == 0.0).count();
    if excluded > 0 {
        log::info!(
            "{excluded} sites with zero position variance excluded from the correlation profile"
        );
    }
    let rmax = if periodic { n / 2 } else { n - 1 };
    let mut profile = Vec::with_capacity(rmax + 1);
    for r in 0..=rmax {
        let mut sum = 0.0;
        let mut cnt = 0usize;
        let last = if periodic { n } else { n - r };
        for j in 0..last {
            let l = (j + r) % n;
            if sd[j] > 0.0 && sd[l] > 0.0 {
                sum += state.cov_qq(j, l) / (sd[j] * sd[l]);
                cnt += 1;
            }
        }
        profile.push(if cnt > 0 { sum / cnt as f64 } else { 0.0 });
    }
    let thr = (-1.0f64).exp();
    let mut corr_length = f64::INFINITY;
    for r in 1..profile.len() {
        let b = profile[r].abs();
        if b < thr {
            let a = profile[r - 1].abs();
            corr_length = if a > b {
                (r - 1) as f64 + (a - thr) / (a - b)
            } else {
                r as f64
            };
            break;
        }
    }
    CorrelationProfile {
        profile,
        corr_length,
        excluded,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualNorm {
    /// ||r|| / max(term norms)
    pub relative: f64,
    pub absolute: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservationResiduals {
    pub number: ResidualNorm,
    pub momentum: ResidualNorm,
    pub energy: ResidualNorm,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(dt_term: &[f64], dx_terms: &[&[f64]]) -> ResidualNorm {
    let mut r = dt_term.to_vec();
    let mut scale = l2(dt_term);
    for t in dx_terms {
        for (a, b) in r.iter_mut().zip(t.iter()) {
            *a += b;
        }
        scale = scale.max(l2(t));
    }
    let absolute = l2(&r);
    ResidualNorm {
        relative: if scale > 0.0 {
            absolute / scale
        } else {
            absolute
        },
        absolute,
    }
}

/// Centered-difference residuals of the three local conservation laws
///   dn/dt + (1/m) dg/dx = 0
///   dg/dt + dtau/dx + K sum_j E[(q_j - b_j) W_j] = 0
///   dh/dt + dj/dx = 0
/// evaluated at interior time samples and interior grid points.
pub fn conservation_residual(
    states: &[GaussianState],
    dt: f64,
    params: &ChainParams,
    grid: &Grid,
    window: f64,
) -> Result<ConservationResiduals> {
    if states.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 time samples, got {}",
            states.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if let Ok(w) = params.omega() {
        if dt > 0.01 / w {
            log::warn!(
                "time step {dt} exceeds 0.01/Omega; residuals may be dominated by time error"
            );
        }
    }
    let fields = states
        .iter()
        .map(|s| real_space_fields(s, params, grid, window))
        .collect::<Result<Vec<_>>>()?;
    let m = params.mass;
    let kb = params.binding;
    let nx = grid.len;
    let (mut dtn, mut dxg) = (Vec::new(), Vec::new());
    let (mut dtg, mut dxtau, mut src) = (Vec::new(), Vec::new(), Vec::new());
    let (mut dth, mut dxj) = (Vec::new(), Vec::new());
    for t in 1..fields.len() - 1 {
        let (a, b, c) = (&fields[t - 1], &fields[t], &fields[t + 1]);
        for i in 1..nx - 1 {
            let ddt = |f: &Vec<f64>, g: &Vec<f64>| (g[i] - f[i]) / (2.0 * dt);
            let ddx = |f: &Vec<f64>| (f[i + 1] - f[i - 1]) / (2.0 * grid.dx);
            dtn.push(ddt(&a.n, &c.n));
            dxg.push(ddx(&b.g) / m);
            dtg.push(ddt(&a.g, &c.g));
            dxtau.push(ddx(&b.tau));
            src.push(kb * b.displacement[i]);
            dth.push(ddt(&a.h, &c.h));
            dxj.push(ddx(&b.j));
        }
    }
    Ok(ConservationResiduals {
        number: residual(&dtn, &[&dxg]),
        momentum: residual(&dtg, &[&dxtau, &src]),
        energy: residual(&dth, &[&dxj]),
    })
}
